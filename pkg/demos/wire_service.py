"""Drive the NDJSON coordinator service over an in-memory stream.

Announces two crossing paths, then streams poses for both robots; the
service answers each pose tick with STOP/PROCEED command lines exactly
as it would over a socket or pipe.

Usage: python demos/wire_service.py
"""

import io
import json

from vtlsim.service import serve


def msg(**kw):
    return json.dumps(kw)


def main():
    lines = [
        msg(type="path", robot="ra",
            waypoints=[[10.0, 25.0], [40.0, 25.0]], etas=[0.0, 18.75]),
        msg(type="path", robot="rb",
            waypoints=[[25.0, 10.0], [25.0, 40.0]], etas=[0.0, 18.75]),
    ]
    # both robots advance toward the crossing; ra is slightly ahead
    for k in range(6):
        t = float(k)
        lines.append(msg(type="pose", robot="ra",
                         x=16.0 + 1.6 * k, y=25.0, heading=0.0, t=t))
        lines.append(msg(type="pose", robot="rb",
                         x=25.0, y=12.0 + 1.6 * k, heading=1.5708, t=t))

    inbound = "\n".join(lines) + "\n"
    out = io.StringIO()
    print(">>> inbound")
    for line in lines:
        print("   ", line)
    serve(io.StringIO(inbound), out)
    print("<<< outbound")
    for line in out.getvalue().splitlines():
        print("   ", line)


if __name__ == "__main__":
    main()
