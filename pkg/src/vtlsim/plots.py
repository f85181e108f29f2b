"""Self-contained SVG output: metric curves with CI bands, and replay
frames rendered from trace files."""

from __future__ import annotations

import json

MODE_COLORS = {"hybrid": "#1f77b4", "decentralized": "#d62728"}

_METRICS = {
    "success": ("success_mean", "success_ci", "success rate"),
    "speed": ("speed_mean", "speed_ci", "avg speed ((units/step) x 100)"),
    "replans": ("replans_mean", "replans_ci", "replans per run"),
}


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def plot_metric(rows, metric: str, out_path: str):
    """Mode-colored polylines with shaded 95% CI bands over robot count."""
    mean_f, ci_f, label = _METRICS[metric]
    by_mode = {}
    for r in sorted(rows, key=lambda r: (r.mode, r.n_robots)):
        by_mode.setdefault(r.mode, []).append(r)

    width, height = 640, 420
    ml, mr, mt, mb = 60, 20, 30, 50
    xs_all = [r.n_robots for r in rows]
    lo = min(getattr(r, mean_f) - getattr(r, ci_f) for r in rows)
    hi = max(getattr(r, mean_f) + getattr(r, ci_f) for r in rows)
    if hi == lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    lo -= pad
    hi += pad
    x0, x1 = min(xs_all), max(xs_all)
    if x1 == x0:
        x1 = x0 + 1

    def px(n):
        return ml + (n - x0) / (x1 - x0) * (width - ml - mr)

    def py(v):
        return height - mb - (v - lo) / (hi - lo) * (height - mt - mb)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    # axes and ticks
    parts.append(f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" '
                 f'y2="{height - mb}" stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" '
                 f'stroke="black"/>')
    for n in sorted(set(xs_all)):
        parts.append(f'<line x1="{px(n):.1f}" y1="{height - mb}" '
                     f'x2="{px(n):.1f}" y2="{height - mb + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(n):.1f}" y="{height - mb + 18}" '
                     f'font-size="11" text-anchor="middle">{n}</text>')
    for v in _ticks(lo, hi):
        parts.append(f'<line x1="{ml - 5}" y1="{py(v):.1f}" x2="{ml}" '
                     f'y2="{py(v):.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{py(v) + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{v:.2f}</text>')
    parts.append(f'<text x="{(ml + width - mr) / 2}" y="{height - 12}" '
                 f'font-size="12" text-anchor="middle">number of robots</text>')
    parts.append(f'<text x="16" y="{(mt + height - mb) / 2}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 16 '
                 f'{(mt + height - mb) / 2})">{label}</text>')

    for k, (mode, mrows) in enumerate(sorted(by_mode.items())):
        color = MODE_COLORS.get(mode, "#555555")
        upper = [(px(r.n_robots), py(getattr(r, mean_f) + getattr(r, ci_f)))
                 for r in mrows]
        lower = [(px(r.n_robots), py(getattr(r, mean_f) - getattr(r, ci_f)))
                 for r in reversed(mrows)]
        band = " ".join(f"{x:.1f},{y:.1f}" for x, y in upper + lower)
        parts.append(f'<polygon points="{band}" fill="{color}" '
                     f'fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{px(r.n_robots):.1f},{py(getattr(r, mean_f)):.1f}"
                        for r in mrows)
        parts.append(f'<polyline points="{line}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        ly = mt + 16 + 16 * k
        parts.append(f'<line x1="{width - mr - 130}" y1="{ly}" '
                     f'x2="{width - mr - 100}" y2="{ly}" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{width - mr - 94}" y="{ly + 4}" '
                     f'font-size="12">{mode}</text>')
    parts.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return out_path


def render_frame(record, paths, width, height, pillars, out_path,
                 scale: float = 10.0):
    """One replay frame: pillars black, global paths dotted, zones green
    when empty and red when occupied, robots as circles with a heading
    tick."""
    w, h = width * scale, height * scale
    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
              "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

    def sx(x):
        return x * scale

    def sy(y):
        return h - y * scale

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" '
             f'height="{h:.0f}" viewBox="0 0 {w:.0f} {h:.0f}">',
             f'<rect width="{w:.0f}" height="{h:.0f}" fill="white" '
             f'stroke="black"/>']
    for z in record.get("zones", []):
        x0, y0, x1, y1 = z["bbox"]
        fill = "#d62728" if z["occupied"] else "#2ca02c"
        parts.append(f'<rect x="{sx(x0):.1f}" y="{sy(y1):.1f}" '
                     f'width="{sx(x1 - x0):.1f}" height="{sx(y1 - y0):.1f}" '
                     f'fill="{fill}" fill-opacity="0.35" stroke="{fill}"/>')
    for cx, cy, r in pillars:
        parts.append(f'<circle cx="{sx(cx):.1f}" cy="{sy(cy):.1f}" '
                     f'r="{r * scale:.1f}" fill="black"/>')
    robots = record["robots"]
    for k, rob in enumerate(robots):
        color = colors[k % len(colors)]
        wps = paths.get(rob["id"])
        if wps and len(wps) > 1:
            pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in wps)
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5" '
                         f'stroke-dasharray="4,4"/>')
    import math
    for k, rob in enumerate(robots):
        color = colors[k % len(colors)]
        x, y, th = rob["x"], rob["y"], rob["heading"]
        parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" '
                     f'r="{1.5 * scale:.1f}" fill="{color}" '
                     f'fill-opacity="0.9"/>')
        hx = x + 1.5 * math.cos(th)
        hy = y + 1.5 * math.sin(th)
        parts.append(f'<line x1="{sx(x):.1f}" y1="{sy(y):.1f}" '
                     f'x2="{sx(hx):.1f}" y2="{sy(hy):.1f}" stroke="white" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{sx(x):.1f}" y="{sy(y) - 1.8 * scale:.1f}" '
                     f'font-size="11" text-anchor="middle">{rob["id"]} '
                     f'{rob["status"]}</text>')
    parts.append(f'<text x="8" y="16" font-size="13">t = {record["t"]:.1f} s'
                 f'</text>')
    parts.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return out_path


def replay_trace(trace_path: str, out_dir: str, width=50.0, height=50.0,
                 pillars=None, every: int = 10):
    """Render every Nth trace record to an SVG frame in out_dir."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    if pillars is None:
        from .world import build_world
        pillars = [(p.center.x, p.center.y, p.radius)
                   for p in build_world().pillars]
    paths = {}
    frames = []
    with open(trace_path) as fh:
        for idx, line in enumerate(fh):
            record = json.loads(line)
            for ann in record.get("paths", []):
                paths[ann["robot"]] = ann["waypoints"]
            if idx % every == 0:
                out = f"{out_dir}/frame_{idx:05d}.svg"
                render_frame(record, paths, width, height, pillars, out)
                frames.append(out)
    return frames
