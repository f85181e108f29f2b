"""Newline-delimited JSON binding for the coordinator, so it can front
real robots over a byte stream.

Inbound, one object per line:
    {"type": "path", "robot": <id>, "waypoints": [[x, y], ...], "etas": [...]}
    {"type": "pose", "robot": <id>, "x": .., "y": .., "heading": .., "t": ..}
Outbound:
    {"type": "cmd", "robot": <id>, "verdict": "STOP"|"PROCEED",
     "zone": <id>, "t": ..}

Each pose message updates the snapshot and runs one coordinator tick at
that pose's timestamp; command batches are idempotent per tick.
"""

from __future__ import annotations

import json

from .coordinator import Command, Coordinator
from .geometry import Pose2
from .global_planner import PlannedPath


class ProtocolError(ValueError):
    pass


def encode_command(cmd: Command) -> str:
    return json.dumps({"type": "cmd", "robot": cmd.robot_id,
                       "verdict": cmd.verdict, "zone": cmd.zone_id,
                       "t": cmd.issued_at}, separators=(",", ":"))


def parse_message(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"bad JSON: {exc}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError("message must be an object with a 'type' field")
    return msg


class WireCoordinator:
    """Feeds a Coordinator from a message stream, one line at a time."""

    def __init__(self, coordinator: Coordinator = None):
        self.coordinator = coordinator or Coordinator()
        self.paths = {}
        self.poses = {}

    def handle_line(self, line: str):
        """Apply one inbound message; returns outbound cmd lines (only
        pose messages trigger a tick)."""
        msg = parse_message(line)
        kind = msg["type"]
        if kind == "path":
            wps = msg["waypoints"]
            etas = msg["etas"]
            self.paths[str(msg["robot"])] = PlannedPath(
                str(msg["robot"]), wps, etas)
            return []
        if kind == "pose":
            rid = str(msg["robot"])
            now = float(msg["t"])
            self.poses[rid] = (Pose2(float(msg["x"]), float(msg["y"]),
                                     float(msg.get("heading", 0.0))), now)
            if self.coordinator.mode == "dynamic" and not all(
                    r in self.paths for r in self.poses):
                raise ProtocolError(f"pose for {rid} before its path")
            cmds = self.coordinator.tick(self.poses, self.paths, now)
            return [encode_command(c) for c in cmds]
        raise ProtocolError(f"unknown message type {kind!r}")


def serve(reader, writer, coordinator: Coordinator = None):
    """Blocking loop over text streams: read inbound lines, write command
    lines. Returns when the reader is exhausted."""
    wire = WireCoordinator(coordinator)
    for line in reader:
        line = line.strip()
        if not line:
            continue
        for out in wire.handle_line(line):
            writer.write(out + "\n")
    writer.flush()
