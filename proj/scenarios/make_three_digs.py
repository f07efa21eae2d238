#!/usr/bin/env python3
"""Writes the open-loop command log for three_digs.yaml.

The machine digs to its left, dumps to its right, then drives 3 m forward;
three times. Each phase drives joints at full rate toward target angles.
"""
import argparse
import json
import math

OMEGA_MAX = {"slew": 0.8, "boom": 0.5, "arm": 0.6, "bucket": 0.8}
TRACK_SPEED = 0.8
DT = 0.01
CHANNELS = ["slew", "boom", "arm", "bucket", "track_left", "track_right", "plow"]

DIG = [
    # (slew, boom, arm, bucket)
    (math.pi / 2, 0.3, -1.2, -0.6),   # reach out over the ground to the left
    (math.pi / 2, 0.3, -2.3, -0.9),   # drag the arm in
    (math.pi / 2, 0.8, -2.3, -1.6),   # curl and lift
    (-math.pi / 2, 0.8, -2.3, -1.6),  # swing right
    (-math.pi / 2, 0.8, -1.0, 0.0),   # open out: dump
    (0.0, 0.0, 0.0, 0.0),             # stow
]


def quantize(t):
    return round(t / DT) * DT


def build(digs=3, drive=3.0, pause=0.3, id_="excavator1"):
    frames = []
    t = 0.0
    q = {"slew": 0.0, "boom": 0.0, "arm": 0.0, "bucket": 0.0}

    def frame(t, **u):
        f = {"t": round(t, 6), "id": id_}
        for c in CHANNELS:
            f[c] = u.get(c, 0.0)
        frames.append(f)

    for k in range(digs):
        for target in DIG:
            events = {}
            for name, goal in zip(OMEGA_MAX, target):
                delta = goal - q[name]
                if abs(delta) < 1e-9:
                    continue
                events[name] = (math.copysign(1.0, delta), quantize(abs(delta) / OMEGA_MAX[name]))
                q[name] = goal
            stops = sorted({d for _, d in events.values()})
            start = t
            frame(start, **{n: u for n, (u, _) in events.items()})
            for s in stops:
                frame(start + s, **{n: u for n, (u, d) in events.items() if d > s})
            t = start + (stops[-1] if stops else 0.0) + pause
        if k + 1 < digs:
            run = quantize(drive / TRACK_SPEED)
            frame(t, track_left=1.0, track_right=1.0)
            frame(t + run, track_left=0.0, track_right=0.0)
            t += run + pause
    return frames, t


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="three_digs_commands.jsonl")
    ap.add_argument("--digs", type=int, default=3)
    args = ap.parse_args()
    frames, end = build(args.digs)
    with open(args.out, "w") as f:
        for fr in frames:
            f.write(json.dumps(fr, separators=(",", ":")) + "\n")
    print(f"{len(frames)} frames, last change at {end:.2f} s")


if __name__ == "__main__":
    main()
