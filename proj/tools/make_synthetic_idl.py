#!/usr/bin/env python3
"""Write a synthetic IDL-style extract: exponential excess lifetimes above 105
observed through one interval-truncation window and one left-truncation,
right-censoring window."""
import argparse
import csv
import datetime as dt
import json
import math
import random

DAYS_PER_YEAR = 365.25


def plus_years(d, years):
    try:
        return d.replace(year=d.year + years)
    except ValueError:  # 29 February
        return d.replace(year=d.year + years, month=3, day=1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=8000)
    ap.add_argument("--sigma", type=float, default=1.4)
    ap.add_argument("--seed", type=int, default=2021)
    ap.add_argument("--csv", required=True)
    ap.add_argument("--frames", required=True)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    c1, c2 = dt.date(2000, 1, 1), dt.date(2015, 12, 31)
    frames = {
        "ITW": {"kind": "interval_truncated", "c1": c1.isoformat(), "c2": c2.isoformat(), "u0": 105},
        "LTW": {"kind": "left_trunc_right_cens", "c1": c1.isoformat(), "c2": c2.isoformat(), "u0": 105},
    }
    rows = []
    first = dt.date(1870, 1, 1)
    span = (dt.date(1910, 12, 31) - first).days
    k = 0
    while len(rows) < args.n:
        birth = first + dt.timedelta(days=rng.randrange(span))
        x105 = plus_years(birth, 105)
        excess = rng.expovariate(1.0 / args.sigma) * DAYS_PER_YEAR
        death = x105 + dt.timedelta(days=math.floor(excess))
        frame = "ITW" if k % 2 == 0 else "LTW"
        k += 1
        if frame == "ITW":
            if not (c1 <= death <= c2):
                continue
            rows.append([f"p{len(rows)}", birth.isoformat(), (death - birth).days, "death", frame, rng.choice("fm")])
        else:
            if x105 >= c2 or death < c1:
                continue
            if death <= c2:
                rows.append([f"p{len(rows)}", birth.isoformat(), (death - birth).days, "death", frame, rng.choice("fm")])
            else:
                rows.append([f"p{len(rows)}", birth.isoformat(), (c2 - birth).days, "alive", frame, rng.choice("fm")])
    with open(args.csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "birth_date", "event_age_days", "event_type", "frame_id", "sex"])
        w.writerows(rows)
    with open(args.frames, "w") as fh:
        json.dump(frames, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
