#!/usr/bin/env python3
"""Spread of Maharam heights over time and return rates to a few targets,
for a stationary, an invariant-probability and a dissipative measure."""
import argparse
from pathlib import Path

import numpy as np

from bernshift.catalog import builtin
from bernshift.classify import prefix_measure
from bernshift.maharam import height_traces, recurrence_stats, spread
from bernshift.reporting import dumps, rows_csv

CASES = {"fair": "fair", "inv-k1[prefix]": "inv-k1", "const-half": "const-half", "step-third[prefix]": "step-third"}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/maharam")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, doc = [], {}
    for label, name in CASES.items():
        m = builtin(name)
        if label.endswith("[prefix]"):
            # slow tails are not certifiable per sample; use an exact finite prefix
            m = prefix_measure(m, args.steps + 64)
        h = height_traces(m, min(args.samples, 500), args.steps, args.seed)
        sp = spread(h)
        rec = recurrence_stats(m, [0.0, 0.5, 1.0], args.eps, args.samples, args.steps, args.seed)
        doc[label] = rec.to_dict() | {"spread_final": float(sp[-1])}
        for step in np.unique(np.geomspace(1, args.steps, 20).astype(int)):
            rows.append((label, int(step), float(sp[step - 1])))
        print(f"{label:20s} spread(final)={sp[-1]:.3f} hits={rec.hit_fraction}")
    (out / "spread.csv").write_text(rows_csv(["measure", "step", "spread_q05_q95"], rows))
    (out / "maharam.json").write_text(dumps(doc))


if __name__ == "__main__":
    main()
