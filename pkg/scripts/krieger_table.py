#!/usr/bin/env python3
"""Type guesses for every binary builtin measure, as a table."""
import argparse
from pathlib import Path

from bernshift.catalog import builtin, builtin_names
from bernshift.classify import Budgets, krieger_type_report
from bernshift.reporting import dumps, rows_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hopf-samples", type=int, default=100)
    ap.add_argument("--hopf-N", type=int, default=500)
    ap.add_argument("--out", default="results/krieger")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    b = Budgets(hopf_samples=args.hopf_samples, hopf_N=args.hopf_N, seed=args.seed)
    rows, full = [], {}
    for name in builtin_names():
        m = builtin(name)
        if not m.is_binary:
            continue
        r = krieger_type_report(m, b)
        rows.append((name, r.type_guess, r.certified, r.acip["verdict"], r.dissipativity["direction"]))
        full[name] = r.to_dict()
        print(f"{name:14s} {r.type_guess:12s} certified={r.certified}")
    (out / "krieger.csv").write_text(rows_csv(["measure", "type_guess", "certified", "acip", "dissipativity"], rows))
    (out / "krieger.json").write_text(dumps(full))


if __name__ == "__main__":
    main()
