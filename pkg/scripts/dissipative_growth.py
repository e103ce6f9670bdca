#!/usr/bin/env python3
"""Growth of -log rho(n) for the 4/n rule and its 4/sqrt(n) variant, with the Taylor table."""
import argparse
from pathlib import Path

from bernshift.examples import dissipative_growth_report
from bernshift.reporting import dumps, rows_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmax", type=int, default=10_000)
    ap.add_argument("--out", default="results/dissipative")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reps = {v: dissipative_growth_report(v, args.nmax) for v in ("printed", "sqrt")}
    for v, r in reps.items():
        g = r["observed_growth"]
        print(f"{v:8s} regime={g['regime']:11s} r2_lin={g['r2_linear']:.4f} r2_log={g['r2_log']:.4f} "
              f"-log rho(nmax)={g['neg_log_rho_at_nmax']:.4f} acip={r['acip']['verdict']}")
        for f in r["flags"]:
            print("   flag:", f)
    t = reps["printed"]["taylor"]
    (out / "taylor.csv").write_text(rows_csv(list(t[0]), [tuple(row.values()) for row in t]))
    (out / "dissipative.json").write_text(dumps(reps))


if __name__ == "__main__":
    main()
