#!/usr/bin/env python3
"""Scheduled conservative construction: stage table, A_t rates and lower-bound terms
for both tent peaks, plus the uncapped integer schedule."""
import argparse
from pathlib import Path

from bernshift.examples import (
    PRINTED_PEAK,
    STATED_PEAK,
    factorization_batch,
    symbolic_lower_bound_terms,
    symbolic_schedule,
    terms_grow,
    weird_conservative_prefix,
    weird_conservativity_audit,
)
from bernshift.reporting import dumps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tmax", type=int, default=2)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/weird")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {}
    for peak in (PRINTED_PEAK, STATED_PEAK):
        prefix = weird_conservative_prefix(args.tmax, peak=peak, samples=args.samples, seed=args.seed)
        audit = weird_conservativity_audit(prefix, samples=args.samples, seed=args.seed)
        fac = factorization_batch(prefix, 1000, args.seed)
        key = f"peak={peak:g}"
        doc[key] = {"schedule": prefix.schedule.to_dict(), "audit": audit.to_dict(), "factorization": fac}
        (out / f"rates_{key}.csv").write_text(audit.rates_csv())
        for s in prefix.schedule.stages:
            print(f"{key} t={s.t} k={s.k_t} n={s.n_t} m={s.m_t} capped={s.capped}")
        for r in audit.rates:
            print(f"{key} A_{r['t']}: local {r['rate']:.3f} +- {r['stderr']:.3f}, literal {r['rate_literal']:.3f}, target {r['target']}")
        print(f"{key} factorization max deviation {fac['max_deviation']:.2e}")
    stages = symbolic_schedule(3, samples=args.samples, seed=args.seed)
    rows = symbolic_lower_bound_terms(stages)
    doc["symbolic"] = {"stages": [s.__dict__ for s in stages], "terms": rows, "terms_grow": terms_grow(rows)}
    print("symbolic lower-bound terms grow:", terms_grow(rows))
    (out / "weird.json").write_text(dumps(doc))


if __name__ == "__main__":
    main()
