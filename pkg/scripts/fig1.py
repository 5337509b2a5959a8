"""SE-per-UE CDFs of RIS-assisted versus conventional massive MIMO, MR and RZF.

    python scripts/fig1.py --out results/fig1 [--paper-scale] [--workers 4]
"""
from _common import experiment_parser, report, resolve

from ris_mimo.simulation import emit_results, run_experiment


def main():
    args = experiment_parser(__doc__).parse_args()
    cfg = resolve(args)
    variants = ["always_los_s1", "conventional"]
    res = run_experiment(cfg, variants, ("mr", "rzf"), workers=args.workers)
    emit_results(res, args.out)
    report(res, [(v, c) for c in ("mr", "rzf") for v in variants])
    for c in ("mr", "rzf"):
        for q in (0.1, 0.5):
            ratio = res.quantile("always_los_s1", c, q) / res.quantile("conventional", c, q)
            print(f"{c} RIS/Conv at {q:.1f}: {ratio:.2f}")


if __name__ == "__main__":
    main()
