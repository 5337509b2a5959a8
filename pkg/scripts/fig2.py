"""RZF SE-per-UE CDFs under the three fading variants of the RIS links.

    python scripts/fig2.py --out results/fig2 [--paper-scale] [--workers 4]
"""
from _common import experiment_parser, report, resolve

from ris_mimo.simulation import emit_results, run_experiment

VARIANTS = ["always_los_s1", "always_los_s3", "probabilistic_los"]


def main():
    args = experiment_parser(__doc__).parse_args()
    cfg = resolve(args)
    res = run_experiment(cfg, VARIANTS, ("rzf",), workers=args.workers)
    emit_results(res, args.out)
    report(res, [(v, "rzf") for v in VARIANTS])


if __name__ == "__main__":
    main()
