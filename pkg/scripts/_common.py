import argparse

from ris_mimo.config import ScenarioConfig, TrialConfig, load_config


def experiment_parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", help="YAML config (default: desk-scale defaults)")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--drops", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    return p


def resolve(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.paper_scale:
        cfg = cfg.replace(M=100, N=256, K=10, R=16, tau_c=10_000, ris_shape=None,
                          trials=TrialConfig(cfg.trials.drops, cfg.trials.blocks, 10))
    trials = cfg.trials
    cfg = cfg.replace(trials=TrialConfig(args.drops or trials.drops, args.blocks or trials.blocks,
                                         trials.block_chunk))
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def report(result, pairs, quantiles=(0.1, 0.5, 0.9)):
    head = "".join(f"{q:>9.2f}" for q in quantiles)
    print(f"{'variant':<20}{'comb':<6}{head}")
    for v, c in pairs:
        vals = "".join(f"{x:9.3f}" for x in result.quantile(v, c, list(quantiles)))
        print(f"{v:<20}{c:<6}{vals}")
