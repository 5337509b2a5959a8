"""End-to-end Monte Carlo experiments.

One trial is one UE drop.  Every coherence block runs
sample -> pilots -> estimate -> phases -> combine -> accumulate, and after
the last block the accumulated moments go through power control and the SE
bound.  Blocks are processed in vectorized chunks; each block draws from its
own (seed, drop, block) streams, so the channel draws do not depend on the
chunk size and the output is bit-identical for any worker count.  Changing
the chunk size only reorders floating-point sums.
"""
from __future__ import annotations

import csv
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from .channel import ChannelRealization, sample_blocks
from .config import FadingVariant, ScenarioConfig, config_to_dict, dump_config
from .phase import select_phases
from .pilots import (
    ChannelEstimates,
    Estimator,
    build_pilot_schedule,
    cascaded_statistic,
    despread_all,
    direct_statistic,
    simulate_pilot_reception,
)
from .power import PowerAllocation, maxmin_fixed_point
from .receiver import MomentAccumulator, Moments, SEResult, finalize_se, mr_combiner, rzf_combiner
from .scenario import Scenario, build_scenario

COMBINERS = ("mr", "rzf")
QUANTILES = np.round(np.arange(1, 100) / 100, 2)


@dataclass
class TrialResult:
    drop: int
    variant: str
    se: dict[str, SEResult]
    moments: dict[str, Moments]
    power: dict[str, PowerAllocation]


def _ris_phases(scenario: Scenario, est: ChannelEstimates) -> np.ndarray:
    """Phase configuration (T, L, N): RIS l follows its assigned UE's estimates."""
    T = est.h_hat.shape[0]
    L, N = scenario.L, scenario.config.N
    theta = np.ones((T, L, N), dtype=complex)
    for j, l in enumerate(scenario.assignment.ris_of_ue):
        if l is not None:
            theta[:, l] = select_phases(est.h_hat[:, j], est.H_hat[:, j, l])
    return theta


def _effective_estimate(est: ChannelEstimates, theta: np.ndarray) -> np.ndarray:
    if est.H_hat.shape[-3] == 0:
        return est.h_hat
    return est.h_hat + np.einsum("tklmn,tln->tkm", est.H_hat, theta)


class DropPipeline:
    """Per-drop state shared by all chunks: scenario, pilots and estimator matrices."""

    def __init__(self, scenario: Scenario):
        cfg = scenario.config
        self.scenario = scenario
        self.config = cfg
        self.sigma2 = cfg.noise_power
        self.schedule = build_pilot_schedule(cfg.K, scenario.L, cfg.R, cfg.pilot_intervals)
        self.estimator = None
        if not cfg.perfect_csi:
            self.estimator = Estimator(scenario, self.schedule, cfg.eta, self.sigma2, cfg.estimator)

    def estimates(self, ch: ChannelRealization, noise_rngs) -> ChannelEstimates:
        if self.config.perfect_csi:
            return ChannelEstimates(ch.h, ch.H)
        Y = simulate_pilot_reception(ch, self.schedule, self.scenario.subsurfaces, self.config.eta,
                                     self.sigma2, noise_rngs)
        z = despread_all(Y, self.schedule.ue_pilots)
        zc = cascaded_statistic(z, self.schedule.ris_phases) if self.scenario.L else None
        return self.estimator.estimate(direct_statistic(z), zc)

    def chunk(self, blocks) -> tuple[np.ndarray, np.ndarray]:
        """Estimated and true effective channels (T, K, M) for a run of blocks."""
        cfg = self.config
        ch, noise_rngs = sample_blocks(self.scenario, cfg.seed, self.scenario.drop, blocks)
        est = self.estimates(ch, noise_rngs)
        if self.scenario.L == 0:
            return est.h_hat, ch.h
        theta = _ris_phases(self.scenario, est)
        return _effective_estimate(est, theta), ch.effective(theta)

    def accumulate(self, combiners, rzf_powers: np.ndarray) -> dict[str, MomentAccumulator]:
        cfg = self.config
        accs = {c: MomentAccumulator(cfg.K) for c in combiners}
        step = cfg.trials.block_chunk
        for start in range(0, cfg.trials.blocks, step):
            b_hat, b = self.chunk(range(start, min(start + step, cfg.trials.blocks)))
            for c in combiners:
                v = mr_combiner(b_hat) if c == "mr" else rzf_combiner(b_hat, rzf_powers, self.sigma2)
                accs[c].add(v, b)
        return accs


def simulate_scenario(scenario: Scenario, combiners=COMBINERS) -> TrialResult:
    """Run every block of one drop and finalize SE under max-min power control."""
    cfg = scenario.config
    for c in combiners:
        if c not in COMBINERS:
            raise ValueError(f"unknown combiner {c!r}")
    pipe = DropPipeline(scenario)
    p_init = np.full(cfg.K, cfg.p_max)
    accs = pipe.accumulate(combiners, p_init)
    se, moments, power = {}, {}, {}
    for c in combiners:
        m = accs[c].finalize()
        alloc = maxmin_fixed_point(m, pipe.sigma2, cfg.p_max, cfg.power_epsilon, cfg.power_max_iter)
        if c == "rzf":
            # optional outer loop: rebuild RZF with the optimized powers and re-balance
            for _ in range(cfg.power_rounds):
                m = pipe.accumulate(("rzf",), alloc.p)["rzf"].finalize()
                alloc = maxmin_fixed_point(m, pipe.sigma2, cfg.p_max, cfg.power_epsilon,
                                           cfg.power_max_iter)
        moments[c] = m
        power[c] = alloc
        se[c] = finalize_se(m, alloc.p, pipe.sigma2, cfg.tau_c, cfg.tau_p)
    return TrialResult(scenario.drop, cfg.fading_variant.value, se, moments, power)


def run_trial(config: ScenarioConfig, drop: int, combiners=COMBINERS) -> TrialResult:
    return simulate_scenario(build_scenario(config, drop), combiners)


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------
@dataclass
class ExperimentResult:
    rows: list[tuple[int, int, str, str, float]]  # (drop, ue, combiner, variant, se)
    config: ScenarioConfig
    variants: list[str]
    combiners: list[str]
    metadata: dict = field(default_factory=dict)

    def samples(self, variant: str, combiner: str) -> np.ndarray:
        return np.array([r[4] for r in self.rows if r[3] == variant and r[2] == combiner])

    def quantile(self, variant: str, combiner: str, q) -> np.ndarray:
        return np.quantile(self.samples(variant, combiner), q, method="linear")

    def cdf_table(self) -> list[tuple[str, str, float, float]]:
        table = []
        for v in self.variants:
            for c in self.combiners:
                s = self.samples(v, c)
                if s.size == 0:
                    continue
                for q, x in zip(QUANTILES, np.quantile(s, QUANTILES, method="linear")):
                    table.append((v, c, float(q), float(x)))
        return table


def _task(config: ScenarioConfig, variant: str, drop: int, combiners: tuple[str, ...]):
    with threadpool_limits(limits=1):
        cfg = config.replace(fading_variant=FadingVariant(variant))
        res = run_trial(cfg, drop, combiners)
    return [(drop, k, c, variant, float(res.se[c].se[k]))
            for c in combiners for k in range(cfg.K)]


def _task_star(args):
    return _task(*args)


def run_experiment(config: ScenarioConfig, variants=None, combiners=COMBINERS,
                   workers: int = 1) -> ExperimentResult:
    """Independent drops for each variant; rows ordered by (variant, drop, combiner, ue).

    All variants reuse the same drop indices, hence the same UE positions and
    direct-channel draws, so comparisons between them are paired.
    """
    variants = [FadingVariant(v).value for v in (variants or [config.fading_variant])]
    combiners = tuple(combiners)
    for c in combiners:
        if c not in COMBINERS:
            raise ValueError(f"unknown combiner {c!r}")
    for v in variants:  # fail fast on inconsistent geometry
        config.replace(fading_variant=FadingVariant(v))
    tasks = [(config, v, d, combiners) for v in variants for d in range(config.trials.drops)]
    start = time.time()
    if workers <= 1:
        chunks = [_task_star(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_task_star, tasks))
    rows = [r for chunk in chunks for r in chunk]
    meta = {
        "seed": config.seed,
        "drops": config.trials.drops,
        "blocks": config.trials.blocks,
        "block_chunk": config.trials.block_chunk,
        "workers": workers,
        "variants": variants,
        "combiners": list(combiners),
        "wall_clock_s": round(time.time() - start, 3),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    return ExperimentResult(rows, config, variants, list(combiners), meta)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------
SE_HEADER = ("drop", "ue", "combiner", "variant", "se")
CDF_HEADER = ("variant", "combiner", "quantile", "se")


def emit_results(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    """Write ``se_samples.csv``, ``cdf.csv``, ``config_echo.yaml`` and ``metadata.yaml``."""
    out = Path(out_dir)
    paths = {name: out / name for name in
             ("se_samples.csv", "cdf.csv", "config_echo.yaml", "metadata.yaml")}
    try:
        out.mkdir(parents=True, exist_ok=True)
        with paths["se_samples.csv"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SE_HEADER)
            for drop, ue, comb, var, se in result.rows:
                w.writerow((drop, ue, comb, var, repr(float(se))))
        with paths["cdf.csv"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CDF_HEADER)
            for var, comb, q, se in result.cdf_table():
                w.writerow((var, comb, f"{q:.2f}", repr(se)))
        paths["config_echo.yaml"].write_text(dump_config(result.config))
        paths["metadata.yaml"].write_text(yaml.safe_dump(result.metadata, sort_keys=False))
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return paths


def read_se_samples(path: str | Path) -> list[tuple[int, int, str, str, float]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [(int(d), int(u), c, v, float(s)) for d, u, c, v, s in reader]


def result_from_rows(rows, config: ScenarioConfig) -> ExperimentResult:
    variants = list(dict.fromkeys(r[3] for r in rows))
    combiners = list(dict.fromkeys(r[2] for r in rows))
    return ExperimentResult(list(rows), config, variants, combiners, {"config": config_to_dict(config)})
