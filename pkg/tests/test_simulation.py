import math

import numpy as np
import pytest

from ris_mimo.channel import sample_blocks
from ris_mimo.cli import main
from ris_mimo.config import ScenarioConfig, TrialConfig, dump_config
from ris_mimo.scenario import ArrayGeometry, LinkStatistics, Scenario, build_scenario, steering_vector
from ris_mimo.simulation import (
    QUANTILES,
    ExperimentResult,
    emit_results,
    read_se_samples,
    run_experiment,
    run_trial,
    simulate_scenario,
)

TINY = dict(M=6, N=16, K=3, R=2, trials=TrialConfig(drops=2, blocks=24, block_chunk=10))


def test_perfect_csi_deterministic_los_channel():
    cfg = ScenarioConfig(K=1, M=4, fading_variant="conventional", perfect_csi=True,
                         trials=TrialConfig(drops=1, blocks=7), tau_c=200)
    arr = ArrayGeometry.ula(4)
    h = 3e-6 * steering_vector(arr, 0.3, 0.0)
    link = LinkStatistics(h[None], np.zeros((4, 4), complex), True, 1.0)
    sc = Scenario(cfg, 0, np.zeros((1, 3)), arr, [], [link])
    res = simulate_scenario(sc)
    expected = (200 - 20) / 200 * math.log2(1 + cfg.p_max * np.vdot(h, h).real / cfg.noise_power)
    for c in ("mr", "rzf"):
        assert res.se[c].se[0] == pytest.approx(expected, rel=1e-10)


def test_conventional_uses_long_pilots():
    cfg = ScenarioConfig(**TINY, fading_variant="conventional")
    res = run_trial(cfg, 0)
    assert res.se["rzf"].prelog == pytest.approx((cfg.tau_c - 20 * cfg.K) / cfg.tau_c)


def test_trial_outputs_are_balanced():
    cfg = ScenarioConfig(**TINY)
    res = run_trial(cfg, 1)
    assert res.se["rzf"].prelog == pytest.approx((cfg.tau_c - 5 * cfg.K) / cfg.tau_c)
    for c in ("mr", "rzf"):
        sinr = res.se[c].sinr
        assert np.ptp(sinr) <= cfg.power_epsilon
        assert np.all(res.se[c].se >= 0)
        assert res.power[c].p.max() == pytest.approx(cfg.p_max)


def test_variants_share_direct_draws():
    a = ScenarioConfig(**TINY)
    sa = build_scenario(a, 0)
    sb = build_scenario(a.replace(fading_variant="conventional"), 0)
    ha, _ = sample_blocks(sa, a.seed, 0, range(3))
    hb, _ = sample_blocks(sb, a.seed, 0, range(3))
    np.testing.assert_array_equal(ha.h, hb.h)


def test_power_rounds_and_ls_and_perfect_csi_run():
    for extra in (dict(power_rounds=1), dict(estimator="ls"), dict(perfect_csi=True)):
        res = run_trial(ScenarioConfig(**TINY, **extra), 0)
        assert np.all(np.isfinite(res.se["rzf"].se))


def test_pool_size_and_order():
    cfg = ScenarioConfig(**TINY)
    res = run_experiment(cfg, ["always_los_s1", "conventional"], workers=1)
    assert len(res.rows) == 2 * 2 * 2 * cfg.K
    assert len(res.samples("conventional", "rzf")) == 2 * cfg.K
    table = res.cdf_table()
    assert len(table) == 2 * 2 * len(QUANTILES)
    for v in res.variants:
        for c in res.combiners:
            vals = [x for vv, cc, _, x in table if vv == v and cc == c]
            assert np.all(np.diff(vals) >= 0)


def test_worker_count_does_not_change_output(tmp_path):
    cfg = ScenarioConfig(**TINY)
    one = emit_results(run_experiment(cfg, ["always_los_s1", "conventional"], workers=1), tmp_path / "a")
    two = emit_results(run_experiment(cfg, ["always_los_s1", "conventional"], workers=2), tmp_path / "b")
    assert one["se_samples.csv"].read_bytes() == two["se_samples.csv"].read_bytes()


def test_emit_round_trip(tmp_path):
    cfg = ScenarioConfig(**TINY)
    rows = [(0, 0, "rzf", "always_los_s1", 1.0 / 3.0), (0, 0, "rzf", "conventional", math.pi)]
    paths = emit_results(ExperimentResult(rows, cfg, ["always_los_s1", "conventional"], ["rzf"]), tmp_path)
    back = read_se_samples(paths["se_samples.csv"])
    assert back == rows
    assert {r[3] for r in back} == {"always_los_s1", "conventional"}
    assert paths["config_echo.yaml"].read_text() == dump_config(cfg)


def test_empty_result_has_header_only(tmp_path):
    paths = emit_results(ExperimentResult([], ScenarioConfig(**TINY), [], []), tmp_path)
    assert paths["se_samples.csv"].read_text() == "drop,ue,combiner,variant,se\n"
    assert paths["cdf.csv"].read_text() == "variant,combiner,quantile,se\n"


def test_emit_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match=str(blocker)):
        emit_results(ExperimentResult([], ScenarioConfig(**TINY), [], []), blocker / "sub")


# -- command line -------------------------------------------------------------
@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("M: 6\nN: 16\nK: 3\nR: 2\ntrials: {drops: 1, blocks: 8}\n")
    return path


def test_cli_success(cfg_file, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg_file), "--out", str(out), "--seed", "4",
               "--variant", "always_los_s1", "--variant", "conventional", "--combiner", "rzf"])
    assert rc == 0
    rows = read_se_samples(out / "se_samples.csv")
    assert len(rows) == 2 * 3 and {r[2] for r in rows} == {"rzf"}
    assert "seed: 4" in (out / "config_echo.yaml").read_text()
    assert (out / "cdf.csv").exists() and (out / "metadata.yaml").exists()


def test_cli_errors(cfg_file, tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) != 0
    assert "missing.yaml" in capsys.readouterr().err
    assert main(["run", "--config", str(cfg_file), "--set", "R=5"]) != 0
    assert main(["run", "--config", str(cfg_file), "--variant", "bogus"]) != 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("M: [1, 2\n")
    assert main(["run", "--config", str(bad)]) != 0
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", "--config", str(cfg_file), "--out", str(blocker / "x")]) != 0
