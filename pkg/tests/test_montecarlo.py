"""Estimation engine: weighting, determinism, parallel equivalence, trend
statistics, and small-scale stationarity behaviour."""

import math

import pytest

from rwrelab.environment import EnvConfig, Environment, TAG_WALK, derive_seed, prf_uniform
from rwrelab.errors import ConfigurationError, DegenerateWeightsError
from rwrelab.montecarlo import (ExperimentConfig, constancy_report,
                                mann_kendall, run_counterexample,
                                run_stationarity, weighted_mean)
from rwrelab.walks import sample_step


def _cfg(**over):
    base = dict(space="tree3", kernel="delayed-srw",
                env=EnvConfig(seed=0, p_open=2 / 3, n_colors=4),
                n_shifts=6, n_replicas=400, seed=123, mode="unimodular",
                cluster_radii=(4,))
    base.update(over)
    return ExperimentConfig(**base)


def test_weighted_mean_unit_weights():
    est = weighted_mean([1.0, 2.0, 3.0, 4.0], [1, 1, 1, 1])
    assert est.estimate == pytest.approx(2.5)
    assert est.ess == pytest.approx(4.0)
    # delta-method SE with unit weights: sqrt(sum (x-mean)^2) / n
    assert est.stderr == pytest.approx(math.sqrt(5.0) / 4.0)


def test_weighted_mean_single_support():
    est = weighted_mean([7.0, 3.0], [0.0, 2.0])
    assert est.estimate == 3.0
    assert est.stderr == 0.0
    assert est.ess == pytest.approx(1.0)


def test_weighted_mean_two_equal():
    assert weighted_mean([0.0, 1.0], [5.0, 5.0]).estimate == pytest.approx(0.5)


def test_weighted_mean_degenerate():
    with pytest.raises(DegenerateWeightsError):
        weighted_mean([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        weighted_mean([1.0], [-1.0])
    with pytest.raises(ValueError):
        weighted_mean([1.0, 2.0], [1.0])


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _cfg(n_shifts=0)
    with pytest.raises(ConfigurationError):
        _cfg(mode="bogus")
    with pytest.raises(ConfigurationError):
        _cfg(space="tree-end3", mode="unimodular").build()
    with pytest.raises(ConfigurationError):
        _cfg(kernel="alili").build()          # alili off the line
    with pytest.raises(ConfigurationError):
        _cfg(env=EnvConfig(seed=0, n_colors=2)).build()  # kernel needs p
    with pytest.raises(ConfigurationError):
        _cfg(representatives=(3,)).build()


def test_config_roundtrip():
    cfg = _cfg(observables=("walker_degree",), representatives=(1,))
    assert ExperimentConfig.from_dict(cfg.as_dict()) == cfg


def test_deterministic_across_runs_and_workers():
    cfg = _cfg(n_replicas=600)
    a = run_stationarity(cfg, workers=1)
    b = run_stationarity(cfg, workers=1)
    c = run_stationarity(cfg, workers=3)
    assert a == b == c


def test_unknown_observable_name_rejected():
    with pytest.raises(ConfigurationError):
        run_stationarity(_cfg(observables=("nope",)))


def test_deterministic_env_series_exactly_constant():
    """p = 1 with no scenery: a fully deterministic environment gives a
    translation-homogeneous chain, so every estimate is exactly constant."""
    cfg = _cfg(env=EnvConfig(seed=0, p_open=1.0), n_replicas=300)
    series = run_stationarity(cfg)
    for name, row in zip(series.observable_names, series.estimates):
        assert all(e.estimate == row[0].estimate for e in row), name
    deg = series.series("walker_degree")
    assert deg[0].estimate == 3.0 and deg[0].stderr == 0.0


def test_delayed_srw_degree_mean_is_binomial_mean():
    cfg = _cfg(n_replicas=4000, n_shifts=8)
    series = run_stationarity(cfg)
    for e in series.series("walker_degree"):
        assert abs(e.estimate - 2.0) < 3 * e.stderr   # E Bin(3, 2/3) = 2


def test_trajectory_sampled_once_per_replica():
    """Common random numbers: replica values across n follow one trajectory
    that is exactly reproducible from the replica's derived seed."""
    cfg = _cfg(n_replicas=1, n_shifts=5,
               observables=("walker_degree",))
    series = run_stationarity(cfg)
    space, ks = cfg.build()
    rseed = derive_seed(cfg.seed, 0)
    env = Environment(EnvConfig(seed=rseed, p_open=2 / 3, n_colors=4), space)
    traj = [space.origin]
    for t in range(cfg.n_shifts + 1):
        u = prf_uniform(rseed, TAG_WALK, t.to_bytes(4, "little"))
        traj.append(sample_step(ks, env, traj[-1], u))
    row = series.series("walker_degree")
    for n in range(cfg.n_shifts + 1):
        want = sum(1 for u in space.neighbors(traj[n])
                   if env.edge_open(traj[n], u))
        assert row[n].estimate == float(want)


def test_representative_mixture_vs_single_on_subdivided_line():
    base = dict(space="subdivided-line", kernel="delayed-srw",
                env=EnvConfig(seed=0, p_open=0.7, n_colors=2),
                n_shifts=8, n_replicas=4000, seed=77, mode="unimodular",
                cluster_radii=(4,))
    mixture = run_stationarity(ExperimentConfig(**base))
    orbit_ok = next(c for c in constancy_report(mixture)
                    if c.observable == "walker_orbit")
    assert orbit_ok.passed
    control = run_stationarity(ExperimentConfig(**base, representatives=(1,)))
    orbit_bad = next(c for c in constancy_report(control)
                     if c.observable == "walker_orbit")
    assert not orbit_bad.passed
    assert orbit_bad.worst_gap_sigmas > 10


def test_counterexample_pair_small():
    cfg = ExperimentConfig(
        space="tree-end3", kernel="srw-clusters",
        env=EnvConfig(seed=0, p_open=2 / 3, n_colors=2),
        n_shifts=16, n_replicas=6000, seed=11, mode="general",
        cluster_radii=(6,))
    si, sii = run_counterexample(cfg)
    row = si.series("event_A(R=6)")
    assert row[0].estimate > 5 * row[0].stderr
    mk = mann_kendall([e.estimate for e in row])
    assert mk.z < -3.0
    assert si.meta["kernel"] == "srw-clusters"
    assert sii.meta["kernel"] == "m-weighted"
    assert "event_A(R=6)" in sii.observable_names


def test_counterexample_requires_tree_end():
    with pytest.raises(ConfigurationError):
        run_counterexample(_cfg())


def test_shift_series_records_schema():
    series = run_stationarity(_cfg(n_replicas=64, n_shifts=2))
    recs = series.to_records()
    assert len(recs) == len(series.observable_names) * 3
    keys = ["observable", "n", "estimate", "stderr", "ess", "M", "N", "R",
            "seed", "space", "kernel", "mode"]
    assert list(recs[0].keys()) == keys
    assert recs[0]["M"] == 64 and recs[0]["R"] == [4]


def test_mann_kendall_sanity():
    down = mann_kendall([10.0, 9.0, 8.5, 8.0, 7.2, 6.0, 5.5, 5.0, 4.1, 3.0,
                         2.5, 2.0])
    assert down.z < -3
    up = mann_kendall(list(range(12)))
    assert up.z > 3
    flat = mann_kendall([1.0] * 12)
    assert flat.z == 0.0
    import random
    rng = random.Random(4)
    noise = mann_kendall([rng.random() for _ in range(12)])
    assert abs(noise.z) < 3


def test_constancy_handles_zero_se():
    series = run_stationarity(_cfg(env=EnvConfig(seed=0, p_open=1.0),
                                   n_replicas=50))
    assert all(c.passed for c in constancy_report(series))
