"""Self-normalized estimation of shifted observable means under the biased
environment-and-walk measure.

Each replica draws an independent environment (child seed), picks a start
among the orbit representatives, simulates one trajectory, and evaluates
every observable at every shift time n along that single trajectory
(common random numbers across n).  The replica weight is nu(start) times
the representative weighting of the configured mode:

* ``unimodular`` -- representatives are mixed with weights 1/m_i
  (quasi-transitive unimodular setting);
* ``general`` -- representatives are mixed unweighted (the non-unimodular
  setting, where m sits inside the stationarity hypothesis instead).

Estimates are self-normalized ratios, so nu never needs to be normalized;
standard errors use the delta method.  Results are a deterministic function
of (config, seed) regardless of worker count or scheduling.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .environment import (TAG_ORBIT, TAG_WALK, EnvConfig, Environment,
                          derive_seed, prf_u64, prf_uniform)
from .errors import ConfigurationError, DegenerateWeightsError
from .observables import EvalContext, builtin_catalog, check_applicable
from .space import make_space
from .walks import KernelSpec, nu

MODES = ("unimodular", "general")


@dataclass(frozen=True)
class ExperimentConfig:
    space: str
    kernel: str
    env: EnvConfig
    n_shifts: int
    n_replicas: int
    seed: int
    mode: str
    radius: int = 1
    horizon: int = 1
    cluster_radii: tuple = (12,)
    observables: Optional[tuple] = None      # names; None = full catalog
    representatives: Optional[tuple] = None  # 1-based orbit indices; None = all
    tol: float = 1e-12

    def __post_init__(self):
        if self.n_shifts < 1:
            raise ConfigurationError(f"n_shifts must be >= 1, got {self.n_shifts}")
        if self.n_replicas < 1:
            raise ConfigurationError(f"n_replicas must be >= 1, got {self.n_replicas}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")

    def build(self):
        """Resolve and cross-validate: returns (space, kernel spec)."""
        space = make_space(self.space)
        ks = KernelSpec(self.kernel, space)
        if not space.unimodular and self.mode == "unimodular":
            raise ConfigurationError(
                f"space {self.space!r} is not unimodular; its runs must use "
                f"mode 'general' (got mode {self.mode!r})")
        if ks.requires_percolation() and not self.env.percolation_on:
            raise ConfigurationError(
                f"kernel {self.kernel!r} requires percolation marks: set p")
        if ks.requires_site_params() and not self.env.site_params_on:
            raise ConfigurationError(
                f"kernel {self.kernel!r} requires site parameters: set a, b")
        if self.representatives is not None:
            bad = [i for i in self.representatives
                   if not 1 <= i <= space.n_orbits]
            if bad or not self.representatives:
                raise ConfigurationError(
                    f"representatives must be a nonempty subset of "
                    f"1..{space.n_orbits}, got {self.representatives}")
        return space, ks

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["env"] = self.env.as_dict()
        d["cluster_radii"] = list(self.cluster_radii)
        d["observables"] = list(self.observables) if self.observables else None
        d["representatives"] = (list(self.representatives)
                                if self.representatives else None)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["env"] = EnvConfig.from_dict(d["env"])
        d["cluster_radii"] = tuple(d.get("cluster_radii") or (12,))
        if d.get("observables"):
            d["observables"] = tuple(d["observables"])
        if d.get("representatives"):
            d["representatives"] = tuple(d["representatives"])
        return cls(**d)


@dataclass(frozen=True)
class WeightedEstimate:
    estimate: float
    stderr: float
    ess: float
    weight_sum: float


def weighted_mean(values, weights) -> WeightedEstimate:
    """Self-normalized ratio estimator with delta-method standard error."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError("values and weights must have equal length")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    wsum = float(np.sum(weights))
    if wsum == 0.0:
        raise DegenerateWeightsError("all importance weights are zero")
    est = float(np.sum(weights * values) / wsum)
    resid = values - est
    se = float(np.sqrt(np.sum((weights * resid) ** 2)) / wsum)
    ess = float(wsum ** 2 / np.sum(weights ** 2))
    return WeightedEstimate(est, se, ess, wsum)


@dataclass(frozen=True)
class ShiftSeries:
    """Per-shift weighted estimates for each observable of one run."""

    observable_names: tuple
    estimates: tuple          # estimates[i][n] -> WeightedEstimate
    meta: dict

    def series(self, name) -> tuple:
        return self.estimates[self.observable_names.index(name)]

    def to_records(self):
        recs = []
        for name, row in zip(self.observable_names, self.estimates):
            for n, e in enumerate(row):
                recs.append({
                    "observable": name,
                    "n": n,
                    "estimate": e.estimate,
                    "stderr": e.stderr,
                    "ess": e.ess,
                    "M": self.meta["M"],
                    "N": self.meta["N"],
                    "R": self.meta["R"],
                    "seed": self.meta["seed"],
                    "space": self.meta["space"],
                    "kernel": self.meta["kernel"],
                    "mode": self.meta["mode"],
                })
        return recs


def _resolve_observables(cfg, space, ks, observables):
    if observables is None:
        catalog = builtin_catalog(space, ks, cfg.env, cfg.radius, cfg.horizon,
                                  cfg.cluster_radii)
        if cfg.observables is None:
            observables = catalog
        else:
            by_name = {o.name: o for o in catalog}
            missing = [n for n in cfg.observables if n not in by_name]
            if missing:
                raise ConfigurationError(
                    f"unknown observable names {missing}; catalog has "
                    f"{sorted(by_name)}")
            observables = tuple(by_name[n] for n in cfg.observables)
    for o in observables:
        check_applicable(o, space, cfg.env)
    return tuple(observables)


def _replica_batch(cfg: ExperimentConfig, observables, start: int, stop: int):
    """Simulate replicas [start, stop); pure function of (cfg, indices)."""
    space, ks = cfg.build()
    reps = space.orbit_representatives
    if cfg.representatives is not None:
        reps = tuple(reps[i - 1] for i in cfg.representatives)
    if cfg.mode == "unimodular":
        origin = space.origin
        factors = tuple(1.0 / float(space.m_rel(origin, o)) for o in reps)
    else:
        factors = tuple(1.0 for _ in reps)
    horizon = max((o.horizon for o in observables), default=0)
    n_steps = cfg.n_shifts + horizon
    n_obs = len(observables)
    weights = np.empty(stop - start)
    values = np.empty((n_obs, stop - start, cfg.n_shifts + 1))
    for idx in range(start, stop):
        rseed = derive_seed(cfg.seed, idx)
        env = Environment(dataclasses.replace(cfg.env, seed=rseed), space)
        ctx = EvalContext(space, env, ks)
        pick = prf_u64(rseed, TAG_ORBIT) % len(reps)
        v = reps[pick]
        weights[idx - start] = nu(ks, env, v, tol=cfg.tol) * factors[pick]
        traj = [v]
        for t in range(n_steps):
            u = prf_uniform(rseed, TAG_WALK, t.to_bytes(4, "little"))
            v = ctx.kernel_at(v).sample(u)
            traj.append(v)
        traj = tuple(traj)
        col = idx - start
        for i, obs in enumerate(observables):
            fast = obs.fast_fn
            row = values[i, col]
            if fast is not None:
                for n in range(cfg.n_shifts + 1):
                    row[n] = fast(ctx, traj, n)
            else:
                for n in range(cfg.n_shifts + 1):
                    row[n] = obs.view_fn(ctx.view(traj, n, obs.radius,
                                                  obs.horizon))
    return weights, values


def _batch_task(args):
    cfg_dict, observables, start, stop = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return start, _replica_batch(cfg, observables, start, stop)


def run_stationarity(cfg: ExperimentConfig, observables=None,
                     workers: int = 1) -> ShiftSeries:
    """Estimate every observable's mean at shift times 0..N under the
    weighted measure of the configured mode.

    Results are bit-identical for any ``workers`` value.
    """
    space, ks = cfg.build()
    observables = _resolve_observables(cfg, space, ks, observables)
    M, N = cfg.n_replicas, cfg.n_shifts
    weights = np.empty(M)
    values = np.empty((len(observables), M, N + 1))
    # chunking never affects results: replicas are indexed, assembly is by index
    chunk = max(64, min(4096, -(-M // (4 * max(workers, 1)))))
    spans = [(s, min(s + chunk, M)) for s in range(0, M, chunk)]
    if workers <= 1 or len(spans) == 1:
        for s, e in spans:
            w, vals = _replica_batch(cfg, observables, s, e)
            weights[s:e] = w
            values[:, s:e, :] = vals
    else:
        import multiprocessing

        cfg_dict = cfg.as_dict()
        tasks = [(cfg_dict, observables, s, e) for s, e in spans]
        with multiprocessing.Pool(workers) as pool:
            for s, (w, vals) in pool.imap_unordered(_batch_task, tasks):
                e = s + len(w)
                weights[s:e] = w
                values[:, s:e, :] = vals
    estimates = tuple(
        tuple(weighted_mean(values[i, :, n], weights) for n in range(N + 1))
        for i in range(len(observables)))
    meta = {
        "M": M, "N": N, "R": list(cfg.cluster_radii), "seed": cfg.seed,
        "space": cfg.space, "kernel": cfg.kernel, "mode": cfg.mode,
    }
    return ShiftSeries(tuple(o.name for o in observables), estimates, meta)


def run_counterexample(cfg: ExperimentConfig, workers: int = 1):
    """Run the two walks of the non-unimodular counterexample side by side.

    Series (i): simple random walk on clusters weighted by its degree
    weight, whose event series starts positive and decays.  Series (ii):
    the m-weighted walk with its alpha weight, whose stabilizer-weighted
    measure satisfies the balance hypothesis and is therefore stationary.
    Both use the same master seed, hence the same environments replica for
    replica.
    """
    space, _ = cfg.build()
    if space.kind != "tree-end":
        raise ConfigurationError(
            f"the counterexample runs on a tree-end space, got {cfg.space!r}")
    if not cfg.env.percolation_on:
        raise ConfigurationError("the counterexample requires percolation marks")
    from .observables import event_top_of_cluster

    cfg_i = dataclasses.replace(cfg, kernel="srw-clusters", mode="general")
    events = tuple(event_top_of_cluster(r) for r in cfg.cluster_radii)
    series_i = run_stationarity(cfg_i, observables=events, workers=workers)
    cfg_ii = dataclasses.replace(cfg, kernel="m-weighted", mode="general")
    series_ii = run_stationarity(cfg_ii, workers=workers)
    return series_i, series_ii


@dataclass(frozen=True)
class ConstancyEntry:
    observable: str
    passed: bool
    worst_n: int
    worst_gap_sigmas: float


def constancy_report(series: ShiftSeries, n_sigma: float = 3.0):
    """Compare every est(n) with est(0): pass iff
    |est(n) - est(0)| <= n_sigma * (SE(n) + SE(0)) for all n."""
    out = []
    for name, row in zip(series.observable_names, series.estimates):
        base = row[0]
        worst_n, worst_gap = 0, 0.0
        passed = True
        for n, e in enumerate(row):
            gap = abs(e.estimate - base.estimate)
            band = e.stderr + base.stderr
            if gap == 0.0:
                sigmas = 0.0
            elif band == 0.0:
                sigmas = float("inf")
            else:
                sigmas = gap / band
            if sigmas > worst_gap:
                worst_gap, worst_n = sigmas, n
            if sigmas > n_sigma:
                passed = False
        out.append(ConstancyEntry(name, passed, worst_n, worst_gap))
    return tuple(out)


@dataclass(frozen=True)
class MannKendallResult:
    s: int
    var_s: float
    z: float


def mann_kendall(values) -> MannKendallResult:
    """Mann-Kendall trend statistic with tie correction.

    Negative z indicates a decreasing trend; |z| > 3 rejects constancy at
    the 3-sigma level.
    """
    x = list(values)
    n = len(x)
    s = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            d = x[j] - x[i]
            s += (d > 0) - (d < 0)
    counts = {}
    for v in x:
        counts[v] = counts.get(v, 0) + 1
    tie_term = sum(t * (t - 1) * (2 * t + 5) for t in counts.values() if t > 1)
    var_s = (n * (n - 1) * (2 * n + 5) - tie_term) / 18.0
    if var_s <= 0:
        return MannKendallResult(s, 0.0, 0.0)
    if s > 0:
        z = (s - 1) / var_s ** 0.5
    elif s < 0:
        z = (s + 1) / var_s ** 0.5
    else:
        z = 0.0
    return MannKendallResult(s, var_s, z)
