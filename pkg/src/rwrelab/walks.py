"""Transition kernels, stationary weights, and exact balance checks.

Four walk families:

* ``delayed-srw`` -- crosses each open edge with probability 1/D and
  otherwise stays put; weight nu == 1.
* ``srw-clusters`` -- simple random walk on the open cluster, uniform over
  open edges, frozen when isolated; weight nu = open degree (1 when
  isolated).
* ``alili`` -- nearest-neighbour walk on the line, right with probability
  xi(x) and left with 1 - xi(x); weight nu(x) = (1 + rho(x)) A(x) with
  rho = (1 - xi)/xi and A the convergent product series below.
* ``m-weighted`` -- crosses an open edge [x, y] with probability
  sqrt(m(y)/m(x)) / alpha(x) where alpha sums sqrt(m(y)/m(x)) over *all*
  edges of the space at x; weight nu = alpha.  On unimodular spaces this
  reduces exactly to delayed-srw; on the tree with a fixed end it is the
  family whose m-weighted measure is stationary.

The balance checks verify x -> m(x) nu(x) as a stationary (global balance)
or reversing (detailed balance) measure on a finite window, site by site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, ConvergenceError
from .space import Line, Space, TreeWithEnd

FAMILIES = ("delayed-srw", "srw-clusters", "alili", "m-weighted")


@dataclass(frozen=True)
class KernelSpec:
    """A walk family bound to its space."""

    family: str
    space: Space

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "alili" and not isinstance(self.space, Line):
            raise ConfigurationError(
                f"kernel 'alili' requires space 'line', got {self.space.name!r}")

    def requires_percolation(self):
        return self.family in ("delayed-srw", "srw-clusters", "m-weighted")

    def requires_site_params(self):
        return self.family == "alili"


@dataclass(frozen=True)
class TransitionDist:
    """Finite transition distribution at x: moves in canonical neighbour
    order, then any staying mass at x itself."""

    x: object
    entries: tuple  # ((vertex, probability), ...)

    @property
    def stay_prob(self) -> float:
        for v, p in self.entries:
            if v == self.x:
                return p
        return 0.0

    def prob_of(self, v) -> float:
        for u, p in self.entries:
            if u == v:
                return p
        return 0.0

    def total(self) -> float:
        return sum(p for _, p in self.entries)

    def sample(self, u: float):
        """Inverse-CDF draw along the canonical entry order."""
        acc = 0.0
        for v, p in self.entries:
            acc += p
            if u < acc:
                return v
        return self.entries[-1][0]


def _check_modes(ks: KernelSpec, env):
    if ks.requires_percolation() and not env.percolation_on:
        raise ConfigurationError(
            f"kernel {ks.family!r} needs the percolation stream enabled")
    if ks.requires_site_params() and not env.site_params_on:
        raise ConfigurationError(
            f"kernel {ks.family!r} needs the site-parameter stream enabled")


def alpha_weight(space: Space, env_unused, x) -> float:
    """alpha(x): sum of sqrt(m(y)/m(x)) over all edges of the space at x."""
    if isinstance(space, TreeWithEnd):
        d = space.degree
        return math.sqrt(d - 1) + (d - 1) / math.sqrt(d - 1)
    return float(space.degree)


def kernel(ks: KernelSpec, env, x) -> TransitionDist:
    """Transition distribution p_xi(x, .) of the family at x."""
    space = ks.space
    space.validate_vertex(x)
    _check_modes(ks, env)
    fam = ks.family
    if fam == "alili":
        xi = env.site_param(x)
        return TransitionDist(x, ((x - 1, 1.0 - xi), (x + 1, xi)))
    nbrs = space._nbrs(x)
    d_all = space.degree
    if fam == "delayed-srw":
        entries = [(y, 1.0 / d_all) for y in nbrs if env.edge_open(x, y)]
        stay = 1.0 - len(entries) / d_all
        if stay > 0.0:
            entries.append((x, stay))
        return TransitionDist(x, tuple(entries))
    if fam == "srw-clusters":
        open_nbrs = [y for y in nbrs if env.edge_open(x, y)]
        if not open_nbrs:
            return TransitionDist(x, ((x, 1.0),))
        p = 1.0 / len(open_nbrs)
        return TransitionDist(x, tuple((y, p) for y in open_nbrs))
    # m-weighted
    a = alpha_weight(space, env, x)
    entries = []
    moved = 0.0
    for y in nbrs:
        if env.edge_open(x, y):
            p = math.sqrt(space.m_ratio(x, y)) / a
            entries.append((y, p))
            moved += p
    stay = 1.0 - moved
    if stay > 1e-15:
        entries.append((x, stay))
    return TransitionDist(x, tuple(entries))


def alili_rho(env, x) -> float:
    """rho(x) = (1 - xi(x)) / xi(x)."""
    xi = env.site_param(x)
    return (1.0 - xi) / xi


def alili_A(env, x, tol: float = 1e-12, max_terms: int = 10_000) -> float:
    """A(x) = sum_{n >= x} prod_{k = x+1}^{n} rho(k), truncated when the
    running product drops below ``tol``.

    Satisfies the recursion A(x) = 1 + rho(x+1) A(x+1); convergence is
    geometric whenever the site parameters stay above 1/2.
    """
    total = 1.0
    prod = 1.0
    k = x
    for _ in range(max_terms):
        k += 1
        prod *= alili_rho(env, k)
        if prod < tol:
            return total
        total += prod
    raise ConvergenceError(
        f"A({x}) did not converge within {max_terms} terms (running product {prod:g})",
        partial=total, terms=max_terms)


def nu(ks: KernelSpec, env, x, tol: float = 1e-12) -> float:
    """Stationary weight nu_xi(x) of the family at x."""
    space = ks.space
    space.validate_vertex(x)
    _check_modes(ks, env)
    fam = ks.family
    if fam == "delayed-srw":
        return 1.0
    if fam == "srw-clusters":
        d = sum(1 for y in space._nbrs(x) if env.edge_open(x, y))
        return float(d) if d > 0 else 1.0
    if fam == "m-weighted":
        return alpha_weight(space, env, x)
    return (1.0 + alili_rho(env, x)) * alili_A(env, x, tol=tol)


def sample_step(ks: KernelSpec, env, x, u: float):
    """One step from x, driven by the uniform token ``u``; deterministic in u."""
    return kernel(ks, env, x).sample(u)


@dataclass(frozen=True)
class BalanceEntry:
    site: str
    residual: float
    passed: bool


@dataclass(frozen=True)
class BalanceReport:
    check: str
    tol: float
    entries: tuple

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)


def global_balance_check(ks: KernelSpec, env, window, tol: float = 1e-12,
                         nu_tol: float = 1e-12) -> BalanceReport:
    """Verify sum_y m(y) nu(y) p(y, x) = m(x) nu(x) on the window interior.

    Interior sites are those whose whole neighbourhood lies in the window,
    so every inflow term is available.  Residuals are normalized by m(x)
    (only stabilizer-weight ratios ever enter).
    """
    space = ks.space
    window = set(window)
    nus = {}

    def nu_at(v):
        if v not in nus:
            nus[v] = nu(ks, env, v, tol=nu_tol)
        return nus[v]

    entries = []
    for x in sorted(window, key=space.vertex_bytes):
        nbrs = space.neighbors(x)
        if any(y not in window for y in nbrs):
            continue
        inflow = kernel(ks, env, x).stay_prob * nu_at(x)
        for y in nbrs:
            p_yx = kernel(ks, env, y).prob_of(x)
            if p_yx:
                inflow += float(space.m_ratio(x, y)) * nu_at(y) * p_yx
        residual = abs(inflow - nu_at(x))
        entries.append(BalanceEntry(space.vertex_str(x), residual, residual < tol))
    return BalanceReport("global", tol, tuple(entries))


def detailed_balance_check(ks: KernelSpec, env, window, tol: float = 1e-12,
                           nu_tol: float = 1e-12) -> BalanceReport:
    """Check m(x) nu(x) p(x, y) = m(y) nu(y) p(y, x) on window edges.

    Passes for the three reversible families; the alili weights are
    stationary but not reversing, so non-constant site parameters leave a
    strictly positive asymmetry at some edge.
    """
    space = ks.space
    window = set(window)
    nus = {}

    def nu_at(v):
        if v not in nus:
            nus[v] = nu(ks, env, v, tol=nu_tol)
        return nus[v]

    entries = []
    seen = set()
    for x in sorted(window, key=space.vertex_bytes):
        dist_x = kernel(ks, env, x)
        for y in space.neighbors(x):
            if y not in window:
                continue
            eid = space.edge_id(x, y)
            if eid in seen:
                continue
            seen.add(eid)
            lhs = nu_at(x) * dist_x.prob_of(y)
            rhs = float(space.m_ratio(x, y)) * nu_at(y) * kernel(ks, env, y).prob_of(x)
            residual = abs(lhs - rhs)
            label = f"{space.vertex_str(x)}~{space.vertex_str(y)}"
            entries.append(BalanceEntry(label, residual, residual < tol))
    return BalanceReport("detailed", tol, tuple(entries))
