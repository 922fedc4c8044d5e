"""Group-invariant observables of the environment seen from the walker.

Every observable is a pure function of the canonical rooted view at the
walker's position, so invariance under the space's group is inherited from
the view encoding rather than asserted per observable.  Observables carry a
declared output bound (needed for standard-error validity) and, where a
cheaper equivalent exists, a fast evaluator that skips building the full
view; fast evaluators are required to agree exactly with the view evaluator
and are property-tested against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional

from .environment import cluster_explore
from .errors import ConfigurationError, TrajectoryError
from .space import Space, SubdividedLine, TreeWithEnd
from .views import RootedView, canonical_rooted_view
from .walks import KernelSpec, kernel


@dataclass(frozen=True)
class Observable:
    name: str
    radius: int                    # view radius r needed by the evaluator
    horizon: int                   # trajectory steps k consumed past the center
    bound: tuple                   # declared (lo, hi) output range
    view_fn: Callable              # RootedView -> float
    fast_fn: Optional[Callable] = None   # (EvalContext, traj, n) -> float
    needs_percolation: bool = False
    needs_scenery: bool = False
    needs_site_params: bool = False
    space_kinds: Optional[tuple] = None  # None = any space


def evaluate(obs: Observable, space: Space, env, trajectory, n: int) -> float:
    """Apply the observable to the canonical rooted view at w(n).

    The trajectory must contain positions n .. n + horizon.
    """
    if n < 0 or n + obs.horizon >= len(trajectory):
        raise TrajectoryError(
            f"trajectory of length {len(trajectory)} cannot be evaluated at "
            f"shift {n} with horizon {obs.horizon}")
    segment = tuple(trajectory[n:n + obs.horizon + 1])
    view = canonical_rooted_view(space, env, segment[0], obs.radius, segment)
    return float(obs.view_fn(view))


class EvalContext:
    """Per-replica evaluation cache shared by fast evaluators.

    Holds one environment sample and one trajectory's worth of memoized
    views, kernels and truncated-cluster explorations.  Purely a cache:
    results equal the view-based evaluation exactly.
    """

    def __init__(self, space: Space, env, ks: KernelSpec):
        self.space = space
        self.env = env
        self.ks = ks
        self._views = {}
        self._clusters = {}
        self._kernels = {}

    def view(self, traj, n, radius, horizon) -> RootedView:
        key = (n, radius, horizon)
        v = self._views.get(key)
        if v is None:
            v = canonical_rooted_view(self.space, self.env, traj[n], radius,
                                      tuple(traj[n:n + horizon + 1]))
            self._views[key] = v
        return v

    def kernel_at(self, v):
        k = self._kernels.get(v)
        if k is None:
            k = kernel(self.ks, self.env, v)
            self._kernels[v] = k
        return k

    def cluster(self, v, max_radius):
        key = (v, max_radius)
        c = self._clusters.get(key)
        if c is None:
            seen, hit = cluster_explore(self.env, self.space, v, max_radius)
            c = (len(seen), hit)
            self._clusters[key] = c
        return c


# -- view evaluators ---------------------------------------------------------

def _view_walker_degree(view):
    return float(view.open_degree(view.center))


def _view_scenery(view):
    return float(view.scenery[view.center])


def _view_site_param(view):
    return view.site_params[view.center]


def _view_walker_orbit(view):
    return float(view.center_orbit)


def _view_fingerprint(family, view):
    """Holding probability p(x, x): the canonical first entry of the
    transition-probability vector read off the window."""
    d = view.degree
    open_deg = view.open_degree(view.center)
    if family == "alili":
        return 0.0
    if family == "srw-clusters":
        return 1.0 if open_deg == 0 else 0.0
    if family == "delayed-srw" or view.space_kind != "tree-end":
        # m-weighted reduces to delayed-srw off the non-unimodular tree
        return 1.0 - open_deg / d
    # mirror the kernel's alpha expression term for term (bit-exact agreement)
    root_up = math.sqrt(d - 1)
    root_down = math.sqrt(1.0 / (d - 1))
    a = root_up + (d - 1) / root_up
    center_pos = view.positions[view.center]
    moved = 0.0
    for j, mark in view.neighbors_of(view.center):
        if mark is True:
            up = view.positions[j] == center_pos + 1
            moved += (root_up if up else root_down) / a
    stay = 1.0 - moved
    return stay if stay > 1e-15 else 0.0


def _view_cluster_size(max_radius, view):
    seen, _ = view.cluster_from_center(max_radius)
    return float(len(seen))


def _view_event_top_of_cluster(max_radius, view):
    """Indicator: the truncated cluster reaches the window boundary and the
    center is at strictly maximal Busemann level inside it."""
    seen, hit = view.cluster_from_center(max_radius)
    if not hit:
        return 0.0
    top = view.positions[view.center]
    for i in seen:
        if i != view.center and view.positions[i] >= top:
            return 0.0
    return 1.0


def _first_step_target(view):
    return view.traj[1]


def _view_first_step_stay(view):
    return 1.0 if _first_step_target(view) == view.center else 0.0


def _view_first_step_line(direction, view):
    j = _first_step_target(view)
    if j == view.center:
        return 0.0
    return 1.0 if view.positions[j] - view.positions[view.center] == direction else 0.0


def _view_first_step_parent(view):
    j = _first_step_target(view)
    if j == view.center:
        return 0.0
    return 1.0 if view.positions[j] == view.positions[view.center] + 1 else 0.0


def _branch_env_key(view, j):
    """Ordering key of a center branch by its immediate environment content
    (edge mark, then site marks of the branch root); visits excluded so the
    ranking reflects the environment, not the walk."""
    mark = None
    for i, m in view.neighbors_of(view.center):
        if i == j:
            mark = m
            break
    sc = view.scenery[j]
    par = view.site_params[j]
    return (
        {None: 0, False: 1, True: 2}[mark],
        -1 if sc is None else sc,
        0 if par is None else 1,
        0.0 if par is None else par,
    )


def _view_first_step_branch(rank, view):
    """Indicator: the first step moved into a branch of dense environment
    rank ``rank`` (0 = smallest branch key; ties share a rank)."""
    j = _first_step_target(view)
    if j == view.center:
        return 0.0
    up = view.positions[view.center] + 1
    if view.space_kind == "tree-end":
        if view.positions[j] == up:
            return 0.0  # stepping to the parent is its own indicator
        branches = [i for i, _ in view.neighbors_of(view.center)
                    if view.positions[i] != up]
    else:
        branches = [i for i, _ in view.neighbors_of(view.center)]
    key_j = _branch_env_key(view, j)
    dense = len({_branch_env_key(view, i) for i in branches
                 if _branch_env_key(view, i) < key_j})
    return 1.0 if dense == rank else 0.0


# -- fast evaluators ----------------------------------------------------------

def _fast_walker_degree(ctx, traj, n):
    return float(ctx.env.open_degree(traj[n]))


def _fast_scenery(ctx, traj, n):
    return float(ctx.env.scenery_color(traj[n]))


def _fast_site_param(ctx, traj, n):
    return ctx.env.site_param(traj[n])


def _fast_walker_orbit(ctx, traj, n):
    return float(ctx.space.orbit_of(traj[n]))


def _fast_fingerprint(ctx, traj, n):
    return ctx.kernel_at(traj[n]).stay_prob


def _fast_cluster_size(max_radius, ctx, traj, n):
    return float(ctx.cluster(traj[n], max_radius)[0])


def _fast_event_top_of_cluster(max_radius, ctx, traj, n):
    # local form on the tree: strict Busemann maximality inside the cluster
    # holds iff the parent edge is closed
    v = traj[n]
    if ctx.env.edge_open(v, ctx.space.parent(v)):
        return 0.0
    return 1.0 if ctx.cluster(v, max_radius)[1] else 0.0


def _fast_first_step_stay(ctx, traj, n):
    return 1.0 if traj[n + 1] == traj[n] else 0.0


def _fast_branch_env_key(ctx, v, u):
    env = ctx.env
    mark = 2 if (env.percolation_on and env.edge_open(v, u)) else 1
    if not env.percolation_on:
        mark = 0
    sc = env.scenery_color(u) if env.scenery_on else None
    par = env.site_param(u) if env.site_params_on else None
    return (mark, -1 if sc is None else sc,
            0 if par is None else 1, 0.0 if par is None else par)


def _fast_first_step_branch(rank, ctx, traj, n):
    v, j = traj[n], traj[n + 1]
    if j == v:
        return 0.0
    space = ctx.space
    if isinstance(space, TreeWithEnd):
        if j == space.parent(v):
            return 0.0
        branches = space.children(v)
    else:
        branches = space._nbrs(v)
    key_j = _fast_branch_env_key(ctx, v, j)
    keys = {_fast_branch_env_key(ctx, v, u) for u in branches}
    dense = sum(1 for k in keys if k < key_j)
    return 1.0 if dense == rank else 0.0


def _fast_first_step_line(direction, ctx, traj, n):
    a, b = traj[n], traj[n + 1]
    if a == b:
        return 0.0
    space = ctx.space
    fine = space.fine_coord if isinstance(space, SubdividedLine) else (lambda v: v)
    return 1.0 if fine(b) - fine(a) == direction else 0.0


def _fast_first_step_parent(ctx, traj, n):
    if traj[n + 1] == traj[n]:
        return 0.0
    return 1.0 if traj[n + 1] == ctx.space.parent(traj[n]) else 0.0


# -- catalog -------------------------------------------------------------------

def _ball_size(space: Space, radius: int) -> int:
    d = space.degree
    if d == 2:
        return 2 * radius + 1
    return 1 + d * ((d - 1) ** radius - 1) // (d - 2)


def builtin_catalog(space: Space, ks: KernelSpec, env_cfg, radius: int = 1,
                    horizon: int = 1, cluster_radii=(12,)) -> tuple:
    """The built-in observables applicable to this space/kernel/environment."""
    obs = []
    if env_cfg.percolation_on:
        obs.append(Observable(
            "walker_degree", max(radius, 1), 0, (0.0, float(space.degree)),
            _view_walker_degree, _fast_walker_degree, needs_percolation=True))
    if env_cfg.scenery_on:
        obs.append(Observable(
            "scenery_at_walker", 0, 0, (0.0, float(env_cfg.n_colors - 1)),
            _view_scenery, _fast_scenery, needs_scenery=True))
    if env_cfg.site_params_on:
        a, b = env_cfg.site_range
        obs.append(Observable(
            "site_param_at_walker", 0, 0, (a, b),
            _view_site_param, _fast_site_param, needs_site_params=True))
    obs.append(Observable(
        "kernel_fingerprint", max(radius, 1), 0, (0.0, 1.0),
        partial(_view_fingerprint, ks.family), _fast_fingerprint,
        needs_percolation=ks.requires_percolation(),
        needs_site_params=ks.requires_site_params()))
    if env_cfg.percolation_on:
        for r_c in cluster_radii:
            obs.append(Observable(
                f"truncated_cluster_size(R={r_c})", r_c, 0,
                (1.0, float(_ball_size(space, r_c))),
                partial(_view_cluster_size, r_c),
                partial(_fast_cluster_size, r_c), needs_percolation=True))
        if isinstance(space, TreeWithEnd):
            for r_c in cluster_radii:
                obs.append(event_top_of_cluster(r_c))
    if isinstance(space, SubdividedLine):
        obs.append(Observable(
            "walker_orbit", 0, 0, (1.0, 2.0),
            _view_walker_orbit, _fast_walker_orbit))
    if horizon >= 1:
        obs.extend(first_step_indicators(space))
    return tuple(obs)


def event_top_of_cluster(max_radius: int) -> Observable:
    """Indicator of the non-unimodular counterexample event at truncation
    radius R: the walker's truncated cluster reaches distance R and the
    walker is the cluster's strictly highest vertex toward the end."""
    return Observable(
        f"event_A(R={max_radius})", max_radius, 0, (0.0, 1.0),
        partial(_view_event_top_of_cluster, max_radius),
        partial(_fast_event_top_of_cluster, max_radius),
        needs_percolation=True, space_kinds=("tree-end",))


def first_step_indicators(space: Space) -> list:
    """Indicators of the walker's first relative step, one per canonical
    direction of the space plus the staying indicator."""
    obs = [Observable("first_step_stay", 1, 1, (0.0, 1.0),
                      _view_first_step_stay, _fast_first_step_stay)]
    if space.kind in ("line", "subdivided-line"):
        obs.append(Observable("first_step_right", 1, 1, (0.0, 1.0),
                              partial(_view_first_step_line, 1),
                              partial(_fast_first_step_line, 1)))
        obs.append(Observable("first_step_left", 1, 1, (0.0, 1.0),
                              partial(_view_first_step_line, -1),
                              partial(_fast_first_step_line, -1)))
        return obs
    if space.kind == "tree-end":
        obs.append(Observable("first_step_parent", 1, 1, (0.0, 1.0),
                              _view_first_step_parent, _fast_first_step_parent))
        n_branches = space.degree - 1
        label = "child"
    else:
        n_branches = space.degree
        label = "branch"
    for rank in range(n_branches):
        obs.append(Observable(
            f"first_step_{label}{rank}", 1, 1, (0.0, 1.0),
            partial(_view_first_step_branch, rank),
            partial(_fast_first_step_branch, rank)))
    return obs


def check_applicable(obs: Observable, space: Space, env_cfg) -> None:
    """Raise ConfigurationError when the observable cannot run in this setup."""
    if obs.space_kinds is not None and space.kind not in obs.space_kinds:
        raise ConfigurationError(
            f"observable {obs.name!r} requires a space of kind "
            f"{obs.space_kinds}, got {space.kind!r}")
    if obs.needs_percolation and not env_cfg.percolation_on:
        raise ConfigurationError(
            f"observable {obs.name!r} needs the percolation stream")
    if obs.needs_scenery and not env_cfg.scenery_on:
        raise ConfigurationError(
            f"observable {obs.name!r} needs the scenery stream")
    if obs.needs_site_params and not env_cfg.site_params_on:
        raise ConfigurationError(
            f"observable {obs.name!r} needs the site-parameter stream")
