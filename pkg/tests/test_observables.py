"""Observables: evaluation semantics, the counterexample event's local form
(checked exhaustively), invariance, shift consistency, fast = view equality."""

import random
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FakeEnv, RelabeledEnv
from rwrelab.environment import EnvConfig, Environment, cluster_explore
from rwrelab.errors import TrajectoryError
from rwrelab.observables import (EvalContext, builtin_catalog, evaluate,
                                 event_top_of_cluster, first_step_indicators)
from rwrelab.space import make_space, transport_map
from rwrelab.walks import KernelSpec


def _tree_setup(seed=0, p=2 / 3, colors=4):
    sp = make_space("tree3")
    env = Environment(EnvConfig(seed=seed, p_open=p, n_colors=colors), sp)
    ks = KernelSpec("srw-clusters", sp)
    return sp, env, ks


def _walk(sp, env, ks, length, seed=0):
    from rwrelab.environment import TAG_WALK, prf_uniform
    from rwrelab.walks import sample_step

    traj = [sp.origin]
    for t in range(length):
        u = prf_uniform(seed, TAG_WALK, t.to_bytes(4, "little"))
        traj.append(sample_step(ks, env, traj[-1], u))
    return tuple(traj)


def test_walker_degree_definition():
    sp, env, ks = _tree_setup(seed=9)
    catalog = {o.name: o for o in builtin_catalog(sp, ks, env.cfg)}
    traj = _walk(sp, env, ks, 5)
    for n in range(4):
        want = sum(1 for u in sp.neighbors(traj[n]) if env.edge_open(traj[n], u))
        assert evaluate(catalog["walker_degree"], sp, env, traj, n) == want


def test_scenery_at_walker_definition():
    sp, env, ks = _tree_setup(seed=9)
    catalog = {o.name: o for o in builtin_catalog(sp, ks, env.cfg)}
    traj = _walk(sp, env, ks, 5)
    for n in range(4):
        assert evaluate(catalog["scenery_at_walker"], sp, env, traj, n) == \
            env.scenery_color(traj[n])


def test_horizon_exceeded_raises():
    sp, env, ks = _tree_setup()
    catalog = builtin_catalog(sp, ks, env.cfg)
    traj = _walk(sp, env, ks, 3)
    stay = next(o for o in catalog if o.name == "first_step_stay")
    with pytest.raises(TrajectoryError):
        evaluate(stay, sp, env, traj, 3)   # needs position 4


def test_kernel_fingerprint_isolated_is_one():
    sp = make_space("tree3")
    env = FakeEnv(sp, edges={}, default_edge=False, colors={},
                  default_color=0)
    ks = KernelSpec("srw-clusters", sp)
    fp = next(o for o in builtin_catalog(sp, ks, EnvConfig(seed=0, p_open=0.5))
              if o.name == "kernel_fingerprint")
    assert evaluate(fp, sp, env, [()], 0) == 1.0


def test_catalog_shape_and_bounds(any_space):
    sp = any_space
    if sp.kind == "line":
        cfg = EnvConfig(seed=0, site_range=(0.6, 0.9), n_colors=4)
        ks = KernelSpec("alili", sp)
    else:
        cfg = EnvConfig(seed=0, p_open=0.5, n_colors=4)
        ks = KernelSpec("srw-clusters", sp)
    catalog = builtin_catalog(sp, ks, cfg, cluster_radii=(4,))
    assert len(catalog) >= 6
    for obs in catalog:
        lo, hi = obs.bound
        assert lo < hi or (lo, hi) == (0.0, 1.0)
    names = [o.name for o in catalog]
    assert len(names) == len(set(names))
    if sp.kind == "tree-end":
        assert "event_A(R=4)" in names
    if sp.kind == "subdivided-line":
        assert "walker_orbit" in names


# -- counterexample event: exhaustive local-form oracle ------------------------

def _tree_end_ball2_edges(sp):
    o = sp.origin
    ball = sp.ball(o, 2)
    edges = set()
    for v in ball:
        for u in sp.neighbors(v):
            if u in ball:
                edges.add(sp.edge_id(v, u))
    return sorted(edges, key=lambda e: (sp.vertex_bytes(e[0]),
                                        sp.vertex_bytes(e[1])))


def test_event_local_form_equivalence_exhaustive():
    """Over all 2^9 patterns of the radius-2 window: the indicator equals
    (parent edge closed) AND (boundary hit), via the view path, the fast
    path, and an independent recomputation of both definitions."""
    sp = make_space("tree-end3")
    o = sp.origin
    edges = _tree_end_ball2_edges(sp)
    assert len(edges) == 9
    obs = event_top_of_cluster(2)
    ks = KernelSpec("srw-clusters", sp)
    values = []
    for marks in product((False, True), repeat=9):
        env = FakeEnv(sp, edges=dict(zip(edges, marks)), default_edge=False)
        via_view = evaluate(obs, sp, env, [o], 0)
        ctx = EvalContext(sp, env, ks)
        via_fast = obs.fast_fn(ctx, (o,), 0)
        seen, hit = cluster_explore(env, sp, o, 2)
        top = all(sp.level(v) < sp.level(o) for v in seen if v != o)
        by_definition = 1.0 if (hit and top) else 0.0
        parent_closed = not env.edge_open(o, sp.parent(o))
        local_form = 1.0 if (parent_closed and hit) else 0.0
        assert via_view == via_fast == by_definition == local_form, marks
        values.append(via_view)
    assert any(v == 1.0 for v in values) and any(v == 0.0 for v in values)


def test_event_examples():
    sp = make_space("tree-end3")
    o = sp.origin
    obs = event_top_of_cluster(2)
    all_open = FakeEnv(sp, edges={}, default_edge=True)
    assert evaluate(obs, sp, all_open, [o], 0) == 0.0   # parent is in cluster
    all_closed = FakeEnv(sp, edges={}, default_edge=False)
    assert evaluate(obs, sp, all_closed, [o], 0) == 0.0  # no boundary hit
    parent_closed = FakeEnv(sp, edges={sp.edge_id(o, sp.parent(o)): False},
                            default_edge=True)
    assert evaluate(obs, sp, parent_closed, [o], 0) == 1.0


def test_event_monotone_in_radius():
    sp = make_space("tree-end3")
    o = sp.origin
    small, large = event_top_of_cluster(2), event_top_of_cluster(3)
    for seed in range(200):
        env = Environment(EnvConfig(seed=seed, p_open=0.6), sp)
        assert evaluate(small, sp, env, [o], 0) >= evaluate(large, sp, env, [o], 0)


def test_truncated_cluster_size_matches_explore():
    sp, env, ks = _tree_setup(seed=12)
    catalog = {o.name: o for o in builtin_catalog(sp, ks, env.cfg,
                                                  cluster_radii=(4,))}
    obs = catalog["truncated_cluster_size(R=4)"]
    traj = _walk(sp, env, ks, 3)
    for n in range(3):
        want = len(cluster_explore(env, sp, traj[n], 4)[0])
        assert evaluate(obs, sp, env, traj, n) == want


# -- invariance and shift consistency -------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), sym=st.integers(0, 2**32),
       kind=st.sampled_from(["subdivided-line", "tree3", "tree-end3"]))
def test_observables_invariant_under_symmetry(seed, sym, kind):
    sp = make_space(kind)
    env = Environment(EnvConfig(seed=seed, p_open=0.6, n_colors=3), sp)
    ks = KernelSpec("srw-clusters", sp)
    catalog = builtin_catalog(sp, ks, env.cfg, cluster_radii=(3,))
    rng = random.Random(sym)
    o = sp.origin
    if kind == "subdivided-line":
        g = transport_map(sp, o, 2 * rng.randrange(-3, 4))
    elif kind == "tree3":
        g = transport_map(sp, o, rng.choice([o, (0,), (1, 0)]), rng=rng)
    else:
        g = transport_map(sp, o, rng.choice([o, sp.parent(o)]), rng=rng)
    relabeled = RelabeledEnv(env, g.inverse)
    traj = _walk(sp, env, ks, 3, seed=seed)
    traj_g = tuple(g(v) for v in traj)
    for obs in catalog:
        a = evaluate(obs, sp, env, traj, 0)
        b = evaluate(obs, sp, relabeled, traj_g, 0)
        assert a == b, obs.name


def test_shift_consistency():
    sp, env, ks = _tree_setup(seed=31)
    catalog = builtin_catalog(sp, ks, env.cfg, cluster_radii=(3,))
    traj = _walk(sp, env, ks, 6)
    for obs in catalog:
        for n in range(1, 4):
            assert evaluate(obs, sp, env, traj, n) == \
                evaluate(obs, sp, env, traj[1:], n - 1), obs.name


def test_fast_equals_view_for_all_builtins():
    for kind in ("line", "subdivided-line", "tree3", "tree-end3"):
        sp = make_space(kind)
        if kind == "line":
            cfg = EnvConfig(seed=20, site_range=(0.6, 0.9), n_colors=3)
            ks = KernelSpec("alili", sp)
        else:
            cfg = EnvConfig(seed=20, p_open=0.6, n_colors=3)
            ks = KernelSpec("m-weighted" if kind == "tree-end3"
                            else "srw-clusters", sp)
        env = Environment(cfg, sp)
        catalog = builtin_catalog(sp, ks, cfg, cluster_radii=(3,))
        traj = _walk(sp, env, ks, 5, seed=2)
        ctx = EvalContext(sp, env, ks)
        for obs in catalog:
            if obs.fast_fn is None:
                continue
            for n in range(4):
                assert obs.fast_fn(ctx, traj, n) == pytest.approx(
                    evaluate(obs, sp, env, traj, n), abs=1e-12), (kind, obs.name, n)


def test_first_step_indicators_partition():
    """Exactly one of {stay, directions} fires at each step."""
    for kind in ("line", "tree3", "tree-end3"):
        sp = make_space(kind)
        if kind == "line":
            cfg = EnvConfig(seed=4, site_range=(0.6, 0.9))
            ks = KernelSpec("alili", sp)
        else:
            cfg = EnvConfig(seed=4, p_open=0.6)
            ks = KernelSpec("delayed-srw", sp)
        env = Environment(cfg, sp)
        traj = _walk(sp, env, ks, 8, seed=5)
        indicators = first_step_indicators(sp)
        for n in range(7):
            total = sum(evaluate(obs, sp, env, traj, n) for obs in indicators)
            assert total == 1.0, (kind, n)
