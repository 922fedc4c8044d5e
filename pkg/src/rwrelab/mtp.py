"""Exact verification of the mass-transport identity on finite windows.

For a transport function f(x, y) >= 0 with bounded support radius that is
invariant under the diagonal group action, the identity

    sum_i sum_z E f(o_i, z)  =  sum_j (1/m_j) sum_y E f(y, o_j) m(y)

holds over a complete set of orbit representatives o_1..o_L.  Expectations
over the environment are computed *exactly* by enumerating every open/closed
pattern on the transport function's declared dependency window (never by
Monte Carlo), in exact rational arithmetic whenever the edge probability is
given as a Fraction.  Sums over the infinite vertex set are finite because
f vanishes beyond its support radius.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable

from .errors import ResourceLimitError
from .space import Line, RegularTree, Space, SubdividedLine, TreeWithEnd, transport_map

MAX_WINDOW_EDGES = 20


@dataclass(frozen=True)
class TransportFn:
    """A mass-transport function with a finite dependency window.

    ``value(space, x, y, open_map)`` must depend only on the canonical form
    of the pair (x, y) together with the marks of ``dependency_edges(space,
    x, y)``; ``expected_invariant`` records whether the function claims
    diagonal invariance (the negative control claims it falsely and is
    caught by the pre-test).
    """

    name: str
    support_radius: int
    value: Callable
    dependency_edges: Callable
    expected_invariant: bool = True


def expected_f(space: Space, f: TransportFn, x, y, p) -> Fraction:
    """E[f(x, y)] by exhaustive enumeration of the dependency-window marks."""
    edges = tuple(f.dependency_edges(space, x, y))
    if len(edges) > MAX_WINDOW_EDGES:
        raise ResourceLimitError(
            f"dependency window of {f.name!r} has {len(edges)} edges; "
            f"exact enumeration is capped at {MAX_WINDOW_EDGES}")
    if not edges:
        return Fraction(f.value(space, x, y, {}))
    p = Fraction(p)
    q = 1 - p
    total = Fraction(0)
    for pattern in product((True, False), repeat=len(edges)):
        weight = Fraction(1)
        for bit in pattern:
            weight *= p if bit else q
        if weight == 0:
            continue
        open_map = dict(zip(edges, pattern))
        total += weight * Fraction(f.value(space, x, y, open_map))
    return total


def mtp_sides(space: Space, f: TransportFn, p=Fraction(1, 2)):
    """Both sides of the transport identity with E[f] in place of f.

    Returns (lhs, rhs) as exact Fractions: lhs sums expected mass sent from
    each representative, rhs sums expected mass received, weighted by
    m(y)/m(o_j).
    """
    reps = space.orbit_representatives
    s = f.support_radius
    lhs = Fraction(0)
    for o in reps:
        for z in space.ball(o, s):
            lhs += expected_f(space, f, o, z, p)
    rhs = Fraction(0)
    for o in reps:
        for y in space.ball(o, s):
            val = expected_f(space, f, y, o, p)
            if val:
                rhs += val * space.m_rel(o, y)
    return lhs, rhs


def _sample_maps(space: Space):
    """A few group elements per space for the invariance pre-test."""
    if isinstance(space, Line):
        return [transport_map(space, 0, 3), transport_map(space, 0, -2)]
    if isinstance(space, SubdividedLine):
        return [transport_map(space, 0, 2), transport_map(space, 0, -1)]
    import random

    if isinstance(space, RegularTree):
        o = space.origin
        return [transport_map(space, o, (0,)),
                transport_map(space, o, o, rng=random.Random(7))]
    o = space.origin
    return [transport_map(space, o, space.parent(o)),
            transport_map(space, o, o, rng=random.Random(7))]


def invariance_pretest(space: Space, f: TransportFn, p=Fraction(1, 2),
                       pairs=None) -> bool:
    """Check E f(x, y) = E f(gx, gy) on sample pairs and group elements."""
    if pairs is None:
        pairs = []
        for o in space.orbit_representatives:
            ball = sorted(space.ball(o, min(f.support_radius, 2)),
                          key=space.vertex_bytes)
            pairs.extend((o, z) for z in ball)
    for g in _sample_maps(space):
        for x, y in pairs:
            base = expected_f(space, f, x, y, p)
            moved = expected_f(space, f, g(x), g(y), p)
            if base != moved:
                return False
    return True


@dataclass(frozen=True)
class MtpReport:
    name: str
    space: str
    p: str
    invariance_ok: bool
    identity_evaluated: bool
    lhs: float
    rhs: float
    diff: float
    tol: float
    passed: bool

    def as_dict(self):
        return dataclasses.asdict(self)


def mtp_check(space: Space, f: TransportFn, p=Fraction(1, 2),
              tol: float = 1e-12) -> MtpReport:
    """Pre-test invariance, then evaluate the identity exactly.

    A non-invariant transport function fails the pre-test and the identity
    is not evaluated.
    """
    inv_ok = invariance_pretest(space, f, p)
    if not inv_ok:
        return MtpReport(f.name, space.name, str(p), False, False,
                         float("nan"), float("nan"), float("nan"), tol, False)
    lhs, rhs = mtp_sides(space, f, p)
    diff = abs(lhs - rhs)
    return MtpReport(f.name, space.name, str(p), True, True,
                     float(lhs), float(rhs), float(diff), tol,
                     float(diff) < tol)


# -- built-in transport functions ---------------------------------------------

def _no_edges(space, x, y):
    return ()


def _parent_indicator_value(space, x, y, open_map):
    return 1 if y == space.parent(x) else 0


def _adjacent_edge(space, x, y):
    if x != y and space.is_adjacent(x, y):
        return (space.edge_id(x, y),)
    return ()


def _open_adjacent_value(space, x, y, open_map):
    if x == y or not space.is_adjacent(x, y):
        return 0
    return 1 if open_map[space.edge_id(x, y)] else 0


def _ball_edges(space, x, radius):
    ball = space.ball(x, radius)
    edges = set()
    for v in ball:
        for u in space.neighbors(v):
            if u in ball:
                edges.add(space.edge_id(v, u))
    return tuple(sorted(edges, key=lambda e: (space.vertex_bytes(e[0]),
                                              space.vertex_bytes(e[1]))))


def _cluster2_edges(space, x, y):
    return _ball_edges(space, x, 2)


def _cluster2_value(space, x, y, open_map):
    """1 when y lies in x's open cluster within distance 2."""
    dist = space.ball(x, 2)
    if y not in dist:
        return 0
    seen = {x}
    frontier = [x]
    for _ in range(2):
        nxt = []
        for v in frontier:
            for u in space.neighbors(v):
                if u in dist and u not in seen:
                    eid = space.edge_id(v, u)
                    if open_map.get(eid):
                        seen.add(u)
                        nxt.append(u)
        frontier = nxt
    return 1 if y in seen else 0


def _absolute_position_value(space, x, y, open_map):
    # deliberately non-invariant: reads the absolute coordinate of x
    if x != y:
        return 0
    if isinstance(space, (Line,)):
        return abs(x)
    if isinstance(space, SubdividedLine):
        return abs(space.fine_coord(x))
    if isinstance(space, TreeWithEnd):
        return x.up
    return len(x)


def _zero_value(space, x, y, open_map):
    return 0


def builtin_transports(space: Space) -> dict:
    """Named transport functions applicable to ``space``."""
    fns = {
        "open-adjacent": TransportFn(
            "open-adjacent", 1, _open_adjacent_value, _adjacent_edge),
        "cluster-within-2": TransportFn(
            "cluster-within-2", 2, _cluster2_value, _cluster2_edges),
        "zero": TransportFn("zero", 1, _zero_value, _no_edges),
        "absolute-position": TransportFn(
            "absolute-position", 0, _absolute_position_value, _no_edges,
            expected_invariant=False),
    }
    if isinstance(space, TreeWithEnd):
        fns["parent-indicator"] = TransportFn(
            "parent-indicator", 1, _parent_indicator_value, _no_edges)
    return fns
