"""Canonical rooted views: group-invariant encodings of marked windows.

A rooted view packages everything an invariant observable may look at: the
radius-r ball around a center vertex, its edge open/closed marks, site
scenery and parameter marks, and a short trajectory segment starting at the
center, all re-indexed canonically so that two configurations related by a
symmetry of the acting group produce identical views (and identical bytes
under :meth:`RootedView.encode`).

Canonicalization per space family:

* line kinds: vertices ordered left to right by offset (the groups contain
  translations only, so orientation is preserved);
* regular tree: rooted-tree canonical form, child subtrees sorted by their
  recursive signatures (full automorphism group);
* tree with a fixed end: the ancestor ray from the center is a rigid spine
  listed first; only the non-spine child subtrees of each spine vertex are
  sorted (end-fixing group).

Trajectory visits are folded into the per-vertex marks before sorting, so
the trajectory is carried along by whatever symmetry canonicalizes the
window.

Byte format of ``encode()`` (all integers little-endian, sequences length
prefixed): ``u32 total length | b"RV1" | space tag byte | u16 degree |
u16 radius | u16 horizon | u8 center orbit | u32 center index |
u32 vertex count | per vertex: i32 position, i32 scenery (-1 none),
u8 param flag + f64 param (big-endian) if set, u16 visit count + u16 visit
times | u32 edge count | per edge: u32 i, u32 j, u8 mark (0 none, 1 closed,
2 open) | u16 trajectory length | u32 canonical index per step``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

from .errors import TrajectoryError
from .space import Line, RegularTree, Space, SubdividedLine

_SPACE_TAGS = {"line": 0, "subdivided-line": 1, "tree": 2, "tree-end": 3}
_MARK_BYTES = {None: 0, False: 1, True: 2}


@dataclass(frozen=True)
class RootedView:
    """Canonically indexed window; the center has index ``center``."""

    space_kind: str
    degree: int
    radius: int
    horizon: int
    center_orbit: int
    center: int
    positions: tuple          # per-vertex invariant position datum
    scenery: tuple            # per-vertex scenery color or None
    site_params: tuple        # per-vertex site parameter or None
    visits: tuple             # per-vertex tuple of visit times
    edges: tuple              # (i, j, mark) with mark in {None, False, True}
    traj: tuple               # canonical index of w(t) for t = 0..horizon

    @cached_property
    def _adj(self):
        adj = {i: [] for i in range(len(self.positions))}
        for i, j, mark in self.edges:
            adj[i].append((j, mark))
            adj[j].append((i, mark))
        return adj

    def neighbors_of(self, i):
        return self._adj[i]

    def open_degree(self, i) -> int:
        return sum(1 for _, mark in self._adj[i] if mark is True)

    def open_neighbors(self, i):
        return [j for j, mark in self._adj[i] if mark is True]

    def cluster_from_center(self, max_dist: int):
        """Open-edge component of the center within ``max_dist`` hops.

        Returns (set of canonical indices, boundary flag); the flag is set
        iff some component vertex sits at hop distance exactly ``max_dist``.
        """
        dist = {self.center: 0}
        frontier = [self.center]
        hit = max_dist == 0
        for d in range(1, max_dist + 1):
            nxt = []
            for v in frontier:
                for u, mark in self._adj[v]:
                    if mark is True and u not in dist:
                        dist[u] = d
                        nxt.append(u)
            if not nxt:
                break
            if d == max_dist and nxt:
                hit = True
            frontier = nxt
        return set(dist), hit

    def encode(self) -> bytes:
        out = [
            b"RV1",
            bytes([_SPACE_TAGS[self.space_kind]]),
            struct.pack("<HHHBI", self.degree, self.radius, self.horizon,
                        self.center_orbit, self.center),
            struct.pack("<I", len(self.positions)),
        ]
        for pos, sc, par, vis in zip(self.positions, self.scenery,
                                     self.site_params, self.visits):
            out.append(struct.pack("<ii", pos, -1 if sc is None else sc))
            if par is None:
                out.append(b"\x00")
            else:
                out.append(b"\x01" + struct.pack(">d", par))
            out.append(struct.pack("<H", len(vis)))
            out.extend(struct.pack("<H", t) for t in vis)
        out.append(struct.pack("<I", len(self.edges)))
        for i, j, mark in self.edges:
            out.append(struct.pack("<IIB", i, j, _MARK_BYTES[mark]))
        out.append(struct.pack("<H", len(self.traj)))
        out.extend(struct.pack("<I", i) for i in self.traj)
        body = b"".join(out)
        return struct.pack("<I", len(body)) + body


def _env_marks(env, space, v, within_radius):
    if not within_radius:
        return None, None
    scenery = env.scenery_color(v) if env.scenery_on else None
    param = env.site_param(v) if env.site_params_on else None
    return scenery, param


def _edge_mark(env, x, y, within_radius):
    if not within_radius or not env.percolation_on:
        return None
    return env.edge_open(x, y)


def canonical_rooted_view(space: Space, env, center, radius: int,
                          segment=()) -> RootedView:
    """Canonical encoding of the radius-``radius`` ball at ``center`` plus a
    trajectory segment starting there.

    ``segment`` is the walk positions w(0..k) with w(0) = center; steps must
    stay put or move to a neighbour.  Environment marks are included only
    within ``radius``; the window is structurally extended to cover the
    segment when k exceeds the radius, carrying visit marks only.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    space.validate_vertex(center)
    segment = tuple(segment) if segment else (center,)
    if segment[0] != center:
        raise TrajectoryError("trajectory segment must start at the view center")
    for a, b in zip(segment, segment[1:]):
        if a != b and not space.is_adjacent(a, b):
            raise TrajectoryError(f"segment step {a!r} -> {b!r} is not a walk step")

    horizon = len(segment) - 1
    r_eff = max(radius, horizon)
    visits = {}
    for t, v in enumerate(segment):
        visits.setdefault(v, []).append(t)

    if isinstance(space, (Line, SubdividedLine)):
        return _line_view(space, env, center, radius, r_eff, visits, segment, horizon)
    if isinstance(space, RegularTree):
        return _regular_tree_view(space, env, center, radius, r_eff, visits,
                                  segment, horizon)
    return _tree_end_view(space, env, center, radius, r_eff, visits, segment, horizon)


def _line_view(space, env, center, radius, r_eff, visits, segment, horizon):
    fine = isinstance(space, SubdividedLine)
    coord = space.fine_coord if fine else (lambda v: v)
    decode = space.from_fine if fine else (lambda f: f)
    c0 = coord(center)
    verts = [decode(c0 + off) for off in range(-r_eff, r_eff + 1)]
    index = {v: i for i, v in enumerate(verts)}
    positions, scen, pars, vis = [], [], [], []
    for off, v in zip(range(-r_eff, r_eff + 1), verts):
        s, p = _env_marks(env, space, v, abs(off) <= radius)
        positions.append(off)
        scen.append(s)
        pars.append(p)
        vis.append(tuple(visits.get(v, ())))
    edges = []
    for off in range(-r_eff, r_eff):
        x, y = verts[off + r_eff], verts[off + r_eff + 1]
        mark = _edge_mark(env, x, y, max(abs(off), abs(off + 1)) <= radius)
        edges.append((off + r_eff, off + r_eff + 1, mark))
    return RootedView(
        space_kind=space.kind, degree=space.degree, radius=radius,
        horizon=horizon, center_orbit=space.orbit_of(center), center=r_eff,
        positions=tuple(positions), scenery=tuple(scen),
        site_params=tuple(pars), visits=tuple(vis), edges=tuple(edges),
        traj=tuple(index[v] for v in segment),
    )


def _mark_sig(scenery, param, vis):
    parts = [struct.pack("<i", -1 if scenery is None else scenery)]
    parts.append(b"\x00" if param is None else b"\x01" + struct.pack(">d", param))
    parts.append(struct.pack("<H", len(vis)))
    parts.extend(struct.pack("<H", t) for t in vis)
    return b"".join(parts)


class _TreeCanon:
    """Shared recursive canonicalizer for the two tree families."""

    def __init__(self, space, env, radius, visits):
        self.space = space
        self.env = env
        self.radius = radius
        self.visits = visits
        self.nodes = []    # (vertex, position)
        self.edges = []
        self.index = {}

    def node_marks(self, v, dist):
        s, p = _env_marks(self.env, self.space, v, dist <= self.radius)
        return s, p, tuple(self.visits.get(v, ()))

    def signature(self, v, came_from, dist, max_dist):
        """Canonical byte signature of the subtree at v away from came_from."""
        s, p, vis = self.node_marks(v, dist)
        children = []
        if dist < max_dist:
            for u in self.space._nbrs(v):
                if u != came_from:
                    mark = _edge_mark(self.env, v, u, dist + 1 <= self.radius)
                    children.append(
                        bytes([_MARK_BYTES[mark]])
                        + self.signature(u, v, dist + 1, max_dist)
                    )
        children.sort()
        body = _mark_sig(s, p, vis) + struct.pack("<H", len(children)) + b"".join(children)
        return struct.pack("<I", len(body)) + body

    def emit(self, v, position):
        idx = len(self.nodes)
        self.index[v] = idx
        self.nodes.append((v, position))
        return idx

    def walk_subtree(self, v, came_from, dist, max_dist, position, level_step):
        """Emit v's subtree in canonical (sorted-signature) order."""
        my_idx = self.index[v]
        entries = []
        if dist < max_dist:
            for u in self.space._nbrs(v):
                if u != came_from:
                    mark = _edge_mark(self.env, v, u, dist + 1 <= self.radius)
                    key = bytes([_MARK_BYTES[mark]]) + self.signature(
                        u, v, dist + 1, max_dist)
                    entries.append((key, u, mark))
        entries.sort(key=lambda e: e[0])
        for _, u, mark in entries:
            child_idx = self.emit(u, position + level_step)
            self.edges.append((my_idx, child_idx, mark))
            self.walk_subtree(u, v, dist + 1, max_dist, position + level_step,
                              level_step)

    def finish(self, space, env, center, radius, horizon, segment, center_idx):
        positions = tuple(pos for _, pos in self.nodes)
        scen, pars, vis = [], [], []
        ball = space.ball(center, max(radius, horizon))
        for v, _ in self.nodes:
            s, p, w = self.node_marks(v, ball[v])
            scen.append(s)
            pars.append(p)
            vis.append(w)
        return RootedView(
            space_kind=space.kind, degree=space.degree, radius=radius,
            horizon=horizon, center_orbit=space.orbit_of(center),
            center=center_idx, positions=positions, scenery=tuple(scen),
            site_params=tuple(pars), visits=tuple(vis),
            edges=tuple(sorted(self.edges)),
            traj=tuple(self.index[v] for v in segment),
        )


def _regular_tree_view(space, env, center, radius, r_eff, visits, segment, horizon):
    canon = _TreeCanon(space, env, radius, visits)
    canon.emit(center, 0)
    # depth below center is the invariant position datum
    canon.walk_subtree(center, None, 0, r_eff, 0, 1)
    return canon.finish(space, env, center, radius, horizon, segment, 0)


def _tree_end_view(space, env, center, radius, r_eff, visits, segment, horizon):
    canon = _TreeCanon(space, env, radius, visits)
    # rigid spine toward the end: a_0 = center, a_1, ..., a_{r_eff}
    spine = [center]
    for _ in range(r_eff):
        spine.append(space.parent(spine[-1]))
    spine_idx = [canon.emit(spine[0], 0)]
    for i in range(1, len(spine)):
        idx = canon.emit(spine[i], i)
        canon.edges.append(
            (spine_idx[-1], idx, _edge_mark(env, spine[i - 1], spine[i],
                                            i <= radius)))
        spine_idx.append(idx)
    # hang sorted non-spine subtrees off each spine vertex
    for i, a in enumerate(spine):
        came_from = spine[i + 1] if i + 1 < len(spine) else space.parent(a)
        down = [u for u in space.neighbors(a)
                if u != came_from and (i == 0 or u != spine[i - 1])]
        entries = []
        for u in down:
            if i + 1 > r_eff:
                continue
            mark = _edge_mark(env, a, u, i + 1 <= radius)
            key = bytes([_MARK_BYTES[mark]]) + canon.signature(u, a, i + 1, r_eff)
            entries.append((key, u, mark))
        entries.sort(key=lambda e: e[0])
        for _, u, mark in entries:
            child_idx = canon.emit(u, i - 1)
            canon.edges.append((spine_idx[i], child_idx, mark))
            canon.walk_subtree(u, a, i + 1, r_eff, i - 1, -1)
    return canon.finish(space, env, center, radius, horizon, segment, 0)
