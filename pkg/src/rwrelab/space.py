"""Homogeneous state spaces and their symmetry data.

Four space families are supported:

* ``Line`` -- the integers with nearest-neighbour edges, acted on by
  translations only (no reflections).
* ``SubdividedLine`` -- the line with every edge subdivided by a midpoint,
  acted on by translations of the original lattice.  Two vertex orbits:
  integer sites (orbit 1) and midpoints (orbit 2).
* ``RegularTree(D)`` -- the D-regular tree under its full automorphism
  group.  Transitive and unimodular.
* ``TreeWithEnd(D)`` -- the D-regular tree with one end fixed, under the
  end-fixing automorphism group.  Transitive but *not* unimodular: the
  stabilizer-weight ratio between a vertex and its parent (the neighbour
  closer to the end) is D-1.

Vertex labels are canonical: two labels are equal iff they denote the same
vertex.  Group invariance is never represented by explicit group elements;
it enters through stabilizer-weight ratios (`m_ratio`) and through the
canonical window encodings in :mod:`rwrelab.views`.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import NamedTuple

from .errors import InvalidVertexError


class Mid(NamedTuple):
    """Midpoint vertex of the subdivided line, between sites ``i`` and ``i+1``."""

    i: int


class EndVertex(NamedTuple):
    """Vertex of the tree with a fixed end.

    ``up`` counts hops from the origin toward the end along the origin's
    ancestor ray; ``word`` is the descending child path taken afterwards.
    Canonical form requires ``word[0] != 0`` whenever ``up > 0`` and the
    word is nonempty (child 0 of an ancestor is the previous ancestor).
    The Busemann level is ``up - len(word)``; it increases toward the end.
    """

    up: int
    word: tuple


_ONE = Fraction(1)


class Space:
    """Common interface of the four space families."""

    kind: str
    name: str
    degree: int
    unimodular: bool
    n_orbits: int

    # -- vertices -----------------------------------------------------------

    @property
    def origin(self):
        raise NotImplementedError

    @property
    def orbit_representatives(self) -> tuple:
        raise NotImplementedError

    def validate_vertex(self, v) -> None:
        raise NotImplementedError

    def neighbors(self, v) -> tuple:
        """All adjacent vertices in deterministic canonical order."""
        self.validate_vertex(v)
        return self._nbrs(v)

    def _nbrs(self, v) -> tuple:
        """Unvalidated adjacency for internal hot loops."""
        raise NotImplementedError

    def orbit_of(self, v) -> int:
        """1-based orbit index; constant on group orbits."""
        raise NotImplementedError

    def is_adjacent(self, x, y) -> bool:
        return y in self.neighbors(x)

    # -- stabilizer weights -------------------------------------------------

    def level(self, v) -> int:
        """Busemann level toward the fixed end; 0 on spaces without one."""
        self.validate_vertex(v)
        return 0

    def m_ratio(self, x, y) -> Fraction:
        """Exact stabilizer-weight ratio m(y)/m(x) for adjacent (or equal) x, y."""
        self.validate_vertex(x)
        self.validate_vertex(y)
        if x == y:
            return _ONE
        if not self.is_adjacent(x, y):
            raise ValueError(f"m_ratio requires adjacent vertices, got {x!r}, {y!r}")
        return self._m_ratio_adjacent(x, y)

    def _m_ratio_adjacent(self, x, y) -> Fraction:
        return _ONE

    def m_rel(self, base, v) -> Fraction:
        """m(v)/m(base) for an arbitrary pair, multiplicative along paths."""
        self.validate_vertex(base)
        self.validate_vertex(v)
        return _ONE

    # -- serialization ------------------------------------------------------

    def vertex_bytes(self, v) -> bytes:
        """Canonical, self-delimiting byte label; keys PRF streams and edge ids."""
        raise NotImplementedError

    def vertex_str(self, v) -> str:
        raise NotImplementedError

    def parse_vertex(self, s: str):
        raise NotImplementedError

    def edge_id(self, x, y) -> tuple:
        """Unordered edge as an ordered pair, canonical by byte label."""
        if not self.is_adjacent(x, y):
            raise ValueError(f"not an edge: {x!r} -- {y!r}")
        if self.vertex_bytes(x) <= self.vertex_bytes(y):
            return (x, y)
        return (y, x)

    # -- geometry helpers ----------------------------------------------------

    def ball(self, center, radius: int) -> dict:
        """Distance map of the radius-``radius`` ball around ``center``."""
        self.validate_vertex(center)
        dist = {center: 0}
        frontier = [center]
        for d in range(1, radius + 1):
            nxt = []
            for v in frontier:
                for u in self._nbrs(v):
                    if u not in dist:
                        dist[u] = d
                        nxt.append(u)
            if not nxt:
                break
            frontier = nxt
        return dist


class Line(Space):
    kind = "line"
    name = "line"
    degree = 2
    unimodular = True
    n_orbits = 1

    @property
    def origin(self):
        return 0

    @property
    def orbit_representatives(self):
        return (0,)

    def validate_vertex(self, v):
        if not isinstance(v, int) or isinstance(v, bool):
            raise InvalidVertexError(f"line vertex must be an int, got {v!r}")

    def _nbrs(self, v):
        return (v - 1, v + 1)

    def orbit_of(self, v):
        self.validate_vertex(v)
        return 1

    def vertex_bytes(self, v):
        return b"L" + v.to_bytes(8, "little", signed=True)

    def vertex_str(self, v):
        return str(v)

    def parse_vertex(self, s):
        try:
            return int(s)
        except ValueError:
            raise InvalidVertexError(f"cannot parse line vertex {s!r}") from None


class SubdividedLine(Space):
    kind = "subdivided-line"
    name = "subdivided-line"
    degree = 2
    unimodular = True
    n_orbits = 2

    @property
    def origin(self):
        return 0

    @property
    def orbit_representatives(self):
        return (0, Mid(0))

    def validate_vertex(self, v):
        if isinstance(v, Mid):
            if not isinstance(v.i, int):
                raise InvalidVertexError(f"malformed midpoint {v!r}")
        elif not isinstance(v, int) or isinstance(v, bool):
            raise InvalidVertexError(
                f"subdivided-line vertex must be an int site or Mid, got {v!r}"
            )

    def _nbrs(self, v):
        if isinstance(v, Mid):
            return (v.i, v.i + 1)
        return (Mid(v - 1), Mid(v))

    def orbit_of(self, v):
        self.validate_vertex(v)
        return 2 if isinstance(v, Mid) else 1

    def fine_coord(self, v) -> int:
        """Position on the subdivided lattice: site i -> 2i, midpoint -> 2i+1."""
        self.validate_vertex(v)
        return 2 * v.i + 1 if isinstance(v, Mid) else 2 * v

    def from_fine(self, f: int):
        return Mid(f >> 1) if f & 1 else f >> 1

    def vertex_bytes(self, v):
        return b"S" + self.fine_coord(v).to_bytes(8, "little", signed=True)

    def vertex_str(self, v):
        return f"m{v.i}" if isinstance(v, Mid) else str(v)

    def parse_vertex(self, s):
        if s.startswith("m"):
            try:
                return Mid(int(s[1:]))
            except ValueError:
                raise InvalidVertexError(f"cannot parse midpoint {s!r}") from None
        try:
            return int(s)
        except ValueError:
            raise InvalidVertexError(f"cannot parse subdivided-line vertex {s!r}") from None


class RegularTree(Space):
    """D-regular tree, full automorphism group.

    Vertices are child-path words from the origin: the origin is the empty
    word, its neighbours are ``(j,)`` for j in 0..D-1, and every other
    vertex ``w`` has parent ``w[:-1]`` and children ``w + (j,)`` for j in
    0..D-2.
    """

    kind = "tree"
    unimodular = True
    n_orbits = 1

    def __init__(self, degree: int):
        if degree < 3:
            raise ValueError("regular tree degree must be >= 3")
        self.degree = degree
        self.name = f"tree{degree}"

    @property
    def origin(self):
        return ()

    @property
    def orbit_representatives(self):
        return ((),)

    def validate_vertex(self, v):
        if not isinstance(v, tuple) or isinstance(v, (Mid, EndVertex)):
            raise InvalidVertexError(f"tree vertex must be a word tuple, got {v!r}")
        for pos, c in enumerate(v):
            limit = self.degree if pos == 0 else self.degree - 1
            if not isinstance(c, int) or not 0 <= c < limit:
                raise InvalidVertexError(f"bad letter {c!r} at {pos} in tree word {v!r}")

    def _nbrs(self, v):
        if not v:
            return tuple((j,) for j in range(self.degree))
        return (v[:-1],) + tuple(v + (j,) for j in range(self.degree - 1))

    def orbit_of(self, v):
        self.validate_vertex(v)
        return 1

    def vertex_bytes(self, v):
        return b"T" + bytes([len(v)]) + bytes(v)

    def vertex_str(self, v):
        return "o" if not v else ".".join(str(c) for c in v)

    def parse_vertex(self, s):
        if s == "o":
            return ()
        try:
            v = tuple(int(c) for c in s.split("."))
        except ValueError:
            raise InvalidVertexError(f"cannot parse tree vertex {s!r}") from None
        self.validate_vertex(v)
        return v


class TreeWithEnd(Space):
    """D-regular tree with a fixed end, end-fixing automorphism group.

    Every vertex has one parent (toward the end, Busemann level +1) and
    D-1 children.  The group is transitive but not unimodular:
    m(parent)/m(x) = D-1.
    """

    kind = "tree-end"
    unimodular = False
    n_orbits = 1

    def __init__(self, degree: int):
        if degree < 3:
            raise ValueError("tree-end degree must be >= 3")
        self.degree = degree
        self.name = f"tree-end{degree}"

    @property
    def origin(self):
        return EndVertex(0, ())

    @property
    def orbit_representatives(self):
        return (EndVertex(0, ()),)

    def validate_vertex(self, v):
        if not isinstance(v, EndVertex):
            raise InvalidVertexError(f"tree-end vertex must be an EndVertex, got {v!r}")
        if not isinstance(v.up, int) or v.up < 0 or not isinstance(v.word, tuple):
            raise InvalidVertexError(f"malformed EndVertex {v!r}")
        for c in v.word:
            if not isinstance(c, int) or not 0 <= c < self.degree - 1:
                raise InvalidVertexError(f"bad letter {c!r} in {v!r}")
        if v.up > 0 and v.word and v.word[0] == 0:
            raise InvalidVertexError(
                f"non-canonical EndVertex {v!r}: child 0 of an ancestor is the ancestor below"
            )

    def level(self, v):
        self.validate_vertex(v)
        return v.up - len(v.word)

    def parent(self, v):
        """The unique neighbour closer to the fixed end (level + 1)."""
        self.validate_vertex(v)
        if v.word:
            return EndVertex(v.up, v.word[:-1])
        return EndVertex(v.up + 1, ())

    def children(self, v):
        """The D-1 neighbours away from the end (level - 1), canonical order."""
        self.validate_vertex(v)
        d = self.degree
        if v.word:
            return tuple(EndVertex(v.up, v.word + (j,)) for j in range(d - 1))
        if v.up > 0:
            return (EndVertex(v.up - 1, ()),) + tuple(
                EndVertex(v.up, (j,)) for j in range(1, d - 1)
            )
        return tuple(EndVertex(0, (j,)) for j in range(d - 1))

    def _nbrs(self, v):
        d = self.degree
        up, word = v
        par = EndVertex(up, word[:-1]) if word else EndVertex(up + 1, ())
        if word:
            kids = tuple(EndVertex(up, word + (j,)) for j in range(d - 1))
        elif up > 0:
            kids = (EndVertex(up - 1, ()),) + tuple(
                EndVertex(up, (j,)) for j in range(1, d - 1))
        else:
            kids = tuple(EndVertex(0, (j,)) for j in range(d - 1))
        return (par,) + kids

    def orbit_of(self, v):
        self.validate_vertex(v)
        return 1

    def _m_ratio_adjacent(self, x, y):
        if y == self.parent(x):
            return Fraction(self.degree - 1)
        return Fraction(1, self.degree - 1)

    def m_rel(self, base, v):
        self.validate_vertex(base)
        self.validate_vertex(v)
        return Fraction(self.degree - 1) ** (self.level(v) - self.level(base))

    def vertex_bytes(self, v):
        return (
            b"E"
            + v.up.to_bytes(4, "little")
            + bytes([len(v.word)])
            + bytes(v.word)
        )

    def vertex_str(self, v):
        if not v.word:
            return "o" if v.up == 0 else f"u{v.up}"
        word = ".".join(str(c) for c in v.word)
        return f"u{v.up}:{word}" if v.up else word

    def parse_vertex(self, s):
        if s == "o":
            return EndVertex(0, ())
        m = re.fullmatch(r"(?:u(\d+))?:?([\d.]*)", s)
        if not m or (not m.group(1) and not m.group(2)):
            raise InvalidVertexError(f"cannot parse tree-end vertex {s!r}")
        up = int(m.group(1)) if m.group(1) else 0
        word = tuple(int(c) for c in m.group(2).split(".")) if m.group(2) else ()
        v = EndVertex(up, word)
        self.validate_vertex(v)
        return v


_SPACE_RE = re.compile(r"^(line|subdivided-line|tree(\d+)|tree-end(\d+))$")


def make_space(name: str) -> Space:
    """Build a space from its canonical name: line, subdivided-line, treeD, tree-endD."""
    m = _SPACE_RE.match(name)
    if not m:
        raise ValueError(
            f"unknown space {name!r}; expected line, subdivided-line, treeD or tree-endD"
        )
    if name == "line":
        return Line()
    if name == "subdivided-line":
        return SubdividedLine()
    if m.group(2):
        return RegularTree(int(m.group(2)))
    return TreeWithEnd(int(m.group(3)))


class VertexMap:
    """A space symmetry realized as a lazily grown vertex bijection.

    Built by synchronized breadth-first extension from an anchor pair.  Slot
    matching respects the group of the space: line kinds extend
    order-preservingly (translations only), the regular tree permutes all
    unmapped neighbour slots (optionally shuffled, yielding a random
    automorphism), and the tree with a fixed end maps parents to parents and
    permutes child slots only.
    """

    def __init__(self, space: Space, src, dst, rng=None):
        space.validate_vertex(src)
        space.validate_vertex(dst)
        if space.orbit_of(src) != space.orbit_of(dst):
            raise ValueError("transport requires vertices in the same orbit")
        self.space = space
        self.rng = rng
        self.fwd = {src: dst}
        self.inv = {dst: src}
        self._frontier = [src]

    def _match_slots(self, v, image):
        space = self.space
        src_nbrs = [u for u in space.neighbors(v) if u not in self.fwd]
        dst_pool = [u for u in space.neighbors(image) if u not in self.inv]
        if isinstance(space, TreeWithEnd):
            # parent slot is rigid under the end-fixing group
            sp, ip = space.parent(v), space.parent(image)
            pairs = []
            if sp in src_nbrs:
                if ip not in dst_pool:
                    raise ValueError("anchor pair does not extend to an end-fixing symmetry")
                src_nbrs.remove(sp)
                dst_pool.remove(ip)
                pairs.append((sp, ip))
            if self.rng is not None:
                self.rng.shuffle(dst_pool)
            if len(src_nbrs) != len(dst_pool):
                raise ValueError("anchor pair does not extend to an end-fixing symmetry")
            return pairs + list(zip(src_nbrs, dst_pool))
        if isinstance(space, RegularTree):
            if self.rng is not None:
                self.rng.shuffle(dst_pool)
            return list(zip(src_nbrs, dst_pool))
        # line kinds: canonical neighbour order encodes orientation
        return list(zip(src_nbrs, dst_pool))

    def _grow(self):
        nxt = []
        for v in self._frontier:
            for s, d in self._match_slots(v, self.fwd[v]):
                self.fwd[s] = d
                self.inv[d] = s
                nxt.append(s)
        self._frontier = nxt

    def __call__(self, v):
        self.space.validate_vertex(v)
        while v not in self.fwd:
            self._grow()
        return self.fwd[v]

    def inverse(self, v):
        self.space.validate_vertex(v)
        while v not in self.inv:
            self._grow()
        return self.inv[v]


def transport_map(space: Space, src, dst, rng=None) -> VertexMap:
    """A group element mapping ``src`` to ``dst`` (same orbit), as a vertex bijection.

    With ``rng`` given, tree child slots are permuted randomly, sampling a
    random symmetry through the anchor pair.  Line kinds ignore ``rng``:
    their groups contain translations only.
    """
    return VertexMap(space, src, dst, rng=rng)
