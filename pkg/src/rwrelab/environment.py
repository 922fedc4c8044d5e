"""Seed-deterministic lazy random environments and sceneries.

Marks are produced by a counter-based pseudorandom function: every mark is
a pure function of (master seed, stream tag, canonical id bytes), so an
infinite space can be queried lazily in any order, from any number of
workers, and replaying a seed reproduces every mark bit-exactly.  The three
streams (edge percolation, site parameters, scenery colors) use distinct
fixed-width tags and are independent of one another.
"""

from __future__ import annotations

from dataclasses import dataclass
from hashlib import blake2b

from .errors import ConfigurationError
from .space import Space

_MASK64 = (1 << 64) - 1

TAG_EDGE = b"edge"
TAG_SITE = b"site"
TAG_COLOR = b"colr"
TAG_WALK = b"walk"
TAG_ORBIT = b"orbt"
TAG_REPLICA = b"repl"


def prf_u64(seed: int, tag: bytes, payload: bytes = b"") -> int:
    """64-bit hash of (seed, tag, payload); tags are fixed-width, 4 bytes,
    so the message layout is injective."""
    data = (seed & _MASK64).to_bytes(8, "little") + tag + payload
    return int.from_bytes(blake2b(data, digest_size=8).digest(), "little")


def prf_uniform(seed: int, tag: bytes, payload: bytes = b"") -> float:
    """Uniform draw strictly inside (0, 1), deterministic in its arguments."""
    return (prf_u64(seed, tag, payload) + 0.5) * 2.0 ** -64


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed for replica ``index``."""
    return prf_u64(seed, TAG_REPLICA, index.to_bytes(8, "little"))


@dataclass(frozen=True)
class EnvConfig:
    """Which mark streams exist and their laws.

    A stream is enabled by giving its parameter: ``p_open`` for Bernoulli
    edge percolation, ``site_range`` = (a, b) for uniform site parameters
    (a == b gives the degenerate constant environment used by closed-form
    checks), ``n_colors`` for the uniform scenery palette.
    """

    seed: int
    p_open: float | None = None
    site_range: tuple | None = None
    n_colors: int | None = None

    def __post_init__(self):
        if self.p_open is not None and not 0.0 <= self.p_open <= 1.0:
            raise ConfigurationError(f"p_open must be in [0, 1], got {self.p_open}")
        if self.site_range is not None:
            a, b = self.site_range
            if not 0.0 < a <= b < 1.0:
                raise ConfigurationError(
                    f"site_range must satisfy 0 < a <= b < 1, got {self.site_range}")
        if self.n_colors is not None and self.n_colors < 1:
            raise ConfigurationError(f"n_colors must be >= 1, got {self.n_colors}")

    @property
    def percolation_on(self):
        return self.p_open is not None

    @property
    def site_params_on(self):
        return self.site_range is not None

    @property
    def scenery_on(self):
        return self.n_colors is not None

    def as_dict(self):
        return {
            "seed": self.seed,
            "p": self.p_open,
            "site_range": list(self.site_range) if self.site_range else None,
            "colors": self.n_colors,
        }

    @classmethod
    def from_dict(cls, d):
        rng = d.get("site_range")
        return cls(
            seed=d["seed"],
            p_open=d.get("p"),
            site_range=tuple(rng) if rng else None,
            n_colors=d.get("colors"),
        )


class Environment:
    """Lazily evaluated marks for one environment sample.

    All queries are pure functions of (config, canonical id); the internal
    memo dicts are a transparent cache and never change a value.
    """

    def __init__(self, cfg: EnvConfig, space: Space):
        self.cfg = cfg
        self.space = space
        self._seed8 = (cfg.seed & _MASK64).to_bytes(8, "little")
        self._edge_cache = {}
        self._open_adj = {}
        self._vbytes = {}
        self._scenery_cache = {}
        self._site_cache = {}

    # mode flags mirrored for the view builder
    @property
    def percolation_on(self):
        return self.cfg.percolation_on

    @property
    def site_params_on(self):
        return self.cfg.site_params_on

    @property
    def scenery_on(self):
        return self.cfg.scenery_on

    def _vertex_bytes(self, v) -> bytes:
        b = self._vbytes.get(v)
        if b is None:
            b = self.space.vertex_bytes(v)
            self._vbytes[v] = b
        return b

    def _edge_key(self, x, y) -> bytes:
        bx = self._vertex_bytes(x)
        by = self._vertex_bytes(y)
        return bx + by if bx <= by else by + bx

    def edge_open(self, x, y=None) -> bool:
        """Open/closed mark of the edge {x, y} (or an edge-id pair)."""
        if not self.cfg.percolation_on:
            raise ConfigurationError("percolation stream is not enabled")
        if y is None:
            x, y = x
        key = self._edge_key(x, y)
        cached = self._edge_cache.get(key)
        if cached is None:
            raw = blake2b(self._seed8 + TAG_EDGE + key, digest_size=8).digest()
            u = (int.from_bytes(raw, "little") + 0.5) * 2.0 ** -64
            cached = u < self.cfg.p_open
            self._edge_cache[key] = cached
        return cached

    def site_param(self, v) -> float:
        if not self.cfg.site_params_on:
            raise ConfigurationError("site-parameter stream is not enabled")
        cached = self._site_cache.get(v)
        if cached is None:
            a, b = self.cfg.site_range
            u = prf_uniform(self.cfg.seed, TAG_SITE, self._vertex_bytes(v))
            cached = a + (b - a) * u
            self._site_cache[v] = cached
        return cached

    def scenery_color(self, v) -> int:
        if not self.cfg.scenery_on:
            raise ConfigurationError("scenery stream is not enabled")
        cached = self._scenery_cache.get(v)
        if cached is None:
            cached = (prf_u64(self.cfg.seed, TAG_COLOR, self._vertex_bytes(v))
                      % self.cfg.n_colors)
            self._scenery_cache[v] = cached
        return cached

    def open_neighbors(self, v) -> tuple:
        """Neighbours across open edges, canonical order; cached per vertex."""
        cached = self._open_adj.get(v)
        if cached is None:
            cached = tuple(u for u in self.space._nbrs(v) if self.edge_open(v, u))
            self._open_adj[v] = cached
        return cached

    def open_degree(self, v) -> int:
        return len(self.open_neighbors(v))


def cluster_explore(env, space: Space, v, max_radius: int):
    """Truncated open cluster of ``v``: its component within ``max_radius`` hops.

    Returns (set of vertices, boundary flag); the flag is set iff some
    cluster vertex lies at distance exactly ``max_radius`` from ``v`` -- the
    finite proxy for the cluster possibly being infinite.
    """
    if not env.percolation_on:
        raise ConfigurationError("cluster exploration requires percolation marks")
    if max_radius < 0:
        raise ValueError("max_radius must be >= 0")
    space.validate_vertex(v)
    fast = getattr(env, "open_neighbors", None)
    if fast is not None and getattr(env, "space", None) is not space:
        fast = None
    seen = {v}
    frontier = [v]
    hit = max_radius == 0
    for d in range(1, max_radius + 1):
        nxt = []
        for x in frontier:
            nbrs = fast(x) if fast is not None else tuple(
                u for u in space.neighbors(x) if env.edge_open(x, u))
            for u in nbrs:
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        if not nxt:
            break
        if d == max_radius:
            hit = True
        frontier = nxt
    return seen, hit
