"""Shared test doubles: explicit-mark environments and relabeled wrappers."""

import pytest

from rwrelab.space import make_space


class FakeEnv:
    """Environment with marks prescribed by dicts (defaults applied beyond).

    ``edges`` maps canonical edge pairs to booleans, ``site``/``colors`` map
    vertices to values; streams without a dict are disabled unless a default
    is given.
    """

    def __init__(self, space, edges=None, default_edge=False, site=None,
                 default_site=None, colors=None, default_color=None):
        self.space = space
        self.edges = dict(edges or {})
        self.default_edge = default_edge
        self.site = dict(site or {})
        self.default_site = default_site
        self.colors = dict(colors or {})
        self.default_color = default_color
        self.percolation_on = edges is not None or default_edge is not None
        self.site_params_on = site is not None or default_site is not None
        self.scenery_on = colors is not None or default_color is not None

    def edge_open(self, x, y=None):
        if y is None:
            x, y = x
        eid = self.space.edge_id(x, y)
        if eid in self.edges:
            return self.edges[eid]
        if self.default_edge is None:
            raise KeyError(f"no mark for edge {eid}")
        return self.default_edge

    def site_param(self, v):
        if v in self.site:
            return self.site[v]
        if self.default_site is None:
            raise KeyError(f"no site parameter for {v}")
        return self.default_site

    def scenery_color(self, v):
        if v in self.colors:
            return self.colors[v]
        if self.default_color is None:
            raise KeyError(f"no color for {v}")
        return self.default_color


class RelabeledEnv:
    """View of a base environment through a group element: marks at v are
    the base marks at gamma^{-1}(v)."""

    def __init__(self, base, gamma_inverse):
        self.base = base
        self.gi = gamma_inverse
        self.percolation_on = base.percolation_on
        self.site_params_on = base.site_params_on
        self.scenery_on = base.scenery_on

    def edge_open(self, x, y=None):
        if y is None:
            x, y = x
        return self.base.edge_open(self.gi(x), self.gi(y))

    def site_param(self, v):
        return self.base.site_param(self.gi(v))

    def scenery_color(self, v):
        return self.base.scenery_color(self.gi(v))


@pytest.fixture(params=["line", "subdivided-line", "tree3", "tree-end3"])
def any_space(request):
    return make_space(request.param)
