"""Mass-transport identity: exact enumeration checks and controls.

Expected values are hand-derived before comparison: the parent indicator on
the end-fixed tree sends mass 1 and receives 2 * (1/2) = 1; the one-edge
transport at p = 2/3 on the 3-regular tree gives 3p = 2 on both sides.
"""

from fractions import Fraction

import pytest

from rwrelab.errors import ResourceLimitError
from rwrelab.mtp import (TransportFn, builtin_transports, expected_f,
                         invariance_pretest, mtp_check, mtp_sides)
from rwrelab.space import make_space


def test_parent_indicator_sides_are_one():
    sp = make_space("tree-end3")
    f = builtin_transports(sp)["parent-indicator"]
    lhs, rhs = mtp_sides(sp, f)
    assert lhs == 1 and rhs == 1


def test_open_adjacent_tree_at_two_thirds():
    sp = make_space("tree3")
    f = builtin_transports(sp)["open-adjacent"]
    lhs, rhs = mtp_sides(sp, f, p=Fraction(2, 3))
    assert lhs == rhs == 2


def test_cluster_within_two_subdivided_line():
    sp = make_space("subdivided-line")
    f = builtin_transports(sp)["cluster-within-2"]
    lhs, rhs = mtp_sides(sp, f, p=Fraction(1, 2))
    assert lhs == rhs                      # exact rational equality
    # both orbits contribute 1 (self) + 2 * 1/2 + 2 * 1/4
    assert lhs == 2 * (1 + 1 + Fraction(1, 2))


def test_zero_transport():
    sp = make_space("tree3")
    f = builtin_transports(sp)["zero"]
    lhs, rhs = mtp_sides(sp, f)
    assert lhs == rhs == 0


def test_identity_across_catalog_and_spaces(any_space):
    sp = any_space
    for name, f in builtin_transports(sp).items():
        if not f.expected_invariant:
            continue
        report = mtp_check(sp, f, p=Fraction(2, 3), tol=1e-12)
        assert report.invariance_ok, name
        assert report.passed, (name, report.lhs, report.rhs)


def test_unimodular_specialization():
    """With m = 1 and one orbit the identity reads: expected mass sent from
    the origin equals expected mass received at the origin."""
    sp = make_space("tree3")
    f = builtin_transports(sp)["open-adjacent"]
    p = Fraction(1, 3)
    o = sp.origin
    sent = sum(expected_f(sp, f, o, z, p) for z in sp.ball(o, 1))
    received = sum(expected_f(sp, f, y, o, p) for y in sp.ball(o, 1))
    assert sent == received
    lhs, rhs = mtp_sides(sp, f, p)
    assert (lhs, rhs) == (sent, received)


def test_non_invariant_control_fails_pretest():
    sp = make_space("line")
    f = builtin_transports(sp)["absolute-position"]
    assert not f.expected_invariant
    assert not invariance_pretest(sp, f)
    report = mtp_check(sp, f)
    assert not report.invariance_ok
    assert not report.identity_evaluated


def test_window_size_capped():
    sp = make_space("tree3")

    def too_many(space, x, y):
        ball = space.ball(x, 3)
        edges = set()
        for v in ball:
            for u in space.neighbors(v):
                if u in ball:
                    edges.add(space.edge_id(v, u))
        return tuple(edges)

    fat = TransportFn("fat", 1, lambda s, x, y, m: 0, too_many)
    with pytest.raises(ResourceLimitError):
        expected_f(sp, fat, sp.origin, sp.origin, Fraction(1, 2))


def test_deterministic_expectation_with_no_edges():
    sp = make_space("tree-end3")
    f = builtin_transports(sp)["parent-indicator"]
    o = sp.origin
    assert expected_f(sp, f, o, sp.parent(o), Fraction(1, 7)) == 1
    assert expected_f(sp, f, o, sp.children(o)[0], Fraction(1, 7)) == 0
