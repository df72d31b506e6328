import math
import random

import pytest

from oelab._rng import derive
from oelab.bsll import (
    BiInfinitePoint,
    BsLamplighterCoupling,
    bs_act,
    bs_element_between,
    ll_act,
    ll_element_between,
)
from oelab.errors import UsageError, WindowExhausted


@pytest.fixture(scope="module")
def c2():
    return BsLamplighterCoupling(2)


@pytest.fixture(scope="module")
def c3():
    return BsLamplighterCoupling(3)


def test_point_reads_are_stable():
    x = BiInfinitePoint(3, seed=9)
    vals = [x.value(i) for i in range(-5, 6)]
    assert [x.value(i) for i in range(-5, 6)] == vals
    assert all(0 <= v < 3 for v in vals)


def test_lamp_action(c2):
    x = c2.point(1, {0: 0})
    y = ll_act(c2.lamplighter, (((0, 1),), 0), x)
    assert y.value(0) == 1
    assert y.value(3) == x.value(3)
    # order k: applying the lamp k times returns to x
    z = ll_act(c2.lamplighter, (((0, 1),), 0), y)
    for i in range(-3, 4):
        assert z.value(i) == x.value(i)


def test_shift_actions_are_inverse_conventions(c2):
    # the BS stable letter shifts opposite to the lamplighter's (0,1): the
    # semidirect law forces it, and (0,-1) matches the lamplighter shift
    x = c2.point(2, {0: 1, 4: 1})
    ybs, _ = bs_act(c2.bs, (0, 0, -1), x)
    yll = ll_act(c2.lamplighter, ((), 1), x)
    for i in range(-4, 8):
        assert ybs.value(i) == yll.value(i) == x.value(i - 1)
    yup, _ = bs_act(c2.bs, (0, 0, 1), x)
    for i in range(-4, 8):
        assert yup.value(i) == x.value(i + 1)


def test_odometer_carry_rule(c2):
    x = c2.point(3, {0: 1, 1: 1, 2: 0})
    y, changed = bs_act(c2.bs, (1, 0, 0), x)
    assert [y.value(i) for i in (0, 1, 2)] == [0, 0, 1]
    assert changed == [0, 1, 2]
    x2 = c2.point(4, {0: 0})
    y2, changed2 = bs_act(c2.bs, (1, 0, 0), x2)
    assert y2.value(0) == 1 and changed2 == [0]


def test_odometer_from_scale_position(c2):
    # (1/2, 0) adds one at position -1
    x = c2.point(5, {-1: 0, 0: 1})
    y, changed = bs_act(c2.bs, (1, 1, 0), x)
    assert y.value(-1) == 1 and y.value(0) == 1
    assert changed == [-1]
    # negative numerators borrow
    z, changed = bs_act(c2.bs, (-1, 0, 0), y.copy() if hasattr(y, "copy") else y)
    assert changed[0] == 0


def test_bs_action_is_group_action(c2, c3):
    rng = random.Random(6)
    for C in (c2, c3):
        k = C.k
        for _ in range(2500):
            g1 = C.bs.make(rng.randrange(-6, 7), rng.randrange(0, 3), rng.randrange(-2, 3))
            g2 = C.bs.make(rng.randrange(-6, 7), rng.randrange(0, 3), rng.randrange(-2, 3))
            x = C.point(rng.getrandbits(50), {i: rng.randrange(k) for i in range(-4, 5)})
            y1, _ = bs_act(C.bs, g1, x)
            y12, _ = bs_act(C.bs, g2, y1)
            y_prod, _ = bs_act(C.bs, C.bs.multiply(g2, g1), x)
            for i in set(y12.overrides) | set(y_prod.overrides):
                assert y12.peek(i) == y_prod.peek(i), (g1, g2, i)


def test_ll_action_is_group_action(c3):
    rng = random.Random(7)
    for _ in range(5000):
        def rand_ll():
            lamps = {i: rng.randrange(1, 3) for i in rng.sample(range(-3, 4), rng.randrange(3))}
            return c3_elt(lamps, rng.randrange(-2, 3))

        def c3_elt(lamps, pos):
            return c3.lamplighter.make(lamps, pos)

        g1, g2 = rand_ll(), rand_ll()
        x = c3.point(rng.getrandbits(50))
        y12 = ll_act(c3.lamplighter, g2, ll_act(c3.lamplighter, g1, x))
        y_prod = ll_act(c3.lamplighter, c3.lamplighter.multiply(g2, g1), x)
        for i in set(y12.overrides) | set(y_prod.overrides):
            assert y12.peek(i) == y_prod.peek(i)


def test_orbit_equality_both_directions(c2, c3):
    rng = random.Random(8)
    for C in (c2, c3):
        k = C.k
        for _ in range(120):
            x = C.point(rng.getrandbits(50), {i: rng.randrange(k) for i in range(-3, 4)})
            g = C.bs.make(rng.randrange(-8, 9), rng.randrange(0, 3), rng.randrange(-2, 3))
            y, _ = bs_act(C.bs, g, x)
            h = ll_element_between(C.lamplighter, x, y, -g[2])
            z = ll_act(C.lamplighter, h, x)
            for i in set(y.overrides) | set(z.overrides):
                assert y.peek(i) == z.peek(i)
            lamps = {i: rng.randrange(1, k) for i in rng.sample(range(-3, 4), rng.randrange(3))}
            h2 = C.lamplighter.make(lamps, rng.randrange(-2, 3))
            y2 = ll_act(C.lamplighter, h2, x)
            z2 = bs_element_between(C.bs, x, y2, h2[1])
            y3, _ = bs_act(C.bs, z2, x)
            for i in set(y2.overrides) | set(y3.overrides):
                assert y2.peek(i) == y3.peek(i)


def test_shift_distance_is_one(c2, c3):
    for C in (c2, c3):
        for s in range(20):
            x = C.point(derive(100, s))
            assert C.move_distance("ll", (0, 0, 1), x) == 1
            assert C.move_distance("ll", (0, 0, -1), x) == 1
            assert C.move_distance("bs", ((), 1), x) == 1
            assert C.move_distance("bs", ((), -1), x) == 1


def test_linf_direction_sampled_max(c2, c3):
    # sampled maxima agree with the constants: 1 for the shift, <= k-1 lamp
    for C in (c2, c3):
        k = C.k
        lamp = C.lamplighter.make({0: 1}, 0)
        worst_shift = 0
        worst_lamp = 0
        for i in range(5000):
            x = C.point(derive(31, i))
            worst_shift = max(worst_shift, C.move_distance("bs", ((), 1), x))
            worst_lamp = max(worst_lamp, C.move_distance("bs", lamp, x))
        assert worst_shift == 1
        assert worst_lamp <= k - 1


def test_lamp_distance_bounded_exhaustive(c2, c3):
    # the BS distance of a lamp press depends only on the pressed digit:
    # checking every digit value is a complete case analysis
    for C in (c2, c3):
        k = C.k
        lamp_gens = [C.lamplighter.make({0: 1}, 0)]
        if k > 2:
            lamp_gens.append(C.lamplighter.make({0: k - 1}, 0))
        for v in range(k):
            for g in lamp_gens:
                x = C.point(11, {0: v})
                d = C.move_distance("bs", g, x)
                assert 1 <= d <= k - 1, (k, v, g, d)


def test_ll_move_distance_example(c2):
    # carry at 0,1 -> flips at 0,1,2; travel 0 -> 2 -> 0 costs 4
    x = c2.point(9, {0: 1, 1: 1, 2: 0})
    assert c2.move_distance("ll", (1, 0, 0), x) == 7


def test_carry_length_geometric_law(c2, c3):
    N = 15000
    for C in (c2, c3):
        k = C.k
        tail = {1: 0, 2: 0, 3: 0}
        for i in range(N):
            x = C.point(derive(5, i))
            _, changed = bs_act(C.bs, (1, 0, 0), x)
            L = len(changed) - 1
            for t in tail:
                if L >= t:
                    tail[t] += 1
        for t, cnt in tail.items():
            expect = float(k) ** (-t)
            se = math.sqrt(expect * (1 - expect) / N)
            assert abs(cnt / N - expect) <= 5 * se + 1e-3, (k, t, cnt / N, expect)


def test_window_exhausted(c2):
    tight = BsLamplighterCoupling(2, carry_bound=3)
    x = tight.point(1, {i: 1 for i in range(0, 10)})
    with pytest.raises(WindowExhausted):
        bs_act(tight.bs, (1, 0, 0), x, carry_bound=3)


def test_tail_bound_sweep_and_threads(c2):
    reps = c2.tail_bound_sweep((1, 0, 0), [2, 3, 4], 20000, 11)
    for M, rep in reps.items():
        assert rep.passes, (M, rep)
        assert rep.threshold == 3 * (2 * 1 + 2 * M + 3)
    # shift element: distance is constant 1, so freq = 0
    rep = c2.tail_bound_check((0, 0, 1), 2, 2000, 12)
    assert rep.freq == 0.0 and rep.passes
    # worker-pool invariance
    seq = c2.tail_bound_sweep((1, 0, 0), [3], 6000, 13, threads=1)[3]
    par = c2.tail_bound_sweep((1, 0, 0), [3], 6000, 13, threads=4)[3]
    assert seq.freq == par.freq and seq.stderr == par.stderr


def test_side_metric_validation(c2):
    with pytest.raises(UsageError):
        c2.move_distance("nope", (1, 0, 0), c2.point(1))
