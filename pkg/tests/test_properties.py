"""Randomised invariants over small grids."""

import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from posslib import _kernels as K
from posslib import bounds as Bd
from posslib import expfam as E
from posslib.core import DiscretePossibility, Grid, join, leq, normalize_max
from posslib.errors import NonSingletonMode

SETTINGS = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
TOL = 1e-9

# subnormal values lose the relative precision the identities rely on
unit = st.one_of(st.just(0.0), st.floats(1e-250, 1.0))


@st.composite
def possibility(draw, n):
    v = np.array(draw(st.lists(unit, min_size=n, max_size=n)))
    v[draw(st.integers(0, n - 1))] = 1.0
    return v


@st.composite
def problem(draw):
    """A consistent (loss, prior) instance with one candidate."""
    n = draw(st.integers(1, 12))
    grid = Grid.range(n)
    loss = np.array(draw(st.lists(st.one_of(st.floats(0.0, 8.0), st.just(math.inf)), min_size=n, max_size=n)))
    prior = draw(possibility(n))
    assume(np.any(np.isfinite(loss) & (prior > 0)))
    g = draw(possibility(n))
    return grid, Bd.LossOnGrid(grid, loss), DiscretePossibility(grid, prior), DiscretePossibility(grid, g)


def _close(a, b):
    return a == b or abs(a - b) <= TOL


class TestBoundsProperties:
    @SETTINGS
    @given(problem())
    def test_bracket_and_decomposition(self, p):
        _, loss, prior, g = p
        gstar, lz = Bd.maxitive_posterior(loss, prior)
        lo, up = Bd.lower_cbo(g, loss, prior), Bd.upper_cbo(g, loss, prior)
        assert lo <= lz + TOL and up >= lz - TOL
        assert _close(lz - lo, Bd.d_max(g, gstar))
        assert _close(up - lz, Bd.d_max(gstar, g))

    @SETTINGS
    @given(problem())
    def test_characterisation(self, p):
        _, loss, prior, g = p
        gstar, lz = Bd.maxitive_posterior(loss, prior)
        # order up to the same relative tolerance as the bounds (one-ulp ties occur)
        below = bool(np.all(g.values <= gstar.values * math.exp(TOL)))
        above = bool(np.all(g.values >= gstar.values * math.exp(-TOL)))
        assert _close(Bd.lower_cbo(g, loss, prior), lz) == below
        assert _close(Bd.upper_cbo(g, loss, prior), lz) == above

    @SETTINGS
    @given(problem(), st.sampled_from([0.1, 0.5, 0.9]))
    def test_sandwich(self, p, alpha):
        _, loss, prior, g = p
        gstar, _ = Bd.maxitive_posterior(loss, prior)
        s_star = Bd.sandwich_objective(gstar, loss, prior, alpha)
        s_g = Bd.sandwich_objective(g, loss, prior, alpha)
        rhs = alpha * Bd.d_max(gstar, g) + (1 - alpha) * Bd.d_max(g, gstar)
        if math.isinf(rhs):
            assert s_g == math.inf
        else:
            assert s_g - s_star >= rhs - TOL

    @SETTINGS
    @given(problem())
    def test_posterior_is_idempotent(self, p):
        grid, loss, prior, _ = p
        gstar, _ = Bd.maxitive_posterior(loss, prior)
        again, lz = Bd.maxitive_posterior(Bd.LossOnGrid.zero(grid), gstar)
        np.testing.assert_array_equal(again.values, gstar.values)
        assert lz == 0.0

    @SETTINGS
    @given(problem(), st.randoms(use_true_random=False))
    def test_order_invariance(self, p, rnd):
        grid, loss, prior, g = p
        perm = np.array(rnd.sample(range(grid.size), grid.size))
        pg = Grid(grid.points[perm])
        lz = Bd.log_z_max(loss, prior)
        ploss = Bd.LossOnGrid(pg, loss.loss[perm])
        pprior = DiscretePossibility(pg, prior.values[perm])
        pcand = DiscretePossibility(pg, g.values[perm])
        assert Bd.log_z_max(ploss, pprior) == lz
        assert Bd.lower_cbo(pcand, ploss, pprior) == Bd.lower_cbo(g, loss, prior)
        assert Bd.upper_cbo(pcand, ploss, pprior) == Bd.upper_cbo(g, loss, prior)
        np.testing.assert_array_equal(
            Bd.maxitive_posterior(ploss, pprior)[0].values, Bd.maxitive_posterior(loss, prior)[0].values[perm]
        )


class TestCoreProperties:
    @SETTINGS
    @given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0.0, 1e6)))
    def test_normalize_is_idempotent(self, v):
        assume(v.max() > 0)
        grid = Grid.range(v.size)
        f = normalize_max(v, grid)
        np.testing.assert_array_equal(normalize_max(f.values, grid).values, f.values)

    @SETTINGS
    @given(st.integers(1, 10).flatmap(lambda n: st.tuples(possibility(n), possibility(n))))
    def test_join_is_least_upper_bound(self, fg):
        grid = Grid.range(fg[0].size)
        f, g = DiscretePossibility(grid, fg[0]), DiscretePossibility(grid, fg[1])
        h = join(f, g)
        assert leq(f, h) and leq(g, h)
        np.testing.assert_array_equal(join(h, h).values, h.values)


@st.composite
def kernel_data(draw):
    rows, cols = draw(st.integers(1, 6)), draw(st.integers(1, 10))
    h = draw(arrays(np.float64, cols, elements=st.one_of(st.floats(-20, 5), st.just(-np.inf))))
    g = draw(arrays(np.float64, (rows, cols), elements=unit))
    return h, g


@SETTINGS
@given(kernel_data())
def test_backends_bit_identical(data):
    assume(hasattr(K, "lower_rows_nb"))
    h, g = data
    lg = K.safe_log(g)
    np.testing.assert_array_equal(K.lower_rows_np(h, lg), K.lower_rows_nb(h, lg))
    np.testing.assert_array_equal(K.upper_rows_np(h, lg), K.upper_rows_nb(h, lg))
    rev = np.ascontiguousarray(lg[::-1])
    np.testing.assert_array_equal(K.dmax_rows_np(lg, rev), K.dmax_rows_nb(lg, rev))
    np.testing.assert_array_equal(K.leq_rows_np(g, g[::-1], 1e-12), K.leq_rows_nb(g, np.ascontiguousarray(g[::-1]), 1e-12))


class TestBregmanIdentity:
    @SETTINGS
    @given(st.floats(-5, 5), st.floats(-8, 8), st.floats(0.2, 4.0))
    def test_normal(self, lam, theta, s):
        spec = E.make_normal_known_var(s)
        assert abs(-spec.log_possibility([lam], [theta]) - E.family_bregman(spec, [lam], [theta])) <= 1e-9 * (1 + theta**2)

    @SETTINGS
    @given(st.floats(0.05, 9.95), st.floats(-6, 6))
    def test_binomial(self, lam, theta):
        spec = E.make_binomial(10)
        assert abs(-spec.log_possibility([lam], [theta]) - E.family_bregman(spec, [lam], [theta])) <= 1e-9

    @SETTINGS
    @given(st.floats(-2.0, 3.0), st.integers(0, 20))
    def test_poisson_style(self, lam, k):
        spec = E.make_poisson_style(2.5)
        try:
            spec.mode([lam])
        except NonSingletonMode:
            assume(False)
        assert abs(-spec.log_possibility([lam], [k]) - E.family_bregman(spec, [lam], [k])) <= 1e-9

    @SETTINGS
    @given(st.floats(0.1, 10.0), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1))
    def test_bernoulli_style(self, r, l0, l1, k):
        spec = E.make_bernoulli_style(r)
        assume(abs(l0 - l1) > 1e-9)
        lam = [l0, l1]
        assert abs(-spec.log_possibility(lam, [k]) - E.family_bregman(spec, lam, [k])) <= 1e-9
