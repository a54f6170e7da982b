import math
import warnings

import numpy as np
import pytest

from posslib import expfam as E
from posslib._solve import SolveConfig
from posslib.errors import (
    BadParameter,
    ConsistencyError,
    DomainError,
    NoMle,
    NonSingletonMode,
    OutsideHullWarning,
    Unbounded,
)

NORMAL = E.make_normal_known_var(1.0)
BIN4 = E.make_binomial(4)
BIN10 = E.make_binomial(10)


class TestLogPartition:
    def test_bernoulli_style_natural_parameter(self):
        for r in (0.3, 1.0, 4.0):
            spec = E.make_bernoulli_style(r)
            assert E.log_partition(spec, spec.natural_param) == 0.0

    @pytest.mark.parametrize("lam", [-2.0, 0.0, 1.3])
    def test_normal(self, lam):
        assert E.log_partition(NORMAL, [lam]) == pytest.approx(lam**2 / 2, abs=1e-15)
        assert E.numeric_log_partition(NORMAL, [lam]) == pytest.approx(lam**2 / 2, abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.5, 2.5, 7.0])
    def test_poisson_style(self, alpha):
        spec = E.make_poisson_style(alpha)
        lam = math.log(alpha)
        k = math.floor(math.exp(lam))
        assert E.log_partition(spec, [lam]) == pytest.approx(k * lam - math.lgamma(k + 1), abs=1e-13)
        assert E.numeric_log_partition(spec, [lam]) == pytest.approx(E.log_partition(spec, [lam]), abs=1e-12)

    def test_binomial_closed_vs_numeric(self):
        for lam in (0.5, 2.0, 3.7):
            assert E.numeric_log_partition(BIN4, [lam]) == pytest.approx(E.log_partition(BIN4, [lam]), abs=1e-9)

    def test_binomial_boundary_extension(self):
        assert E.log_partition(BIN4, [0.0]) == 0.0
        assert E.log_partition(BIN4, [4.0]) == 0.0

    def test_binomial_outside_is_unbounded(self):
        with pytest.raises(Unbounded):
            E.log_partition(BIN4, [5.0])
        with pytest.raises(Unbounded):
            E.numeric_log_partition(BIN4, [5.0])


class TestLegendre:
    def test_quadratic(self):
        A = lambda t: 0.5 * float(t @ t)  # noqa: E731
        r = E.legendre(A, [3.0], E.Domain.real(), grad=lambda t: t, hess=lambda t: np.eye(1))
        assert r.value == pytest.approx(4.5, abs=1e-12) and r.argmax[0] == pytest.approx(3.0, abs=1e-12)
        r = E.legendre(A, [0.0], E.Domain.real(), grad=lambda t: t, hess=lambda t: np.eye(1))
        assert r.value == pytest.approx(0.0, abs=1e-15) and r.argmax[0] == pytest.approx(0.0, abs=1e-12)

    def test_quadratic_finite_differences(self):
        r = E.legendre(lambda t: 0.5 * float(t @ t), [3.0], E.Domain.real())
        assert r.value == pytest.approx(4.5, abs=1e-12) and r.argmax[0] == pytest.approx(3.0, abs=1e-8)

    def test_binomial(self):
        r = E.legendre(lambda t: 4 * float(np.logaddexp(0, t[0])), [2.0], E.Domain.real())
        assert r.value == pytest.approx(4 * math.log(0.5), abs=1e-10)
        assert r.argmax[0] == pytest.approx(0.0, abs=1e-8)
        assert r.converged

    def test_discrete(self):
        r = E.legendre(lambda t: math.lgamma(t[0] + 1), [math.log(2.5)], E.Domain.integers(0, 30))
        assert r.argmax[0] == 2.0

    def test_unbounded(self):
        with pytest.raises(Unbounded):
            E.legendre(lambda t: float(t[0]), [2.0], E.Domain.real())

    def test_two_dimensional(self):
        S = np.array([[2.0, 0.5], [0.5, 1.0]])
        lam = np.array([0.3, -1.2])
        r = E.legendre(lambda t: 0.5 * float(t @ S @ t), lam, E.Domain.real(2))
        assert r.value == pytest.approx(0.5 * lam @ np.linalg.solve(S, lam), abs=1e-10)


class TestConjugateEvaluation:
    def test_normal_member(self):
        m = E.ConjugateMember([2.0], 1.0, NORMAL)
        assert m(2.0) == pytest.approx(1.0, abs=1e-15)
        assert m(3.0) == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_nu_zero_is_uninformative(self):
        for spec in (NORMAL, BIN4, E.make_poisson_style(2.5)):
            m = E.ConjugateMember(np.ones(spec.dim_lambda), 0.0, spec)
            np.testing.assert_array_equal(m([0.0, 1.0, 3.0]), 1.0)

    def test_domain_error(self):
        m = E.ConjugateMember([math.log(2.5)], 1.0, E.make_poisson_style(2.5))
        with pytest.raises(DomainError):
            m(1.5)
        with pytest.raises(DomainError):
            m(-1.0)

    def test_bad_nu(self):
        with pytest.raises(BadParameter):
            E.ConjugateMember([0.0], -1.0, NORMAL)

    def test_round_trip(self):
        m = E.ConjugateMember([3.0], 2.0, BIN10)
        m2 = E.ConjugateMember.from_dict(m.to_dict())
        assert m2.nu == 2.0 and m2.spec.params == {"n": 10}
        assert m2(0.4) == m(0.4)

    @pytest.mark.parametrize("make", [lambda: NORMAL, lambda: BIN10, lambda: E.make_poisson_style(3.3)])
    def test_member_is_max_normalised(self, make):
        spec = make()
        lam = [2.0] if spec.name != "poisson_style" else spec.natural_param
        pts = spec.theta_domain.enumerate() if spec.theta_domain.is_discrete else np.linspace(-8, 8, 160001)
        vals = E.ConjugateMember(lam, 1.0, spec)(pts)
        assert vals.max() <= 1 + 1e-12
        assert vals.max() == pytest.approx(1.0, abs=1e-7)


class TestBuiltins:
    def test_poisson_style_spot_values(self):
        spec = E.make_poisson_style(2.5)
        f = lambda k: spec.possibility(spec.natural_param, float(k))  # noqa: E731
        assert f(2) == pytest.approx(1.0, abs=1e-12)
        assert f(3) == pytest.approx(5 / 6, abs=1e-12)
        assert f(1) == pytest.approx(0.8, abs=1e-12)

    def test_poisson_style_truncation(self):
        spec = E.make_poisson_style(0.5)
        tmax = spec.params["theta_max"]
        assert tmax >= 10
        assert spec.possibility(spec.natural_param, float(tmax)) < 1e-15

    def test_poisson_style_tie(self):
        spec = E.make_poisson_style(3.0)
        with pytest.raises(NonSingletonMode):
            spec.mode(spec.natural_param)

    def test_bernoulli_style_params(self):
        assert E.bernoulli_style_params(0.5) == (0.5, 1.0)
        assert E.bernoulli_style_params(2.0) == (1.0, 0.5)
        spec = E.make_bernoulli_style(0.5)
        np.testing.assert_allclose(spec.possibility(spec.natural_param, [0.0, 1.0]), [0.5, 1.0], atol=1e-15)

    def test_bernoulli_style_tie(self):
        with pytest.raises(NonSingletonMode):
            E.make_bernoulli_style(1.0).mode([0.0, 0.0])

    def test_normal_base_has_no_constant(self):
        assert NORMAL.B(0.0) == 0.0 and NORMAL.B(2.0) == 2.0

    @pytest.mark.parametrize(
        "make, bad",
        [(E.make_binomial, 0), (E.make_binomial, 2.5), (E.make_poisson_style, 0.0),
         (E.make_bernoulli_style, -1.0), (E.make_normal_known_var, -1.0),
         (E.make_normal_known_var, [[1.0, 2.0], [0.0, 1.0]])],
    )
    def test_bad_parameters(self, make, bad):
        with pytest.raises(BadParameter):
            make(bad)

    def test_family_from_config(self):
        spec = E.family_from_config({"family": "binomial", "params": {"n": 5}})
        assert spec.name == "binomial" and spec.params["n"] == 5
        with pytest.raises(BadParameter):
            E.family_from_config({"family": "gamma"})
        with pytest.raises(BadParameter):
            E.family_from_config({"family": "binomial", "params": {}})


class TestBregman:
    def test_quadratic(self):
        A = lambda t: 0.5 * float(t @ t)  # noqa: E731
        assert E.bregman(A, [1.0], [0.0]) == pytest.approx(0.5, abs=1e-10)
        assert E.bregman(A, [0.7], [0.7], grad=lambda t: t) == 0.0

    def test_binomial(self):
        A = lambda t: 4 * float(np.logaddexp(0, t[0]))  # noqa: E731
        # grad A(0) = 4 * sigmoid(0) = 2
        expected = 4 * (math.log(1 + math.e) - math.log(2) - 0.5)
        assert E.bregman(A, [1.0], [0.0], grad=lambda t: 4 / (1 + np.exp(-t))) == pytest.approx(expected, abs=1e-14)
        assert E.bregman(A, [1.0], [0.0]) == pytest.approx(expected, abs=1e-8)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            E.bregman(lambda t: math.inf if t[0] < 0 else 0.0, [-1.0], [1.0], subgrad=[0.0])


class TestUpdates:
    def test_posterior_from_likelihood_normal(self):
        m = E.posterior_from_likelihood(NORMAL, [0.7])
        assert m.nu == 1.0 and m.lam[0] == 0.7
        assert NORMAL.mode(m.lam)[0] == pytest.approx(0.7)

    def test_posterior_from_likelihood_binomial(self):
        m = E.posterior_from_likelihood(BIN10, [7.0])
        assert BIN10.mode(m.lam)[0] == pytest.approx(math.log(7 / 3), abs=1e-15)
        with pytest.raises(NoMle):
            E.posterior_from_likelihood(BIN10, [10.0])
        with pytest.raises(NoMle):
            E.posterior_from_likelihood(BIN10, [0.0])

    def test_bernoulli_mle_point(self):
        spec = E.make_bernoulli_style(0.25)
        m = E.posterior_from_likelihood(spec, spec.natural_param)
        assert m(spec.mode(m.lam)) == 1.0

    def test_update_examples(self):
        m = E.conjugate_update(E.ConjugateMember([5.0], 0.0, NORMAL), [0.3])
        assert (m.lam[0], m.nu) == (0.3, 1.0)
        m = E.conjugate_update(E.ConjugateMember([0.2], 1.0, NORMAL), [0.8])
        assert m.lam[0] == pytest.approx(0.5, abs=1e-15) and m.nu == 2.0

    def test_sequential_updates_average(self):
        m = E.ConjugateMember([9.0], 0.0, NORMAL)
        ts = [0.4, -1.1, 2.5]
        for t in ts:
            m = E.conjugate_update(m, [t])
        assert m.lam[0] == pytest.approx(sum(ts) / 3, abs=1e-15) and m.nu == 3.0

    def test_order_invariance(self):
        rng = np.random.default_rng(4)
        ts = rng.uniform(0, 10, 6)
        results = []
        for perm in (ts, ts[::-1], rng.permutation(ts)):
            m = E.ConjugateMember([3.0], 0.5, BIN10)
            for t in perm:
                m = E.conjugate_update(m, [t])
            results.append((m.lam[0], m.nu))
        for lam, nu in results[1:]:
            assert lam == pytest.approx(results[0][0], abs=1e-12) and nu == results[0][1]

    def test_outside_hull_warns(self):
        with pytest.warns(OutsideHullWarning):
            E.conjugate_update(E.ConjugateMember([3.0], 1.0, BIN10), [11.0])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            E.conjugate_update(E.ConjugateMember([3.0], 1.0, BIN10), [10.0])


class TestDuality:
    def test_normal_dual_closed_form(self):
        theta = 0.8
        f = E.dual_member(E.ConjugateMember([0.0], 1.0, NORMAL), [theta])
        lam = np.linspace(-4, 4, 41)
        np.testing.assert_allclose(f(lam), np.exp(-0.5 * (lam - theta) ** 2), atol=1e-15)

    def test_dual_mode(self):
        theta = -0.6
        f = E.dual_member(E.ConjugateMember([5.0], 1.0, BIN10), [theta])
        peak = 10 / (1 + math.exp(-theta))
        assert f(peak) == pytest.approx(1.0, abs=1e-12)
        assert np.max(f(np.linspace(0, 10, 1001))) <= 1 + 1e-12

    def test_requires_nu_one(self):
        with pytest.raises(BadParameter):
            E.dual_member(E.ConjugateMember([0.0], 2.0, NORMAL), [0.0])

    def test_power_closure(self):
        for spec, lam, theta in ((NORMAL, [1.3], [0.4]), (BIN10, [3.0], [0.4]),
                                 (E.make_poisson_style(2.5), [math.log(2.5)], [3.0])):
            m = E.ConjugateMember(lam, 2.5, spec)
            assert E.power_member_log(m, theta) == pytest.approx(2.5 * spec.log_possibility(lam, theta), abs=1e-9)


class TestModeAndPrecision:
    def test_normal_matrix(self):
        S = np.array([[2.0, 0.4], [0.4, 1.0]])
        spec = E.make_normal_known_var(S)
        lam = np.array([0.5, -0.2])
        mode, prec = E.mode_and_precision(E.ConjugateMember(lam, 1.0, spec))
        np.testing.assert_allclose(mode, np.linalg.solve(S, lam), atol=1e-12)
        np.testing.assert_allclose(prec, S, atol=1e-12)

    def test_binomial(self):
        mode, prec = E.mode_and_precision(E.ConjugateMember([2.0], 1.0, BIN4))
        assert mode[0] == pytest.approx(0.0, abs=1e-15)
        assert prec[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_discount_scales_precision(self):
        _, prec = E.mode_and_precision(E.ConjugateMember([2.0], 3.0, BIN4))
        assert prec[0, 0] == pytest.approx(3.0)

    def test_discrete_family(self):
        spec = E.make_poisson_style(2.5)
        with pytest.raises(DomainError):
            E.mode_and_precision(E.ConjugateMember(spec.natural_param, 1.0, spec))

    def test_inconsistent_closed_form_detected(self):
        base = BIN4
        broken = E.ExpFamilySpec(**{**base.__dict__, "mode_map": lambda lam: np.array([0.1])})
        with pytest.raises(ConsistencyError):
            E.mode_and_precision(E.ConjugateMember([2.0], 1.0, broken))

    def test_numeric_route_without_closed_forms(self):
        numeric = E.ExpFamilySpec(
            name="normal_numeric",
            stat=lambda p: p,
            base=lambda p: 0.5 * p[:, 0] ** 2,
            theta_domain=E.Domain.real(),
            lambda_domain=E.Domain.real(),
            solve=SolveConfig(),
        )
        mode, prec = E.mode_and_precision(E.ConjugateMember([1.5], 1.0, numeric))
        assert mode[0] == pytest.approx(1.5, abs=1e-8)
        assert prec[0, 0] == pytest.approx(1.0, abs=1e-5)


class TestDomain:
    def test_contains(self):
        assert E.Domain.integers(0, 5).contains([[2.0]])
        assert not E.Domain.integers(0, 5).contains([[2.5]])
        assert E.Domain.finite([0, 1]).contains([[1.0]])
        assert not E.Domain.box(0, 1).contains([[1.5]])
        assert E.Domain.box(0, 1).interior([0.5]) and not E.Domain.box(0, 1).interior([1.0])

    def test_enumerate_box_fails(self):
        with pytest.raises(DomainError):
            E.Domain.real().enumerate()
