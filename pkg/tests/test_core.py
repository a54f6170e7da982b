import json
import math
import warnings

import numpy as np
import pytest

from posslib import core
from posslib.core import DiscretePossibility, Grid, JointDiscretePossibility, SmoothPossibility
from posslib.errors import (
    AllZero,
    BadAxis,
    GridMismatch,
    InvalidPossibility,
    NegativeValue,
    NonFinite,
    NotAtMode,
    SingularHessianWarning,
    ZeroMarginal,
)

G2 = Grid([0.0, 1.0])
JOINT = JointDiscretePossibility(G2, Grid([0.0, 1.0], "psi"), [[1.0, 0.5], [0.25, 0.8]])


class TestGrid:
    def test_shapes(self):
        assert G2.size == 2 and G2.dim == 1
        g = Grid([[0, 0], [0, 1], [1, 0]])
        assert g.size == 3 and g.dim == 2
        assert g.point(1) == (0.0, 1.0)

    def test_rejects_duplicates_and_nonfinite(self):
        with pytest.raises(ValueError):
            Grid([0.0, 0.0])
        with pytest.raises(NonFinite):
            Grid([0.0, np.nan])

    def test_points_are_read_only(self):
        with pytest.raises(ValueError):
            G2.points[0] = 3.0

    def test_same_as(self):
        assert G2.same_as(Grid([0.0, 1.0]))
        assert not G2.same_as(Grid([0.0, 2.0]))


class TestDiscretePossibility:
    def test_requires_unit_max(self):
        with pytest.raises(InvalidPossibility):
            DiscretePossibility(G2, [0.5, 0.5])

    def test_negative_and_nan(self):
        with pytest.raises(NegativeValue):
            DiscretePossibility(G2, [1.0, -0.1])
        with pytest.raises(NonFinite):
            DiscretePossibility(G2, [1.0, np.nan])

    def test_tiny_excess_is_clipped(self):
        f = DiscretePossibility(G2, [1.0 + 5e-13, 0.5])
        assert f.values[0] == 1.0

    def test_log_values(self):
        f = DiscretePossibility(G2, [1.0, 0.0])
        np.testing.assert_array_equal(f.log_values, [0.0, -np.inf])

    def test_json_round_trip(self):
        f = DiscretePossibility(Grid([0.1, 0.2, 0.3]), [0.3, 1.0, 1 / 3])
        g = DiscretePossibility.from_json(f.to_json())
        np.testing.assert_array_equal(g.values, f.values)
        assert g.grid.same_as(f.grid)

    def test_csv_round_trip_is_exact(self):
        f = DiscretePossibility(Grid([0.1, 0.2, 0.3]), [0.3, 1.0, 1 / 3])
        text = f.to_csv()
        assert text.startswith("theta,value\n") and "\r" not in text
        g = DiscretePossibility.from_csv(text)
        np.testing.assert_array_equal(g.values, f.values)

    def test_csv_vector_grid(self):
        f = DiscretePossibility(Grid([[0, 0], [1, 2]]), [1.0, 0.25])
        g = DiscretePossibility.from_csv(f.to_csv())
        np.testing.assert_array_equal(g.grid.points, f.grid.points)

    def test_save_load(self, tmp_path):
        f = DiscretePossibility(G2, [1.0, 0.5])
        for name in ("f.csv", "f.json"):
            f.save(tmp_path / name)
            assert DiscretePossibility.load(tmp_path / name).allclose(f, atol=0.0)
        json.loads((tmp_path / "f.json").read_text())


class TestNormalizeMax:
    def test_examples(self):
        np.testing.assert_array_equal(core.normalize_max([2.0, 1.0], G2).values, [1.0, 0.5])
        np.testing.assert_array_equal(core.normalize_max([1.0], Grid([0.0])).values, [1.0])

    def test_errors(self):
        with pytest.raises(AllZero):
            core.normalize_max([0.0, 0.0], G2)
        with pytest.raises(NegativeValue):
            core.normalize_max([1.0, -1.0], G2)
        with pytest.raises(NonFinite):
            core.normalize_max([1.0, np.inf], G2)


class TestMarginalCondition:
    def test_marginalize_both_axes(self):
        np.testing.assert_array_equal(core.marginalize(JOINT, "theta").values, [1.0, 0.8])
        np.testing.assert_array_equal(core.marginalize(JOINT, 1).values, [1.0, 0.8])

    def test_single_psi_copies_slice(self):
        j = JointDiscretePossibility(G2, Grid([5.0], "psi"), [[0.3], [1.0]])
        np.testing.assert_array_equal(core.marginalize(j, 0).values, [0.3, 1.0])

    def test_bad_axis(self):
        with pytest.raises(BadAxis):
            core.marginalize(JOINT, "phi")

    def test_condition(self):
        np.testing.assert_allclose(core.condition(JOINT, "psi", 1).values, [0.625, 1.0], rtol=0, atol=1e-15)
        np.testing.assert_array_equal(core.condition(JOINT, "psi", 0).values, [1.0, 0.25])

    def test_zero_marginal(self):
        j = JointDiscretePossibility(G2, Grid([0.0, 1.0], "psi"), [[1.0, 0.0], [0.5, 0.0]])
        with pytest.raises(ZeroMarginal):
            core.condition(j, "psi", 1)


class TestModes:
    def test_expectation(self):
        m = core.poss_expectation(DiscretePossibility(G2, [1.0, 0.5]))
        assert m.members == (0,) and m.is_singleton
        m = core.poss_expectation(DiscretePossibility(G2, [1.0, 1.0]))
        assert m.members == (0, 1) and not m.is_singleton
        g = Grid.range(5)
        assert core.poss_expectation(DiscretePossibility.uniform(g)).members == tuple(range(5))

    def test_transform_mode(self):
        assert core.transform_mode(DiscretePossibility(G2, [1.0, 0.5]), lambda t: 3 * t).as_set() == {0.0}
        assert core.transform_mode(DiscretePossibility(G2, [1.0, 1.0]), lambda t: t**2).as_set() == {0.0, 1.0}

    def test_transform_identity_matches_expectation(self):
        f = DiscretePossibility(Grid([0.0, 1.0, 2.0]), [1.0, 0.2, 1.0])
        assert core.transform_mode(f, lambda t: t).as_set() == core.poss_expectation(f).as_set()


class TestPrecision:
    def test_normal_analytic(self):
        S = np.array([[2.0, 0.3], [0.3, 0.5]])
        P = core.precision_at_mode(core.normal_possibility([1.0, -1.0], S), [1.0, -1.0])
        np.testing.assert_allclose(P, np.linalg.inv(S), atol=1e-12)

    def test_scalar_standard_normal(self):
        f = SmoothPossibility(lambda t: -0.5 * float(t[0] ** 2))
        np.testing.assert_allclose(core.precision_at_mode(f, 0.0), [[1.0]], atol=1e-6)

    def test_quartic_flags_singular(self):
        f = SmoothPossibility(lambda t: -float(t[0] ** 4))
        with pytest.warns(SingularHessianWarning):
            P = core.precision_at_mode(f, 0.0)
        np.testing.assert_allclose(P, [[0.0]], atol=1e-6)

    def test_not_at_mode(self):
        with pytest.raises(NotAtMode):
            core.precision_at_mode(core.normal_possibility(0.0, 1.0), 0.5)

    def test_smooth_possibility_value_guard(self):
        with pytest.raises(InvalidPossibility):
            SmoothPossibility(lambda t: 1.0)(0.0)
        assert math.isclose(core.normal_possibility(0.0, 1.0)(1.0), math.exp(-0.5))


class TestOrder:
    def test_leq(self):
        a = DiscretePossibility(G2, [1.0, 0.25])
        b = DiscretePossibility(G2, [1.0, 0.5])
        c = DiscretePossibility(G2, [0.5, 1.0])
        assert core.leq(a, b) and core.leq(a, a)
        assert not core.leq(b, c) and not core.leq(c, b)

    def test_join(self):
        a = DiscretePossibility(G2, [1.0, 0.25])
        c = DiscretePossibility(G2, [0.5, 1.0])
        np.testing.assert_array_equal(core.join(a, c).values, [1.0, 1.0])

    def test_grid_mismatch(self):
        a = DiscretePossibility(G2, [1.0, 0.25])
        b = DiscretePossibility(Grid([0.0, 2.0]), [1.0, 0.25])
        with pytest.raises(GridMismatch):
            core.leq(a, b)
        with pytest.raises(GridMismatch):
            core.join(a, b)


def test_no_warnings_on_zero_logs():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        DiscretePossibility(G2, [1.0, 0.0]).log_values
