import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urnlab import (
    Family,
    LimitKind,
    Normalization,
    classify,
    euler_ratio,
    new_spec,
    pi_n,
    predict,
)

TWO = [[0.7, 0.3], [0.4, 0.6]]


def rows_by_label(klass):
    return {r.label: r for r in predict(klass)}


def test_pi_n_frozen_values():
    assert pi_n(0.5, 2) == 1.875
    assert pi_n(0.0, 17) == 1.0
    for n in (1, 2, 10, 100):
        assert pi_n(1.0, n) == pytest.approx(n + 1, rel=1e-15)
    assert pi_n(0.3, 0) == 1.0
    with pytest.raises(ValueError):
        pi_n(-1.0, 5)


@given(a=st.floats(-0.99, 3.0), n=st.integers(1, 999))
def test_pi_n_satisfies_its_recurrence_bitwise(a, n):
    # within the exact-product range the recurrence holds with no rounding slack
    assert pi_n(a, n) == pi_n(a, n - 1) * (1.0 + a / n)


def test_pi_n_product_and_log_paths_agree():
    for a in (-0.5, 0.25, 0.9):
        lo = pi_n(a, 1000)
        hi = pi_n(a, 1001)
        assert hi == pytest.approx(lo * (1.0 + a / 1001), rel=1e-12)


def test_euler_ratio_approaches_one():
    for a in (-0.5, 0.3, 0.5, 0.9):
        assert abs(euler_ratio(a, 10**6) - 1.0) < 1e-3
    # convergence is monotone-ish in n: further out is closer
    assert abs(euler_ratio(0.9, 10**6) - 1.0) < abs(euler_ratio(0.9, 10**3) - 1.0)


def test_normalization_values_and_labels():
    n = 10**4
    assert Normalization.mass().at(n) == n + 1
    assert Normalization.power(0.5).at(n) == pytest.approx(100.0)
    assert Normalization.sqrt_n_log_n().at(n) == pytest.approx(
        math.sqrt(n * math.log(n))
    )
    assert Normalization.power_sqrt_log(0.5).at(n) == pytest.approx(
        math.sqrt(100.0 * math.log(n))
    )
    assert Normalization.power_log(0.5).at(n) == pytest.approx(100.0 * math.log(n))
    assert str(Normalization.mass()) == "n+1"
    assert str(Normalization.power(0.5)) == "n^0.5"
    # undefined points come back as nan, vectorized
    vals = Normalization.power_log(0.5).at(np.array([0, 1, 4]))
    assert np.isnan(vals[:2]).all() and np.isfinite(vals[2])


def test_two_color_prediction_frozen():
    rows = rows_by_label(classify(new_spec(TWO, [4 / 7, 3 / 7])))
    fluct = rows["fluct"]
    assert fluct.limit_kind is LimitKind.NORMAL
    # a^2 pi.xi^2 / (1 - 2a) with a = 0.3, pi = (4/7, 3/7), xi = (0.75, -1)
    assert fluct.variance == pytest.approx(0.16875)
    assert fluct.initial_value == pytest.approx(0.0, abs=1e-12)
    assert fluct.martingale_eigenvalue == pytest.approx(0.3)
    assert rows["mass"].limit_kind is LimitKind.DETERMINISTIC_CONSTANT


def test_two_color_boundary_and_as_regimes():
    half = rows_by_label(classify(new_spec([[0.75, 0.25], [0.25, 0.75]], [0.5, 0.5])))
    assert half["fluct"].normalization.kind == "sqrt_n_log_n"
    assert half["fluct"].variance == pytest.approx(0.25 * 1.0)
    strong = rows_by_label(classify(new_spec([[0.9, 0.1], [0.1, 0.9]], [0.5, 0.5])))
    assert strong["fluct"].limit_kind is LimitKind.AS_RANDOM_VARIABLE
    assert strong["fluct"].normalization.exponent == pytest.approx(0.8)
    assert not strong["fluct"].positive_limit


def test_zero_eigenvalue_track_is_exactly_constant():
    rows = rows_by_label(classify(new_spec([[0.5, 0.5], [0.5, 0.5]], [0.25, 0.75])))
    fluct = rows["fluct"]
    assert fluct.limit_kind is LimitKind.EXACTLY_CONSTANT_TRACK
    assert fluct.initial_value == pytest.approx(-0.5)
    assert fluct.martingale_eigenvalue == 0.0


def test_triangular_minor_prediction():
    rows = rows_by_label(classify(new_spec([[0.5, 0.5], [0, 1]], [0.5, 0.5])))
    minor = rows["minor"]
    assert minor.limit_kind is LimitKind.AS_RANDOM_VARIABLE
    assert minor.positive_limit
    assert minor.normalization.exponent == pytest.approx(0.5)
    assert minor.martingale_eigenvalue == pytest.approx(0.5)


def test_one_dominant_mixture_coefficients():
    # lam < 1/2: s lam^2 / (1 - 2 lam) * pi_Q.xi^2, here s=0.5 lam=0.25
    m = [[0.3125, 0.1875, 0.5], [0.1875, 0.3125, 0.5], [0.0, 0.0, 1.0]]
    rows = rows_by_label(classify(new_spec(m, [0.25, 0.25, 0.5])))
    sub = rows["sub_fluct"]
    assert sub.limit_kind is LimitKind.NORMAL_MIXTURE
    assert sub.mixing_label == "sub_total"
    assert sub.mixture_coefficient == pytest.approx(0.5 * 0.0625 / 0.5 * 1.0)
    assert sub.normalization.exponent == pytest.approx(0.25)
    # boundary lam = 1/2: s^2 lam^2 pi_Q.xi^2 at sqrt(n^s log n)
    m2 = [[0.375, 0.125, 0.5], [0.125, 0.375, 0.5], [0.0, 0.0, 1.0]]
    rows2 = rows_by_label(classify(new_spec(m2, [0.25, 0.25, 0.5])))
    sub2 = rows2["sub_fluct"]
    assert sub2.mixture_coefficient == pytest.approx(0.0625)
    assert sub2.normalization.kind == "power_sqrt_log"
    # lam > 1/2: almost sure at n^(s lam); here lam = 0.8 so the exponent is 0.4
    m3 = [[0.45, 0.05, 0.5], [0.05, 0.45, 0.5], [0.0, 0.0, 1.0]]
    rows3 = rows_by_label(classify(new_spec(m3, [0.25, 0.25, 0.5])))
    assert rows3["sub_fluct"].limit_kind is LimitKind.AS_RANDOM_VARIABLE
    assert rows3["sub_fluct"].normalization.exponent == pytest.approx(0.4)
    assert not rows3["sub_fluct"].positive_limit


def test_two_dominant_diag_boundary_variance():
    rows = rows_by_label(
        classify(new_spec([[0.5, 0.25, 0.25], [0, 0.75, 0.25], [0, 0.25, 0.75]],
                          [0.5, 0.25, 0.25]))
    )
    dom = rows["dom_fluct"]
    assert dom.limit_kind is LimitKind.NORMAL
    assert dom.normalization.kind == "sqrt_n_log_n"
    assert dom.variance == pytest.approx(0.25)


def test_three_jordan_regimes():
    # s = 0.5 >= 1/2: almost-sure at n^s log n, shares the minor limit
    m = [[0.5, 0.45, 0.05], [0, 0.75, 0.25], [0, 0.25, 0.75]]
    rows = rows_by_label(classify(new_spec(m, [0.5, 0.25, 0.25])))
    dom = rows["dom_fluct"]
    assert dom.limit_kind is LimitKind.AS_RANDOM_VARIABLE
    assert dom.normalization.kind == "power_log"
    assert dom.co_limit_label == "minor"
    assert dom.positive_limit
    # s < 1/2: plain CLT at sqrt(n), variance from the pinned lower half
    m2 = [[0.4, 0.54, 0.06], [0, 0.7, 0.3], [0, 0.3, 0.7]]
    rows2 = rows_by_label(classify(new_spec(m2, [0.5, 0.25, 0.25])))
    dom2 = rows2["dom_fluct"]
    assert dom2.limit_kind is LimitKind.NORMAL
    assert dom2.normalization.exponent == pytest.approx(0.5)
    # kappa = (1-s) p.xi = 0.6 * 0.8, t2 = (0, xi/kappa), var = s^2/(1-2s) pi.t2^2
    kappa = 0.6 * 0.8
    expected = 0.4**2 / (1 - 0.8) * (0.5 * (1 / kappa) ** 2 + 0.5 * (1 / kappa) ** 2)
    assert dom2.variance == pytest.approx(expected)


def test_four_jordan_zero_beta_mixture():
    m = [
        [0.25, 0.25, 0.375, 0.125],
        [0.25, 0.25, 0.125, 0.375],
        [0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.5, 0.5],
    ]
    rows = rows_by_label(classify(new_spec(m, [0.25] * 4)))
    dom = rows["dom_fluct"]
    assert dom.limit_kind is LimitKind.NORMAL_MIXTURE
    assert dom.mixture_coefficient == pytest.approx(2.0)
    assert dom.mixing_label == "sub_total"
    assert dom.normalization.exponent == pytest.approx(0.25)
    assert rows["sub_fluct"].limit_kind is LimitKind.EXACTLY_CONSTANT_TRACK


def test_four_diag_zero_beta_constant():
    m = [
        [0.375, 0.125, 0.25, 0.25],
        [0.125, 0.375, 0.25, 0.25],
        [0.0, 0.0, 0.5, 0.5],
        [0.0, 0.0, 0.5, 0.5],
    ]
    rows = rows_by_label(classify(new_spec(m, [0.25, 0.25, 0.375, 0.125])))
    dom = rows["dom_fluct"]
    assert dom.limit_kind is LimitKind.EXACTLY_CONSTANT_TRACK
    assert dom.initial_value == pytest.approx(0.25)


def test_identity_predictions():
    rows = predict(classify(new_spec([[1, 0], [0, 1]], [0.25, 0.75])))
    assert len(rows) == 2
    share = rows[1]
    assert share.label == "share_0"
    assert share.limit_kind is LimitKind.AS_RANDOM_VARIABLE
    assert share.limit_mean == pytest.approx(0.25)
    # Dirichlet-style limit: variance p(1-p)/(m0+1) with unit starting mass
    assert share.limit_variance == pytest.approx(0.25 * 0.75 / 2)
    zero = predict(classify(new_spec([[1, 0], [0, 1]], [0.0, 1.0])))[1]
    assert zero.limit_kind is LimitKind.EXACTLY_CONSTANT_TRACK
    assert zero.martingale_eigenvalue == 1.0


def test_prediction_count_and_span():
    cases = [
        ([[1, 0], [0, 1]], [0.25, 0.75]),
        (TWO, [0.5, 0.5]),
        ([[0.5, 0.5], [0, 1]], [0.5, 0.5]),
        ([[0.375, 0.125, 0.5], [0.125, 0.375, 0.5], [0, 0, 1]], [0.25, 0.25, 0.5]),
        ([[0.5, 0.45, 0.05], [0, 0.75, 0.25], [0, 0.25, 0.75]], [0.5, 0.25, 0.25]),
        (
            [
                [0.25, 0.25, 0.375, 0.125],
                [0.25, 0.25, 0.125, 0.375],
                [0, 0, 0.5, 0.5],
                [0, 0, 0.5, 0.5],
            ],
            [0.25] * 4,
        ),
    ]
    for matrix, initial in cases:
        spec = new_spec(matrix, initial)
        rows = predict(classify(spec))
        assert len(rows) == spec.colors
        span = np.stack([r.vector for r in rows])
        assert abs(np.linalg.det(span)) > 1e-10
        labels = [r.label for r in rows]
        assert len(set(labels)) == len(labels)


def test_predict_refuses_unsupported():
    k = classify(new_spec([[0.2, 0.8, 0.0], [0.3, 0.2, 0.5], [0.1, 0.2, 0.7]],
                          [1 / 3] * 3))
    assert k.family is Family.UNSUPPORTED
    with pytest.raises(ValueError):
        predict(k)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.02, 0.97))
def test_jordan_variance_continuous_in_regime_interior(lam):
    # the dispatch on s vs 1/2 must use the same pinned vector either side
    s = 0.5 * lam + 0.2
    if abs(s - 0.5) < 0.02:
        return
    p = (0.75, 0.25)
    m = np.zeros((3, 3))
    m[0, 0] = s
    m[0, 1:] = (1 - s) * np.array(p)
    # symmetric dominant block with secondary eigenvalue exactly s
    m[1, 1] = m[2, 2] = (1 + s) / 2
    m[1, 2] = m[2, 1] = 1 - (1 + s) / 2
    k = classify(new_spec(m, [0.5, 0.25, 0.25]))
    assert k.family is Family.THREE_TWO_DOMINANT_JORDAN
    dom = {r.label: r for r in predict(k)}["dom_fluct"]
    if s < 0.5:
        assert dom.limit_kind is LimitKind.NORMAL
        assert dom.variance > 0
    else:
        assert dom.limit_kind is LimitKind.AS_RANDOM_VARIABLE
        assert dom.co_limit_label == "minor"
