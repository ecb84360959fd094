import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dam_lab.core import (
    Family,
    Formulation,
    InteractionSpec,
    NetworkConfig,
    Precision,
    as_memories,
    as_state,
    derive_alpha,
    derive_beta,
    homogeneity_degree,
    int_power,
    interaction_eval,
)

POLY = InteractionSpec(Family.POLYNOMIAL, 3)


@pytest.mark.parametrize("spec,x,expected", [
    (InteractionSpec("polynomial", 3), 2.0, 8.0),
    (InteractionSpec("rectified", 3), -2.0, 0.0),
    (InteractionSpec("leaky", 2, 0.01), -4.0, 0.04),
    (InteractionSpec("exponential"), 0.0, 1.0),
    (InteractionSpec("polynomial", 2), -3.0, 9.0),
    (InteractionSpec("rectified", 4), 2.0, 16.0),
])
def test_interaction_examples(spec, x, expected):
    assert interaction_eval(spec, x) == pytest.approx(expected, rel=1e-15)


def test_int_power_matches_loop_product():
    rng = np.random.default_rng(1)
    x = rng.uniform(-3, 3, 200)
    for n in range(0, 25):
        ref = np.ones_like(x)
        for _ in range(n):
            ref = ref * x
        np.testing.assert_allclose(int_power(x, n), ref, rtol=1e-13)


def test_int_power_keeps_single_precision():
    out = int_power(np.float32(200.0), 30)
    assert out.dtype == np.float32 and np.isinf(out)
    assert np.isfinite(int_power(np.float64(200.0), 30))


def test_precision_threads_through_eval():
    y = interaction_eval(InteractionSpec("polynomial", 30), np.array([200.0]), Precision.SINGLE)
    assert y.dtype == np.float32 and np.isinf(y[0])


@pytest.mark.parametrize("family,vertex,expected", [
    ("polynomial", 5, 5), ("rectified", 7, 7), ("leaky", 3, None), ("exponential", 2, None)])
def test_homogeneity_degree(family, vertex, expected):
    assert homogeneity_degree(InteractionSpec(family, vertex)) == expected


@settings(max_examples=300, deadline=None)
@given(a=st.floats(1e-3, 1e3), x=st.floats(-50, 50), n=st.integers(2, 30),
       family=st.sampled_from(["polynomial", "rectified"]))
def test_homogeneity_property(a, x, n, family):
    spec = InteractionSpec(family, n)
    lhs = interaction_eval(spec, a * x)
    rhs = a ** n * interaction_eval(spec, x)
    # the identity is about real arithmetic; skip results outside the normal range
    if not (math.isfinite(lhs) and math.isfinite(rhs)) or 0 < abs(rhs) < 1e-290:
        return
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


@given(x=st.floats(-20, 20).filter(lambda v: v == 0 or abs(v) > 1e-3), n=st.integers(2, 12))
def test_parity_and_rectifier_gate(x, n):
    p = InteractionSpec("polynomial", n)
    r = InteractionSpec("rectified", n)
    sign = 1 if n % 2 == 0 else -1
    assert interaction_eval(p, -x) == pytest.approx(sign * interaction_eval(p, x), rel=1e-14)
    assert (interaction_eval(r, x) == 0) == (x <= 0)


@given(x=st.floats(-30, 30), y=st.floats(-30, 30))
def test_exponential_order_preserving(x, y):
    e = InteractionSpec("exponential")
    if x != y:
        assert np.sign(interaction_eval(e, x) - interaction_eval(e, y)) == np.sign(x - y) or \
            interaction_eval(e, x) == interaction_eval(e, y)  # equal only through rounding


def test_leaky_is_not_homogeneous():
    spec = InteractionSpec("leaky", 2, 0.01)
    # leak term scales linearly, the positive branch quadratically
    assert interaction_eval(spec, 2 * -1.0) != pytest.approx(4 * interaction_eval(spec, -1.0))


def test_derivative_matches_central_difference():
    for spec in [InteractionSpec("polynomial", 5), InteractionSpec("rectified", 3),
                 InteractionSpec("leaky", 4, 0.05), InteractionSpec("exponential")]:
        x = np.array([-1.3, -0.2, 0.4, 1.7])
        h = 1e-6
        fd = (spec(x + h) - spec(x - h)) / (2 * h)
        np.testing.assert_allclose(spec.derivative(x), fd, rtol=1e-6)


def test_kink_derivative_is_zero():
    assert InteractionSpec("rectified", 2).derivative(np.array([0.0]))[0] == 0.0
    assert InteractionSpec("leaky", 2).derivative(np.array([0.0]))[0] == 0.0


@pytest.mark.parametrize("kwargs", [
    dict(family="polynomial", vertex=1), dict(family="rectified", vertex=2.5),
    dict(family="leaky", vertex=2, leak=-0.1)])
def test_spec_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        InteractionSpec(**kwargs)


def test_scaling_factor_examples():
    m = NetworkConfig(Formulation.MODIFIED, 100, POLY, temperature=1.0)
    assert (derive_alpha(m), derive_beta(m)) == pytest.approx((0.01, 0.01))
    o = NetworkConfig(Formulation.ORIGINAL, 100, POLY, temperature=2.0)
    assert (derive_alpha(o), derive_beta(o)) == pytest.approx((1.0, 0.125))
    m2 = NetworkConfig("modified", 250, POLY, temperature=0.5)
    assert derive_beta(m2) == pytest.approx(0.008)


@pytest.mark.parametrize("t", [0.0, -1.0, float("inf"), float("nan")])
def test_rejects_bad_temperature(t):
    with pytest.raises(ValueError, match="temperature"):
        NetworkConfig("modified", 10, POLY, temperature=t)


def test_config_is_immutable():
    cfg = NetworkConfig("modified", 10, POLY)
    with pytest.raises(Exception):
        cfg.dim = 3


def test_state_and_memory_validation():
    assert as_state([1, -1, 1]).dtype == np.int8
    with pytest.raises(ValueError):
        as_state([1, 0, -1])
    with pytest.raises(ValueError):
        as_state([1, -1], dim=3)
    with pytest.raises(ValueError):
        as_memories([[0.5, 1.5]])
    with pytest.raises(ValueError):
        as_memories([[0.5, float("nan")]])
