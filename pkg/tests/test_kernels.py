from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg

from nestedgp.kernels import (Family, KernelConfig, UnsupportedFamilyError, gram,
                              gram_grad_first, kernel_as_poly_exp, kernel_eval)

finite = st.floats(-5, 5, allow_nan=False)


def test_zero_distance_is_variance_plus_nugget():
    cfg = KernelConfig(Family.GAUSSIAN, (0.7, 1.3), variance=2.0, nugget=0.1)
    assert kernel_eval(cfg, [0.2, -1.0], [0.2, -1.0]) == pytest.approx(2.1, abs=1e-15)


def test_nugget_only_between_identical_points():
    cfg = KernelConfig(Family.GAUSSIAN, (1.0,), variance=1.0, nugget=0.5)
    near = kernel_eval(cfg, [0.0], [1e-12])
    assert near == pytest.approx(1.0, abs=1e-20)


def test_matern52_unit_distance():
    # closed form evaluated in high precision by hand: (1 + sqrt5 + 5/3) e^-sqrt5
    import decimal
    decimal.getcontext().prec = 40
    s5 = decimal.Decimal(5).sqrt()
    ref = float((1 + s5 + decimal.Decimal(5) / 3) * (-s5).exp())
    cfg = KernelConfig(Family.MATERN52, (1.0,))
    assert kernel_eval(cfg, [0.0], [1.0]) == pytest.approx(ref, rel=1e-14)
    assert ref == pytest.approx(0.5240, abs=1e-4)


@pytest.mark.parametrize("fam", [Family.GAUSSIAN, Family.MATERN52])
@given(x=st.lists(finite, min_size=2, max_size=2), y=st.lists(finite, min_size=2, max_size=2))
def test_symmetry(fam, x, y):
    cfg = KernelConfig(fam, (0.8, 2.0), variance=1.7)
    assert kernel_eval(cfg, x, y) == kernel_eval(cfg, y, x)


@pytest.mark.parametrize("fam", [Family.GAUSSIAN, Family.MATERN52])
@given(x=st.lists(finite, min_size=2, max_size=2), y=st.lists(finite, min_size=2, max_size=2),
       t=st.lists(finite, min_size=2, max_size=2))
def test_stationarity(fam, x, y, t):
    cfg = KernelConfig(fam, (0.8, 2.0))
    a = kernel_eval(cfg, x, y)
    b = kernel_eval(cfg, np.add(x, t), np.add(y, t))
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("fam", [Family.GAUSSIAN, Family.MATERN52])
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 20))
def test_gram_factorizes(fam, seed, n):
    r = np.random.default_rng(seed)
    X = r.uniform(-3, 3, (n, 3))
    cfg = KernelConfig(fam, tuple(r.uniform(0.1, 5, 3)), variance=r.uniform(0.1, 10), nugget=1e-8)
    K = gram(cfg, X)
    linalg.cholesky(K, lower=True)


def test_gram_matches_pointwise_eval(rng):
    X = rng.normal(size=(6, 2))
    Y = rng.normal(size=(4, 2))
    for fam in (Family.GAUSSIAN, Family.MATERN52):
        cfg = KernelConfig(fam, (0.5, 1.5), variance=3.0)
        K = gram(cfg, X, Y)
        ref = np.array([[kernel_eval(cfg, x, y) for y in Y] for x in X])
        np.testing.assert_allclose(K, ref, rtol=1e-14)


def test_errors():
    cfg = KernelConfig(Family.GAUSSIAN, (1.0, 1.0))
    with pytest.raises(ValueError):
        kernel_eval(cfg, [0.0], [0.0])
    with pytest.raises(ValueError):
        kernel_eval(cfg, [0.0, np.nan], [0.0, 0.0])
    with pytest.raises(ValueError):
        KernelConfig(Family.GAUSSIAN, (0.0,))
    with pytest.raises(ValueError):
        KernelConfig(Family.GAUSSIAN, (1.0,), variance=-1)
    with pytest.raises(ValueError):
        KernelConfig(Family.GAUSSIAN, (1.0,), nugget=-1e-3)
    with pytest.raises(ValueError):
        KernelConfig(Family.MATERN52, (1.0,), derivative_orders=(1,))


def test_poly_exp_of_plain_gaussian():
    p = kernel_as_poly_exp(KernelConfig(Family.GAUSSIAN, (1.0,)), 0)
    assert len(p) == 1
    assert p.power[0] == 0 and p.lin[0] == 0 and p.quad[0] == -0.5 and p.coeff[0] == 1


def _k_derivative_exact(n, x):
    """d^(2n)/dx^(2n) of exp(-x^2/2), by repeated symbolic differentiation.

    A polynomial c(x) e^{-x^2/2} differentiates to (c' - x c) e^{-x^2/2};
    the coefficients stay exact as Fractions.
    """
    c = [Fraction(1)]
    for _ in range(2 * n):
        d = [k * c[k] for k in range(1, len(c))] + [Fraction(0)] * 2
        shifted = [Fraction(0)] + c
        c = [(d[k] if k < len(d) else 0) - (shifted[k] if k < len(shifted) else 0)
             for k in range(len(c) + 1)]
    return sum(float(ck) * x ** k for k, ck in enumerate(c)) * np.exp(-x * x / 2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_derivative_class_matches_symbolic(n):
    x = np.linspace(-5, 5, 100)
    p = kernel_as_poly_exp(KernelConfig(Family.GAUSSIAN_DERIVATIVE, (1.0,), derivative_orders=(n,)), 0)
    ref = (-1) ** n * _k_derivative_exact(n, x)
    np.testing.assert_allclose(p(x), ref, rtol=1e-12, atol=1e-14)


def test_first_derivative_class_magnitude():
    x = np.linspace(-5, 5, 100)
    p = kernel_as_poly_exp(KernelConfig(Family.GAUSSIAN_DERIVATIVE, (1.0,), derivative_orders=(1,)), 0)
    np.testing.assert_allclose(np.abs(p(x)), np.abs((x * x - 1) * np.exp(-x * x / 2)), atol=1e-15)
    # positive at zero, so the derivative-class kernel is a valid covariance
    assert p(np.array([0.0]))[0] == pytest.approx(1.0)


def test_derivative_class_against_finite_differences():
    x = np.linspace(-5, 5, 100)
    h = 1e-3
    k = lambda t: np.exp(-t * t / 2)
    fd2 = (k(x + h) - 2 * k(x) + k(x - h)) / h ** 2
    p = kernel_as_poly_exp(KernelConfig(Family.GAUSSIAN_DERIVATIVE, (1.0,), derivative_orders=(1,)), 0)
    np.testing.assert_allclose(-p(x), fd2, atol=1e-6)


@given(seed=st.integers(0, 2**32 - 1))
def test_poly_exp_agrees_with_kernel(seed):
    r = np.random.default_rng(seed)
    ls = tuple(r.uniform(0.2, 3.0, 2))
    orders = tuple(int(v) for v in r.integers(0, 3, 2))
    cfg = KernelConfig(Family.GAUSSIAN_DERIVATIVE, ls, variance=1.3, derivative_orders=orders)
    x, y = r.uniform(-2, 2, 2), r.uniform(-2, 2, 2)
    prod = cfg.variance * np.prod([kernel_as_poly_exp(cfg, d)(x[d] - y[d]) for d in range(2)])
    val = kernel_eval(cfg, x, y)
    assert prod == pytest.approx(val, rel=1e-12, abs=1e-300)


def test_matern_has_no_poly_exp_form():
    with pytest.raises(UnsupportedFamilyError):
        kernel_as_poly_exp(KernelConfig(Family.MATERN52, (1.0,)), 0)


@pytest.mark.parametrize("fam", [Family.GAUSSIAN, Family.MATERN52])
def test_gram_gradient_finite_difference(fam, rng):
    cfg = KernelConfig(fam, (0.9, 1.4), variance=2.0)
    A = rng.normal(size=(3, 2))
    B = rng.normal(size=(5, 2))
    h = 1e-6
    for dim in range(2):
        E = np.zeros_like(A)
        E[:, dim] = h
        fd = (gram(cfg, A + E, B) - gram(cfg, A - E, B)) / (2 * h)
        np.testing.assert_allclose(gram_grad_first(cfg, A, B, dim), fd, rtol=1e-6, atol=1e-9)


def test_config_round_trip():
    cfg = KernelConfig(Family.GAUSSIAN_DERIVATIVE, (1.0, 2.0), 3.0, 1e-6, (0, 2))
    assert KernelConfig(**cfg.to_dict()) == cfg
    assert cfg.replace(variance=1.0).variance == 1.0
    assert cfg.dim == 2
