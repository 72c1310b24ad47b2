import math

import numpy as np
import pytest

from _models import monotone_models
from ppalab.catalog import interval_normal_cone, open_end_graph, sign_coupled, swap_linear
from ppalab.exceptions import DomainError, PreconditionError, ResolventError
from ppalab.operators import (AbsSum, CallableMap, GraphPiece, Identity, InverseOf, Linear,
                              OperatorPair, PiecewiseGraph1D, PowerEven, PowerGradient,
                              Quadratic, Scaled, SignComponentwise, SubgradAbsSum, Sum, ZeroMap,
                              check_coercive, check_monotone, check_pair_monotone, evaluate,
                              image, matched_preimage, matrix_r_lipschitz, preimage_distance,
                              resolvent, resolvent_by_bisection)
from ppalab.sampling import sample_pairs
from ppalab.setgeom import Box, HalfLine1D, Singleton, distance, same_set


def real_root(coeffs):
    r = np.roots(coeffs)
    real = r[np.abs(r.imag) < 1e-9].real
    assert len(real) == 1
    return real[0]


def test_evaluate_examples():
    assert same_set(evaluate(SignComponentwise(1), [0.0]), Box([-1], [1]))
    assert same_set(evaluate(interval_normal_cone(), [1.0]), HalfLine1D(0.0, 1))
    assert same_set(evaluate(Identity(2), [3.0, -1.0]), Singleton([3.0, -1.0]))
    with pytest.raises(DomainError):
        evaluate(interval_normal_cone(), [1.5])
    assert image(interval_normal_cone(), [1.5]).is_empty


def test_resolvent_examples():
    assert resolvent(SubgradAbsSum(1), 1.0, [2.0])[0] == 1.0
    assert resolvent(Identity(1), 1.0, [6.0])[0] == 3.0
    assert resolvent(PowerGradient(3), 1.0, [2.0])[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [1, 3, 5, 7, 9])
@pytest.mark.parametrize("gamma", [0.1, 1.0, 7.0])
def test_power_resolvent_matches_polynomial_root(p, gamma):
    # z + gamma z^p = x has exactly one real root
    for x in (-3.0, -0.2, 0.0, 1e-6, 0.8, 12.0):
        coeffs = np.zeros(p + 1)
        coeffs[0] += gamma
        coeffs[p - 1] += 1.0
        coeffs[p] = -x
        z = resolvent(PowerGradient(p), gamma, [x])[0]
        assert z == pytest.approx(real_root(coeffs), abs=1e-11)


def test_soft_threshold_against_grid_prox():
    # J_{gamma d|.|}(x) minimises 1/2 (z-x)^2 + gamma |z|
    zs = np.linspace(-6, 6, 120001)
    for x in (-4.0, -0.3, 0.0, 0.9, 2.5):
        for gamma in (0.5, 1.0, 2.0):
            obj = 0.5 * (zs - x) ** 2 + gamma * np.abs(zs)
            z = resolvent(AbsSum(1), gamma, [x])[0]
            assert z == pytest.approx(zs[np.argmin(obj)], abs=2e-4)


def test_linear_resolvent_against_lstsq():
    rng = np.random.default_rng(3)
    for _ in range(20):
        b = rng.standard_normal((3, 3))
        m = b @ b.T + (b - b.T)  # PSD plus skew: monotone
        off = rng.standard_normal(3)
        x = rng.standard_normal(3)
        gamma = rng.uniform(0.1, 5)
        ref, *_ = np.linalg.lstsq(np.eye(3) + gamma * m, x - gamma * off, rcond=None)
        np.testing.assert_allclose(resolvent(Linear(m, off), gamma, x), ref, atol=1e-10)


def test_normal_cone_resolvent_is_projection():
    g = interval_normal_cone()
    for x in np.linspace(-5, 5, 41):
        assert resolvent(g, 0.7, [x])[0] == pytest.approx(np.clip(x, -1, 1), abs=1e-12)


def test_bisection_fallback_agrees_with_exact_graph():
    g = interval_normal_cone()
    for x in (-3.0, -0.5, 0.0, 0.99, 4.0):
        assert resolvent_by_bisection(g, 1.3, [x])[0] == pytest.approx(
            resolvent(g, 1.3, [x])[0], abs=1e-11)


def test_sum_identity_sign_closed_form():
    s = Sum([Identity(1), SignComponentwise(1)])
    for x in (-4.0, -0.5, 0.2, 3.0):
        for gamma in (0.5, 2.0):
            ref = np.sign(x) * max(abs(x) - gamma, 0.0) / (1 + gamma)
            assert resolvent(s, gamma, [x])[0] == pytest.approx(ref, abs=1e-11)


def test_inverse_resolvent_by_moreau_residual():
    inv = InverseOf(PowerGradient(3))
    for x in (-2.0, 0.1, 5.0):
        gamma = 0.6
        z = resolvent(inv, gamma, [x])[0]
        # z in A((x - z)/gamma) with A = cube map
        assert z == pytest.approx(((x - z) / gamma) ** 3, abs=1e-10)


def test_resolvent_rejections():
    with pytest.raises(ResolventError):
        resolvent(Linear([[-1.0]]), 1.0, [1.0])
    with pytest.raises(ResolventError):
        resolvent(sign_coupled(), 1.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        resolvent(Identity(1), 0.0, [1.0])
    # graph that is monotone but not maximal: the line misses it
    gap = PiecewiseGraph1D([GraphPiece.segment((-1, -1), (1, 1))])
    with pytest.raises(ResolventError):
        resolvent(gap, 1.0, [5.0])


@pytest.mark.parametrize("label,model", monotone_models())
def test_resolvent_nonexpansive(label, model):
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.uniform(-4, 4, model.dim_in)
        y = rng.uniform(-4, 4, model.dim_in)
        gamma = rng.uniform(0.05, 5)
        jx, jy = resolvent(model, gamma, x), resolvent(model, gamma, y)
        assert np.linalg.norm(jx - jy) <= np.linalg.norm(x - y) + 1e-9


@pytest.mark.parametrize("label,model", monotone_models())
def test_resolvent_inclusion(label, model):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(-4, 4, model.dim_in)
        gamma = rng.uniform(0.1, 3)
        z = resolvent(model, gamma, x)
        u = (x - z) / gamma
        assert distance(u, evaluate(model, z)) <= 1e-8 * max(1.0, np.linalg.norm(u))


def test_monotone_checks():
    pairs = sample_pairs(1, 200, seed=1)
    assert check_monotone(Identity(1), pairs).monotone
    v = check_monotone(SignComponentwise(1), [([-1.0], [1.0])])
    assert v.monotone and v.margin == 4.0
    assert check_monotone(interval_normal_cone(), sample_pairs(1, 200, -1, 1, seed=2)).monotone
    bad = check_monotone(sign_coupled(), sample_pairs(2, 300, seed=0))
    assert not bad.monotone and bad.witness is not None
    assert not check_monotone(swap_linear(), sample_pairs(2, 50, seed=0)).monotone


def test_pair_monotone():
    pairs = sample_pairs(2, 300, seed=4)
    v = check_pair_monotone(OperatorPair(sign_coupled(), swap_linear(), 6.0), pairs)
    assert v.margin >= 6.0 - 1e-6 and v.meets_declared and v.strong
    v = check_pair_monotone(OperatorPair(Identity(2), Identity(2)), pairs)
    assert v.margin == pytest.approx(1.0)
    v = check_pair_monotone(OperatorPair(SignComponentwise(2), Identity(2)), pairs)
    assert v.monotone


def test_coercive():
    pairs = sample_pairs(2, 500, seed=6)
    assert check_coercive(Identity(2), pairs) == pytest.approx(1.0)
    est = check_coercive(Linear([[2.0, 0.0], [0.0, 3.0]]), pairs)
    assert est == pytest.approx(2.0, rel=0.02) and est >= 2.0 - 1e-12
    assert check_coercive(ZeroMap(2), pairs) == 0.0


def test_matrix_certificate_examples():
    c = matrix_r_lipschitz(np.eye(2))
    assert (c.smallest_positive_eig, c.transpose_norm, c.lipschitz_l) == pytest.approx((1, 1, 1))
    c = matrix_r_lipschitz([[2.0, 0.0], [0.0, 0.0]])
    assert (c.smallest_positive_eig, c.transpose_norm, c.lipschitz_l) == pytest.approx((4, 2, 0.5))
    c = matrix_r_lipschitz([[1.0], [1.0]])
    assert c.lipschitz_l == pytest.approx(math.sqrt(2) / 2)
    c = matrix_r_lipschitz(np.zeros((2, 3)))
    assert c.lipschitz_l == 0.0 and c.rank == 0


def test_matched_preimage_examples():
    a = np.array([[2.0, 0.0], [0.0, 0.0]])
    c = matrix_r_lipschitz(a)
    xbar = matched_preimage(a, c, [1.0, 5.0], [4.0, 0.0], [2.0, -7.0])
    np.testing.assert_allclose(xbar, [2.0, 5.0], atol=1e-12)
    z = np.zeros((2, 2))
    np.testing.assert_allclose(matched_preimage(z, matrix_r_lipschitz(z), [3.0, 1.0], [0, 0], [9, 9]),
                               [3.0, 1.0])
    with pytest.raises(PreconditionError):
        matched_preimage(a, c, [1.0, 5.0], [4.0, 0.0], [1.0, 0.0])


def test_matched_preimage_is_nearest_preimage():
    # oracle: the nearest preimage is x - pinv(A)(Ax - y)
    rng = np.random.default_rng(8)
    for _ in range(50):
        a = rng.standard_normal((3, 2)) @ rng.standard_normal((2, 4))
        c = matrix_r_lipschitz(a)
        x, xp = rng.standard_normal(4), rng.standard_normal(4)
        y = a @ xp
        ref = x - np.linalg.lstsq(a, a @ x - y, rcond=None)[0]
        np.testing.assert_allclose(matched_preimage(a, c, x, y, xp), ref, atol=1e-9)


def test_preimage_distance():
    assert preimage_distance(Linear([[1.0, 1.0]]), [2.0], [0.0, 0.0]) == pytest.approx(math.sqrt(2))
    assert preimage_distance(interval_normal_cone(), [-0.5], [1.0]) == 2.0
    assert preimage_distance(ZeroMap(1), [1.0], [0.0]) == math.inf


def test_convex_functions():
    q = Quadratic([[2.0, 0.0], [0.0, 1.0]], [-2.0, 0.0])
    assert q.inf_value == pytest.approx(-1.0)
    assert PowerEven(3).value([2.0]) == 4.0
    with pytest.raises(ValueError):
        Quadratic([[1.0, 0.0], [0.0, 0.0]], [0.0, 1.0])
    assert resolvent(AbsSum(2), 1.0, [3.0, -0.5]).tolist() == [2.0, 0.0]


def test_graph_properties():
    assert not open_end_graph().is_closed
    assert interval_normal_cone().is_closed and interval_normal_cone().monotone
    assert same_set(InverseOf(interval_normal_cone()).evaluate([0.0]), Box([-1], [1]))
    s = Scaled(-1.0, Identity(1))
    assert not s.monotone
    cm = CallableMap(lambda x: Singleton(2 * x), 1)
    assert not cm.monotone
