import math

import numpy as np
import pytest

from ppalab.catalog import interval_normal_cone, open_end_graph
from ppalab.exceptions import FitError, PreconditionError
from ppalab.operators import Identity, InverseOf, Linear, PowerGradient, SignComponentwise
from ppalab.regularity import (ModulusFunction, RegularityProbe, check_calm,
                               check_closed_graph_at_zero, check_metric_regularity,
                               check_metric_subregularity, estimate_modulus, fit_modulus,
                               hoffman_consistency, r_continuity_verdict, sum_modulus)

RADII = np.geomspace(1e-3, 1.0, 13)


def probe_at(x, y=None, **kw):
    return RegularityProbe(np.atleast_1d(x), None if y is None else np.atleast_1d(y), **kw)


def test_modulus_function_forms():
    assert ModulusFunction.lipschitz(2.0)(0.5) == 1.0
    assert ModulusFunction.power_law(1.0, 1 / 3)(8.0) == pytest.approx(2.0)
    tab = ModulusFunction.tabulated([(0.1, 1.0), (1.0, 2.0)], radius=1.0)
    assert tab(0.05) == 1.0 and tab(0.5) == 2.0 and tab(2.0) == math.inf
    assert tab(0.0) == 0.0
    with pytest.raises(ValueError):
        ModulusFunction.tabulated([(0.1, 2.0), (1.0, 1.0)])
    with pytest.raises(ValueError):
        ModulusFunction.lipschitz(0.0)


def test_estimate_cube_root_matches_closed_form():
    # sup over |y| <= r of |y|^(1/3) is r^(1/3), reached at the axis extreme
    inv = InverseOf(PowerGradient(3))
    tab = estimate_modulus(inv, [0.0], RADII, probe_at(0.0))
    np.testing.assert_allclose(tab.values, RADII ** (1 / 3), rtol=1e-12)
    fit = fit_modulus(tab)
    assert fit.form == "powerlaw"
    assert fit.exponent == pytest.approx(1 / 3, abs=1e-9)


@pytest.mark.parametrize("matrix,constant", [([[1.0]], 1.0), ([[2.0]], 0.5),
                                             ([[2.0, 0.0], [0.0, 4.0]], 0.5)])
def test_estimate_linear_inverse(matrix, constant):
    inv = InverseOf(Linear(matrix))
    tab = estimate_modulus(inv, np.zeros(len(matrix)), RADII, probe_at(np.zeros(len(matrix))))
    np.testing.assert_allclose(tab.values, constant * RADII, rtol=1e-12)
    fit = fit_modulus(tab)
    assert fit.form == "lipschitz" and fit.constant == pytest.approx(constant)


def test_sign_modulus_is_degenerate():
    tab = estimate_modulus(InverseOf(interval_normal_cone()), [0.0], RADII, probe_at(0.0))
    assert tab.values == [0.0] * len(RADII)
    v = r_continuity_verdict(tab)
    assert v.holds and v.constant == 0.0 and "any positive modulus" in v.note
    assert fit_modulus(tab).degenerate


def test_estimate_is_nondecreasing_and_detects_jumps():
    tab = estimate_modulus(SignComponentwise(1), [0.0], RADII, probe_at(0.0))
    assert tab.values == [0.0] * len(RADII)  # Sign(x) lies inside Sign(0)
    tab = estimate_modulus(SignComponentwise(1), [0.5], [0.1, 0.5, 1.0], probe_at(0.5))
    assert tab.values[0] == 0.0 and tab.values[-1] == 2.0
    with pytest.raises(FitError):
        fit_modulus(tab)
    assert not r_continuity_verdict(tab).holds


def test_estimate_preconditions():
    with pytest.raises(PreconditionError):
        estimate_modulus(Identity(1), [0.0], [1.0, 0.5], probe_at(0.0))
    with pytest.raises(PreconditionError):
        estimate_modulus(Identity(1), [0.0], [2.0], probe_at(0.0))


def test_metric_regularity_linear():
    v = check_metric_regularity(Identity(1), probe_at(0.0, 0.0))
    assert v.holds and v.constant == pytest.approx(1.0)
    v = check_metric_regularity(Linear([[2.0]]), probe_at(0.0, 0.0))
    assert v.holds and v.constant == pytest.approx(0.5)


def test_metric_regularity_fails_on_normal_cone():
    g = interval_normal_cone()
    n = np.arange(1, 1001)
    witnesses = [([1.0], [-1.0 / k]) for k in n]
    v = check_metric_regularity(g, probe_at(1.0, 0.0), witnesses)
    assert not v.holds
    ratios = np.array(v.witness_ratios)
    # d(1, A^-1(-1/n)) = 2 and d(-1/n, A(1)) = 1/n
    np.testing.assert_allclose(ratios, 2 * n, rtol=1e-12)


def test_subregularity():
    v = check_metric_subregularity(interval_normal_cone(), probe_at(0.0))
    assert v.holds and v.constant == 0.0 and "vacuous" in v.note
    v = check_metric_subregularity(PowerGradient(3), probe_at(0.0))
    assert not v.holds
    v = check_metric_subregularity(Identity(2), probe_at([0.0, 0.0]))
    assert v.holds and v.constant == pytest.approx(1.0)


def test_calmness():
    v = check_calm(SignComponentwise(1), probe_at(0.0, 1.0))
    assert v.holds and v.constant == 0.0
    v = check_calm(Identity(1), probe_at(0.0, 0.0))
    assert v.holds and v.constant == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        check_calm(Identity(1), probe_at(0.0, 1.0))


def test_hoffman_examples():
    rep = hoffman_consistency(Identity(1), ModulusFunction.lipschitz(1.0), 0.5, [([0.3], [0.3])])
    assert rep.consistent and rep.margins[0] == pytest.approx(0.2)
    cube = ModulusFunction.power_law(1.0, 1 / 3)
    rep = hoffman_consistency(PowerGradient(3), cube, 0.001, [([0.1], [0.001])])
    assert rep.consistent and rep.margins[0] == pytest.approx(0.0, abs=1e-12)
    rep = hoffman_consistency(PowerGradient(3), ModulusFunction.lipschitz(1.0), 0.001,
                              [([0.1], [0.001])])
    assert not rep.consistent and rep.violations[0][1] == pytest.approx(0.1)
    with pytest.raises(PreconditionError):
        hoffman_consistency(Identity(1), ModulusFunction.lipschitz(1.0), 0.5, [([0.3], [0.2])])


def test_sum_modulus():
    m = sum_modulus(ModulusFunction.lipschitz(3.0, radius=1.0), ModulusFunction.lipschitz(2.0))
    assert m.form == "lipschitz" and m.constant == 6.0 and m.radius == 1.0
    m = sum_modulus(ModulusFunction.power_law(1.0, 0.5), ModulusFunction.lipschitz(1.0, radius=2.0))
    assert m.form == "tabulated" and m.radius == 2.0
    for r, v in m.table:
        assert v == pytest.approx(2 * max(math.sqrt(r), r))


def test_closed_graph():
    n = np.arange(1, 1001)
    seq = ([[1.0 / k] for k in n], [[1.0]] * len(n), [1.0])
    assert check_closed_graph_at_zero(SignComponentwise(1), [seq]).holds
    seq = ([[-1.0 / k] for k in n], [[0.0]] * len(n), [0.0])
    assert check_closed_graph_at_zero(interval_normal_cone(), [seq]).holds
    # -1 is attained along x_n = -1/n but missing from the image at 0
    seq = ([[-1.0 / k] for k in n], [[-1.0]] * len(n), [-1.0])
    v = check_closed_graph_at_zero(open_end_graph(), [seq])
    assert not v.holds and v.gaps[0] == pytest.approx(2.0)
