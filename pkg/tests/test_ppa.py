import math

import numpy as np
import pytest

from ppalab.catalog import interval_normal_cone, square_indexed
from ppalab.exceptions import PreconditionError, ResolventError
from ppalab.operators import (AbsSum, CallableMap, PowerEven, Quadratic, ZeroFunction, ZeroMap)
from ppalab.ppa import (PpaConfig, certify_distance_bound, certify_linear_rate,
                        certify_step_decay, certify_value_gap, check_trajectory_invariants,
                        run_ppa, sequence_rate_check)
from ppalab.regularity import ModulusFunction
from ppalab.setgeom import Box, IntervalUnion1D, Singleton, SolutionSet

ORIGIN = SolutionSet(Singleton([0.0]), 0.0)


def quadratic_run(gamma=3.0, iters=30, every=1):
    return run_ppa(Quadratic([[1.0]]), PpaConfig(gamma, [1.0], iters, record_every=every),
                   ORIGIN, sigma=math.inf)


def quartic_oracle(x0, gamma, n):
    # x_{k+1} is the real root of gamma z^3 + z - x_k
    xs = [x0]
    for _ in range(n):
        r = np.roots([gamma, 0.0, 1.0, -xs[-1]])
        xs.append(float(r[np.abs(r.imag) < 1e-9].real[0]))
    return np.array(xs)


def test_config_validation():
    with pytest.raises(ValueError):
        PpaConfig(0.0, [1.0])
    with pytest.raises(ValueError):
        PpaConfig(1.0, [1.0], max_iterations=0)
    with pytest.raises(ValueError):
        PpaConfig(1.0, [1.0], record_every=0)


def test_quadratic_closed_form():
    t = quadratic_run()
    np.testing.assert_allclose(t.iterates[:, 0], 4.0 ** -np.arange(30), rtol=1e-14)
    np.testing.assert_allclose(t.step_norms, 0.75 * 4.0 ** -np.arange(30), rtol=1e-14)
    assert t.n_zero == 0 and t.iterations == 30


def test_zero_map_constant():
    t = run_ppa(ZeroMap(2), PpaConfig(2.0, [1.5, -3.0], 5))
    assert np.all(t.iterates == [1.5, -3.0]) and np.all(t.step_norms == 0)
    assert t.function_values is None and t.distances is None


def test_abs_finite_convergence():
    t = run_ppa(AbsSum(1), PpaConfig(1.0, [2.5], 6), ORIGIN)
    assert t.iterates[:, 0].tolist() == [2.5, 1.5, 0.5, 0.0, 0.0, 0.0]
    assert t.step_norms.tolist() == [1.0, 1.0, 0.5, 0.0, 0.0, 0.0]
    assert t.step_square_sum == 2.25


def test_quartic_against_root_oracle():
    t = run_ppa(PowerEven(3), PpaConfig(1.0, [1.0], 50), ORIGIN)
    np.testing.assert_allclose(t.iterates[:, 0], quartic_oracle(1.0, 1.0, 49), rtol=1e-10)


def test_stop_step_norm_and_thinning():
    t = run_ppa(AbsSum(1), PpaConfig(1.0, [2.5], 100, stop_step_norm=1e-12), ORIGIN)
    assert t.iterations == 4
    t = quadratic_run(every=5)
    assert t.indices.tolist() == [0, 5, 10, 15, 20, 25]
    assert t.step_square_sum == pytest.approx(quadratic_run().step_square_sum)


def test_resolvent_error_carries_iteration():
    def res(gamma, x):
        if abs(x[0]) < 0.3:
            raise ResolventError("boom")
        return x / 2
    m = CallableMap(lambda x: Singleton(x), 1, resolvent=res, monotone=True)
    with pytest.raises(ResolventError) as err:
        run_ppa(m, PpaConfig(1.0, [1.0], 10))
    assert err.value.iteration == 2


def test_step_decay_certificate():
    t = quadratic_run()
    c = certify_step_decay(t, 0.5)
    # sum of (3/4)^2 16^-n = 0.6 <= 3 * 0.5
    assert c.holds and c.detail["sum_sq_steps"] == pytest.approx(0.6)
    t = run_ppa(AbsSum(1), PpaConfig(1.0, [2.5], 12), ORIGIN)
    c = certify_step_decay(t, 2.5)
    assert c.holds and c.detail["sum_sq_steps"] == 2.25
    t = run_ppa(ZeroFunction(1), PpaConfig(1.0, [3.0], 10), SolutionSet(IntervalUnion1D([(-math.inf, math.inf)]), 0.0))
    assert certify_step_decay(t, 0.0).holds
    short = run_ppa(AbsSum(1), PpaConfig(1.0, [2.5], 5), ORIGIN)
    assert certify_step_decay(short, 2.5).status == "inconclusive"
    # a wrong f0 gap is caught by the summed bound
    assert certify_step_decay(quadratic_run(), 0.1).status == "fail"
    with pytest.raises(PreconditionError):
        certify_step_decay(run_ppa(ZeroMap(1), PpaConfig(1.0, [1.0], 10)), 0.0)


def test_distance_bound_certificate():
    t = run_ppa(PowerEven(3), PpaConfig(1.0, [1.0], 200), ORIGIN, sigma=math.inf)
    c = certify_distance_bound(t, ModulusFunction.power_law(1.0, 1 / 3))
    assert c.holds and not c.violations
    # the quadratic meets rho(r) = r with equality: x_{n+1} = a_n / 3
    t = quadratic_run()
    c = certify_distance_bound(t, ModulusFunction.lipschitz(1.0))
    assert c.holds and c.worst == pytest.approx(0.0, abs=1e-15)
    c = certify_distance_bound(t, ModulusFunction.lipschitz(0.5))
    assert c.status == "fail" and c.violations[0][0] == 0


def test_distance_bound_needs_n_zero():
    t = run_ppa(Quadratic([[1.0]]), PpaConfig(1.0, [100.0], 3), ORIGIN)
    c = certify_distance_bound(t, ModulusFunction.lipschitz(1.0, radius=1e-9))
    assert c.status == "inconclusive" and "n_zero" in c.message


def test_value_gap_certificate():
    assert certify_value_gap(quadratic_run(), ORIGIN).holds
    t = run_ppa(AbsSum(1), PpaConfig(1.0, [2.5], 8), ORIGIN)
    c = certify_value_gap(t, ORIGIN)
    assert c.holds and c.worst == 0.0
    with pytest.raises(PreconditionError):
        certify_value_gap(t, SolutionSet(Singleton([0.0])))


def test_linear_rate_certificate():
    r = certify_linear_rate(quadratic_run(), 1.0)
    assert r.kappa == pytest.approx(2 / 3)
    assert r.observed_contraction == pytest.approx(0.25, abs=1e-9)
    assert r.verdicts["linear_rate"] == "pass"
    r = certify_linear_rate(quadratic_run(gamma=1.5), 1.0)
    assert r.verdicts["linear_rate"] == "inapplicable" and "γ ≤ 2L" in r.message
    inside = run_ppa(Quadratic([[1.0]]), PpaConfig(3.0, [0.0], 10), ORIGIN)
    r = certify_linear_rate(inside, 1.0)
    assert r.verdicts["linear_rate"] == "pass" and r.observed_contraction == 0.0


def test_certificates_survive_thinning():
    full, thin = quadratic_run(), quadratic_run(every=3)
    assert (certify_linear_rate(full, 1.0).verdicts == certify_linear_rate(thin, 1.0).verdicts)
    mod = ModulusFunction.lipschitz(1.0)
    assert certify_distance_bound(full, mod).status == certify_distance_bound(thin, mod).status
    assert full.thinned(3).indices.tolist() == thin.indices.tolist()


def test_trajectory_invariants():
    for fn, x0, sol in [(Quadratic([[1.0]]), 1.0, ORIGIN), (AbsSum(1), 2.5, ORIGIN),
                        (PowerEven(3), 1.0, ORIGIN)]:
        t = run_ppa(fn, PpaConfig(1.0, [x0], 40), sol)
        c = check_trajectory_invariants(t, fn, sol)
        assert c.holds, c.violations
    g = interval_normal_cone()
    sol = SolutionSet(Box([-1], [1]))
    t = run_ppa(g, PpaConfig(0.5, [4.0], 5), sol)
    assert check_trajectory_invariants(t, g, sol).holds


def test_sequence_rate_check():
    v = sequence_rate_check(1.0 / np.arange(1, 5001) ** 2)
    assert v.status == "pass" and v.nonincreasing and v.summable
    v = sequence_rate_check(square_indexed(10000))
    assert v.status == "inconclusive" and v.failed_hypotheses == ("nonincreasing",)
    assert v.tail_peak == 1.0 and v.summable
    v = sequence_rate_check(1.0 / np.arange(1, 5001))
    assert v.status == "inconclusive" and v.failed_hypotheses == ("summable",)
    assert sequence_rate_check(np.ones(5)).status == "inconclusive"
    with pytest.raises(ValueError):
        sequence_rate_check([-1.0] * 20)
