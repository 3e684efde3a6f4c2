"""Steppers: classical RK, general Lawson oracle, simple Lawson equivalence."""

from fractions import Fraction

import numpy as np
import pytest

import slrk.integrator as integrator
from slrk.integrator import (
    NonFiniteStateError,
    OdeProblem,
    integrate,
    lawson_step_general,
    make_plan,
    rk_step,
    slrk_step,
)
from slrk.linop import diagonal_operator, zero_operator
from slrk.tableau import (
    Tableau,
    euler_tableau,
    heun3_tableau,
    rk4_tableau,
    rk6_tableau,
)

RK4_POLY = [1, 1, 1 / 2, 1 / 6, 1 / 24]
RK6_POLY = [1, 1, 1 / 2, 1 / 6, 1 / 24, 1 / 120, 1 / 720, 29 / 178200]

CONFORMING = [rk4_tableau, heun3_tableau, rk6_tableau]


def scalar_problem(lam, A=None):
    return OdeProblem(g=lambda u: lam * u, A=A, n=1)


def polyval(coeffs, z):
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def test_rk_step_zero_rhs_is_identity():
    plan = make_plan(OdeProblem(g=lambda u: 0 * u, A=None, n=3), rk4_tableau(), 0.2)
    u = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(rk_step(plan, u), u)


@pytest.mark.parametrize("z", [0.3, -1.0, 0.4 + 0.9j, -2.0 + 0.5j])
def test_rk4_scalar_amplification(z):
    plan = make_plan(scalar_problem(z), rk4_tableau(), 1.0)
    got = rk_step(plan, np.ones(1, dtype=complex))[0]
    want = polyval(RK4_POLY, z)
    assert abs(got - want) <= 1e-14 * max(1.0, abs(want))


@pytest.mark.parametrize("z", [0.5, -1.5, 1.1 - 0.7j, -0.8 + 1.2j])
def test_rk6_scalar_amplification_includes_z7_term(z):
    plan = make_plan(scalar_problem(z), rk6_tableau(), 1.0)
    got = rk_step(plan, np.ones(1, dtype=complex))[0]
    want = polyval(RK6_POLY, z)
    assert abs(got - want) <= 1e-13 * max(1.0, abs(want))
    # the step really carries the degree-7 tail, not the exponential
    degree6 = polyval(RK6_POLY[:7], z)
    assert abs(got - degree6) > 0 or z == 0


def test_rk_step_rejects_plans_with_operator():
    plan = make_plan(scalar_problem(1.0, A=diagonal_operator(np.array([-1.0]))),
                     rk4_tableau(), 0.1)
    with pytest.raises(ValueError):
        rk_step(plan, np.ones(1))


def test_lawson_general_zero_rhs_is_exact_exponential():
    rng = np.random.default_rng(2)
    lam = rng.uniform(-40, 0, 6) + 1j * rng.uniform(-5, 5, 6)
    u = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    h = 0.25
    got = lawson_step_general(rk6_tableau(), lambda v: 0 * v,
                              diagonal_operator(lam), u, h)
    want = np.exp(h * lam) * u
    assert np.max(np.abs(got - want)) <= 1e-14 * np.max(np.abs(want))


def test_lawson_general_reduces_to_rk_with_zero_operator():
    rng = np.random.default_rng(4)
    u = rng.standard_normal(5)
    g = lambda v: np.sin(v)
    got = lawson_step_general(rk4_tableau(), g, zero_operator(5), u, 0.3)
    plan = make_plan(OdeProblem(g=g, A=None, n=5), rk4_tableau(), 0.3)
    want = rk_step(plan, u)
    assert np.max(np.abs(got - want)) <= 1e-14 * np.max(np.abs(want))


def test_lawson_general_requires_diagonal():
    from slrk.linop import dense_operator
    with pytest.raises(ValueError):
        lawson_step_general(rk4_tableau(), lambda v: v,
                            dense_operator(np.eye(2)), np.ones(2), 0.1)


@pytest.mark.parametrize("make", CONFORMING)
def test_slrk_equals_general_lawson_oracle(make):
    # The core equivalence: one propagator with gridded abscissae reproduces
    # the stage-pair exponentials of the general process.
    tab = make()
    rng = np.random.default_rng(hash(tab.name) % 2 ** 32)
    for _ in range(10):
        n = 8
        lam = rng.uniform(-50, 0, n) + 1j * rng.uniform(-8, 8, n)
        alpha = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        g = lambda v: alpha * v * v + 0.2 * np.roll(v, 1)
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        plan = make_plan(OdeProblem(g=g, A=diagonal_operator(lam), n=n), tab, 0.1)
        fast = slrk_step(plan, u)
        ref = lawson_step_general(tab, g, diagonal_operator(lam), u, 0.1)
        assert np.max(np.abs(fast - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_slrk_with_zero_operator_matches_rk_step():
    g = lambda v: np.cos(v)
    u = np.linspace(-1, 1, 7)
    plan0 = make_plan(OdeProblem(g=g, A=zero_operator(7), n=7), rk6_tableau(), 0.2)
    plan = make_plan(OdeProblem(g=g, A=None, n=7), rk6_tableau(), 0.2)
    got = slrk_step(plan0, u.astype(complex))
    want = rk_step(plan, u)
    assert np.max(np.abs(got - want)) <= 1e-14 * np.max(np.abs(want))


def count_propagator_applications(plan, u):
    """Run one step with apply() instrumented; returns the call count."""
    real_apply = integrator.apply
    calls = []

    def tracking_apply(e, v):
        calls.append(v)
        return real_apply(e, v)

    integrator.apply = tracking_apply
    try:
        slrk_step(plan, u)
    finally:
        integrator.apply = real_apply
    return len(calls)


def test_rk6_propagator_application_count():
    # Six increment events (stages 2,4,5,6,7,8): 6 applications to u plus
    # sum of (j-1) slope applications = 1+3+4+5+6+7 = 26; 32 total.
    tab = rk6_tableau()
    plan = make_plan(OdeProblem(g=lambda v: v, A=diagonal_operator(np.array([-1.0])),
                                n=1), tab, 0.1)
    assert plan.step_before_stage == (False, True, False, True, True, True, True, True)
    assert plan.trailing_steps == 0
    total = count_propagator_applications(plan, np.ones(1, dtype=complex))
    assert total == 6 + 26


def test_rk4_propagator_application_count_matches_unrolled_listing():
    # Two blocks: after k1 (u,k1) and after k3 (u,k1,k2,k3): 2 + 4 = 6.
    plan = make_plan(OdeProblem(g=lambda v: v, A=diagonal_operator(np.array([-1.0])),
                                n=1), rk4_tableau(), 0.1)
    assert plan.step_before_stage == (False, True, False, True)
    total = count_propagator_applications(plan, np.ones(1, dtype=complex))
    assert total == 2 + 4


def test_heun3_trailing_steps():
    plan = make_plan(OdeProblem(g=lambda v: v, A=diagonal_operator(np.array([-1.0])),
                                n=1), heun3_tableau(), 0.1)
    assert plan.trailing_steps == 1
    total = count_propagator_applications(plan, np.ones(1, dtype=complex))
    # events at stages 2 and 3 (1+1 u, 1+2 k) plus trailing (1 u, 3 k)
    assert total == 2 + 3 + 4


def test_two_rate_scalar_amplification():
    poly = {"rk4": RK4_POLY, "rk6": RK6_POLY}
    for make in (rk4_tableau, rk6_tableau):
        tab = make()
        for z1 in (0.5 + 1.0j, -1.7, 1.9j):
            for z2 in (-15.0, -4.0 + 2.0j, 0.0):
                prob = OdeProblem(g=lambda v: z1 * v,
                                  A=diagonal_operator(np.array([z2], dtype=complex)),
                                  n=1)
                plan = make_plan(prob, tab, 1.0)
                got = slrk_step(plan, np.ones(1, dtype=complex))[0]
                want = np.exp(z2) * polyval(poly[tab.name], z1)
                assert abs(got - want) <= 1e-13 * abs(want)


def test_purely_imaginary_stiff_rate_preserves_magnitude():
    z1 = -1.2 + 0.4j
    plan_ref = make_plan(scalar_problem(z1), rk6_tableau(), 1.0)
    mag_ref = abs(rk_step(plan_ref, np.ones(1, dtype=complex))[0])
    for y in (0.5, 3.0, 17.0):
        prob = scalar_problem(z1, A=diagonal_operator(np.array([1j * y])))
        got = slrk_step(make_plan(prob, rk6_tableau(), 1.0), np.ones(1, dtype=complex))
        assert abs(abs(got[0]) - mag_ref) <= 1e-13 * mag_ref


def test_nonconforming_tableau_with_operator_rejected():
    t = Tableau(
        ((Fraction(0), 0, 0), (Fraction(1, 4), 0, 0), (Fraction(1, 2), Fraction(1, 2), 0)),
        (Fraction(1, 2), 0, Fraction(1, 2)),
    )
    A = diagonal_operator(np.array([-1.0]))
    with pytest.raises(ValueError):
        make_plan(OdeProblem(g=lambda v: v, A=A, n=1), t, 0.1)
    # without the operator the same tableau steps fine
    plan = make_plan(OdeProblem(g=lambda v: v, A=None, n=1), t, 0.1)
    rk_step(plan, np.ones(1))


def test_degenerate_spacing_with_operator_rejected():
    A = diagonal_operator(np.array([-1.0]))
    with pytest.raises(ValueError):
        make_plan(OdeProblem(g=lambda v: v, A=A, n=1), euler_tableau(), 0.1)


def test_linear_diagonal_integration_is_exact():
    rng = np.random.default_rng(6)
    lam = rng.uniform(-30, 0, 8) + 1j * rng.uniform(-5, 5, 8)
    u0 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    h, n_steps = 0.05, 200
    for make in CONFORMING:
        prob = OdeProblem(g=lambda v: 0 * v, A=diagonal_operator(lam), n=8)
        plan = make_plan(prob, make(), h)
        got = integrate(plan, u0, n_steps)
        want = np.exp(lam * h * n_steps) * u0
        assert np.max(np.abs(got - want) / np.abs(want)) <= n_steps * 1e-15


def convergence_error(tab, n_steps, t_final=2.0):
    # smooth weakly nonlinear oscillator; tight-step run is the reference
    prob = OdeProblem(g=lambda v: 1j * v + 0.05 * v * v, A=None, n=1)
    ref = integrate(make_plan(prob, tab, t_final / 8192), np.array([1.0 + 0j]), 8192)
    u = integrate(make_plan(prob, tab, t_final / n_steps), np.array([1.0 + 0j]), n_steps)
    return abs(u[0] - ref[0])


def test_rk4_halving_reduces_error_sixteenfold():
    e1 = convergence_error(rk4_tableau(), 16)
    e2 = convergence_error(rk4_tableau(), 32)
    assert 12.0 <= e1 / e2 <= 20.0


def test_rk6_halving_reduces_error_sixtyfourfold():
    e1 = convergence_error(rk6_tableau(), 12)
    e2 = convergence_error(rk6_tableau(), 24)
    assert 50.0 <= e1 / e2 <= 80.0


def test_integrate_records_trajectory():
    prob = OdeProblem(g=lambda v: -v, A=None, n=2)
    plan = make_plan(prob, rk4_tableau(), 0.1)
    traj = integrate(plan, np.ones(2), 5, record=True)
    assert traj.shape == (6, 2)
    assert np.array_equal(traj[0], np.ones(2))
    with pytest.raises(ValueError):
        integrate(plan, np.ones(2), 0)


def test_non_finite_rhs_aborts_with_diagnostic():
    prob = OdeProblem(g=lambda v: v / 0.0, A=None, n=1)
    plan = make_plan(prob, rk4_tableau(), 0.1)
    with np.errstate(divide="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteStateError):
            slrk_step(plan, np.ones(1))
