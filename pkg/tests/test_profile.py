from __future__ import annotations

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from detevans import bvp
from detevans.model import EndStates, ModelParams
from detevans.profile import (
    ContinuationSchedule, ProfileSettings, ProfileSolution, TailSolution, ValidationFailed,
    continue_family, double, end_linearization, explicit_tail, fit_tail, initial_guess,
    projective_conditions, solve_profile, tail_beta, validate_profile, vector_field,
    vector_field_jacobian,
)

TAME = ModelParams()
ENDS = EndStates.from_params(TAME)
K_TAME = 8.177


# ---------------------------------------------------------------------------
# vector field and end states

def test_vector_field_example():
    # by hand at (0.5, 0.5, 0, 1): f(u_-) - u_- = -q, so u' = 0.125 - 0.5 + q - q/2,
    # and y' = exp(-2.5) / 2
    out = vector_field(np.array([0.5, 0.5, 0.0, 1.0]), TAME, ENDS)
    np.testing.assert_allclose(out, [-0.1255, 0.0, 0.5 * np.exp(-2.5), 0.0], rtol=0, atol=1e-15)
    # seven-digit reference values
    np.testing.assert_allclose(out, [-0.1255001, 0.0, 0.0410425, 0.0], rtol=0, atol=1.5e-7)


@pytest.mark.parametrize("k", [0.3, 1.0, K_TAME])
def test_vector_field_vanishes_at_end_states(k):
    np.testing.assert_allclose(vector_field([ENDS.u_minus, 0, 0, k], TAME, ENDS), 0, atol=1e-15)
    np.testing.assert_allclose(vector_field([ENDS.u_plus, 1, 0, k], TAME, ENDS), 0, atol=1e-15)


def test_jacobian_matches_finite_differences():
    U = np.array([0.4, 0.3, 0.2, 2.0])
    J = vector_field_jacobian(U, TAME)
    h = 1e-6
    fd = np.column_stack([(vector_field(U + h * e, TAME, ENDS) - vector_field(U - h * e, TAME, ENDS))
                          / (2 * h) for e in np.eye(4)])
    np.testing.assert_allclose(J, fd, atol=1e-8)


def test_end_state_eigenvalue_signs():
    assert end_linearization("minus", TAME, ENDS, K_TAME).signs3 == (1, -1, -1)
    assert end_linearization("plus", TAME, ENDS, K_TAME).signs3 == (0, -1, -1)


@pytest.mark.parametrize("which", ["minus", "plus"])
def test_end_eigenvalues_match_dense_solver(which):
    # Jacobian built independently by central differences, then handed to a dense solver
    lin = end_linearization(which, TAME, ENDS, K_TAME)
    U = np.array([ENDS.u_minus, 0, 0, K_TAME] if which == "minus" else [ENDS.u_plus, 1, 0, K_TAME])
    h = 1e-5
    fd = np.column_stack([(vector_field(U + h * e, TAME, ENDS) - vector_field(U - h * e, TAME, ENDS))
                          / (2 * h) for e in np.eye(4)])[:3, :3]
    ref = np.sort(np.linalg.eigvals(fd).real)[::-1]
    np.testing.assert_allclose(lin.eigenvalues3, ref, atol=1e-8)
    # the analytic Jacobian and eig agree to round-off
    direct = np.sort(np.linalg.eigvals(lin.matrix[:3, :3]).real)[::-1]
    np.testing.assert_allclose(lin.eigenvalues3, direct, atol=1e-10)
    assert np.allclose(lin.eigenvalues[np.argsort(-lin.eigenvalues.real)].imag, 0)


def test_manifold_dimensions():
    assert end_linearization("minus", TAME, ENDS, K_TAME).subspace.shape == (4, 2)
    assert end_linearization("plus", TAME, ENDS, K_TAME).subspace.shape == (4, 3)


def test_projective_conditions_at_end_states_are_zero():
    r_m = projective_conditions([ENDS.u_minus, 0, 0, K_TAME], "minus", TAME, ENDS)
    r_p = projective_conditions([ENDS.u_plus, 1, 0, K_TAME], "plus", TAME, ENDS)
    assert r_m.shape == (2,) and r_p.shape == (1,)
    assert np.all(r_m == 0) and np.all(r_p == 0)


def test_projective_conditions_annihilate_unstable_direction():
    lin = end_linearization("minus", TAME, ENDS, K_TAME)
    w, V = np.linalg.eig(lin.matrix[:3, :3])
    v = np.real(V[:, np.argmax(w.real)])
    U = np.array([ENDS.u_minus, 0, 0, K_TAME]) + 1e-6 * np.append(v, 0.0)
    assert np.linalg.norm(projective_conditions(U, "minus", TAME, ENDS)) < 1e-12


@pytest.mark.parametrize("which", ["minus", "plus"])
def test_projective_conditions_are_isometric_on_complement(which):
    lin = end_linearization(which, TAME, ENDS, K_TAME)
    base = np.array([ENDS.u_minus, 0, 0, K_TAME] if which == "minus" else [ENDS.u_plus, 1, 0, K_TAME])
    eps = 1e-6
    for j in range(lin.complement.shape[1]):
        r = projective_conditions(base + eps * lin.complement[:, j], which, TAME, ENDS)
        assert abs(np.linalg.norm(r) - eps) < 1e-15


# ---------------------------------------------------------------------------
# doubling and the initial guess

def test_doubling_bookkeeping():
    dp = double(TAME, ENDS, 20.0, 20.0)
    assert dp.problem.n == 8
    Y = np.tile(np.array([0.3, 0.5, 0.1, 1.0, 0.3, 0.5, 0.1, 1.0])[:, None], (1, 5))
    assert dp.problem.bc(Y[:, 0], Y[:, -1]).size == 8


def test_doubling_maps_exact_solutions(tame):
    dp = double(TAME, ENDS, tame.M_minus, tame.M_plus)
    tau = np.linspace(0.0, 1.0, 41)
    U = tame(tame.M_plus * tau)
    V = tame(-tame.M_minus * tau)
    Y = np.vstack([U, V])
    F = dp.problem.rhs(tau, Y)
    np.testing.assert_allclose(F[:4], tame.M_plus * vector_field(U, TAME, ENDS))
    np.testing.assert_allclose(F[4:], -tame.M_minus * vector_field(V, TAME, ENDS))
    bc = dp.problem.bc(Y[:, 0], Y[:, -1])
    assert abs(bc[0]) < 1e-6 and np.max(np.abs(bc[1:5])) < 1e-12


def test_reconstructed_profile_is_continuous(tame):
    assert tame.info["matching_jump"] < 1e-10
    assert np.all(np.diff(tame.xi) > 0)


def test_initial_guess_phase_and_limits():
    mesh = initial_guess(TAME, ENDS, 20.0, 20.0)
    at0 = mesh.values[:, mesh.nodes == 0.0]
    assert at0.shape[1] == 1 and at0[0, 0] == 0.5 * (ENDS.u_minus + ENDS.u_plus)
    assert abs(mesh.values[0, 0] - ENDS.u_minus) < np.exp(-20.0 + 2)
    assert abs(mesh.values[1, -1] - 1.0) < np.exp(-20.0 + 1)
    assert np.all(mesh.values[3] == 1.0)
    # y is the derivative of the z guess
    dz = np.gradient(mesh.values[1], mesh.nodes)
    assert np.max(np.abs(dz - mesh.values[2])) < 1e-3


def test_tame_solve_needs_no_continuation(tame):
    assert "continuation_steps" not in tame.info
    assert tame.info["domain_growths"] == 0


# ---------------------------------------------------------------------------
# regression values for k

def test_tame_k(tame):
    assert abs(tame.k_found - 8.177) <= 0.05 * 8.177


@pytest.mark.parametrize("changes, expected, rel", [
    (dict(E_A=1e-3), 0.236, 0.05),
    (dict(q=0.25), 7913.0, 0.10),
    (dict(E_A=6.0), 21600.0, 0.10),
])
def test_k_regressions(family, changes, expected, rel):
    prof = family(**changes)
    assert abs(prof.k_found - expected) <= rel * expected


def test_continuation_to_start_returns_start(tame):
    assert continue_family(tame, TAME) is tame


def test_continuation_matches_direct_solve(tame):
    target = TAME.with_(q=0.45)
    via = continue_family(tame, target, ContinuationSchedule(initial_steps=2))
    direct = solve_profile(target, tame)
    assert abs(via.k_found / direct.k_found - 1) < 1e-6


# ---------------------------------------------------------------------------
# explicit tail

@given(st.floats(1e-3, 0.4999))
def test_beta_is_one_for_zero_unburned_state(q):
    p = ModelParams(q=q)
    assert abs(tail_beta(p, EndStates.from_params(p)) - 1.0) < 1e-12


def test_explicit_tail_limits_and_derivative():
    tail = TailSolution(1.0, 0.3, 0.7)
    u, z, y = explicit_tail(np.array([60.0]), tail, TAME)
    np.testing.assert_allclose([u[0], z[0], y[0]], [ENDS.u_plus, 1.0, 0.0], atol=1e-12)
    xi = np.linspace(0, 10, 2001)
    _, z, y = explicit_tail(xi, tail, TAME)
    np.testing.assert_allclose(np.gradient(z, xi)[1:-1], y[1:-1], atol=1e-5)


def test_explicit_tail_solves_reaction_free_system():
    p = TAME.with_(D=2.0)
    tail = TailSolution(tail_beta(p, EndStates.from_params(p)), -0.4, 0.2)
    xi = np.linspace(0.5, 8, 7)
    h = 1e-6
    (u, z, y), (up, zp, yp), (um, zm, ym) = (explicit_tail(xi + s, tail, p) for s in (0, h, -h))
    # with phi = 0: u' = f(u) - f(u_-) - (u - u_-) - q(z + D y), y' = -y / D
    ends = EndStates.from_params(p)
    rhs = 0.5 * u**2 - 0.5 * ends.u_minus**2 - (u - ends.u_minus) - p.q * (z + p.D * y)
    np.testing.assert_allclose((up - um) / (2 * h), rhs, atol=1e-8)
    np.testing.assert_allclose((yp - ym) / (2 * h), -y / p.D, atol=1e-8)


# ---------------------------------------------------------------------------
# validation and solution invariants

def test_tame_profile_validates(tame):
    diag = validate_profile(tame, raise_on_failure=True)
    assert diag.ok and diag.monotone and diag.bounded and diag.decay_ok
    assert diag.tail_error < 1e-4
    assert max(tame.boundary_residuals) < 1e-3


def test_injected_bump_fails_monotonicity(tame):
    states = tame.states.copy()
    j = np.argmin(np.abs(tame.xi))
    states[0, j - 3:j + 4] += 0.05 * np.hanning(7)
    bumped = replace(tame, states=states)
    diag = validate_profile(bumped)
    assert not diag.monotone
    with pytest.raises(ValidationFailed, match="monotonicity"):
        validate_profile(bumped, raise_on_failure=True)


def test_fitted_tail_error(tame):
    tail = fit_tail(tame)
    assert tail.beta == pytest.approx(1.0, abs=1e-12)
    assert tail.C_z > 0


def test_residual_defect_within_tolerance(tame):
    settings_ = ProfileSettings()
    problem = bvp.BvpProblem(4, lambda x, Y: vector_field(Y, tame.params, tame.end_states),
                             lambda ya, yb: np.zeros(4))
    defect = bvp.collocation_residuals(problem, tame.xi, tame.states)
    assert np.max(defect) < 10 * settings_.residual_tolerance


def test_k_constant_across_mesh(tame):
    k = tame.states[3]
    assert np.ptp(k) / abs(k.mean()) < 1e-10
    assert tame.k_found == k[0]


def test_z_stays_in_unit_interval(tame):
    assert tame.z.min() >= -1e-6 and tame.z.max() <= 1 + 1e-6


def test_phase_condition_holds(tame):
    u0 = tame(np.array([0.0]))[0, 0]
    assert abs(u0 - tame.phase_value) < 1e-8
    assert tame.phase_value == 0.5 * (ENDS.u_minus + ENDS.u_plus)


def test_refinement_stability(tame):
    fine = solve_profile(TAME, tame, ProfileSettings(residual_tolerance=1e-7))
    assert abs(fine.k_found / tame.k_found - 1) < 1e-3


@pytest.mark.parametrize("frac", [0.3, 0.7])
def test_translation_gauge(tame, frac):
    phase = ENDS.u_plus + frac * (ENDS.u_minus - ENDS.u_plus)
    shifted = solve_profile(TAME, settings=ProfileSettings(phase_value=phase))
    assert abs(shifted.k_found / tame.k_found - 1) < 1e-3
    # locate the shift where the tame profile takes the new phase value
    x = np.linspace(-5, 5, 20001)
    delta = x[np.argmin(np.abs(tame(x)[0] - phase))]
    xs = np.linspace(-8, 8, 33)
    np.testing.assert_allclose(shifted(xs)[0], tame(xs + delta)[0], atol=2e-3)


def test_save_load_round_trip(tame, tmp_path):
    path = tame.save(tmp_path / "prof")
    assert path.suffix == ".json" and (tmp_path / "prof.csv").exists()
    back = ProfileSolution.load(path)
    assert back.k_found == tame.k_found and back.params == tame.params
    np.testing.assert_array_equal(back.xi, tame.xi)
    np.testing.assert_array_equal(back.states, tame.states)
    np.testing.assert_allclose(back.derivatives, tame.derivatives, rtol=0, atol=1e-15)


@settings(max_examples=6, deadline=None)
@given(st.floats(0.42, 0.499), st.floats(0.7, 1.5), st.floats(0.6, 1.5))
def test_nearby_profiles_validate(tame, q, D, E_A):
    prof = continue_family(tame, ModelParams(q=q, D=D, E_A=E_A))
    assert validate_profile(prof).ok
    assert prof.k_found > 0
