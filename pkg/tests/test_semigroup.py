import numpy as np
import pytest

import qdslab as q

from conftest import random_psd


def test_propagator_is_contraction(lindblad4):
    for t in (0.0, 0.3, 2.0):
        w = q.propagator(lindblad4, t)
        assert np.linalg.norm(w.W, 2) <= 1.0 + 1e-10
    with pytest.raises(q.NotApplicableError):
        q.propagator(lindblad4, -1.0)


def test_propagator_rejects_expanding_generator():
    spec = q.ModelSpec(q.TruncatedSpace(2), -np.eye(2), (),
                       domain_indices=(0, 1))
    with pytest.raises(q.NotApplicableError):
        q.propagator(spec, 1.0)


def test_two_state_heisenberg_closed_form(two_state_birth):
    # rates (1, 2): X(t) = diag(2 e^{-t} - e^{-2t}, e^{-2t}) by hand
    for t in (0.25, 1.0, 3.0):
        res = q.evolve_observable(two_state_birth, np.eye(2), t)
        x = res.observables[-1].matrix
        expected = np.diag([2 * np.exp(-t) - np.exp(-2 * t), np.exp(-2 * t)])
        assert np.linalg.norm(x - expected, 2) <= 1e-9


def test_explosion_observable_complements_identity(two_state_birth):
    res = q.evolve_observable(two_state_birth, np.eye(2), 1.0, steps=5)
    assert res.explosion is not None
    for obs, exp in zip(res.observables, res.explosion):
        assert np.allclose(obs.matrix + exp.matrix, np.eye(2), atol=1e-12)
    w = np.linalg.eigvalsh(res.explosion[-1].matrix)
    assert w[0] >= -1e-10  # escape probability is a positive form


def test_explosion_only_for_identity_start(two_state_birth):
    res = q.evolve_observable(two_state_birth, np.diag([1.0, 0.5]), 1.0)
    assert res.explosion is None


def test_evolution_time_grid_and_errors(lindblad4):
    res = q.evolve_observable(lindblad4, np.eye(4), [0.1, 0.5, 1.0])
    assert res.times == (0.1, 0.5, 1.0)
    with pytest.raises(q.NotApplicableError):
        q.evolve_observable(lindblad4, np.eye(4), [1.0, 0.5])
    with pytest.raises(q.NotApplicableError):
        q.evolve_observable(lindblad4, np.eye(3), 1.0)


def test_conservative_evolution_fixes_identity(lindblad4):
    res = q.evolve_observable(lindblad4, np.eye(4), 8.0, steps=4)
    for obs in res.observables:
        assert np.linalg.norm(obs.matrix - np.eye(4), 2) <= 1e-8


def test_minimal_iteration_monotone_and_converges(two_state_birth):
    its = q.minimal_iteration(two_state_birth, np.eye(2), t=1.0, n_max=10)
    for a, b in zip(its, its[1:]):
        wmin = np.linalg.eigvalsh(b.matrix - a.matrix)[0]
        assert wmin >= -1e-10
    ode = q.evolve_observable(two_state_birth, np.eye(2), 1.0)
    assert np.linalg.norm(its[-1].matrix - ode.observables[-1].matrix, 2) <= 1e-6


def test_minimal_iteration_first_iterate_is_sandwich(two_state_birth):
    import scipy.linalg as sla
    its = q.minimal_iteration(two_state_birth, np.eye(2), t=0.7, n_max=3)
    w = sla.expm(-0.7 * two_state_birth.G)
    assert np.allclose(its[0].matrix, w.conj().T @ w, atol=1e-12)


def test_minimal_iteration_no_cp_part_is_constant():
    spec = q.build_unitary(3, 2)
    its = q.minimal_iteration(spec, np.eye(3), t=1.0, n_max=4)
    for a in its[1:]:
        assert np.allclose(a.matrix, its[0].matrix, atol=1e-14)


def test_minimal_iteration_rejects_indefinite(two_state_birth):
    with pytest.raises(q.NotApplicableError):
        q.minimal_iteration(two_state_birth, np.diag([1.0, -1.0]), 1.0, 3)


def test_predual_trace_decay_matches_explosion(two_state_birth):
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    t = 1.5
    rho = q.predual_evolve(two_state_birth, rho0, t)
    res = q.evolve_observable(two_state_birth, np.eye(2), t)
    # tr(rho_t) = <e_0, P_t(I) e_0> by duality
    expected = res.observables[-1].matrix[0, 0].real
    assert np.trace(rho).real == pytest.approx(expected, abs=1e-9)
    assert np.trace(rho).real <= 1.0 + 1e-12


def test_predual_rejects_bad_states(two_state_birth):
    with pytest.raises(q.NotApplicableError):
        q.predual_evolve(two_state_birth, np.diag([1.0, -0.2]), 1.0)
    with pytest.raises(q.NotApplicableError):
        q.predual_evolve(two_state_birth, np.diag([1.0, 0.5]), 1.0)


def test_schroedinger_heisenberg_duality(lindblad4, rng):
    rho0 = random_psd(rng, 4)
    rho0 = rho0 / np.trace(rho0).real
    x = random_psd(rng, 4)
    t = 0.8
    rho_t = q.predual_evolve(lindblad4, rho0, t)
    x_t = q.evolve_observable(lindblad4, x, t).observables[-1].matrix
    lhs = np.trace(rho_t @ x).real
    rhs = np.trace(rho0 @ x_t).real
    assert lhs == pytest.approx(rhs, abs=1e-8)
