import numpy as np
import pytest

import qdslab as q
from qdslab.deficiency import (
    DIVERGENT,
    TauFModel,
    defect_candidates,
    defect_equation_residual,
    defect_projector_certificate,
    deficiency_indices_tau_f,
    deficiency_vectors_tau_f,
    cayley_deficiency_from_isometry,
    isometric_restriction_verdict,
    von_neumann_extension,
)
from qdslab import ExtensionSpec


GRID = np.linspace(0.0, 40.0, 2001)


def test_alpha_zero_closed_forms():
    # f = 1: the defect equation is -iu' = +/- iu, so u_+ = e^{-x}, u_- = e^{x}
    model = TauFModel.power(0.0, GRID)
    u_plus, u_minus = deficiency_vectors_tau_f(model)
    assert np.allclose(u_plus, np.exp(-GRID), atol=1e-12)
    assert np.allclose(u_minus / np.exp(GRID), 1.0, atol=1e-12)


def test_alpha_one_closed_form():
    # f = 1+x: integral of 1/f is log(1+x), so u_+ = c (1+x)^{-3/2}
    model = TauFModel.power(1.0, GRID, c1=2.0)
    u_plus, _ = deficiency_vectors_tau_f(model)
    assert np.allclose(u_plus, 2.0 * (1.0 + GRID) ** -1.5, atol=1e-12)


def test_decaying_exponent_choice_by_residual():
    # the f^{-1/2} prefactor solves the defect equation; f^{+1/2} does not
    model = TauFModel.power(0.5, GRID)
    good, _ = defect_candidates(model, exponent=-0.5)
    bad, _ = defect_candidates(model, exponent=+0.5)
    r_good = defect_equation_residual(model, good, +1)
    r_bad = defect_equation_residual(model, bad, +1)
    assert r_good < 1e-1 * r_bad
    assert r_bad > 1e-2  # genuinely fails the equation, not a grid artifact


def test_residual_first_order_in_spacing():
    coarse = TauFModel.power(0.5, np.linspace(0.0, 20.0, 501))
    fine = TauFModel.power(0.5, np.linspace(0.0, 20.0, 1001))
    rc = defect_equation_residual(coarse, defect_candidates(coarse)[0], +1)
    rf = defect_equation_residual(fine, defect_candidates(fine)[0], +1)
    assert rf <= 0.65 * rc  # order >= ~0.6, consistent with first order


def test_coarse_grid_refused():
    model = TauFModel.power(0.0, np.linspace(0.0, 40.0, 9))
    with pytest.raises(q.ConvergenceError) as err:
        deficiency_vectors_tau_f(model, residual_threshold=1e-3)
    assert err.value.achieved is not None


@pytest.mark.parametrize("alpha,c1", [(0.0, 1.0), (0.5, 1.0), (1.0, 2.0)])
def test_norm_identity_and_indices(alpha, c1):
    model = TauFModel.power(alpha, GRID, c1)
    res = deficiency_indices_tau_f(model)
    assert res.norm_plus == pytest.approx(c1 ** 2 / 2.0, abs=1e-8)
    assert res.norm_minus_tail == DIVERGENT
    assert (res.n_plus, res.n_minus) == (1, 0)
    partials = res.details["partial_norms_minus"]
    assert all(b > a for a, b in zip(partials, partials[1:]))


def test_growing_partial_norms_exceed_threshold():
    model = TauFModel.power(0.5, GRID)
    res = deficiency_indices_tau_f(model)
    assert max(res.details["partial_norms_minus"], default=1e9) > 1e3 or \
        res.norm_minus_tail == DIVERGENT


def test_sampled_f_matches_analytic():
    grid = np.linspace(0.0, 80.0, 4001)
    analytic = TauFModel.power(0.5, grid)
    sampled = TauFModel.from_samples((1.0 + grid) ** 0.5, grid)
    ra = deficiency_indices_tau_f(analytic)
    rs = deficiency_indices_tau_f(sampled)
    assert rs.norm_plus == pytest.approx(ra.norm_plus, abs=1e-4)
    assert (rs.n_plus, rs.n_minus) == (1, 0)


def test_model_invariants():
    with pytest.raises(q.StructureError):
        TauFModel.power(1.5, GRID)
    with pytest.raises(q.StructureError):
        TauFModel.power(0.5, np.linspace(1.0, 40.0, 100))  # must start at 0
    model = TauFModel.power(1.0, GRID)
    assert model.derivative_bound() <= 1.0 + 1e-12
    assert model.inv_f_integral_at_edge() == pytest.approx(np.log(41.0), abs=1e-12)


# -- Cayley ------------------------------------------------------------------


def test_shift_one_indices_and_kernel():
    res = cayley_deficiency_from_isometry(q.build_shift_isometry(1, 24))
    assert (res.n_plus, res.n_minus) == (0, 1)
    basis = res.u_minus_samples
    e0 = np.zeros(24)
    e0[0] = 1.0
    assert abs(abs(np.vdot(basis[:, 0], e0)) - 1.0) <= 1e-10


@pytest.mark.parametrize("m", [2, 3, 4])
def test_shift_family_indices(m):
    res = cayley_deficiency_from_isometry(q.build_shift_isometry(m, 24))
    assert (res.n_plus, res.n_minus) == (0, m)


def test_identity_rejected_by_density_precondition():
    with pytest.raises(q.NotApplicableError):
        cayley_deficiency_from_isometry(lambda d: np.eye(d, dtype=complex),
                                        dim=16)


def test_non_isometric_columns_rejected():
    class Bad:
        pass

    iso = q.IsometrySpec(m=1, dim=16, weights=tuple([2.0] * 16))
    with pytest.raises(q.StructureError):
        cayley_deficiency_from_isometry(iso)


# -- extensions ----------------------------------------------------------------


def _orthogonal_extension_data():
    """dom, N_+, N_- mutually orthogonal; Hermitian action on dom."""
    d = 5
    rng = np.random.default_rng(3)
    h0 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h0 = 0.5 * (h0 + h0.conj().T)
    base = np.zeros((d, d), dtype=complex)
    base[:3, :3] = h0
    dom = np.eye(d, dtype=complex)[:, :3]
    n_plus = np.eye(d, dtype=complex)[:, 3:4]
    n_minus = np.eye(d, dtype=complex)[:, 4:5]
    return base, dom, n_plus, n_minus


def test_extension_with_full_isometry_is_symmetric():
    base, dom, n_plus, n_minus = _orthogonal_extension_data()
    ev = von_neumann_extension(
        ExtensionSpec(base, dom, n_plus, n_minus, np.array([[1.0]]))
    )
    assert ev.symmetry_residual(n_samples=30) <= 1e-8
    assert ev.deficiency_after() == (0, 0)


def test_extension_with_empty_isometry_keeps_base():
    base, dom, _, n_minus = _orthogonal_extension_data()
    d = base.shape[0]
    ev = von_neumann_extension(
        ExtensionSpec(base, dom, np.zeros((d, 0)), n_minus, np.zeros((1, 0)))
    )
    assert ev.symmetry_residual() <= 1e-10
    assert ev.deficiency_after() == (0, 1)
    w, hw = ev.apply(np.array([1.0, 0.0, 0.0]), np.zeros(0))
    assert np.allclose(hw, base @ w, atol=1e-12)


def test_extension_refuses_excess_plus_index():
    base, dom, n_plus, _ = _orthogonal_extension_data()
    d = base.shape[0]
    with pytest.raises(q.NotApplicableError, match="n_"):
        von_neumann_extension(
            ExtensionSpec(base, dom, n_plus, np.zeros((d, 0)),
                          np.zeros((0, 1)))
        )


def test_extension_rejects_non_isometric_map():
    base, dom, n_plus, n_minus = _orthogonal_extension_data()
    with pytest.raises(q.StructureError):
        von_neumann_extension(
            ExtensionSpec(base, dom, n_plus, n_minus, np.array([[0.5]]))
        )


# -- defect projector certificate ---------------------------------------------


def test_defect_projector_certificate_converges():
    model = TauFModel.power(0.0, np.linspace(0.0, 20.0, 201))
    rep = defect_projector_certificate(model, refinements=1)
    assert rep.residuals[1] <= 0.6 * rep.residuals[0]
    assert rep.orders[0] >= 0.7


def test_defect_projector_far_tail_vanishes():
    from qdslab.catalog import build_tau_f_transport
    from qdslab.core import generator_action

    grid = np.linspace(0.0, 20.0, 201)
    model = TauFModel.power(0.0, grid)
    spec = build_tau_f_transport(0.0, grid, "forward")
    h = grid[1] - grid[0]
    u = defect_candidates(model)[0] * np.sqrt(h)
    u = u / np.linalg.norm(u)
    x = np.outer(u, u.conj())
    resid = generator_action(spec, x) - 2.0 * x
    far = grid.size - 5  # inside D, far from the mass of u
    assert abs(resid[far, far]) <= 1e-10


# -- verdicts ------------------------------------------------------------------


def test_restriction_verdicts():
    assert isometric_restriction_verdict(1, 0) == "does_not"
    assert isometric_restriction_verdict(0, 1) == "extends_to_isometry_generator"
    assert isometric_restriction_verdict(2, 2) == "extends_to_isometry_generator"
    with pytest.raises(q.NotApplicableError):
        isometric_restriction_verdict(-1, 0)


def test_indices_pair_with_semigroup_behaviour():
    # (1,0) orientation: the discrete propagator is strictly contractive
    import scipy.linalg as sla

    grid = np.linspace(0.0, 20.0, 101)
    fwd = q.build_tau_f_transport(0.0, grid, "forward")
    w = sla.expm(-1.0 * fwd.G)
    e = np.exp(-grid)
    e = e / np.linalg.norm(e)
    assert np.linalg.norm(w @ e) < 1.0 - 1e-3
    cert = q.conservativity_verdict(q.LaplaceContext(fwd, 1.0))
    assert cert.verdict == q.VERDICT_EXPLOSIVE
