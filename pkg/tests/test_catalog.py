import numpy as np
import pytest

import qdslab as q


GRID = np.linspace(0.0, 20.0, 100)


def catalog_models():
    return [
        q.build_pure_birth("linear", 7),
        q.build_pure_birth("quadratic", 7),
        q.build_tau_f_transport(0.5, GRID, "forward"),
        q.build_tau_f_transport(0.5, GRID, "adjoint"),
        q.build_tau_f_transport(0.0, GRID, "forward",
                                noise=lambda s: 1.0 / (1.0 + s)),
        q.build_bounded_lindblad(4, 11),
        q.build_unitary(3, 11),
    ]


def test_every_catalog_entry_validates():
    for spec in catalog_models():
        rep = q.validate_model(spec)
        assert rep.passed(), (spec.name, rep.verdicts)


def test_birth_rate_formulas():
    lin = q.build_pure_birth("linear", 3)
    assert np.allclose(np.diag(lin.G).real, [0.5, 1.0, 1.5, 2.0])
    quad = q.build_pure_birth("quadratic", 3)
    assert np.allclose(np.diag(quad.G).real, [0.5, 2.0, 4.5, 8.0])
    fn = q.build_pure_birth(lambda k: 2.0 ** k, 2)
    assert np.allclose(np.diag(fn.G).real, [0.5, 1.0, 2.0])
    with pytest.raises(q.StructureError):
        q.build_pure_birth("cubic", 3)
    with pytest.raises(q.StructureError):
        q.build_pure_birth([1.0, 0.0], 1)


def test_birth_kraus_kills_top_level():
    spec = q.build_pure_birth("linear", 4)
    L = spec.kraus_ops[0]
    assert np.allclose(L[:, 4], 0.0)  # no outgoing amplitude at the top
    li = q.apply_generator(spec, np.eye(5)).matrix
    assert np.allclose(li[:4, :4], 0.0, atol=1e-13)
    assert li[4, 4].real == pytest.approx(-5.0)


def test_transport_orientations_are_adjoint():
    fwd = q.build_tau_f_transport(0.5, GRID, "forward")
    adj = q.build_tau_f_transport(0.5, GRID, "adjoint")
    assert np.allclose(adj.G, fwd.G.conj().T)


def test_transport_noise_adds_diagonal():
    def ell(s):
        return 1.0 / (1.0 + s)

    plain = q.build_tau_f_transport(0.0, GRID, "forward")
    noisy = q.build_tau_f_transport(0.0, GRID, "forward", noise=ell)
    assert len(noisy.kraus_ops) == 1
    assert np.allclose(np.diag(noisy.kraus_ops[0]), ell(GRID))
    assert np.allclose(noisy.G - plain.G, 0.5 * np.diag(ell(GRID) ** 2))
    assert q.validate_model(noisy).passed()


def test_transport_grid_requirements():
    with pytest.raises(q.StructureError):
        q.build_tau_f_transport(0.5, np.linspace(1.0, 20.0, 50))
    with pytest.raises(q.StructureError):
        q.build_tau_f_transport(0.5, np.array([0.0, 1.0, 3.0, 7.0]))
    with pytest.raises(q.StructureError):
        q.build_tau_f_transport(2.0, GRID)


def test_transport_domain_and_probe():
    spec = q.build_tau_f_transport(0.5, GRID, "forward")
    assert spec.domain_indices == tuple(range(1, GRID.size - 2))
    p = spec.probe_vector()
    assert p[0] == 0.0
    assert np.linalg.norm(p) == pytest.approx(1.0)


def test_lindblad_annihilates_identity_exactly():
    spec = q.build_bounded_lindblad(5, 3)
    li = q.apply_generator(spec, np.eye(5)).matrix
    assert np.linalg.norm(li, 2) <= 1e-13


def test_lindblad_seed_determinism():
    a = q.build_bounded_lindblad(4, 9)
    b = q.build_bounded_lindblad(4, 9)
    assert np.array_equal(a.G, b.G)
    assert all(np.array_equal(x, y) for x, y in zip(a.kraus_ops, b.kraus_ops))
    c = q.build_bounded_lindblad(4, 10)
    assert not np.allclose(a.G, c.G)


def test_unitary_model_is_conservative_and_isometric():
    spec = q.build_unitary(3, 4)
    w = q.propagator(spec, 1.3).W
    assert np.allclose(w.conj().T @ w, np.eye(3), atol=1e-12)


def test_shift_isometry_structure():
    iso = q.build_shift_isometry(2, 10)
    v = iso.matrix()
    assert np.allclose(v[2:, :8], np.eye(8))
    assert np.allclose(v[:, 8:], 0.0)
    assert iso.defined_columns() == 8
    with pytest.raises(q.StructureError):
        q.build_shift_isometry(3, 6)
    with pytest.raises(q.StructureError):
        q.build_shift_isometry(0, 10)


def test_families_are_consistent():
    fam = q.birth_family("quadratic")
    assert fam(6).dim == 6
    tf = q.transport_family(0.0, 20.0, "adjoint")
    spec = tf(64)
    assert spec.dim == 64
    assert spec.metadata["orientation"] == "adjoint"


def test_catalog_registry_lists_all_kinds():
    kinds = {e.kind for e in q.CATALOG}
    assert kinds == {"pure-birth", "tau-f", "bounded-lindblad", "unitary",
                     "shift"}
