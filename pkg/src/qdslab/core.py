"""Model data types and the algebraic primitives of the generator.

A model is a finite-dimensional truncation: a square matrix ``G`` whose
negative generates the contraction semigroup, a list of Kraus operators
realizing the completely positive part ``phi(x) = sum_k L_k^* x L_k``,
and a distinguished subspace ``D`` on which the identity is required to
be (approximately) annihilated by the generator.

Sesquilinear-form convention: ``M[u, v] = <u, M v> = u^dagger M v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .tolerances import Tolerances, DEFAULT


class QdsLabError(Exception):
    """Base class for toolkit errors."""


class StructureError(QdsLabError, ValueError):
    """Inconsistent dimensions or invalid model data."""


class DomainError(QdsLabError, ValueError):
    """Vector outside the represented domain of an operation."""


class ConvergenceError(QdsLabError, RuntimeError):
    """An iterative or adaptive procedure failed to meet its tolerance."""

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class NotApplicableError(QdsLabError, ValueError):
    """Preconditions for the requested operation do not hold."""


def herm(m: np.ndarray) -> np.ndarray:
    """Hermitian part (symmetrization) of a square matrix."""
    return 0.5 * (m + m.conj().T)


def opnorm(m: np.ndarray) -> float:
    """Operator 2-norm."""
    return float(np.linalg.norm(m, 2))


def eig_range(m: np.ndarray) -> tuple[float, float]:
    """(min, max) eigenvalue of the Hermitian part of ``m``."""
    w = np.linalg.eigvalsh(herm(m))
    return float(w[0]), float(w[-1])


@dataclass(frozen=True)
class TruncatedSpace:
    """Dimension (and optional basis labels) of a truncated Hilbert space."""

    dim: int
    basis_labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise StructureError("space dimension must be >= 1")
        if self.basis_labels is not None and len(self.basis_labels) != self.dim:
            raise StructureError("basis_labels length must equal dim")


@dataclass(frozen=True)
class HermitianForm:
    """A Hermitian matrix standing for a bounded sesquilinear form."""

    matrix: np.ndarray
    tag: str = "observable"

    _TAGS = ("observable", "explosion", "resolvent_map_value", "laplace_form")

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StructureError("HermitianForm requires a square matrix")
        if opnorm(m - m.conj().T) > 1e-8 * max(1.0, opnorm(m)):
            raise StructureError("matrix is not Hermitian within tolerance")
        m = herm(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.tag not in self._TAGS:
            raise StructureError(f"unknown tag {self.tag!r}")

    @classmethod
    def identity(cls, dim: int, tag: str = "observable") -> "HermitianForm":
        return cls(np.eye(dim), tag)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def value(self, u: np.ndarray, v: np.ndarray | None = None) -> complex:
        """Form value ``<u, M v>`` (quadratic form when ``v`` is omitted)."""
        v = u if v is None else v
        return complex(np.vdot(u, self.matrix @ v))


def as_matrix(x) -> np.ndarray:
    """Coerce a HermitianForm or array-like to a complex ndarray."""
    if isinstance(x, HermitianForm):
        return x.matrix
    return np.asarray(x, dtype=complex)


@dataclass(frozen=True)
class ModelSpec:
    """A truncated model: generator matrix, Kraus operators, subspace D."""

    space: TruncatedSpace
    G: np.ndarray
    kraus_ops: tuple[np.ndarray, ...]
    domain_indices: Optional[tuple[int, ...]] = None
    domain_matrix: Optional[np.ndarray] = None
    name: str = ""
    grid_model: bool = False
    probe: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.space.dim
        g = np.asarray(self.G, dtype=complex)
        if g.shape != (d, d):
            raise StructureError(f"G must be {d}x{d}, got {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "G", g)

        ops = []
        for k, L in enumerate(self.kraus_ops):
            L = np.asarray(L, dtype=complex)
            if L.shape != (d, d):
                raise StructureError(f"Kraus operator {k} must be {d}x{d}")
            L.setflags(write=False)
            ops.append(L)
        object.__setattr__(self, "kraus_ops", tuple(ops))

        if self.domain_indices is not None and self.domain_matrix is not None:
            raise StructureError("give domain_indices or domain_matrix, not both")
        if self.domain_indices is not None:
            idx = tuple(int(i) for i in self.domain_indices)
            if any(i < 0 or i >= d for i in idx):
                raise StructureError("domain index out of range")
            if len(set(idx)) != len(idx):
                raise StructureError("duplicate domain index")
            object.__setattr__(self, "domain_indices", idx)
        if self.domain_matrix is not None:
            p = np.asarray(self.domain_matrix, dtype=complex)
            if p.ndim != 2 or p.shape[0] != d:
                raise StructureError("domain_matrix must have dim rows")
            if opnorm(p.conj().T @ p - np.eye(p.shape[1])) > 1e-8:
                raise StructureError("domain_matrix columns must be orthonormal")
            p.setflags(write=False)
            object.__setattr__(self, "domain_matrix", p)
        if self.probe is not None:
            pv = np.asarray(self.probe, dtype=complex)
            if pv.shape != (d,):
                raise StructureError("probe must be a vector of length dim")
            n = np.linalg.norm(pv)
            if n == 0:
                raise StructureError("probe must be nonzero")
            pv = pv / n
            pv.setflags(write=False)
            object.__setattr__(self, "probe", pv)

    @property
    def dim(self) -> int:
        return self.space.dim

    def domain_projector(self) -> np.ndarray:
        """Orthonormal columns spanning D (defaults to the whole space)."""
        if self.domain_indices is not None:
            return np.eye(self.dim, dtype=complex)[:, list(self.domain_indices)]
        if self.domain_matrix is not None:
            return self.domain_matrix
        return np.eye(self.dim, dtype=complex)

    def probe_vector(self) -> np.ndarray:
        """Unit probe vector used by sweep observables (defaults to e_0)."""
        if self.probe is not None:
            return self.probe
        e0 = np.zeros(self.dim, dtype=complex)
        e0[0] = 1.0
        return e0


# ---------------------------------------------------------------------------
# algebraic primitives


def phi_action(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    """CP part: sum_k L_k^dagger x L_k (raw-array fast path)."""
    d = spec.dim
    out = np.zeros((d, d), dtype=complex)
    for L in spec.kraus_ops:
        out += L.conj().T @ x @ L
    return out


def generator_action(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Heisenberg generator: phi(x) - G^dagger x - x G (raw-array fast path)."""
    return phi_action(spec, x) - spec.G.conj().T @ x - x @ spec.G


def predual_action(spec: ModelSpec, rho: np.ndarray) -> np.ndarray:
    """Schroedinger (trace-duality) generator on density matrices."""
    d = spec.dim
    out = np.zeros((d, d), dtype=complex)
    for L in spec.kraus_ops:
        out += L @ rho @ L.conj().T
    return out - spec.G @ rho - rho @ spec.G.conj().T


def _check_dim(spec: ModelSpec, x: np.ndarray, what: str):
    if x.shape != (spec.dim, spec.dim):
        raise StructureError(
            f"{what} has shape {x.shape}, expected ({spec.dim}, {spec.dim})"
        )


def apply_phi(spec: ModelSpec, x) -> HermitianForm:
    """Apply the CP part to a Hermitian observable."""
    xm = as_matrix(x)
    _check_dim(spec, xm, "observable")
    return HermitianForm(herm(phi_action(spec, xm)))


def apply_generator(spec: ModelSpec, x) -> HermitianForm:
    """Apply the full generator to a Hermitian observable."""
    xm = as_matrix(x)
    _check_dim(spec, xm, "observable")
    return HermitianForm(herm(generator_action(spec, xm)))


def predual_generator(spec: ModelSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Predual generator on the rank-one operator |v><u|.

    Returns ``sum_k L_k |v><u| L_k^dagger - |v><Gu| - |Gv><u|``, which is
    trace-dual to the Heisenberg generator: ``tr(x . result) = L(x)[u, v]``.
    Both vectors must lie in the span of D; the predual generator is only
    established on rank-one operators over that subspace.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != (spec.dim,) or v.shape != (spec.dim,):
        raise StructureError("u and v must be vectors of length dim")
    p = spec.domain_projector()
    for w, label in ((u, "u"), (v, "v")):
        resid = np.linalg.norm(w - p @ (p.conj().T @ w))
        if resid > 1e-8 * max(1.0, np.linalg.norm(w)):
            raise DomainError(f"{label} is not in span(D) (residual {resid:.2e})")
    ket_vu = np.outer(v, u.conj())
    out = np.zeros((spec.dim, spec.dim), dtype=complex)
    for L in spec.kraus_ops:
        out += L @ ket_vu @ L.conj().T
    gu = spec.G @ u
    gv = spec.G @ v
    out -= np.outer(v, gu.conj())
    out -= np.outer(gv, u.conj())
    return out


def phi_choi_matrix(spec: ModelSpec) -> np.ndarray:
    """Choi matrix of the CP part (positive semidefinite by construction)."""
    d = spec.dim
    c = np.zeros((d * d, d * d), dtype=complex)
    for L in spec.kraus_ops:
        v = L.reshape(-1)
        c += np.outer(v, v.conj())
    return c


# ---------------------------------------------------------------------------
# structural validation


@dataclass(frozen=True)
class ValidationReport:
    """Residuals and verdicts for the structural conditions of a model."""

    dissipativity_residual: float
    condition_iii_residual: float
    condition_iii_prime_residual: float
    condition_iv_residual: float
    verdicts: dict

    def passed(self) -> bool:
        return all(v in ("pass", "grid-approximate", "informational")
                   for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "dissipativity_residual": self.dissipativity_residual,
            "condition_iii_residual": self.condition_iii_residual,
            "condition_iii_prime_residual": self.condition_iii_prime_residual,
            "condition_iv_residual": self.condition_iv_residual,
            "verdicts": dict(self.verdicts),
        }


def validate_model(spec: ModelSpec, tol: Tolerances = DEFAULT) -> ValidationReport:
    """Check dissipativity and the structural conditions on the generator.

    Reported residuals:

    * dissipativity: most negative eigenvalue of ``G + G*`` (clamped at 0);
    * sub-unitality: most positive eigenvalue of ``L(I)`` (the generator
      applied to the identity must be negative semidefinite);
    * no-local-loss: ``||L(I)||`` -- informational, its failure is what
      makes a truncated model explosive;
    * D-compression: largest ``|L(I)[u, v]|`` over an orthonormal basis of
      D.  For grid-discretized models this is scheme-dependent and is
      reported as ``grid-approximate`` instead of failing.
    """
    d = spec.dim
    eye = np.eye(d)
    gherm = herm(spec.G + spec.G.conj().T)
    wmin = float(np.linalg.eigvalsh(gherm)[0])
    dissipativity_residual = max(0.0, -wmin)

    li = herm(generator_action(spec, eye))
    iii_residual = max(0.0, float(np.linalg.eigvalsh(li)[-1]))
    iii_prime_residual = opnorm(li)

    p = spec.domain_projector()
    compressed = p.conj().T @ li @ p
    iv_residual = float(np.max(np.abs(compressed))) if compressed.size else 0.0

    scale = max(1.0, opnorm(spec.G))
    verdicts = {
        "dissipativity": "pass" if dissipativity_residual <= tol.psd_tol * scale else "fail",
        "condition_iii": "pass" if iii_residual <= tol.psd_tol * scale else "fail",
        "condition_iii_prime": "informational",
        "condition_iv": (
            "pass" if iv_residual <= tol.condition_iv_tol * scale
            else ("grid-approximate" if spec.grid_model else "fail")
        ),
    }
    return ValidationReport(
        dissipativity_residual=dissipativity_residual,
        condition_iii_residual=iii_residual,
        condition_iii_prime_residual=iii_prime_residual,
        condition_iv_residual=iv_residual,
        verdicts=verdicts,
    )
