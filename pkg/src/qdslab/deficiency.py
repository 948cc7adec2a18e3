"""Deficiency-index lab: defect vectors of the first-order transport
operator on the half line, Cayley-transform indices of shift isometries,
and symmetric extensions built from an isometry between defect spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad

from .catalog import IsometrySpec, build_tau_f_transport
from .core import (
    ConvergenceError,
    ModelSpec,
    NotApplicableError,
    StructureError,
    generator_action,
    herm,
    opnorm,
)
from .tolerances import Tolerances, DEFAULT

SQUARE_INTEGRABLE = "square_integrable"
DIVERGENT = "divergent"


@dataclass(frozen=True)
class TauFModel:
    """Coefficient function f and grid for the transport operator.

    ``f`` must be positive with bounded derivative, and the integral of
    1/f must diverge at infinity; the catalog family f(x) = (1+x)^alpha,
    alpha in [0, 1], satisfies all three.  ``bigF`` is the antiderivative
    of 1/f vanishing at 0.
    """

    grid: np.ndarray
    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    bigF: Callable[[np.ndarray], np.ndarray]
    c1: float = 1.0
    alpha: Optional[float] = None
    analytic: bool = True

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 8 or g[0] != 0.0 or np.any(np.diff(g) <= 0):
            raise StructureError("grid must be increasing, start at 0, size >= 8")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        fv = np.asarray(self.f(g), dtype=float)
        if np.any(fv <= 0):
            raise StructureError("f must be positive on the grid")

    @classmethod
    def power(cls, alpha: float, grid, c1: float = 1.0) -> "TauFModel":
        if not 0.0 <= alpha <= 1.0:
            raise StructureError("alpha must be in [0, 1]")

        def f(x):
            return (1.0 + np.asarray(x)) ** alpha

        def fprime(x):
            return alpha * (1.0 + np.asarray(x)) ** (alpha - 1.0)

        if alpha == 1.0:
            def bigF(x):
                return np.log1p(np.asarray(x))
        else:
            def bigF(x):
                x = np.asarray(x)
                return ((1.0 + x) ** (1.0 - alpha) - 1.0) / (1.0 - alpha)

        return cls(grid=np.asarray(grid, dtype=float), f=f, fprime=fprime,
                   bigF=bigF, c1=c1, alpha=alpha, analytic=True)

    @classmethod
    def from_samples(cls, f_samples, grid, c1: float = 1.0) -> "TauFModel":
        grid = np.asarray(grid, dtype=float)
        fs = np.asarray(f_samples, dtype=float)
        if fs.shape != grid.shape:
            raise StructureError("f_samples must match the grid")
        inv_cum = np.concatenate(
            [[0.0], cumulative_trapezoid(1.0 / fs, grid)]
        )
        fps = np.gradient(fs, grid)

        def f(x):
            return np.interp(np.asarray(x), grid, fs)

        def fprime(x):
            return np.interp(np.asarray(x), grid, fps)

        def bigF(x):
            return np.interp(np.asarray(x), grid, inv_cum)

        return cls(grid=grid, f=f, fprime=fprime, bigF=bigF, c1=c1,
                   alpha=None, analytic=False)

    def derivative_bound(self) -> float:
        return float(np.max(np.abs(self.fprime(self.grid))))

    def inv_f_integral_at_edge(self) -> float:
        return float(self.bigF(self.grid[-1]))


def defect_candidates(model: TauFModel, exponent: float = -0.5):
    """Grid samples of the two defect-equation solutions.

    The decaying branch is c1 f^exponent e^{-F}, the growing branch
    c1 f^{-1/2} e^{+F}; the exponent of f in the decaying branch is kept
    as a parameter so the two candidate normalizations can be compared by
    their equation residuals.
    """
    g = model.grid
    fv = np.asarray(model.f(g), dtype=float)
    bf = np.asarray(model.bigF(g), dtype=float)
    u_plus = model.c1 * fv ** exponent * np.exp(-bf)
    u_minus = model.c1 * fv ** (-0.5) * np.exp(np.minimum(bf, 300.0))
    return u_plus.astype(complex), u_minus.astype(complex)


def apply_tau_f_discrete(model: TauFModel, u: np.ndarray) -> np.ndarray:
    """First-order forward-difference discretization of the transport
    differential expression, valid on all nodes but the last."""
    g = model.grid
    fv = np.asarray(model.f(g), dtype=float)
    fpv = np.asarray(model.fprime(g), dtype=float)
    h = np.diff(g)
    du = np.empty_like(u)
    du[:-1] = (u[1:] - u[:-1]) / h
    du[-1] = (u[-1] - u[-2]) / h[-1]
    return -1j * (fv * du + 0.5 * fpv * u)


def defect_equation_residual(model: TauFModel, u: np.ndarray, sign: int) -> float:
    """Relative residual of tau_f u = (sign) i u on the interior nodes."""
    t = apply_tau_f_discrete(model, u)
    r = t[:-1] - sign * 1j * u[:-1]
    return float(np.linalg.norm(r) / max(np.linalg.norm(u[:-1]), 1e-300))


def deficiency_vectors_tau_f(
    model: TauFModel, residual_threshold: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled defect vectors u_+ (decaying) and u_- (growing).

    Checks that the discretized differential expression reproduces
    +i u_+ to first order in the grid spacing; errors out with the
    achieved residual if the grid is too coarse.
    """
    u_plus, u_minus = defect_candidates(model)
    h_max = float(np.max(np.diff(model.grid)))
    if residual_threshold is None:
        scale = (1.0 + model.derivative_bound()) ** 2
        residual_threshold = 50.0 * scale * h_max
    for u, sign in ((u_plus, +1), (u_minus, -1)):
        resid = defect_equation_residual(model, u, sign)
        if resid > residual_threshold:
            raise ConvergenceError(
                f"defect-equation residual {resid:.3e} exceeds threshold "
                f"{residual_threshold:.3e}; refine the grid",
                achieved=resid,
            )
    return u_plus, u_minus


@dataclass(frozen=True)
class DeficiencyResult:
    n_plus: int
    n_minus: int
    u_plus_samples: Optional[np.ndarray]
    u_minus_samples: Optional[np.ndarray]
    norm_plus: Optional[float]
    norm_minus_tail: Optional[str]
    details: dict

    def to_dict(self) -> dict:
        return {
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "norm_plus": self.norm_plus,
            "norm_minus_tail": self.norm_minus_tail,
            "details": {k: v for k, v in self.details.items()
                        if not isinstance(v, np.ndarray)},
        }


def deficiency_indices_tau_f(
    model: TauFModel, tol: Tolerances = DEFAULT
) -> DeficiencyResult:
    """Defect indices of the minimal transport operator on the half line.

    The squared norm of the decaying defect vector is evaluated by
    quadrature of c1^2 f^{-1} e^{-2F}; because the integrand is minus half
    the derivative of e^{-2F} and the integral of 1/f diverges, the exact
    value is c1^2 / 2.  The growing branch is classified divergent by a
    doubling protocol on its partial norms; together these give indices
    (1, 0).
    """
    c1sq = model.c1 ** 2

    def plus_integrand(x):
        return c1sq * np.exp(-2.0 * model.bigF(x)) / model.f(x)

    def minus_integrand(x):
        expo = 2.0 * model.bigF(x)
        return c1sq * np.exp(np.minimum(expo, 300.0)) / model.f(x)

    x_edge = float(model.grid[-1])
    if model.analytic:
        norm_plus, err = quad(plus_integrand, 0.0, np.inf, epsabs=tol.quad_tol / 10,
                              epsrel=tol.quad_tol / 10, limit=400)
    else:
        if plus_integrand(x_edge) > 1e-12:
            raise ConvergenceError(
                "grid does not extend far enough to resolve the decaying tail"
            )
        # piecewise-linear interpolants upset the adaptive error estimate;
        # full_output silences the warning, the tail bound above is the guard
        out = quad(plus_integrand, 0.0, x_edge, epsabs=tol.quad_tol / 10,
                   epsrel=tol.quad_tol / 10, limit=400,
                   points=None, full_output=1)
        norm_plus, err = out[0], out[1]

    # partial norms of the growing branch over a doubling ladder
    x0 = x_edge / 8.0
    partials = []
    overflowed = False
    for k in range(4):
        xk = x0 * (2.0 ** k)
        if 2.0 * float(model.bigF(xk)) > 290.0:
            overflowed = True
            break
        val, _ = quad(minus_integrand, 0.0, xk, limit=400)
        partials.append(val)
    ratios = [b / a for a, b in zip(partials, partials[1:])]
    integrand_grows = minus_integrand(x_edge) >= minus_integrand(x_edge / 2.0)
    if overflowed or (ratios and all(r > tol.divergence_ratio for r in ratios)
                      and integrand_grows):
        minus_tail = DIVERGENT
    elif ratios and all(r < 1.0 + 1e-9 for r in ratios):
        minus_tail = SQUARE_INTEGRABLE
    else:
        raise ConvergenceError(
            "tail classification of the growing branch is unstable; extend the grid"
        )

    u_plus, u_minus = deficiency_vectors_tau_f(model)
    n_plus = 1 if np.isfinite(norm_plus) else 0
    n_minus = 0 if minus_tail == DIVERGENT else 1
    return DeficiencyResult(
        n_plus=n_plus,
        n_minus=n_minus,
        u_plus_samples=u_plus,
        u_minus_samples=u_minus,
        norm_plus=float(norm_plus),
        norm_minus_tail=minus_tail,
        details={
            "norm_plus_quad_error": float(err),
            "partial_norms_minus": partials,
            "derivative_bound": model.derivative_bound(),
            "inv_f_integral_at_edge": model.inv_f_integral_at_edge(),
        },
    )


# ---------------------------------------------------------------------------
# Cayley transform of an isometry


def _null_space(m: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    u, s, vt = np.linalg.svd(m)
    if s.size:
        rank = int(np.sum(s > rel_tol * max(s[0], 1.0)))
    else:
        rank = 0
    return vt[rank:].conj().T


def _stable_overlap_dim(b_small: np.ndarray, b_large: np.ndarray,
                        cos_threshold: float) -> int:
    """Number of directions shared by a subspace at truncation d (zero
    padded) and its recomputation at truncation 2d (principal angles)."""
    if b_small.size == 0 or b_large.size == 0:
        return 0
    padded = np.zeros((b_large.shape[0], b_small.shape[1]), dtype=complex)
    padded[: b_small.shape[0], :] = b_small
    s = np.linalg.svd(padded.conj().T @ b_large, compute_uv=False)
    return int(np.sum(s > cos_threshold))


def cayley_deficiency_from_isometry(
    iso: IsometrySpec | Callable[[int], np.ndarray],
    dim: int | None = None,
    tol: Tolerances = DEFAULT,
) -> DeficiencyResult:
    """Defect indices of the symmetric operator behind an isometry.

    The plus index is the stable dimension of the orthogonal complement
    of the isometry's domain, the minus index the stable dimension of
    the kernel of its adjoint; "stable" means reproduced (by principal
    angles) when the truncation dimension is doubled, which filters out
    truncation-edge artifacts.  The density of the range of I - V, the
    existence criterion for the transform, is verified the same way: no
    stable unit vector may annihilate that range.
    """
    if isinstance(iso, IsometrySpec):
        base_dim = iso.dim if dim is None else dim
        matrix_fn = iso.matrix

        def dom_complement(d: int) -> np.ndarray:
            eye = np.eye(d, dtype=complex)
            return eye[:, iso.defined_columns(d):]
    else:
        if dim is None:
            raise NotApplicableError("dim is required with a matrix callable")
        base_dim = dim
        matrix_fn = iso

        def dom_complement(d: int) -> np.ndarray:
            return np.zeros((d, 0), dtype=complex)

    results = {}
    for d in (base_dim, 2 * base_dim):
        v = matrix_fn(d)
        cols_defined = v.shape[1] - dom_complement(d).shape[1]
        vc = v[:, :cols_defined]
        if opnorm(vc.conj().T @ vc - np.eye(cols_defined)) > 1e-10:
            raise StructureError("columns are not orthonormal where defined")
        results[d] = {
            "dom_perp": dom_complement(d),
            "ker_adjoint": _null_space(v.conj().T),
            "range_perp": _null_space((np.eye(d) - v).conj().T),
        }

    small, large = results[base_dim], results[2 * base_dim]
    stable_range_perp = _stable_overlap_dim(
        small["range_perp"], large["range_perp"], tol.stability_cos
    )
    if stable_range_perp > 0:
        raise NotApplicableError(
            "range of I - V is not dense: the Cayley transform does not exist"
        )

    n_plus = _stable_overlap_dim(small["dom_perp"], large["dom_perp"],
                                 tol.stability_cos)
    n_minus = _stable_overlap_dim(small["ker_adjoint"], large["ker_adjoint"],
                                  tol.stability_cos)
    if small["ker_adjoint"].shape[1] != large["ker_adjoint"].shape[1]:
        raise ConvergenceError(
            "kernel dimension does not stabilize across truncations"
        )
    return DeficiencyResult(
        n_plus=n_plus,
        n_minus=n_minus,
        u_plus_samples=None,
        u_minus_samples=small["ker_adjoint"],
        norm_plus=None,
        norm_minus_tail=None,
        details={"dims_checked": (base_dim, 2 * base_dim)},
    )


# ---------------------------------------------------------------------------
# von Neumann extensions


@dataclass(frozen=True)
class ExtensionSpec:
    """Data for a symmetric extension built from an isometry between
    defect subspaces: w = u + v + Vv maps to Hu + iv - iVv."""

    base_operator: np.ndarray
    dom: np.ndarray            # orthonormal columns spanning dom H
    n_plus_basis: np.ndarray   # orthonormal columns spanning N_+
    n_minus_basis: np.ndarray  # orthonormal columns spanning N_-
    isometry: np.ndarray       # coefficients of V: N_+ -> N_-

    def __post_init__(self):
        h = np.asarray(self.base_operator, dtype=complex)
        d = h.shape[0]
        if h.shape != (d, d):
            raise StructureError("base operator must be square")
        for nm, b in (("dom", self.dom), ("n_plus_basis", self.n_plus_basis),
                      ("n_minus_basis", self.n_minus_basis)):
            b = np.asarray(b, dtype=complex)
            if b.ndim != 2 or b.shape[0] != d:
                raise StructureError(f"{nm} must have {d} rows")
            if b.shape[1] and opnorm(b.conj().T @ b - np.eye(b.shape[1])) > 1e-8:
                raise StructureError(f"{nm} columns must be orthonormal")


class ExtensionEvaluator:
    """Applies the extended operator to decomposed domain elements."""

    def __init__(self, ext: ExtensionSpec):
        a = ext.n_plus_basis.shape[1]
        b = ext.n_minus_basis.shape[1]
        if a > b:
            raise NotApplicableError(
                "n_+ > n_-: no isometry into the minus defect space exists"
            )
        v = np.asarray(ext.isometry, dtype=complex)
        if v.shape != (b, a):
            raise StructureError(f"isometry must be {b}x{a}")
        if a and opnorm(v.conj().T @ v - np.eye(a)) > 1e-10:
            raise StructureError("isometry columns must be orthonormal")
        self.ext = ext
        self._rank = int(np.linalg.matrix_rank(v)) if v.size else 0

    def apply(self, dom_coeffs: np.ndarray, defect_coeffs: np.ndarray):
        """Return (w, H_V w) for w = u + v + Vv with u = dom @ dom_coeffs
        and v = n_plus_basis @ defect_coeffs."""
        e = self.ext
        u = e.dom @ np.asarray(dom_coeffs, dtype=complex)
        vplus = e.n_plus_basis @ np.asarray(defect_coeffs, dtype=complex)
        vminus = e.n_minus_basis @ (e.isometry @ np.asarray(defect_coeffs,
                                                            dtype=complex))
        w = u + vplus + vminus
        hw = e.base_operator @ u + 1j * vplus - 1j * vminus
        return w, hw

    def symmetry_residual(self, n_samples: int = 20, seed: int = 0) -> float:
        """Max |<H_V w, w'> - <w, H_V w'>| over random domain samples."""
        rng = np.random.default_rng(seed)
        e = self.ext
        p, a = e.dom.shape[1], e.n_plus_basis.shape[1]
        worst = 0.0
        for _ in range(n_samples):
            def draw(k):
                return (rng.standard_normal(k) + 1j * rng.standard_normal(k)
                        if k else np.zeros(0))
            w1, hw1 = self.apply(draw(p), draw(a))
            w2, hw2 = self.apply(draw(p), draw(a))
            resid = abs(np.vdot(hw1, w2) - np.vdot(w1, hw2))
            scale = max(np.linalg.norm(w1) * np.linalg.norm(w2), 1e-300)
            worst = max(worst, resid / scale)
        return worst

    def deficiency_after(self) -> tuple[int, int]:
        """Indices of the extension: each matched defect direction drops."""
        a = self.ext.n_plus_basis.shape[1]
        b = self.ext.n_minus_basis.shape[1]
        return a - self._rank, b - self._rank


def von_neumann_extension(ext: ExtensionSpec) -> ExtensionEvaluator:
    """Build the evaluator for the symmetric extension defined by an
    isometry between defect subspaces; refuses when n_+ > n_-."""
    return ExtensionEvaluator(ext)


# ---------------------------------------------------------------------------
# eigenvalue-2 certificate from a normalized defect vector


@dataclass(frozen=True)
class DefectProjectorReport:
    resolutions: tuple[int, ...]
    residuals: tuple[float, ...]
    orders: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "resolutions": list(self.resolutions),
            "residuals": list(self.residuals),
            "orders": list(self.orders),
        }


def _defect_projector_residual(model: TauFModel, spec: ModelSpec) -> float:
    """Max over the interior basis of |L(x)[v] - 2 <v, x v>| where x is
    the normalized rank-one projector onto the sampled defect vector."""
    g = model.grid
    h = float(g[1] - g[0])
    u_plus, _ = defect_candidates(model)
    u = u_plus * np.sqrt(h)
    u = u / np.linalg.norm(u)
    x = np.outer(u, u.conj())
    resid_mat = generator_action(spec, x) - 2.0 * x
    p = spec.domain_projector()
    diag = np.real(np.einsum("ij,jk,ki->i", p.conj().T, resid_mat, p))
    return float(np.max(np.abs(diag))) if diag.size else 0.0


def defect_projector_certificate(
    model: TauFModel, refinements: int = 1, tol: Tolerances = DEFAULT
) -> DefectProjectorReport:
    """Residual of the eigenvalue-2 identity for the defect projector.

    For x the projector onto a normalized plus-defect vector, the
    generator satisfies L(x)[v] = 2 <v, x v> for v in D in the continuum;
    the discrete residual is reported together with its convergence order
    under grid refinement.  Refuses when the model has no plus defect.
    """
    idx = deficiency_indices_tau_f(model, tol)
    if idx.n_plus == 0:
        raise NotApplicableError("certificate undefined: n_+ = 0")
    g0 = model.grid
    if np.ptp(np.diff(g0)) > 1e-12 * (g0[1] - g0[0]):
        raise StructureError("certificate requires a uniform grid")

    resolutions = []
    residuals = []
    nodes = g0.size
    for level in range(refinements + 1):
        n = (nodes - 1) * (2 ** level) + 1
        grid = np.linspace(0.0, g0[-1], n)
        refined = TauFModel.power(model.alpha, grid, model.c1) if model.analytic \
            else TauFModel.from_samples(model.f(grid), grid, model.c1)
        spec = build_tau_f_transport(
            refined.alpha if refined.analytic else 0.0,
            grid,
            orientation="forward",
            f=None if refined.analytic else refined.f,
            fprime=None if refined.analytic else refined.fprime,
        )
        resolutions.append(n)
        residuals.append(_defect_projector_residual(refined, spec))
    orders = tuple(
        float(np.log2(max(a, 1e-300) / max(b, 1e-300)))
        for a, b in zip(residuals, residuals[1:])
    )
    return DefectProjectorReport(
        resolutions=tuple(resolutions),
        residuals=tuple(residuals),
        orders=orders,
    )


EXTENDS = "extends_to_isometry_generator"
DOES_NOT = "does_not"


def isometric_restriction_verdict(n_plus: int, n_minus: int) -> str:
    """Whether iH restricts a generator of an isometric semigroup."""
    if n_plus < 0 or n_minus < 0:
        raise NotApplicableError("indices must be nonnegative")
    return EXTENDS if n_plus <= n_minus else DOES_NOT
