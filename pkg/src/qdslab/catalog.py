"""Benchmark model constructors.

Four families exercise every diagnostic:

* pure-birth chains with killing at the top level -- the classical
  diagonal sub-case with closed-form explosion oracles;
* upwind discretizations of the first-order transport generator on a
  half-line grid, in the mass-leaking and the adjoint orientation, with
  an optional bounded multiplication noise operator;
* seeded bounded Lindblad models (exactly trace-preserving controls);
* banded shift isometries for the Cayley-transform lab.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ModelSpec, StructureError, TruncatedSpace, herm


# -- pure birth --------------------------------------------------------------

RATE_FORMULAS = {
    "linear": lambda n: float(n + 1),
    "quadratic": lambda n: float((n + 1) ** 2),
}


def _rates(q, n: int) -> np.ndarray:
    if isinstance(q, str):
        try:
            fn = RATE_FORMULAS[q]
        except KeyError:
            raise StructureError(f"unknown rate formula {q!r}") from None
        vals = np.array([fn(k) for k in range(n + 1)])
    elif callable(q):
        vals = np.array([float(q(k)) for k in range(n + 1)])
    else:
        vals = np.asarray(q, dtype=float)
        if vals.shape != (n + 1,):
            raise StructureError(f"rate list must have length {n + 1}")
    if np.any(vals <= 0):
        raise StructureError("birth rates must be positive")
    return vals


def build_pure_birth(q, n: int, name: str = "") -> ModelSpec:
    """Pure-birth chain on levels 0..n with killing at the top level.

    ``G = diag(q)/2`` and a single Kraus operator moves level k to k+1
    with amplitude sqrt(q_k); the top level has no outgoing Kraus
    amplitude while G keeps its rate, so the identity is annihilated by
    the generator everywhere except at the truncation edge.  D spans the
    interior levels 0..n-1.
    """
    if n < 0:
        raise StructureError("truncation level must be >= 0")
    rates = _rates(q, n)
    d = n + 1
    g = np.diag(rates / 2.0).astype(complex)
    ell = np.zeros((d, d), dtype=complex)
    for k in range(n):
        ell[k + 1, k] = np.sqrt(rates[k])
    domain = tuple(range(n)) if n >= 1 else (0,)
    return ModelSpec(
        space=TruncatedSpace(d),
        G=g,
        kraus_ops=(ell,),
        domain_indices=domain,
        name=name or f"pure-birth(n={n})",
        metadata={"kind": "pure_birth", "rates": rates.tolist()},
    )


def birth_family(q) -> Callable[[int], ModelSpec]:
    """Family callable for truncation sweeps: dimension -> model."""

    def build(dim: int) -> ModelSpec:
        return build_pure_birth(q, dim - 1)

    return build


# -- transport on a half-line grid -------------------------------------------


def _power_f(alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise StructureError("alpha must be in [0, 1]")

    def f(x):
        return (1.0 + x) ** alpha

    def fprime(x):
        return alpha * (1.0 + x) ** (alpha - 1.0)

    return f, fprime


def build_tau_f_transport(
    alpha: float,
    grid: np.ndarray,
    orientation: str = "forward",
    noise: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    f: Optional[Callable] = None,
    fprime: Optional[Callable] = None,
    name: str = "",
) -> ModelSpec:
    """First-order upwind discretization of the transport generator.

    The forward orientation discretizes the generator whose semigroup
    carries mass toward the origin and out of the domain (explosive); the
    adjoint orientation is its matrix adjoint (conservative in the
    continuum limit).  With noise, G gains half the squared modulus of
    the multiplication function and the corresponding diagonal Kraus
    operator is attached.

    The grid must be uniform and start at 0.  D is spanned by the grid
    basis vectors vanishing at the boundary node and at the two nodes at
    the truncation edge; the probe vector is a smooth bump used by sweep
    observables.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 4:
        raise StructureError("grid must be a 1-d array with at least 4 nodes")
    if grid[0] != 0.0:
        raise StructureError("grid must start at x=0")
    h = np.diff(grid)
    if np.any(h <= 0) or np.ptp(h) > 1e-12 * h[0]:
        raise StructureError("grid must be uniform and increasing")
    h = float(h[0])
    if orientation not in ("forward", "adjoint"):
        raise StructureError("orientation must be 'forward' or 'adjoint'")
    if f is None:
        f, fprime = _power_f(alpha)
    fv = np.asarray(f(grid), dtype=float)
    fpv = np.asarray(fprime(grid), dtype=float)
    if np.any(fv <= 0):
        raise StructureError("f must be positive on the grid")

    d = grid.size
    a = np.zeros((d, d), dtype=complex)
    for j in range(d):
        a[j, j] = -fv[j] / h + 0.5 * fpv[j]
        if j + 1 < d:
            a[j, j + 1] = fv[j] / h
    g = -a
    if orientation == "adjoint":
        g = g.conj().T

    kraus: tuple[np.ndarray, ...] = ()
    if noise is not None:
        lv = np.asarray(noise(grid), dtype=complex)
        if lv.shape != (d,):
            raise StructureError("noise function must return one value per node")
        g = g + 0.5 * np.diag(np.abs(lv) ** 2)
        kraus = (np.diag(lv),)

    wmin = float(np.linalg.eigvalsh(herm(g + g.conj().T))[0])
    if wmin < -1e-8 * max(1.0, float(np.max(fv)) / h):
        raise StructureError(
            f"discretization breaks dissipativity (residual {-wmin:.3e})"
        )

    probe = grid * np.exp(-grid)
    probe[0] = 0.0
    domain = tuple(range(1, d - 2))
    return ModelSpec(
        space=TruncatedSpace(d),
        G=g,
        kraus_ops=kraus,
        domain_indices=domain,
        name=name or f"tau-f(alpha={alpha},{orientation},M={d})",
        grid_model=True,
        probe=probe,
        metadata={
            "kind": "tau_f_transport",
            "alpha": alpha,
            "orientation": orientation,
            "x_max": float(grid[-1]),
            "spacing": h,
            "has_noise": noise is not None,
        },
    )


def transport_family(
    alpha: float,
    x_max: float,
    orientation: str = "forward",
    noise=None,
) -> Callable[[int], ModelSpec]:
    """Family callable for sweeps: node count -> model on [0, x_max]."""

    def build(nodes: int) -> ModelSpec:
        grid = np.linspace(0.0, x_max, nodes)
        return build_tau_f_transport(alpha, grid, orientation, noise)

    return build


# -- bounded Lindblad controls ----------------------------------------------


def build_bounded_lindblad(dim: int, seed: int, n_kraus: int = 2,
                           name: str = "") -> ModelSpec:
    """Seeded random Lindblad model with exact trace preservation.

    G is half the sum of L_k^* L_k minus i times a random Hermitian H, so
    the generator annihilates the identity exactly and every diagnostic
    must come back conservative.  Same seed, same model, bit for bit.
    """
    if dim < 1:
        raise StructureError("dim must be >= 1")
    rng = np.random.default_rng(seed)

    def cmat():
        return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))

    h = herm(cmat())
    kraus = tuple(cmat() / np.sqrt(dim) for _ in range(n_kraus))
    phi_i = sum(L.conj().T @ L for L in kraus)
    g = 0.5 * phi_i - 1j * h
    return ModelSpec(
        space=TruncatedSpace(dim),
        G=g,
        kraus_ops=kraus,
        domain_indices=tuple(range(dim)),
        name=name or f"bounded-lindblad(dim={dim},seed={seed})",
        metadata={"kind": "bounded_lindblad", "seed": seed},
    )


def build_unitary(dim: int, seed: int = 0, name: str = "") -> ModelSpec:
    """Hamiltonian-only model (no CP part): G = -iH with H Hermitian."""
    rng = np.random.default_rng(seed)
    h = herm(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return ModelSpec(
        space=TruncatedSpace(dim),
        G=-1j * h,
        kraus_ops=(),
        domain_indices=tuple(range(dim)),
        name=name or f"unitary(dim={dim},seed={seed})",
        metadata={"kind": "unitary", "seed": seed},
    )


# -- shift isometries ---------------------------------------------------------


@dataclass(frozen=True)
class IsometrySpec:
    """Banded shift isometry: e_n -> weight_n e_{n+m} where defined."""

    m: int
    dim: int
    weights: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.m < 1:
            raise StructureError("shift offset must be >= 1")
        if self.dim <= 2 * self.m:
            raise StructureError("dim must exceed 2*m")
        if self.weights is not None:
            if len(self.weights) < self.dim - self.m:
                raise StructureError("not enough weights for the truncation")

    def matrix(self, dim: int | None = None) -> np.ndarray:
        d = self.dim if dim is None else dim
        v = np.zeros((d, d), dtype=complex)
        for n in range(d - self.m):
            w = 1.0 if self.weights is None else self.weights[n]
            v[n + self.m, n] = w
        return v

    def defined_columns(self, dim: int | None = None) -> int:
        d = self.dim if dim is None else dim
        return d - self.m


def build_shift_isometry(m: int, dim: int) -> IsometrySpec:
    """Shift isometry e_n -> e_{n+m} truncated to the given dimension."""
    return IsometrySpec(m=m, dim=dim)


# -- registry for the CLI -----------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    kind: str
    description: str
    parameters: dict


CATALOG = (
    CatalogEntry(
        "pure-birth",
        "pure-birth chain with killing at the top level",
        {"rates": "named formula (linear|quadratic) or list", "dim": "level count N+1"},
    ),
    CatalogEntry(
        "tau-f",
        "upwind transport discretization on [0, x_max]",
        {
            "alpha": "exponent of f(x) = (1+x)^alpha, in [0, 1]",
            "orientation": "forward (explosive) | adjoint (conservative limit)",
            "noise": "optional bounded multiplication amplitude 1/(1+s)",
            "grid": "start:stop:nodes",
        },
    ),
    CatalogEntry(
        "bounded-lindblad",
        "seeded random trace-preserving Lindblad control",
        {"dim": "dimension", "seed": "RNG seed"},
    ),
    CatalogEntry(
        "unitary",
        "Hamiltonian-only model, no CP part",
        {"dim": "dimension", "seed": "RNG seed"},
    ),
    CatalogEntry(
        "shift",
        "banded shift isometry for the Cayley lab",
        {"m": "shift offset", "dim": "truncation dimension"},
    ),
)
