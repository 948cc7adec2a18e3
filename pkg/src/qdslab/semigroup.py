"""Time-domain machinery: contraction propagator, evolution of
observables, the monotone iteration scheme, and the explosion observable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .core import (
    ConvergenceError,
    HermitianForm,
    ModelSpec,
    NotApplicableError,
    as_matrix,
    generator_action,
    herm,
    opnorm,
    phi_action,
    predual_action,
)
from .tolerances import Tolerances, DEFAULT


@dataclass(frozen=True)
class Propagator:
    """exp(-tG) at a fixed time, with the contraction contract checked."""

    t: float
    W: np.ndarray


def _require_dissipative(spec: ModelSpec, tol: Tolerances):
    wmin = float(np.linalg.eigvalsh(herm(spec.G + spec.G.conj().T))[0])
    scale = max(1.0, opnorm(spec.G))
    if wmin < -tol.psd_tol * scale:
        raise NotApplicableError(
            f"-G is not dissipative: min eig of G+G* is {wmin:.3e}"
        )


def propagator(spec: ModelSpec, t: float, tol: Tolerances = DEFAULT) -> Propagator:
    """Contraction propagator W_t = exp(-tG)."""
    if t < 0:
        raise NotApplicableError("propagator requires t >= 0")
    _require_dissipative(spec, tol)
    w = sla.expm(-t * spec.G)
    nrm = opnorm(w)
    if nrm > 1.0 + max(tol.contraction_tol, 1e-12 * opnorm(spec.G) * max(t, 1.0)):
        raise ConvergenceError(
            f"propagator norm {nrm:.12f} exceeds contraction bound", achieved=nrm - 1.0
        )
    return Propagator(t=float(t), W=w)


@dataclass(frozen=True)
class EvolutionResult:
    """Sampled Heisenberg evolution, with the explosion observable when x=I."""

    times: tuple[float, ...]
    observables: tuple[HermitianForm, ...]
    explosion: tuple[HermitianForm, ...] | None

    def to_rows(self) -> list[dict]:
        rows = []
        for i, t in enumerate(self.times):
            m = self.observables[i].matrix
            w = np.linalg.eigvalsh(m)
            row = {
                "t": t,
                "trace": float(np.trace(m).real),
                "min_eig": float(w[0]),
                "max_eig": float(w[-1]),
            }
            if self.explosion is not None:
                we = np.linalg.eigvalsh(self.explosion[i].matrix)
                row["explosion_min_eig"] = float(we[0])
                row["explosion_max_eig"] = float(we[-1])
            rows.append(row)
        return rows


def _evolve_raw(
    spec: ModelSpec,
    x0: np.ndarray,
    times: np.ndarray,
    tol: Tolerances,
    predual: bool = False,
):
    """Integrate dX/dt = L(X) (or the predual equation) on a time grid.

    Returns the solve_ivp solution object with dense output enabled; the
    caller evaluates and symmetrizes at the times it needs.
    """
    d = spec.dim
    action = predual_action if predual else generator_action

    def rhs(_t, y):
        return action(spec, y.reshape(d, d)).reshape(-1)

    t_end = float(times[-1])
    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        np.asarray(x0, dtype=complex).reshape(-1),
        t_eval=np.asarray(times, dtype=float),
        dense_output=True,
        rtol=tol.ode_rtol,
        atol=tol.ode_atol,
        method="DOP853",
    )
    if not sol.success:
        raise ConvergenceError(f"master-equation integration failed: {sol.message}")
    return sol


def evolve_observable(
    spec: ModelSpec,
    x,
    t: float | Sequence[float],
    steps: int = 1,
    tol: Tolerances = DEFAULT,
) -> EvolutionResult:
    """Solve the master equation dX/dt = L(X), X(0) = x.

    ``t`` may be a final time (sampled at ``steps + 1`` uniform points) or
    an explicit increasing grid starting at a nonnegative time.  When the
    initial observable is the identity the explosion observable
    ``I - X(t)`` is returned alongside, symmetrized at every sample.
    """
    xm = as_matrix(x)
    if xm.shape != (spec.dim, spec.dim):
        raise NotApplicableError("observable dimension mismatch")
    _require_dissipative(spec, tol)
    if np.isscalar(t):
        if t < 0:
            raise NotApplicableError("evolution requires t >= 0")
        times = np.linspace(0.0, float(t), max(1, int(steps)) + 1)
    else:
        times = np.asarray(t, dtype=float)
        if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
            raise NotApplicableError("time grid must be increasing and nonnegative")

    if times[-1] == 0.0:
        samples = [herm(xm) for _ in times]
    else:
        sol = _evolve_raw(spec, xm, times, tol)
        samples = [herm(sol.sol(tt).reshape(spec.dim, spec.dim)) for tt in times]

    is_identity = opnorm(xm - np.eye(spec.dim)) <= 1e-12
    explosion = None
    if is_identity:
        eye = np.eye(spec.dim)
        explosion = tuple(
            HermitianForm(eye - s, tag="explosion") for s in samples
        )
    return EvolutionResult(
        times=tuple(float(tt) for tt in times),
        observables=tuple(HermitianForm(s) for s in samples),
        explosion=explosion,
    )


def minimal_iteration(
    spec: ModelSpec,
    x,
    t: float,
    n_max: int,
    quadrature_tol: float | None = None,
    tol: Tolerances = DEFAULT,
) -> list[HermitianForm]:
    """Iterates of the monotone construction of the minimal semigroup.

    Returns the first ``n_max`` iterates at time ``t``: the first is the
    free-evolution sandwich ``W_t^* x W_t``, and each successive iterate
    adds the time-convolution of the CP part applied to its predecessor.
    The convolution is evaluated on a uniform grid with a trapezoid rule
    whose weights are positive, so the form-order monotonicity of the
    iterates survives discretization exactly; the grid is doubled until
    the final iterate is stable to ``quadrature_tol``.

    The initial observable must be positive semidefinite (the monotone
    contract is only defined there).
    """
    if quadrature_tol is None:
        quadrature_tol = tol.quadrature_tol
    xm = as_matrix(x)
    if xm.shape != (spec.dim, spec.dim):
        raise NotApplicableError("observable dimension mismatch")
    wmin = float(np.linalg.eigvalsh(herm(xm))[0])
    if wmin < -tol.psd_tol * max(1.0, opnorm(xm)):
        raise NotApplicableError(
            f"initial observable must be positive semidefinite (min eig {wmin:.2e})"
        )
    if t < 0:
        raise NotApplicableError("iteration requires t >= 0")
    if n_max < 1:
        raise NotApplicableError("n_max must be >= 1")
    _require_dissipative(spec, tol)

    if t == 0.0 or not spec.kraus_ops:
        w = sla.expm(-t * spec.G)
        first = herm(w.conj().T @ xm @ w)
        return [HermitianForm(first) for _ in range(n_max)]

    def run(m_panels: int) -> list[np.ndarray]:
        h = t / m_panels
        e = sla.expm(-h * spec.G)
        ws = [np.eye(spec.dim, dtype=complex)]
        for _ in range(m_panels):
            ws.append(ws[-1] @ e)
        free = [w.conj().T @ xm @ w for w in ws]
        finals = [free[-1]]
        prev = free
        ed = e.conj().T
        for _ in range(1, n_max):
            a = [phi_action(spec, p) for p in prev]
            cur = [free[0]]
            s = np.zeros((spec.dim, spec.dim), dtype=complex)
            for j in range(m_panels):
                s = ed @ s @ e + 0.5 * h * (ed @ a[j] @ e + a[j + 1])
                cur.append(free[j + 1] + s)
            finals.append(cur[-1])
            prev = cur
        return finals

    m_panels = 64
    finals = run(m_panels)
    while True:
        m_panels *= 2
        refined = run(m_panels)
        diff = max(opnorm(a - b) for a, b in zip(finals, refined))
        finals = refined
        if diff < quadrature_tol:
            break
        if m_panels >= 1 << 15:
            raise ConvergenceError(
                f"iteration quadrature stalled at panel count {m_panels}",
                achieved=diff,
            )
    return [HermitianForm(herm(f)) for f in finals]


def predual_evolve(
    spec: ModelSpec,
    rho: np.ndarray,
    t: float | Sequence[float],
    tol: Tolerances = DEFAULT,
) -> np.ndarray | list[np.ndarray]:
    """Evolve a density matrix under the predual (Schroedinger) equation.

    The trace is nonincreasing; its deficit is the explosion probability
    accumulated by time t.  Refuses inputs that are not positive
    semidefinite or have trace above one.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (spec.dim, spec.dim):
        raise NotApplicableError("density matrix dimension mismatch")
    w = np.linalg.eigvalsh(herm(rho))
    if w[0] < -tol.psd_tol * max(1.0, float(w[-1])):
        raise NotApplicableError("density matrix must be positive semidefinite")
    tr = float(np.trace(rho).real)
    if tr > 1.0 + 1e-10:
        raise NotApplicableError("density matrix trace must be <= 1")
    _require_dissipative(spec, tol)

    scalar = np.isscalar(t)
    times = np.asarray([t] if scalar else t, dtype=float)
    if times[-1] == 0.0:
        outs = [herm(rho) for _ in times]
    else:
        sol = _evolve_raw(spec, rho, times, tol, predual=True)
        outs = [herm(sol.sol(tt).reshape(spec.dim, spec.dim)) for tt in times]
    return outs[0] if scalar else outs
