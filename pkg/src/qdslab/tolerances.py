"""Numerical tolerances shared across the toolkit.

All defaults are absolute and sized for double precision on
unit-normalized models up to a few hundred dimensions. Every knob can be
overridden per call or through the CLI config.
"""

from __future__ import annotations

from dataclasses import dataclass, replace, fields


@dataclass(frozen=True)
class Tolerances:
    # structural checks
    hermitian_tol: float = 1e-10
    psd_tol: float = 1e-10
    duality_tol: float = 1e-10
    condition_iv_tol: float = 1e-10

    # time-domain propagation
    contraction_tol: float = 1e-10
    semigroup_tol: float = 1e-8
    ode_atol: float = 1e-12
    ode_rtol: float = 1e-10

    # quadrature / iteration
    quadrature_tol: float = 1e-7
    laplace_quad_tol: float = 1e-7
    cross_method_tol: float = 1e-6
    iteration_convergence_tol: float = 1e-6

    # Laplace-domain certificates
    series_tail_tol: float = 1e-12
    stall_tol: float = 1e-12
    decision_threshold: float = 1e-7
    inconclusive_floor: float = 1e-9
    rank_rel_tol: float = 1e-8

    # deficiency lab
    quad_tol: float = 1e-8
    sym_tol: float = 1e-8
    divergence_ratio: float = 1.05
    stability_cos: float = 0.99

    def override(self, **kwargs) -> "Tolerances":
        return replace(self, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "Tolerances":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown tolerance keys: {sorted(bad)}")
        return cls(**d)


DEFAULT = Tolerances()
