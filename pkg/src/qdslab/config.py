"""Config ingestion: JSON model/run descriptions with complex entries
written as [re, im] pairs, plus catalog model references of the form
"pure-birth:quadratic" or "bounded-lindblad:seed=7,dim=4".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import catalog
from .core import ModelSpec, StructureError, TruncatedSpace
from .tolerances import Tolerances, DEFAULT


class ConfigError(StructureError):
    """Malformed configuration; message carries the offending key path."""


def complex_to_pairs(m: np.ndarray):
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def pairs_to_complex(data, where: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric nested array: {exc}") from None
    if arr.ndim == 3 and arr.shape[2] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ConfigError(
        f"{where}: expected a matrix of numbers or of [re, im] pairs, "
        f"got shape {arr.shape}"
    )


def model_to_dict(spec: ModelSpec) -> dict:
    out = {
        "dim": spec.dim,
        "G": complex_to_pairs(spec.G),
        "kraus_ops": [complex_to_pairs(L) for L in spec.kraus_ops],
        "name": spec.name,
        "grid_model": spec.grid_model,
        "metadata": dict(spec.metadata),
    }
    if spec.domain_indices is not None:
        out["domain_indices"] = list(spec.domain_indices)
    else:
        out["domain_matrix"] = complex_to_pairs(spec.domain_matrix)
    if spec.probe is not None:
        out["probe"] = [[float(z.real), float(z.imag)] for z in spec.probe]
    return out


def model_from_dict(data: dict) -> ModelSpec:
    try:
        dim = int(data["dim"])
        g = pairs_to_complex(data["G"], "G")
    except KeyError as exc:
        raise ConfigError(f"model: missing required key {exc}") from None
    kraus = tuple(
        pairs_to_complex(L, f"kraus_ops[{i}]")
        for i, L in enumerate(data.get("kraus_ops", []))
    )
    probe = None
    if data.get("probe") is not None:
        p = np.asarray(data["probe"], dtype=float)
        probe = p[:, 0] + 1j * p[:, 1] if p.ndim == 2 else p.astype(complex)
    kwargs = {}
    if "domain_indices" in data:
        kwargs["domain_indices"] = tuple(int(i) for i in data["domain_indices"])
    elif "domain_matrix" in data:
        kwargs["domain_matrix"] = pairs_to_complex(data["domain_matrix"],
                                                   "domain_matrix")
    else:
        kwargs["domain_indices"] = tuple(range(dim))
    return ModelSpec(
        space=TruncatedSpace(dim),
        G=g,
        kraus_ops=kraus,
        name=data.get("name", "inline"),
        grid_model=bool(data.get("grid_model", False)),
        probe=probe,
        metadata=data.get("metadata", {}),
        **kwargs,
    )


# ---------------------------------------------------------------------------
# catalog references: "kind:positional" with optional key=value parts


def _parse_kv(parts, where):
    pos, kv = [], {}
    for p in parts:
        if "=" in p:
            k, _, v = p.partition("=")
            kv[k.strip()] = v.strip()
        else:
            pos.append(p.strip())
    return pos, kv


def parse_grid(text: str) -> np.ndarray:
    """Parse "start:stop:nodes" into a uniform grid."""
    bits = text.split(":")
    if len(bits) != 3:
        raise ConfigError(f"grid: expected start:stop:nodes, got {text!r}")
    try:
        start, stop, nodes = float(bits[0]), float(bits[1]), int(bits[2])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    if nodes < 4 or stop <= start:
        raise ConfigError("grid: need stop > start and at least 4 nodes")
    return np.linspace(start, stop, nodes)


def resolve_model(ref: str, dim: Optional[int] = None,
                  grid: Optional[str] = None) -> ModelSpec:
    """Build a catalog model from a reference string.

    Examples: "pure-birth:quadratic", "pure-birth:linear,dim=64",
    "tau-f:alpha=0.5,orientation=adjoint" with a separate grid argument,
    "bounded-lindblad:seed=7,dim=4", "unitary:dim=3,seed=1".
    """
    kind, _, rest = ref.partition(":")
    kind = kind.strip()
    parts = [p for p in rest.split(",") if p.strip()] if rest else []
    pos, kv = _parse_kv(parts, ref)

    if kind in ("pure-birth", "pure_birth"):
        rates = pos[0] if pos else kv.get("rates", "linear")
        d = int(kv.get("dim", dim if dim is not None else 32))
        return catalog.build_pure_birth(rates, d - 1)
    if kind in ("tau-f", "tau_f", "transport"):
        alpha = float(kv.get("alpha", pos[0] if pos else 0.0))
        orientation = kv.get("orientation", "forward")
        noise = None
        if kv.get("noise") in ("1", "true", "yes"):
            def noise(x):
                return 1.0 / (1.0 + x)
        if grid is None:
            raise ConfigError("tau-f models need a grid (start:stop:nodes)")
        g = parse_grid(grid)
        return catalog.build_tau_f_transport(alpha, g, orientation, noise)
    if kind in ("bounded-lindblad", "bounded_lindblad", "lindblad"):
        d = int(kv.get("dim", dim if dim is not None else 4))
        seed = int(kv.get("seed", 0))
        n_kraus = int(kv.get("n_kraus", 2))
        return catalog.build_bounded_lindblad(d, seed, n_kraus)
    if kind == "unitary":
        d = int(kv.get("dim", dim if dim is not None else 4))
        return catalog.build_unitary(d, int(kv.get("seed", 0)))
    raise ConfigError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs, echoable into the report."""

    model: Optional[str] = None            # catalog reference string
    inline_model: Optional[dict] = None    # serialized ModelSpec
    lambdas: tuple[float, ...] = (1.0,)
    dims: Optional[tuple[int, ...]] = None
    times: Optional[tuple[float, ...]] = None
    grid: Optional[str] = None
    dim: Optional[int] = None
    tolerances: dict = field(default_factory=dict)
    output: Optional[str] = None
    output_format: str = "json"

    def __post_init__(self):
        if not self.lambdas or any(l <= 0 for l in self.lambdas):
            raise ConfigError("lambdas must be positive")
        if self.output_format not in ("json", "csv", "tsv"):
            raise ConfigError(f"unknown output format {self.output_format!r}")

    def build_model(self) -> ModelSpec:
        if self.inline_model is not None:
            return model_from_dict(self.inline_model)
        if self.model is None:
            raise ConfigError("no model given (catalog reference or inline)")
        return resolve_model(self.model, dim=self.dim, grid=self.grid)

    def build_tolerances(self) -> Tolerances:
        return DEFAULT.override(**self.tolerances) if self.tolerances else DEFAULT

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "inline_model": self.inline_model,
            "lambdas": list(self.lambdas),
            "dims": list(self.dims) if self.dims else None,
            "times": list(self.times) if self.times else None,
            "grid": self.grid,
            "dim": self.dim,
            "tolerances": dict(self.tolerances),
            "output": self.output,
            "output_format": self.output_format,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {
            "model", "inline_model", "lambdas", "dims", "times", "grid",
            "dim", "tolerances", "output", "output_format",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("lambdas", "dims", "times"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"
            ) from None
        except OSError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)
