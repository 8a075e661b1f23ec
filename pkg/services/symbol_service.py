"""
Dissipation Symbol Service
==========================

This module defines dissipation symbols a(xi), the catalogue of model
symbols, and a finite-difference screen for the Mikhlin-Hormander type
conditions

    |d^gamma a(xi)| <= C |xi|^(theta - |gamma|),   a(xi) >= a1 |xi|^theta

on the low band |xi| <= delta and the high band |xi| >= M.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

import config

logger = logging.getLogger(__name__)

ArrayFunc = Callable[[np.ndarray], np.ndarray]


class SymbolError(ValueError):
    """Raised for unknown models, invalid parameters or non-dissipative symbols."""


@dataclass(frozen=True)
class DissipationSymbol:
    """A pointwise-evaluable damping multiplier with its regime metadata."""

    name: str
    dim: int
    theta0: float
    theta1: float
    a1: float
    delta: float
    big_m: float
    is_radial: bool
    vector_func: ArrayFunc
    radial_func: Optional[ArrayFunc] = None
    params: Tuple[Tuple[str, Any], ...] = ()
    tags: Tuple[str, ...] = ()
    description: str = ""

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """Evaluate a on frequency vectors of shape (..., dim)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.dim:
            raise SymbolError(
                f"Frequency vectors have {xi.shape[-1]} components, symbol has dim {self.dim}"
            )
        if self.radial_func is not None:
            return self.radial_func(np.sqrt(np.sum(xi * xi, axis=-1)))
        return self.vector_func(xi)

    def radial(self, rho: np.ndarray) -> np.ndarray:
        """Evaluate a radial symbol as a function of |xi|."""
        if self.radial_func is None:
            raise SymbolError(f"Symbol '{self.name}' is not radial")
        return self.radial_func(np.asarray(rho, dtype=float))

    @property
    def dissipative(self) -> bool:
        return "non-dissipative" not in self.tags

    def has_tag(self, tag: str) -> bool:
        return tag in self.tags


@dataclass
class MHReport:
    """Outcome of a Mikhlin-Hormander screen on one band."""

    band: str
    theta: float
    max_order: int
    per_order_constants: List[float]
    lower_constant: float
    passed: bool
    shells: List[float]
    shell_constants: List[List[float]] = field(default_factory=list)
    failed_orders: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "band": self.band,
            "theta": self.theta,
            "max_order": self.max_order,
            "per_order_constants": self.per_order_constants,
            "lower_constant": self.lower_constant,
            "passed": self.passed,
            "shells": self.shells,
            "failed_orders": self.failed_orders,
        }


def _norm(xi: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(xi * xi, axis=-1))


def _radial_symbol(
    name: str,
    func: ArrayFunc,
    dim: int,
    theta0: float,
    theta1: float,
    a1: float,
    params: Dict[str, Any],
    tags: Sequence[str] = (),
    description: str = "",
) -> DissipationSymbol:
    def vector_func(xi: np.ndarray) -> np.ndarray:
        return func(_norm(xi))

    return _with_radii(
        DissipationSymbol(
            name=name,
            dim=dim,
            theta0=theta0,
            theta1=theta1,
            a1=a1,
            delta=1.0,
            big_m=1.0,
            is_radial=True,
            vector_func=vector_func,
            radial_func=func,
            params=tuple(sorted(params.items())),
            tags=tuple(tags),
            description=description,
        )
    )


def _vector_symbol(
    name: str,
    func: ArrayFunc,
    dim: int,
    theta0: float,
    theta1: float,
    a1: float,
    params: Dict[str, Any],
    tags: Sequence[str] = (),
    description: str = "",
) -> DissipationSymbol:
    return _with_radii(
        DissipationSymbol(
            name=name,
            dim=dim,
            theta0=theta0,
            theta1=theta1,
            a1=a1,
            delta=1.0,
            big_m=1.0,
            is_radial=False,
            vector_func=func,
            params=tuple(sorted(params.items())),
            tags=tuple(tags),
            description=description,
        )
    )


def _band_samples(
    dim: int, lo: float, hi: float, count: int, seed: int
) -> np.ndarray:
    """Log-uniform radii in [lo, hi] along seeded random directions."""
    rng = np.random.default_rng(seed)
    radii = np.geomspace(lo, hi, count)
    if dim == 1:
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return (radii * signs)[:, None]
    directions = rng.standard_normal((count, dim))
    directions /= _norm(directions)[:, None]
    return directions * radii[:, None]


_ROUNDING = 1e-12


def _low_normalization_holds(sym: DissipationSymbol, delta: float, count: int = 512) -> bool:
    """a <= |xi| (theta0 > 1) or a >= 4|xi| (theta0 < 1) on sampled |xi| <= delta."""
    xi = _band_samples(sym.dim, delta * 1e-6, delta, count, seed=11)
    a = sym.evaluate(xi)
    rho = _norm(xi)
    if sym.theta0 > 1:
        return bool(np.all(a <= rho * (1 + _ROUNDING)))
    if sym.theta0 < 1:
        return bool(np.all(a >= 4 * rho * (1 - _ROUNDING)))
    return True


def _high_normalization_holds(sym: DissipationSymbol, big_m: float, count: int = 512) -> bool:
    """The mirrored normalization on M <= |xi| <= 2^10 M."""
    xi = _band_samples(sym.dim, big_m, big_m * 2**10, count, seed=13)
    a = sym.evaluate(xi)
    rho = _norm(xi)
    if sym.theta1 > 1:
        return bool(np.all(a >= 4 * rho * (1 - _ROUNDING)))
    if sym.theta1 < 1:
        return bool(np.all(a <= rho * (1 + _ROUNDING)))
    return True


def _with_radii(sym: DissipationSymbol) -> DissipationSymbol:
    """Take the largest dyadic delta and smallest dyadic M for which the band normalizations hold."""
    if not sym.dissipative:
        return sym

    big_m = 1.0
    for _ in range(40):
        if _high_normalization_holds(sym, big_m):
            break
        big_m *= 2
    else:
        raise SymbolError(f"No high-frequency radius found for '{sym.name}'")

    delta = big_m / 4
    for _ in range(60):
        if _low_normalization_holds(sym, delta):
            break
        delta /= 2
    else:
        raise SymbolError(f"No low-frequency radius found for '{sym.name}'")

    logger.debug(f"Symbol {sym.name}: delta={delta}, M={big_m}")
    return replace(sym, delta=delta, big_m=big_m)


def _verify_radii(sym: DissipationSymbol) -> DissipationSymbol:
    """Check supplied (delta, M) against the band normalizations."""
    if sym.delta > sym.big_m / 4:
        raise SymbolError(f"Radii overlap: delta={sym.delta} exceeds M/4 = {sym.big_m / 4}")
    if not _low_normalization_holds(sym, sym.delta):
        raise SymbolError(f"Low-band normalization fails on |xi| <= delta = {sym.delta}")
    if not _high_normalization_holds(sym, sym.big_m):
        raise SymbolError(f"High-band normalization fails on |xi| >= M = {sym.big_m}")
    return sym


def _require_positive(name: str, **values: float) -> None:
    for key, value in values.items():
        if not value > 0:
            raise SymbolError(f"Model '{name}' requires {key} > 0, got {value}")


def _fractional(theta: float) -> ArrayFunc:
    return lambda rho: np.power(rho, theta)


def _build_fractional(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 0.5))
    _require_positive("fractional", theta=theta)
    return _radial_symbol(
        "fractional", _fractional(theta), dim, theta, theta, 1.0, {"theta": theta},
        description="a = |xi|^theta",
    )


def _build_effective(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 0.5))
    if not 0 < theta < 1:
        raise SymbolError(f"Model 'effective' requires 0 < theta < 1, got {theta}")
    return _radial_symbol(
        "effective", _fractional(theta), dim, theta, theta, 1.0, {"theta": theta},
        tags=("effective",), description="a = |xi|^theta, effective damping",
    )


def _build_noneffective(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 1.5))
    if not 1 < theta < 2:
        raise SymbolError(f"Model 'noneffective' requires 1 < theta < 2, got {theta}")
    return _radial_symbol(
        "noneffective", _fractional(theta), dim, theta, theta, 1.0, {"theta": theta},
        tags=("noneffective",), description="a = |xi|^theta, noneffective damping",
    )


def _build_viscoelastic(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    return _radial_symbol(
        "viscoelastic", lambda rho: rho * rho, dim, 2.0, 2.0, 1.0, {},
        description="A = -Laplacian, a = |xi|^2",
    )


def _build_classical(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    return _radial_symbol(
        "classical", lambda rho: np.ones_like(rho), dim, 0.0, 0.0, 1.0, {},
        description="A = Id, a = 1",
    )


def _build_scale_invariant(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    mu = float(params.get("mu", 1.0))
    _require_positive("scale_invariant", mu=mu)
    return _radial_symbol(
        "scale_invariant", lambda rho: mu * rho, dim, 1.0, 1.0, mu, {"mu": mu},
        description="a = mu |xi|",
    )


def _build_double_dispersion(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    return _radial_symbol(
        "double_dispersion", lambda rho: rho * rho / (1.0 + rho * rho), dim, 2.0, 0.0,
        1.0, {}, description="a = |xi|^2 / (1 + |xi|^2)",
    )


def _build_plate(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 2.0))
    _require_positive("plate", theta=theta)
    # below theta = 2 the symbol decays at high frequency; theta1 stays 0
    tags = ("regularity-loss",) if theta < 2 else ()
    return _radial_symbol(
        "plate", lambda rho: np.power(rho, theta) / (1.0 + rho * rho), dim, theta,
        max(theta - 2.0, 0.0), 1.0, {"theta": theta}, tags=tags,
        description="a = |xi|^theta / (1 + |xi|^2)",
    )


def _build_double_damping(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    return _radial_symbol(
        "double_damping", lambda rho: 1.0 + rho * rho, dim, 0.0, 2.0, 1.0, {},
        description="A = Id - Laplacian, a = 1 + |xi|^2",
    )


def _build_log_damping(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 2.0))
    _require_positive("log_damping", theta=theta)
    return _radial_symbol(
        "log_damping", lambda rho: np.log1p(np.power(rho, theta)), dim, theta, 0.0,
        1.0, {"theta": theta}, tags=("log",),
        description="a = log(1 + |xi|^theta)",
    )


def _build_mixed(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta_lo = float(params.get("theta0", 0.5))
    theta_hi = float(params.get("theta1", 2.0))
    _require_positive("mixed", theta0=theta_lo, theta1=theta_hi)
    if not theta_lo < theta_hi:
        raise SymbolError("Model 'mixed' requires theta0 < theta1")
    return _radial_symbol(
        "mixed", lambda rho: np.power(rho, theta_lo) + np.power(rho, theta_hi), dim,
        theta_lo, theta_hi, 1.0, {"theta0": theta_lo, "theta1": theta_hi},
        description="a = |xi|^theta0 + |xi|^theta1",
    )


def _build_oscillating(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 1.5))
    eta = float(params.get("eta", 0.5))
    _require_positive("oscillating", theta=theta)
    if not 0 <= eta < 1:
        raise SymbolError("Model 'oscillating' requires 0 <= eta < 1")
    tags = ["oscillating"]
    if (dim + 1) * (1 - eta) >= theta:
        tags.append("mh-proviso-violated")
    return _radial_symbol(
        "oscillating",
        lambda rho: np.power(rho, theta) + 1.0 + np.sin(np.power(rho, 1.0 - eta)),
        dim, 0.0, theta, 1.0, {"theta": theta, "eta": eta}, tags=tags,
        description="a = |xi|^theta + 1 + sin(|xi|^(1 - eta))",
    )


def _build_anisotropic(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 2.0))
    _require_positive("anisotropic", theta=theta)
    raw = params.get("c")
    matrix = np.eye(dim) if raw is None else np.asarray(raw, dtype=float)
    if matrix.ndim == 1:
        matrix = np.diag(matrix)
    if matrix.shape != (dim, dim) or not np.allclose(matrix, matrix.T):
        raise SymbolError(f"Model 'anisotropic' needs a symmetric {dim}x{dim} matrix c")
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues[0] <= 0:
        raise SymbolError("Model 'anisotropic' needs a positive definite matrix c")

    def func(xi: np.ndarray) -> np.ndarray:
        quadratic = np.einsum("...j,jk,...k->...", xi, matrix, xi)
        return np.power(quadratic, theta / 2)

    return _vector_symbol(
        "anisotropic", func, dim, theta, theta, float(eigenvalues[0] ** (theta / 2)),
        {"c": matrix.tolist(), "theta": theta}, tags=("elliptic",),
        description="a = (xi^T c xi)^(theta/2)",
    )


def _build_directional(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    def func(xi: np.ndarray) -> np.ndarray:
        rho = _norm(xi)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(rho > 0, xi[..., 0] / np.where(rho > 0, rho, 1.0), 0.0)
        return 2.0 + ratio

    return _vector_symbol(
        "directional", func, dim, 0.0, 0.0, 1.0, {}, tags=("discontinuous-at-origin",),
        description="a = 2 + xi_1 / |xi|",
    )


def _build_modulated(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    theta = float(params.get("theta", 2.0))
    kappa = float(params.get("kappa", 0.5))
    _require_positive("modulated", theta=theta)
    if not abs(kappa) < 1:
        raise SymbolError("Model 'modulated' requires |kappa| < 1")

    def func(xi: np.ndarray) -> np.ndarray:
        rho2 = np.sum(xi * xi, axis=-1)
        return np.power(rho2, theta / 2) * (1.0 + kappa * xi[..., 0] / np.sqrt(1.0 + rho2))

    return _vector_symbol(
        "modulated", func, dim, theta, theta, 1.0 - abs(kappa),
        {"kappa": kappa, "theta": theta},
        description="a = |xi|^theta (1 + kappa xi_1 / sqrt(1 + |xi|^2))",
    )


def _build_free_wave(params: Dict[str, Any], dim: int) -> DissipationSymbol:
    return DissipationSymbol(
        name="free_wave",
        dim=dim,
        theta0=0.0,
        theta1=0.0,
        a1=0.0,
        delta=0.25,
        big_m=1.0,
        is_radial=True,
        vector_func=lambda xi: np.zeros(np.shape(xi)[:-1]),
        radial_func=lambda rho: np.zeros_like(np.asarray(rho, dtype=float)),
        tags=("non-dissipative", "control"),
        description="a = 0, undamped control case",
    )


_ZOO: Dict[str, Tuple[Callable[[Dict[str, Any], int], DissipationSymbol], Tuple[str, ...]]] = {
    "viscoelastic": (_build_viscoelastic, ()),
    "fractional": (_build_fractional, ("theta",)),
    "effective": (_build_effective, ("theta",)),
    "noneffective": (_build_noneffective, ("theta",)),
    "classical": (_build_classical, ()),
    "scale_invariant": (_build_scale_invariant, ("mu",)),
    "double_dispersion": (_build_double_dispersion, ()),
    "plate": (_build_plate, ("theta",)),
    "double_damping": (_build_double_damping, ()),
    "log_damping": (_build_log_damping, ("theta",)),
    "mixed": (_build_mixed, ("theta0", "theta1")),
    "anisotropic": (_build_anisotropic, ("c", "theta")),
    "directional": (_build_directional, ()),
    "modulated": (_build_modulated, ("theta", "kappa")),
    "oscillating": (_build_oscillating, ("theta", "eta")),
    "free_wave": (_build_free_wave, ()),
}


def model_zoo(name: str, params: Optional[Dict[str, Any]] = None, dim: int = 3) -> DissipationSymbol:
    """
    Build a catalogue symbol.

    Args:
        name: Zoo identifier (see zoo_catalog)
        params: Model parameters, e.g. {"theta": 0.5}
        dim: Spatial dimension n

    Returns:
        The symbol with its (theta0, theta1) metadata and verified (delta, M)
    """
    if name not in _ZOO:
        raise SymbolError(f"Unknown zoo symbol: {name}")
    if dim < 1:
        raise SymbolError(f"Dimension must be >= 1, got {dim}")
    builder, accepted = _ZOO[name]
    params = dict(params or {})
    unknown = set(params) - set(accepted)
    if unknown:
        raise SymbolError(f"Model '{name}' does not take parameters {sorted(unknown)}")
    return builder(params, dim)


def zoo_catalog(dim: int = 3) -> List[Dict[str, Any]]:
    """List every zoo model with its default metadata."""
    catalog = []
    for name, (_, accepted) in _ZOO.items():
        sym = model_zoo(name, {}, dim=dim)
        catalog.append({
            "name": name,
            "params": list(accepted),
            "theta0": sym.theta0,
            "theta1": sym.theta1,
            "a1": sym.a1,
            "delta": sym.delta,
            "M": sym.big_m,
            "radial": sym.is_radial,
            "tags": list(sym.tags),
            "description": sym.description,
        })
    return catalog


def custom_symbol(
    expression: str,
    theta0: float,
    theta1: float,
    delta: float,
    big_m: float,
    a1: float = 1.0,
    radial: bool = True,
    dim: int = 3,
) -> DissipationSymbol:
    """
    Build a symbol from a numpy expression in `rho` (and `xi` when not radial).

    The expression is evaluated with only `np`, `rho` and `xi` in scope. The
    supplied radii are re-verified: delta <= M/4, and the band normalizations
    hold on |xi| <= delta and on M <= |xi| <= 2^10 M.
    """
    try:
        code = compile(expression, "<symbol>", "eval")
    except SyntaxError as e:
        raise SymbolError(f"Invalid symbol expression {expression!r}: {e.msg}") from e
    names = set(code.co_names) - {"np", "rho", "xi"}
    if any(attr.startswith("_") or not hasattr(np, attr) for attr in names):
        raise SymbolError(f"Expression uses unsupported names: {sorted(names)}")

    def vector_func(xi: np.ndarray) -> np.ndarray:
        rho = _norm(xi)
        return np.asarray(eval(code, {"__builtins__": {}}, {"np": np, "rho": rho, "xi": xi}), dtype=float)

    radial_func: Optional[ArrayFunc] = None
    if radial:
        def radial_func(rho: np.ndarray) -> np.ndarray:
            return np.asarray(
                eval(code, {"__builtins__": {}}, {"np": np, "rho": rho, "xi": None}), dtype=float
            ) * np.ones_like(rho)

    sym = DissipationSymbol(
        name="custom",
        dim=dim,
        theta0=float(theta0),
        theta1=float(theta1),
        a1=float(a1),
        delta=float(delta),
        big_m=float(big_m),
        is_radial=radial,
        vector_func=vector_func,
        radial_func=radial_func,
        params=(("expression", expression),),
        description=expression,
    )
    if not (sym.delta > 0 and sym.big_m > 0):
        raise SymbolError(f"Radii must be positive, got delta={delta}, M={big_m}")
    check_dissipative(sym, samples=2000)
    return _verify_radii(sym)


def symbol_fingerprint(sym: DissipationSymbol) -> str:
    """Stable SHA-256 of a symbol's definition."""
    payload = json.dumps(
        {
            "name": sym.name,
            "params": [[key, value] for key, value in sym.params],
            "dim": sym.dim,
            "theta0": sym.theta0,
            "theta1": sym.theta1,
            "a1": sym.a1,
            "delta": sym.delta,
            "M": sym.big_m,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def check_dissipative(sym: DissipationSymbol, samples: int = 10_000, seed: int = 0) -> None:
    """Raise SymbolError if a(xi) <= 0 at any sampled point of either band."""
    low = _band_samples(sym.dim, sym.delta * 1e-6, sym.delta, samples, seed)
    high = _band_samples(sym.dim, sym.big_m, sym.big_m * 2**10, samples, seed + 1)
    for band, xi in (("low", low), ("high", high)):
        values = sym.evaluate(xi)
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise SymbolError(f"symbol not dissipative on the {band} band of '{sym.name}'")


def rotation_defect(sym: DissipationSymbol, samples: int = 256, seed: int = 0) -> float:
    """Largest relative change of a under random rotations of sampled points."""
    rng = np.random.default_rng(seed)
    xi = _band_samples(sym.dim, sym.delta, 4 * sym.big_m, samples, seed)
    if sym.dim == 1:
        rotated = -xi
    else:
        q, _ = np.linalg.qr(rng.standard_normal((sym.dim, sym.dim)))
        rotated = xi @ q.T
    base = sym.vector_func(xi)
    return float(np.max(np.abs(sym.vector_func(rotated) - base) / np.abs(base)))


def _multi_indices(dim: int, order: int) -> List[Tuple[int, ...]]:
    return [
        gamma for gamma in itertools.product(range(order + 1), repeat=dim)
        if sum(gamma) == order
    ]


def _step_factor(order: int) -> float:
    """
    Relative step of the order-k difference: 1e-4 up to second order, then
    10^(-8/k), which holds h^k at 1e-8 |xi|^k.
    """
    return max(1e-4, 10.0 ** (-8.0 / max(order, 1)))


def _derivative(
    sym: DissipationSymbol, xi: np.ndarray, gamma: Tuple[int, ...], step: np.ndarray
) -> np.ndarray:
    """Tensor-product central difference for d^gamma a at each row of xi."""
    axes = []
    for m in gamma:
        offsets = np.arange(m + 1) - m / 2
        weights = np.array([(-1) ** (m - j) * comb(m, j, exact=True) for j in range(m + 1)], dtype=float)
        axes.append((offsets, weights))

    total = np.zeros(xi.shape[0])
    for combo in itertools.product(*[range(len(o)) for o, _ in axes]):
        shift = np.array([axes[k][0][j] for k, j in enumerate(combo)])
        weight = float(np.prod([axes[k][1][j] for k, j in enumerate(combo)]))
        total += weight * sym.evaluate(xi + step[:, None] * shift[None, :])
    return total / step ** sum(gamma)


def mh_check(
    sym: DissipationSymbol,
    band: str,
    shells: int = config.MH_SHELLS,
    samples_per_shell: int = config.MH_SAMPLES_PER_SHELL,
    stability_factor: float = config.MH_STABILITY_FACTOR,
    seed: int = 0,
    growth_per_shell: float = config.MH_GROWTH_PER_SHELL,
) -> MHReport:
    """
    Screen the Mikhlin-Hormander conditions on one band.

    An order fails when its shell constants grow toward the extreme end of
    the band (the origin for "low", the truncation radius for "high"):
    by stability_factor across the three finest shells or from the band
    edge, or by a fitted log2 slope of growth_per_shell per shell over the
    outer half of the shells. Constants that decay toward the extreme end
    are within the bound.

    Args:
        sym: Symbol to check
        band: "low" (dyadic shells inside (0, delta]) or "high" (from M outwards)
        shells: Number of dyadic shells
        samples_per_shell: Seeded sample points per shell
        stability_factor: Allowed growth of shell constants
        seed: Seed for the sample directions
        growth_per_shell: Allowed sustained log2 growth per shell

    Returns:
        MHReport with per-order constants and the pass/fail verdict
    """
    if band not in ("low", "high"):
        raise SymbolError(f"Unknown band: {band}")
    if shells < 4:
        raise SymbolError("mh_check needs at least 4 shells")

    theta = sym.theta0 if band == "low" else sym.theta1
    if band == "high" and sym.has_tag("log"):
        # log symbols satisfy the high-band bound with theta1 + eps for every eps > 0
        theta += config.MH_LOG_EPS
    max_order = sym.dim + 1
    logger.info(f"MH check of {sym.name} on the {band} band (theta={theta}, orders <= {max_order})")

    unit = _band_samples(sym.dim, 1.0, 2.0 - 1e-9, samples_per_shell, seed)
    if band == "low":
        bases = [sym.delta * 2.0 ** (-(j + 1)) for j in range(shells)]
    else:
        bases = [sym.big_m * 2.0 ** j for j in range(shells)]

    shell_constants: List[List[float]] = [[] for _ in range(max_order + 1)]
    lower = math.inf
    for base in bases:
        xi = unit * base
        rho = _norm(xi)
        values = sym.evaluate(xi)
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise SymbolError(f"symbol not dissipative: a <= 0 near |xi| = {base:g}")
        lower = min(lower, float(np.min(values * rho ** (-theta))))
        for order in range(max_order + 1):
            step = rho * _step_factor(order)
            worst = 0.0
            for gamma in _multi_indices(sym.dim, order):
                deriv = values if order == 0 else _derivative(sym, xi, gamma, step)
                worst = max(worst, float(np.max(np.abs(deriv) * rho ** (order - theta))))
            shell_constants[order].append(worst)

    # finest shells: nearest the origin on the low band, outermost on the high band
    reference = max(shell_constants[0])
    failed = []
    for order, consts in enumerate(shell_constants):
        if not all(np.isfinite(consts)):
            failed.append(order)
            continue
        noise = 10 * 2**order * np.finfo(float).eps / _step_factor(order) ** order
        floor = reference * max(1e-8, noise)
        clipped = np.array([c if c > floor else 0.0 for c in consts])
        if clipped[-1] == 0.0:
            continue
        finest = clipped[-3:]
        jump = finest[-1] / max(finest[0], floor)
        from_edge = float(np.max(finest)) / max(clipped[0], floor)
        outer = clipped[clipped.size // 2:]
        kept = outer > 0
        slope = 0.0
        if np.count_nonzero(kept) >= 3:
            index = np.arange(outer.size)[kept]
            slope = float(np.polyfit(index, np.log2(outer[kept]), 1)[0])
        if jump >= stability_factor or from_edge >= stability_factor or slope >= growth_per_shell:
            logger.debug(
                f"Order {order} of {sym.name} grows on the {band} band: "
                f"jump={jump:.3g}, from_edge={from_edge:.3g}, slope={slope:.3g}"
            )
            failed.append(order)

    passed = lower > 0 and not failed
    report = MHReport(
        band=band,
        theta=theta,
        max_order=max_order,
        per_order_constants=[max(c) for c in shell_constants],
        lower_constant=lower,
        passed=passed,
        shells=bases,
        shell_constants=shell_constants,
        failed_orders=failed,
    )
    if not passed:
        logger.warning(f"MH check of {sym.name} failed on the {band} band at orders {failed}")
    return report
