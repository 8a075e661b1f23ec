"""
Norm Service Implementation
===========================

L^r norms of kernel profiles and the three kinds of L^p -> L^q operator
norm estimates: exact (p = 1 and p = q = 2), the Young upper bound and the
rescaled test-function lower bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad, simpson, trapezoid
from scipy.optimize import minimize_scalar

import config
from services.spectra_service import (
    GridField,
    QuadratureSpec,
    RadialMultiplier,
    RadialProfile,
    hankel_inverse,
    kernel_r_grid,
    radial_moment,
    surface_area,
)

logger = logging.getLogger(__name__)

Exponent = Union[int, float, Fraction]

LR = "Lr"
OP_EXACT_P1 = "OpExactP1"
OP_EXACT_P2Q2 = "OpExactP2Q2"
OP_UPPER_YOUNG = "OpUpperYoung"
OP_LOWER_TEST = "OpLowerTest"
NORM_KINDS = (LR, OP_EXACT_P1, OP_EXACT_P2Q2, OP_UPPER_YOUNG, OP_LOWER_TEST)

NORM_COLUMNS = ["symbol", "band", "kind", "p", "q", "r", "t", "tau", "value", "quad_error"]


def reciprocal(p: Exponent) -> Fraction:
    """1/p as an exact fraction, with 1/inf = 0."""
    if p == math.inf:
        return Fraction(0)
    frac = p if isinstance(p, Fraction) else Fraction(p).limit_denominator(10**6)
    if frac < 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {p}")
    return 1 / frac


def _exponent(inv: Fraction) -> float:
    return math.inf if inv == 0 else float(1 / inv)


def conjugate(p: Exponent) -> float:
    return _exponent(1 - reciprocal(p))


@dataclass(frozen=True)
class PQPair:
    """Lebesgue exponents 1 <= p <= q <= inf."""

    p: float
    q: float
    dual_reduced: bool = False

    def __post_init__(self) -> None:
        if reciprocal(self.p) < reciprocal(self.q):
            raise ValueError(f"Need p <= q, got ({self.p}, {self.q})")

    @property
    def inv_p(self) -> Fraction:
        return reciprocal(self.p)

    @property
    def inv_q(self) -> Fraction:
        return reciprocal(self.q)

    def dual(self) -> "PQPair":
        """(q', p'); the multiplier spaces coincide."""
        return PQPair(conjugate(self.q), conjugate(self.p), dual_reduced=not self.dual_reduced)

    def canonical(self) -> "PQPair":
        """The representative with 1/p + 1/q >= 1."""
        if self.inv_p + self.inv_q < 1:
            return self.dual()
        return self

    def label(self) -> str:
        return f"({_label(self.p)},{_label(self.q)})"


def _label(p: float) -> str:
    if p == math.inf:
        return "inf"
    return f"{p:g}"


def d_exponent(p: Exponent, q: Exponent, n: int) -> Fraction:
    """n(1/p - 1/q) + (n - 1) max{1/2 - 1/p, 1/q - 1/2}, exactly."""
    inv_p, inv_q = reciprocal(p), reciprocal(q)
    half = Fraction(1, 2)
    return n * (inv_p - inv_q) + (n - 1) * max(half - inv_p, inv_q - half)


def young_exponent(pair: PQPair) -> float:
    """r with 1 - 1/r = 1/p - 1/q."""
    return _exponent(1 - pair.inv_p + pair.inv_q)


@dataclass
class NormReport:
    kind: str
    value: float
    r: Optional[float] = None
    quad_error: float = 0.0
    p: Optional[float] = None
    q: Optional[float] = None
    flagged: bool = False
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in NORM_KINDS:
            raise ValueError(f"Unknown norm kind: {self.kind}")
        if not self.value >= 0:
            raise ValueError(f"Norm value must be nonnegative, got {self.value}")

    def to_row(self) -> Dict[str, Any]:
        return {
            "symbol": self.meta.get("symbol", ""),
            "band": self.meta.get("band", ""),
            "kind": self.kind,
            "p": self.p,
            "q": self.q,
            "r": self.r,
            "t": self.meta.get("t"),
            "tau": self.meta.get("tau"),
            "value": self.value,
            "quad_error": self.quad_error,
        }


def _jump_intervals(values: np.ndarray) -> List[int]:
    """Indices i where values jump between grid points i and i+1."""
    diffs = np.abs(np.diff(values))
    scale = float(np.max(np.abs(values), initial=0.0))
    if diffs.size < 3 or scale == 0.0:
        return []
    padded = np.concatenate([[0.0], diffs, [0.0]])
    neighbours = np.maximum(padded[:-2], padded[2:])
    isolated = (diffs > 0.05 * scale) & (diffs > 20 * neighbours)
    return [int(i) for i in np.nonzero(isolated)[0]]


def _guard_mask(size: int, jumps: Sequence[int]) -> np.ndarray:
    """True on points inside a two-cell guard band around each jump."""
    mask = np.zeros(size, dtype=bool)
    for i in jumps:
        mask[max(i - 1, 0):min(i + 3, size)] = True
    return mask


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """(start, stop) index ranges of consecutive True entries."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, mask.size))
    return runs


def _segment_integral(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    if x.size < 2:
        return 0.0, 0.0
    if x.size < 5:
        return float(trapezoid(y, x=x)), 0.0
    fine = float(simpson(y, x=x))
    idx = np.arange(0, x.size, 2)
    if idx[-1] != x.size - 1:
        idx = np.append(idx, x.size - 1)
    coarse = float(simpson(y[idx], x=x[idx]))
    return fine, abs(fine - coarse) / 15


def _refined_sup(profile: RadialProfile, magnitudes: np.ndarray, candidates: np.ndarray) -> Tuple[float, float]:
    """Best grid value, improved by bounded scalar search around the top local maxima."""
    best = int(candidates[np.argmax(magnitudes[candidates])])
    value = float(magnitudes[best])
    where = float(profile.r_grid[best])
    if profile.evaluator is None:
        return value, where
    r = profile.r_grid
    interior = [
        i for i in candidates
        if 0 < i < r.size - 1 and magnitudes[i] >= magnitudes[i - 1] and magnitudes[i] >= magnitudes[i + 1]
    ]
    for i in sorted(interior, key=lambda k: -magnitudes[k])[:3]:
        result = minimize_scalar(
            lambda x: -abs(float(profile.evaluator(np.array([x]))[0])),
            bounds=(float(r[i - 1]), float(r[i + 1])),
            method="bounded",
            options={"xatol": 1e-10 * max(1.0, float(r[i]))},
        )
        if -result.fun > value:
            value, where = float(-result.fun), float(result.x)
    return value, where


def lr_norm(profile: Union[RadialProfile, GridField], r: Exponent, refine: bool = True) -> NormReport:
    """
    L^r norm of a kernel sample.

    Radial profiles integrate omega_(n-1) |f|^r rho^(n-1) with composite
    Simpson on the (non-uniform) grid, excluding a two-cell guard band around
    detected jumps whose contribution is estimated and bounded separately.
    r = inf takes the grid sup outside the guard bands, refined at the top
    local maxima when the profile carries an evaluator.
    """
    inv_r = reciprocal(r)
    r_value = _exponent(inv_r)
    if isinstance(profile, GridField):
        return _grid_norm(profile, r_value)

    rho = profile.r_grid
    magnitudes = np.abs(profile.values)
    jumps = _jump_intervals(profile.values)
    guard = _guard_mask(rho.size, jumps)
    meta = dict(profile.meta)
    if jumps:
        meta["guarded_jumps"] = [float(rho[i]) for i in jumps]
        logger.debug(f"Guard bands around jumps at r = {meta['guarded_jumps']}")

    if inv_r == 0:
        keep = np.nonzero(~guard)[0]
        if keep.size == 0:
            raise ValueError("No grid points left outside the guard bands")
        if refine:
            value, where = _refined_sup(profile, magnitudes, keep)
        else:
            best = int(keep[np.argmax(magnitudes[keep])])
            value, where = float(magnitudes[best]), float(rho[best])
        meta["argmax_r"] = where
        error = float(np.max(profile.quad_error))
        return NormReport(LR, value, r=math.inf, quad_error=error, flagged=profile.flagged, meta=meta)

    dim = profile.dim
    area = surface_area(dim)
    weight = rho ** (dim - 1)
    integrand = magnitudes**r_value * weight
    total = 0.0
    error = 0.0
    for start, stop in _runs(~guard):
        part, part_err = _segment_integral(rho[start:stop], integrand[start:stop])
        total += part
        error += part_err
    for start, stop in _runs(guard):
        lo, hi = max(start - 1, 0), min(stop + 1, rho.size)
        total += float(trapezoid(integrand[lo:hi], x=rho[lo:hi]))
        error += float(np.max(integrand[lo:hi])) * float(rho[hi - 1] - rho[lo])
    # cells joining a kept run to a guard band belong to the guard trapezoid

    tail = float(integrand[-1] * rho[-1])
    propagated = float(
        trapezoid(r_value * magnitudes ** (r_value - 1) * profile.quad_error * weight, x=rho)
    )
    integral = area * total
    if integral <= 0:
        return NormReport(LR, 0.0, r=r_value, quad_error=0.0, flagged=profile.flagged, meta=meta)
    value = integral ** (1 / r_value)
    spread = area * (error + tail + propagated)
    quad_error = value * spread / (r_value * integral)
    return NormReport(LR, value, r=r_value, quad_error=quad_error, flagged=profile.flagged, meta=meta)


def _grid_norm(field_: GridField, r_value: float) -> NormReport:
    magnitudes = np.abs(field_.values)
    meta = {"aliasing_bound": field_.aliasing_bound}
    if r_value == math.inf:
        return NormReport(
            LR, float(np.max(magnitudes)), r=math.inf,
            quad_error=field_.aliasing_bound, flagged=field_.flagged, meta=meta,
        )
    value = float(np.sum(magnitudes**r_value) * field_.cell_volume) ** (1 / r_value)
    volume = (2 * field_.extent) ** field_.dim
    return NormReport(
        LR, value, r=r_value,
        quad_error=field_.aliasing_bound * volume ** (1 / r_value),
        flagged=field_.flagged, meta=meta,
    )


def op_norm_exact_p1(profile: Union[RadialProfile, GridField], q: Exponent) -> NormReport:
    """||m||_(M_1^q) = ||F^-1 m||_(L^q)."""
    report = lr_norm(profile, q)
    return replace(report, kind=OP_EXACT_P1, p=1.0, q=report.r)


def op_norm_upper_young(profile: Union[RadialProfile, GridField], pair: PQPair) -> NormReport:
    """Young bound ||F^-1 m||_(L^r) with 1 - 1/r = 1/p - 1/q."""
    report = lr_norm(profile, young_exponent(pair))
    return replace(report, kind=OP_UPPER_YOUNG, p=pair.p, q=pair.q)


def op_norm_exact_p2q2(
    m: Callable[[np.ndarray], np.ndarray],
    probe: Optional[np.ndarray] = None,
    refine: bool = True,
) -> NormReport:
    """
    sup |m| over a radial probe, refined around the best local maxima.

    Args:
        m: Radial multiplier rho -> m(rho)
        probe: Probe radii (default: 0 plus a geometric grid over [1e-6, 1e6])
        refine: Run bounded scalar search around the top three local maxima
    """
    if probe is None:
        probe = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 2401)])
    probe = np.asarray(probe, dtype=float)
    magnitudes = np.abs(np.asarray(m(probe), dtype=float))
    if not np.all(np.isfinite(magnitudes)):
        raise ValueError("Multiplier is not bounded on the probe")
    best = int(np.argmax(magnitudes))
    value, where = float(magnitudes[best]), float(probe[best])
    if refine:
        interior = [
            i for i in range(1, probe.size - 1)
            if magnitudes[i] >= magnitudes[i - 1] and magnitudes[i] >= magnitudes[i + 1]
        ]
        for i in sorted(interior, key=lambda k: -magnitudes[k])[:3]:
            result = minimize_scalar(
                lambda x: -abs(float(np.asarray(m(np.array([x])))[0])),
                bounds=(float(probe[i - 1]), float(probe[i + 1])),
                method="bounded",
                options={"xatol": 1e-12 * max(1.0, float(probe[i]))},
            )
            if -result.fun > value:
                value, where = float(-result.fun), float(result.x)
    return NormReport(OP_EXACT_P2Q2, value, p=2.0, q=2.0, meta={"argmax_rho": where})


def plancherel_norm(
    mult: RadialMultiplier, dim: int, quad_spec: Optional[QuadratureSpec] = None
) -> NormReport:
    """||F^-1 m||_(L^2) = (2 pi)^(-n/2) ||m||_(L^2), computed on the Fourier side."""
    integral, error = radial_moment(mult, dim, 2.0, quad_spec)
    value = (2 * math.pi) ** (-dim / 2) * math.sqrt(integral)
    quad_error = 0.0 if integral == 0 else value * error / (2 * integral)
    return NormReport(LR, value, r=2.0, quad_error=quad_error, meta={"source": "plancherel"})


class TestProfile:
    """
    Radial test function g with known Fourier transform.

    n >= 2: g = exp(-|x|^2/2). n = 1: g = (1 - x^2) exp(-x^2/2), whose
    transform vanishes at the origin.
    """

    __test__ = False

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def spatial(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        gauss = np.exp(-0.5 * x * x)
        return (1.0 - x * x) * gauss if self.dim == 1 else gauss

    def fourier(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        gauss = (2 * math.pi) ** (self.dim / 2) * np.exp(-0.5 * rho * rho)
        return rho * rho * gauss if self.dim == 1 else gauss

    def lp_norm(self, p: Exponent) -> float:
        inv_p = reciprocal(p)
        if inv_p == 0:
            return 1.0
        p_value = float(1 / inv_p)
        if self.dim >= 2:
            return (2 * math.pi / p_value) ** (self.dim / (2 * p_value))
        inner, _ = quad(lambda x: abs((1 - x * x) * math.exp(-0.5 * x * x)) ** p_value, 0, 1)
        outer, _ = quad(lambda x: abs((1 - x * x) * math.exp(-0.5 * x * x)) ** p_value, 1, np.inf)
        return (2 * (inner + outer)) ** (1 / p_value)


def h0_check(theta: float, n: int, test: Optional[TestProfile] = None) -> float:
    """
    (2 pi)^-n int_0^inf g^(s) s^((n-3)/2) exp(-s^theta) ds, which must not
    vanish for the test-function lower bound to be sharp.
    """
    test = test or TestProfile(n)
    value, _ = quad(
        lambda s: float(test.fourier(np.array(s))) * s ** ((n - 3) / 2) * math.exp(-(s**theta)),
        0, np.inf, limit=200,
    )
    h0 = (2 * math.pi) ** (-n) * value
    if abs(h0) <= 1e-12:
        raise ValueError(f"Test profile has h(0) = {h0:.3g} for theta={theta}, n={n}")
    return h0


def op_norm_lower_test(
    mult: RadialMultiplier,
    dim: int,
    pair: PQPair,
    tau: float,
    test: Optional[TestProfile] = None,
    r_grid: Optional[np.ndarray] = None,
    quad_spec: Optional[QuadratureSpec] = None,
) -> NormReport:
    """
    ||F^-1(m g^_tau)||_(L^q) / ||g_tau||_(L^p) with g_tau = tau^(-n/p) g(x/tau).

    A lower bound for ||m||_(M_p^q) up to the quadrature error.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    test = test or TestProfile(dim)
    scale = tau ** float(dim * (1 - pair.inv_p))
    product = RadialMultiplier(
        func=lambda rho: mult(rho) * scale * test.fourier(tau * rho),
        osc_rate=mult.osc_rate,
        breakpoints=mult.breakpoints,
        support=mult.support,
        max_freq=mult.max_freq,
        label=f"{mult.label}*g_tau",
    )
    grid = kernel_r_grid(product, dim) if r_grid is None else r_grid
    profile = hankel_inverse(product, dim, grid, quad_spec)
    numerator = lr_norm(profile, pair.q)
    denominator = test.lp_norm(pair.p)
    meta = dict(numerator.meta)
    meta["tau"] = tau
    return NormReport(
        OP_LOWER_TEST,
        numerator.value / denominator,
        r=numerator.r,
        quad_error=numerator.quad_error / denominator,
        p=pair.p,
        q=pair.q,
        flagged=profile.flagged,
        meta=meta,
    )


def sandwich_holds(lower: NormReport, upper: NormReport, tol: float = config.SANDWICH_TOL) -> bool:
    return lower.value <= upper.value * (1 + tol)


def operator_norm_reports(
    mult: RadialMultiplier,
    dim: int,
    pair: PQPair,
    tau: Optional[float] = None,
    r_grid: Optional[np.ndarray] = None,
    quad_spec: Optional[QuadratureSpec] = None,
    test: Optional[TestProfile] = None,
) -> List[NormReport]:
    """
    Norm strategy for one pair.

    Exact for p = 1 (and by duality q = inf) and for p = q = 2; otherwise
    the Young upper bound plus, when a scale tau is given, the test-function
    lower bound.
    """
    canon = pair.canonical()
    meta = {"dual_reduced": canon.dual_reduced}
    if canon.p == 1 and canon.q == 2:
        report = plancherel_norm(mult, dim, quad_spec)
        return [replace(report, kind=OP_EXACT_P1, p=1.0, q=2.0, meta={**report.meta, **meta})]
    if canon.p == 2 and canon.q == 2:
        report = op_norm_exact_p2q2(mult)
        return [replace(report, meta={**report.meta, **meta})]

    grid = kernel_r_grid(mult, dim) if r_grid is None else r_grid
    profile = hankel_inverse(mult, dim, grid, quad_spec)
    if canon.p == 1:
        report = op_norm_exact_p1(profile, canon.q)
        return [replace(report, meta={**report.meta, **meta})]

    reports = [op_norm_upper_young(profile, canon)]
    if tau is not None:
        reports.append(op_norm_lower_test(mult, dim, canon, tau, test, r_grid, quad_spec))
        if not sandwich_holds(reports[1], reports[0]):
            logger.warning(
                f"Lower bound {reports[1].value:.6g} exceeds upper bound {reports[0].value:.6g} "
                f"for {canon.label()}"
            )
    return [replace(r, meta={**r.meta, **meta}) for r in reports]
