"""
Spectral Inversion Service
==========================

This module maps Fourier multipliers back to physical space with the
convention

    F^-1 m (x) = (2 pi)^-n  int e^{i x.xi} m(xi) dxi.

Radial multipliers go through the Hankel-Bessel representation

    F^-1 m (r) = (2 pi)^(-n/2) int_0^inf m(rho) rho^(n-1) (r rho)^(-nu) J_nu(r rho) drho,

nu = n/2 - 1, evaluated either with oscillation-aware composite
Gauss-Legendre panels or, for very long frequency ranges in odd dimension,
with a smooth low/high split whose high part is a uniformly sampled
trapezoid sum. General multipliers go through a lattice FFT.
"""

from __future__ import annotations

import cmath
import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gamma, jv, roots_legendre, spherical_jn

import config
from services.oscillator_service import SpectralKernel, chi

logger = logging.getLogger(__name__)

ArrayFunc = Callable[[np.ndarray], np.ndarray]

_NODE_BLOCK = 1 << 18
_TRAPEZOID_BLOCK = 1 << 20


class QuadratureError(RuntimeError):
    """Raised when an inversion cannot be carried out to a reportable accuracy."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings of the radial quadrature."""

    panel_rule: int = 16
    max_freq: Optional[float] = None
    osc_resolution: float = 0.25
    target_abs_err: Optional[float] = None
    target_rel_err: float = 1e-6
    envelope_drop: float = 1e-12
    engine: str = "auto"
    panel_budget: int = config.panel_budget
    freq_cap: float = config.max_freq_cap
    growth: float = 0.25
    layout_radius: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0 < self.osc_resolution <= 0.5:
            raise ValueError("osc_resolution must lie in (0, 1/2]")
        if self.engine not in ("auto", "panel", "trapezoid"):
            raise ValueError(f"Unknown quadrature engine: {self.engine}")
        if self.panel_rule < 4:
            raise ValueError("panel_rule must be at least 4")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "panel_rule": self.panel_rule,
            "max_freq": self.max_freq,
            "osc_resolution": self.osc_resolution,
            "target_abs_err": self.target_abs_err,
            "target_rel_err": self.target_rel_err,
            "envelope_drop": self.envelope_drop,
            "engine": self.engine,
        }


@dataclass(frozen=True)
class RadialMultiplier:
    """
    A radial multiplier rho -> m(rho).

    osc_rate is the frequency of any oscillating factor inside m (t for the
    sinc(t rho) of the wave kernel); breakpoints are points where m changes
    character (localizer knots); support bounds where m can be nonzero.
    """

    func: ArrayFunc
    osc_rate: float = 0.0
    breakpoints: Tuple[float, ...] = ()
    support: Tuple[float, float] = (0.0, math.inf)
    max_freq: Optional[float] = None
    label: str = ""

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return self.func(np.asarray(rho, dtype=float))


@dataclass
class RadialProfile:
    """Kernel samples on a radial grid."""

    dim: int
    r_grid: np.ndarray
    values: np.ndarray
    quad_error: np.ndarray
    flagged: bool = False
    flags: List[str] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.r_grid = np.asarray(self.r_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.quad_error = np.asarray(self.quad_error, dtype=float)
        if self.r_grid.ndim != 1 or self.r_grid.size == 0:
            raise ValueError("r_grid must be a non-empty 1-D array")
        if self.r_grid[0] < 0 or np.any(np.diff(self.r_grid) <= 0):
            raise ValueError("r_grid must be strictly increasing and start at r >= 0")
        if not np.all(np.isfinite(self.values)):
            raise QuadratureError("Profile contains non-finite values")


@dataclass
class GridField:
    """Kernel samples on the lattice [-L, L)^n."""

    dim: int
    extent: float
    points_per_axis: int
    values: np.ndarray
    aliasing_bound: float
    inside_mass: float = 0.0
    flagged: bool = False

    def axis(self) -> np.ndarray:
        spacing = 2 * self.extent / self.points_per_axis
        return -self.extent + spacing * np.arange(self.points_per_axis)

    @property
    def cell_volume(self) -> float:
        return (2 * self.extent / self.points_per_axis) ** self.dim


def surface_area(n: int) -> float:
    """Area of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def _order_kind(nu: float) -> str:
    if nu == -0.5 or (nu > 0 and float(2 * nu).is_integer() and not float(nu).is_integer()):
        return "half"
    if nu >= 0 and float(nu).is_integer():
        return "integer"
    raise QuadratureError(f"Unsupported Bessel order nu = {nu}")


def bessel_j(nu: float, z: np.ndarray) -> np.ndarray:
    """
    J_nu(z) for nu = n/2 - 1.

    Half-integer orders use the closed trigonometric forms (through the
    spherical Bessel functions), integer orders use scipy's jv.

    J_{-1/2} is unbounded at the origin and returns +inf there; the radial
    inversion works with scaled_bessel, which stays finite.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("bessel_j needs z >= 0")
    if _order_kind(nu) == "integer":
        return jv(nu, z)
    if nu == -0.5:
        with np.errstate(divide="ignore"):
            return np.sqrt(2 / (np.pi * z)) * np.cos(z)
    ell = int(nu - 0.5)
    return np.sqrt(2 * z / np.pi) * spherical_jn(ell, z)


def _scaled_series(ell: int, z: np.ndarray) -> np.ndarray:
    """j_ell(z)/z^ell from its power series, for small z."""
    total = np.zeros_like(z)
    double_factorial = float(np.prod(np.arange(2 * ell + 1, 0, -2)))
    for k in range(6):
        total += (-z * z / 2) ** k / (math.factorial(k) * double_factorial)
        double_factorial *= 2 * ell + 2 * k + 3
    return total


def scaled_bessel(nu: float, z: np.ndarray) -> np.ndarray:
    """z^-nu J_nu(z), finite at z = 0."""
    z = np.asarray(z, dtype=float)
    kind = _order_kind(nu)
    root = math.sqrt(2 / math.pi)
    if nu == -0.5:
        return root * np.cos(z)
    if kind == "half":
        ell = int(nu - 0.5)
        if ell == 0:
            return root * np.sinc(z / np.pi)
        small = z < 0.1
        safe = np.where(small, 1.0, z)
        if ell == 1:
            closed = (np.sin(safe) - safe * np.cos(safe)) / safe**3
        else:
            closed = spherical_jn(ell, safe) / safe**ell
        return root * np.where(small, _scaled_series(ell, z), closed)
    limit = 1.0 / (2**nu * math.gamma(nu + 1))
    small = z < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, limit, jv(nu, safe) / safe**nu)


def _probe_extent(
    mult: RadialMultiplier, dim: int, quad_spec: QuadratureSpec
) -> Tuple[float, float, float, bool]:
    """
    Find the integration range from the envelope |m| rho^(n-1).

    Returns:
        (rho_lo, rho_hi, envelope peak, windowed)
    """
    lo, support_hi = mult.support
    explicit = quad_spec.max_freq if quad_spec.max_freq is not None else mult.max_freq
    cap = min(support_hi, quad_spec.freq_cap)
    start = max(lo, 1e-8)
    octaves = max(math.log2(cap / start), 1.0) if math.isfinite(cap) else 60.0
    grid = np.geomspace(start, cap if math.isfinite(cap) else start * 2**60, int(8 * octaves) + 2)
    envelope = np.abs(mult(grid)) * grid ** (dim - 1)
    if not np.all(np.isfinite(envelope)):
        raise QuadratureError(f"Multiplier {mult.label!r} is not finite on the probe grid")
    peak = float(np.max(envelope))
    if peak == 0.0:
        return lo, lo, 0.0, False

    tail = np.maximum.accumulate(envelope[::-1])[::-1]
    below = np.nonzero(tail < quad_spec.envelope_drop * peak)[0]
    decays = below.size > 0
    hi = float(grid[below[0]]) if decays else cap
    if math.isfinite(support_hi) and support_hi <= cap:
        hi = min(hi, support_hi) if decays else support_hi
        decays = True

    if explicit is not None and (not decays or hi > explicit):
        return lo, float(explicit), peak, True
    if not decays:
        raise QuadratureError(
            f"Multiplier {mult.label!r} envelope does not decay before rho = {cap:g}; "
            "supply max_freq to window it"
        )
    return lo, hi, peak, False


def _panel_edges(
    lo: float, hi: float, knots: Sequence[float], h_osc: float, growth: float
) -> np.ndarray:
    """Panel edges: geometric growth away from knots, capped by the oscillation width."""
    points = sorted({lo, hi, *[k for k in knots if lo < k < hi]})
    h_min = (hi - lo) / 4096
    edges = [lo]
    for a, b in zip(points[:-1], points[1:]):
        limit = h_osc
        if a in knots and b in knots:
            limit = min(limit, (b - a) / 32)
        x = a
        while x < b:
            width = min(limit, max(h_min, growth * x))
            if width >= limit:
                count = max(1, math.ceil((b - x) / limit))
                edges.extend(np.linspace(x, b, count + 1)[1:].tolist())
                break
            x = min(x + width, b)
            edges.append(x)
    return np.asarray(edges)


def _gauss_nodes(edges: np.ndarray, rule: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(rule)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _bessel_sums(
    nu: float, r: np.ndarray, nodes: np.ndarray, weighted: np.ndarray, block: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Sum_j weighted_j S(r rho_j) for every r, with the sum of magnitudes."""
    total = np.zeros(r.size)
    magnitude = np.zeros(r.size)
    for start in range(0, nodes.size, block):
        rho = nodes[start:start + block]
        wv = weighted[start:start + block]
        for i, radius in enumerate(r):
            terms = wv * scaled_bessel(nu, radius * rho)
            total[i] += terms.sum()
            magnitude[i] += np.abs(terms).sum()
    return total, magnitude


@dataclass(frozen=True)
class _Layout:
    """A fixed quadrature plan, reusable for any radius up to r_layout."""

    nu: float
    nodes: np.ndarray
    weighted: np.ndarray
    coarse_nodes: np.ndarray
    coarse_weighted: np.ndarray
    trap_nodes: np.ndarray
    trap_weighted: np.ndarray
    tail_bound: float


def _plan(
    mult: RadialMultiplier, dim: int, r_layout: float, quad_spec: QuadratureSpec
) -> Tuple[Optional[_Layout], Dict[str, Any]]:
    lo, hi, peak, windowed = _probe_extent(mult, dim, quad_spec)
    info: Dict[str, Any] = {"rho_lo": lo, "rho_hi": hi, "windowed": windowed}
    if peak == 0.0 or hi <= lo:
        info.update(engine="zero", nodes=0)
        return None, info

    func: ArrayFunc = mult.func
    knots = list(mult.breakpoints)
    if windowed:
        base = mult.func
        cutoff = hi

        def func(rho: np.ndarray) -> np.ndarray:
            return base(rho) * chi(2 * rho / cutoff)

        knots += [hi / 2, hi]

    rate = r_layout + mult.osc_rate
    h_osc = quad_spec.osc_resolution * 2 * math.pi / rate if rate > 0 else math.inf
    h_osc = min(h_osc, (hi - lo) / 8)
    estimate = quad_spec.panel_rule * (hi - lo) / h_osc
    engine = quad_spec.engine
    if engine == "auto":
        engine = "trapezoid" if estimate > quad_spec.panel_budget and dim % 2 == 1 else "panel"
        if engine == "panel" and estimate > quad_spec.panel_budget:
            logger.warning(f"Panel engine with ~{estimate:.3g} nodes in even dimension {dim}")

    nu = dim / 2 - 1
    weight_fn = lambda rho: func(rho) * rho ** (dim - 1)  # noqa: E731
    trap_nodes = np.empty(0)
    trap_weighted = np.empty(0)
    panel_hi = hi
    panel_func = weight_fn

    if engine == "trapezoid":
        step = quad_spec.osc_resolution * 2 * math.pi / rate
        split = max(512 * step, 2 * max(knots, default=0.0), lo)
        if hi > 2 * split:
            count = int((hi - split) / step)
            trap_nodes = split + step * np.arange(1, count + 1)
            trap_weighted = weight_fn(trap_nodes) * (1.0 - chi(trap_nodes / split)) * step
            panel_hi = 2 * split
            knots += [split, 2 * split]

            def panel_func(rho: np.ndarray) -> np.ndarray:
                return weight_fn(rho) * chi(rho / split)
        else:
            engine = "panel"

    edges = _panel_edges(lo, panel_hi, knots, h_osc, quad_spec.growth)
    nodes, weights = _gauss_nodes(edges, quad_spec.panel_rule)
    coarse_nodes, coarse_weights = _gauss_nodes(edges, quad_spec.panel_rule // 2)
    weighted = panel_func(nodes) * weights
    coarse_weighted = panel_func(coarse_nodes) * coarse_weights

    tail_env = float(np.abs(weight_fn(np.array([hi])))[0])
    tail_bound = 0.0 if windowed else (2 * math.pi) ** (-dim / 2) * tail_env * max(hi, 1.0)
    info.update(
        engine=engine,
        nodes=int(nodes.size + trap_nodes.size),
        panels=int(edges.size - 1),
        layout_r=r_layout,
    )
    logger.debug(f"Hankel plan for {mult.label!r}: {info}")
    return _Layout(
        nu=nu,
        nodes=nodes,
        weighted=weighted,
        coarse_nodes=coarse_nodes,
        coarse_weighted=coarse_weighted,
        trap_nodes=trap_nodes,
        trap_weighted=trap_weighted,
        tail_bound=tail_bound,
    ), info


def _evaluate_layout(layout: _Layout, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norm = (2 * math.pi) ** (-(2 * layout.nu + 2) / 2)
    fine, magnitude = _bessel_sums(layout.nu, r, layout.nodes, layout.weighted, _NODE_BLOCK)
    coarse, _ = _bessel_sums(layout.nu, r, layout.coarse_nodes, layout.coarse_weighted, _NODE_BLOCK)
    error = np.abs(fine - coarse)
    if layout.trap_nodes.size:
        trap, trap_mag = _bessel_sums(
            layout.nu, r, layout.trap_nodes, layout.trap_weighted, _TRAPEZOID_BLOCK
        )
        fine = fine + trap
        magnitude = magnitude + trap_mag
    eps = np.finfo(float).eps
    error = error + 16 * eps * magnitude
    return norm * fine, norm * error + layout.tail_bound


def hankel_inverse(
    mult: RadialMultiplier,
    dim: int,
    r_grid: Sequence[float],
    quad_spec: Optional[QuadratureSpec] = None,
) -> RadialProfile:
    """
    Invert a radial multiplier on a radial grid.

    Args:
        mult: Radial multiplier with oscillation rate and breakpoints
        dim: Spatial dimension n
        r_grid: Strictly increasing radii
        quad_spec: Quadrature settings

    Returns:
        RadialProfile with values, per-point error estimates and an evaluator
        for further radii on the same quadrature plan
    """
    quad_spec = quad_spec or QuadratureSpec()
    r = np.asarray(r_grid, dtype=float)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if quad_spec.layout_radius is not None:
        r_layout = quad_spec.layout_radius
    else:
        r_layout = float(np.max(r)) if r.size else 0.0
    layout, info = _plan(mult, dim, r_layout, quad_spec)

    if layout is None:
        values = np.zeros(r.size)
        errors = np.zeros(r.size)

        def evaluator(radii: np.ndarray) -> np.ndarray:
            return np.zeros(np.asarray(radii).size)
    else:
        values, errors = _evaluate_layout(layout, r)

        def evaluator(radii: np.ndarray) -> np.ndarray:
            return _evaluate_layout(layout, np.atleast_1d(np.asarray(radii, dtype=float)))[0]

    target = quad_spec.target_abs_err
    if target is None:
        target = quad_spec.target_rel_err * max(float(np.max(np.abs(values), initial=0.0)), 1e-300)
    flags = []
    if info.get("windowed"):
        flags.append("windowed")
    if errors.size and float(np.max(errors)) > target:
        flags.append("quadrature-error-above-target")
        logger.warning(
            f"Hankel inversion of {mult.label!r}: error estimate {float(np.max(errors)):.3g} "
            f"exceeds target {target:.3g}"
        )
    info["label"] = mult.label
    return RadialProfile(
        dim=dim,
        r_grid=r,
        values=values,
        quad_error=errors,
        flagged="quadrature-error-above-target" in flags,
        flags=flags,
        meta=info,
        evaluator=evaluator,
    )


def kernel_multiplier(kernel: SpectralKernel, t: float) -> RadialMultiplier:
    """The radial multiplier of a banded kernel at time t."""
    if not kernel.sym.is_radial:
        raise QuadratureError(f"Symbol {kernel.sym.name!r} is not radial; use fft_inverse")
    return RadialMultiplier(
        func=lambda rho: kernel.radial(t, rho),
        osc_rate=float(t),
        breakpoints=kernel.breakpoints(),
        support=kernel.support(),
        label=f"{kernel.sym.name}/{kernel.band}@t={t:g}",
    )


def radial_moment(
    mult: RadialMultiplier,
    dim: int,
    power: float = 2.0,
    quad_spec: Optional[QuadratureSpec] = None,
) -> Tuple[float, float]:
    """
    Integrate |m|^power over R^n, i.e. omega_(n-1) int |m|^power rho^(n-1) drho.

    Returns:
        (integral, error estimate from the embedded lower-order rule)
    """
    quad_spec = quad_spec or QuadratureSpec()
    lo, hi, peak, windowed = _probe_extent(mult, dim, quad_spec)
    if peak == 0.0 or hi <= lo:
        return 0.0, 0.0
    knots = list(mult.breakpoints)
    if windowed:
        knots += [hi / 2, hi]

    def integrand(rho: np.ndarray) -> np.ndarray:
        values = np.abs(mult(rho))
        if windowed:
            values = values * chi(2 * rho / hi)
        return values**power * rho ** (dim - 1)

    rate = max(power, 1.0) * mult.osc_rate
    h_osc = quad_spec.osc_resolution * 2 * math.pi / rate if rate > 0 else math.inf
    edges = _panel_edges(lo, hi, knots, min(h_osc, (hi - lo) / 8), quad_spec.growth)
    nodes, weights = _gauss_nodes(edges, quad_spec.panel_rule)
    coarse_nodes, coarse_weights = _gauss_nodes(edges, quad_spec.panel_rule // 2)
    fine = float(np.sum(integrand(nodes) * weights))
    coarse = float(np.sum(integrand(coarse_nodes) * coarse_weights))
    area = surface_area(dim)
    return area * fine, area * abs(fine - coarse)


def concentration_grid(
    center: float, width: float, r_max: float, points: int = 256
) -> np.ndarray:
    """Half the points within center +- width, the rest spread over [0, r_max]."""
    if r_max <= 0 or points < 8:
        raise ValueError("concentration_grid needs r_max > 0 and at least 8 points")
    half = points // 2
    lo = max(0.0, center - width)
    hi = min(r_max, center + width)
    spread = np.linspace(0.0, r_max, points - half)
    if hi > lo:
        grid = np.concatenate([spread, np.linspace(lo, hi, half)])
    else:
        grid = spread
    return np.unique(grid)


def frequency_scale(
    mult: RadialMultiplier, dim: int, drop: float = 1e-3, quad_spec: Optional[QuadratureSpec] = None
) -> float:
    """The rho beyond which the envelope |m| rho^(n-1) stays below drop times its peak."""
    quad_spec = quad_spec or QuadratureSpec()
    lo, support_hi = mult.support
    cap = min(support_hi, quad_spec.freq_cap)
    start = max(lo, 1e-8)
    grid = np.geomspace(start, cap, int(8 * max(math.log2(cap / start), 1.0)) + 2)
    envelope = np.abs(mult(grid)) * grid ** (dim - 1)
    peak = float(np.max(envelope))
    if peak == 0.0:
        return 1.0
    tail = np.maximum.accumulate(envelope[::-1])[::-1]
    below = np.nonzero(tail < drop * peak)[0]
    if below.size:
        return float(grid[below[0]])
    return float(mult.max_freq or quad_spec.max_freq or cap)


def kernel_r_grid(
    mult: RadialMultiplier, dim: int, points: int = 512, spread: float = 20.0
) -> np.ndarray:
    """
    Radii for a kernel whose multiplier lives below frequency Lambda:
    half the points within spread * 2pi/Lambda of the wave front
    r = osc_rate, the rest out to twice that distance.
    """
    resolution = 2 * math.pi / frequency_scale(mult, dim)
    width = spread * resolution
    center = mult.osc_rate
    return concentration_grid(center, width, center + 2 * width, points)


def fft_inverse(
    m: ArrayFunc,
    dim: int,
    extent: float,
    points_per_axis: int,
    aliasing_threshold: float = 1e-3,
) -> GridField:
    """
    Invert a multiplier sampled on the dual lattice of [-L, L)^n.

    Args:
        m: Multiplier on frequency vectors of shape (..., n)
        dim: Dimension n (at most 4)
        extent: Half-width L of the physical cube
        points_per_axis: Lattice size N, a power of two
        aliasing_threshold: Flag when the mass outside the Nyquist ball exceeds
            this fraction of the mass inside

    Returns:
        GridField with lattice values and the aliasing estimate
    """
    n_pts = int(points_per_axis)
    if n_pts < 2 or n_pts & (n_pts - 1):
        raise ValueError("points_per_axis must be a power of two")
    if not 1 <= dim <= 4:
        raise ValueError("fft_inverse supports 1 <= dim <= 4")

    spacing = 2 * extent / n_pts
    freqs = 2 * np.pi * scipy.fft.fftfreq(n_pts, d=spacing)
    xi = np.stack(np.meshgrid(*([freqs] * dim), indexing="ij"), axis=-1)
    sampled = np.asarray(m(xi), dtype=complex)
    values = scipy.fft.fftshift(scipy.fft.ifftn(sampled, workers=1)).real * (n_pts / (2 * extent)) ** dim

    nyquist = np.pi * n_pts / (2 * extent)
    # (2pi)^-n times the lattice cell pi/L, shared by both lattices
    cell = (1 / (2 * extent)) ** dim
    if (2 * n_pts) ** dim <= 1 << 24:
        # same frequency step, reaching twice the Nyquist radius
        wide = 2 * np.pi * scipy.fft.fftfreq(2 * n_pts, d=spacing / 2)
        xi_wide = np.stack(np.meshgrid(*([wide] * dim), indexing="ij"), axis=-1)
        mass = np.abs(m(xi_wide))
        radius = np.sqrt(np.sum(xi_wide * xi_wide, axis=-1))
    else:
        mass = np.abs(sampled)
        radius = np.sqrt(np.sum(xi * xi, axis=-1))
        nyquist *= 0.9
    outside = float(np.sum(mass[radius > nyquist])) * cell
    inside = float(np.sum(mass[radius <= nyquist])) * cell
    flagged = outside > aliasing_threshold * inside
    if flagged:
        logger.warning(f"FFT inversion aliasing {outside:.3g} exceeds {aliasing_threshold} x {inside:.3g}")
    return GridField(
        dim=dim,
        extent=extent,
        points_per_axis=n_pts,
        values=values,
        aliasing_bound=outside,
        inside_mass=inside,
        flagged=flagged,
    )


def stable_tail_constant(theta: float, n: int) -> float:
    """Closed-form limit of |x|^(n+theta) F^-1(exp(-|xi|^theta))(x)."""
    if not 0 < theta < 2:
        raise QuadratureError("Tail constant is defined for 0 < theta < 2")
    return (
        theta * 2 ** (theta - 1) * math.pi ** (-n / 2 - 1) * math.sin(math.pi * theta / 2)
        * gamma((n + theta) / 2) * gamma(theta / 2)
    )


def _tail_value(theta: float, n: int, r: float) -> float:
    """
    F^-1(exp(-|xi|^theta)) at radius r.

    In dimensions 1 and 3 the Fourier integral is turned into the sector
    where exp(-x^theta) still decays, which removes the slow oscillation.
    """
    if n not in (1, 3):
        mult = RadialMultiplier(lambda rho: np.exp(-rho**theta), label=f"exp(-rho^{theta})")
        return float(hankel_inverse(mult, n, [r]).values[0])

    angle = min(math.pi / 2, math.pi / (4 * theta))
    rot = cmath.exp(1j * angle)
    spin = cmath.exp(1j * theta * angle)
    power = (n - 1) // 2

    def integrand(u: float) -> complex:
        s = u / r
        return (s * rot) ** power * cmath.exp(-(s**theta) * spin + 1j * u * rot) * rot / r

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        if n == 1:
            value, _ = quad(lambda u: integrand(u).real, 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
            return value / math.pi
        value, _ = quad(lambda u: integrand(u).imag, 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
        return value / (2 * math.pi**2 * r)


def asymp_constant(theta: float, n: int, r_probe: Sequence[float]) -> Dict[str, float]:
    """
    Estimate lim r^(n+theta) F^-1(exp(-|xi|^theta))(r).

    The scaled values r^(n+theta) K(r) = C + D r^-theta + ... are
    extrapolated pairwise; the error estimate is the change between the last
    two extrapolants.
    """
    if not 0 < theta < 2:
        raise QuadratureError("asymp_constant is defined for 0 < theta < 2; theta = 2 is a Gaussian")
    radii = np.sort(np.asarray(r_probe, dtype=float))
    if radii.size < 2 or radii[-1] / radii[0] < 100:
        raise ValueError("r_probe must span at least two decades")

    scaled = np.array([r ** (n + theta) * _tail_value(theta, n, r) for r in radii])
    if np.any(scaled <= 0) and np.any(scaled >= 0):
        raise QuadratureError(f"Tail extrapolation failed: scaled values change sign {scaled}")
    power = radii**theta
    extrapolants = (scaled[1:] * power[1:] - scaled[:-1] * power[:-1]) / (power[1:] - power[:-1])
    estimate = float(extrapolants[-1])
    if extrapolants.size > 1:
        error = abs(float(extrapolants[-1] - extrapolants[-2]))
    else:
        error = abs(float(scaled[-1]) - estimate)
    if error > 0.1 * abs(estimate):
        raise QuadratureError(f"Tail extrapolation not converged: {extrapolants}")
    return {"constant": estimate, "error": error, "reference": stable_tail_constant(theta, n)}


def profile_to_csv(profile: RadialProfile) -> str:
    """Serialise a profile with its header rows."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["# schema_version", config.CSV_SCHEMA_VERSION])
    writer.writerow(["# kind", "radial_profile"])
    writer.writerow(["# dim", profile.dim])
    for key in ("t", "tau", "band", "symbol_hash"):
        if key in profile.meta:
            writer.writerow([f"# {key}", _format(profile.meta[key])])
    writer.writerow(["# normalization", config.NORMALIZATION_TAG])
    writer.writerow(["# flags", ";".join(profile.flags)])
    writer.writerow(["r", "value", "quad_error"])
    for r, value, err in zip(profile.r_grid, profile.values, profile.quad_error):
        writer.writerow([_format(r), _format(value), _format(err)])
    return buffer.getvalue()


def _format(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def profile_from_csv(text: str) -> RadialProfile:
    """Parse the format written by profile_to_csv."""
    header: Dict[str, str] = {}
    rows = []
    for row in csv.reader(io.StringIO(text)):
        if not row:
            continue
        if row[0].startswith("#"):
            header[row[0][1:].strip()] = row[1] if len(row) > 1 else ""
        elif row[0] == "r":
            continue
        else:
            rows.append([float(x) for x in row])
    if int(header.get("schema_version", -1)) != config.CSV_SCHEMA_VERSION:
        raise ValueError(f"Unsupported profile schema version {header.get('schema_version')}")
    data = np.asarray(rows, dtype=float)
    meta: Dict[str, Any] = {}
    for key in ("t", "tau"):
        if key in header:
            meta[key] = float(header[key])
    for key in ("band", "symbol_hash"):
        if key in header:
            meta[key] = header[key]
    flags = [f for f in header.get("flags", "").split(";") if f]
    return RadialProfile(
        dim=int(header["dim"]),
        r_grid=data[:, 0],
        values=data[:, 1],
        quad_error=data[:, 2],
        flagged="quadrature-error-above-target" in flags,
        flags=flags,
        meta=meta,
    )
