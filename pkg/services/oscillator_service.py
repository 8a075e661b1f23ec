"""
Damped Oscillator Service
=========================

This module evaluates the Fourier-space fundamental solution K^(t, xi) of

    u_tt - Laplacian u + A u_t = 0,    u(0) = 0,  u_t(0) = delta,

mode by mode. Each frequency is the scalar ODE

    K'' + a K' + |xi|^2 K = 0,    K(0) = 0,  K'(0) = 1,

whose solution is a damped oscillation when a < 2|xi| and a difference of
two decaying exponentials when a > 2|xi|. It also provides the Runge-Kutta
oracle for that ODE, the smooth frequency localizers, the constant of the
intermediate-frequency exponential bound, and the Taylor expansion of the
low-frequency kernel around the free wave.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import roots_legendre

import config
from services.symbol_service import DissipationSymbol, SymbolError

logger = logging.getLogger(__name__)

DAMPED = "DampedOscillation"
OVERDAMPED = "Overdamping"
DEGENERATE = "Degenerate"

BANDS = ("full", "low", "mid", "high")


class OracleError(ValueError):
    """Raised when the RK4 oracle is asked for a step size it cannot resolve."""


@dataclass(frozen=True)
class ModeState:
    a: float
    omega: float
    regime: str
    b: Optional[float]


def mode_state(a: float, omega: float, eps: float = config.DEGENERATE_EPS) -> ModeState:
    """Classify a single mode into its regime."""
    if a < 2 * omega * (1 - eps):
        regime = DAMPED
    elif a > 2 * omega * (1 + eps):
        regime = OVERDAMPED
    else:
        regime = DEGENERATE
    b = a * a / (4 * omega * omega) if omega > 0 else None
    return ModeState(a=float(a), omega=float(omega), regime=regime, b=b)


def eigenvalues(a: float, omega: float) -> Tuple[complex, complex]:
    """
    Roots of lambda^2 + a lambda + omega^2 = 0.

    The overdamped root closest to zero uses the cancellation-free form
    -omega^2 / (a/2 + sqrt(a^2/4 - omega^2)).
    """
    if a < 0 or omega < 0:
        raise ValueError("eigenvalues needs a >= 0 and omega >= 0")
    half = a / 2
    disc = (omega - half) * (omega + half)
    if disc > 0:
        s = math.sqrt(disc)
        return complex(-half, s), complex(-half, -s)
    if disc < 0:
        s = math.sqrt(-disc)
        return complex(-omega * omega / (half + s)), complex(-half - s)
    return complex(-half), complex(-half)


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with its series near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) <= config.PHI1_SERIES_SWITCH
    safe = np.where(small, 1.0, z)
    series = 1 + z / 2 + z * z / 6 + z * z * z / 24
    return np.where(small, series, np.expm1(safe) / safe)


def _regimes(a: np.ndarray, omega: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    eps = config.DEGENERATE_EPS
    damped = a < 2 * omega * (1 - eps)
    over = a > 2 * omega * (1 + eps)
    return damped, over, ~(damped | over)


def khat_mode(a: np.ndarray, omega: np.ndarray, t: np.ndarray) -> np.ndarray:
    """K^(t) for damping values a and frequencies omega, broadcast elementwise."""
    a, omega, t = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(omega, dtype=float), np.asarray(t, dtype=float)
    )
    half = a / 2
    disc = (omega - half) * (omega + half)
    damped, over, degenerate = _regimes(a, omega)
    out = np.empty(a.shape)

    if np.any(damped):
        s = np.sqrt(disc[damped])
        tt = t[damped]
        out[damped] = np.exp(-tt * half[damped]) * tt * np.sinc(tt * s / np.pi)
    if np.any(over):
        s = np.sqrt(-disc[over])
        tt = t[over]
        lam_plus = -omega[over] ** 2 / (half[over] + s)
        out[over] = np.exp(lam_plus * tt) * tt * _phi1(-2 * s * tt)
    if np.any(degenerate):
        d = disc[degenerate]
        tt = t[degenerate]
        poly = 1 - tt * tt * d / 6 + tt**4 * d * d / 120
        out[degenerate] = tt * np.exp(-tt * half[degenerate]) * poly
    return out


def khat_dt_mode(a: np.ndarray, omega: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Time derivative of khat_mode on the same branches."""
    a, omega, t = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(omega, dtype=float), np.asarray(t, dtype=float)
    )
    half = a / 2
    disc = (omega - half) * (omega + half)
    damped, over, degenerate = _regimes(a, omega)
    out = np.empty(a.shape)

    if np.any(damped):
        s = np.sqrt(disc[damped])
        tt = t[damped]
        h = half[damped]
        out[damped] = np.exp(-tt * h) * (np.cos(tt * s) - h * tt * np.sinc(tt * s / np.pi))
    if np.any(over):
        s = np.sqrt(-disc[over])
        tt = t[over]
        lam_plus = -omega[over] ** 2 / (half[over] + s)
        lam_minus = -half[over] - s
        out[over] = np.exp(lam_plus * tt) * (1 + lam_minus * tt * _phi1(-2 * s * tt))
    if np.any(degenerate):
        d = disc[degenerate]
        tt = t[degenerate]
        h = half[degenerate]
        poly = 1 - tt * tt * d / 6 + tt**4 * d * d / 120
        dpoly = -tt * d / 3 + tt**3 * d * d / 30
        out[degenerate] = np.exp(-tt * h) * ((1 - h * tt) * poly + tt * dpoly)
    return out


def khat(sym: DissipationSymbol, t: float, xi: np.ndarray) -> np.ndarray:
    """K^(t, xi) for frequency vectors of shape (..., dim)."""
    xi = np.asarray(xi, dtype=float)
    omega = np.sqrt(np.sum(xi * xi, axis=-1))
    return khat_mode(sym.evaluate(xi), omega, t)


def khat_dt(sym: DissipationSymbol, t: float, xi: np.ndarray) -> np.ndarray:
    """d/dt K^(t, xi) for frequency vectors of shape (..., dim)."""
    xi = np.asarray(xi, dtype=float)
    omega = np.sqrt(np.sum(xi * xi, axis=-1))
    return khat_dt_mode(sym.evaluate(xi), omega, t)


def khat_radial(sym: DissipationSymbol, t: float, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    return khat_mode(sym.radial(rho), rho, t)


def _check_steps(a: np.ndarray, omega: np.ndarray, t_end: np.ndarray, steps: int) -> None:
    worst = float(np.max((a + omega) * t_end)) / steps
    if worst > 0.1:
        raise OracleError(
            f"RK4 step too coarse: (a + omega) * t / steps = {worst:.3g} > 0.1"
        )


def _rk4_step(k: np.ndarray, v: np.ndarray, a: np.ndarray, w2: np.ndarray, h: np.ndarray):
    def rhs(k_: np.ndarray, v_: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return v_, -w2 * k_ - a * v_

    k1, v1 = rhs(k, v)
    k2, v2 = rhs(k + 0.5 * h * k1, v + 0.5 * h * v1)
    k3, v3 = rhs(k + 0.5 * h * k2, v + 0.5 * h * v2)
    k4, v4 = rhs(k + h * k3, v + h * v3)
    return (
        k + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4),
        v + h / 6 * (v1 + 2 * v2 + 2 * v3 + v4),
    )


def ode_oracle(
    a: np.ndarray, omega: np.ndarray, t_end: np.ndarray, steps: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrate the mode ODE from (K, K') = (0, 1) with classical RK4.

    Args:
        a: Damping values
        omega: Frequencies |xi|
        t_end: Final times
        steps: Number of RK4 steps (same for every draw)

    Returns:
        (K^, dK^/dt) at t_end
    """
    a, omega, t_end = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(omega, dtype=float), np.asarray(t_end, dtype=float)
    )
    _check_steps(a, omega, t_end, steps)
    h = t_end / steps
    w2 = omega * omega
    k = np.zeros(a.shape)
    v = np.ones(a.shape)
    for _ in range(steps):
        k, v = _rk4_step(k, v, a, w2, h)
    return k, v


def ode_trajectory(
    a: float, omega: float, t_end: float, steps: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RK4 trajectory of a single mode: (times, K^, dK^/dt)."""
    a_arr = np.array([a], dtype=float)
    w_arr = np.array([omega], dtype=float)
    _check_steps(a_arr, w_arr, np.array([t_end]), steps)
    h = np.array([t_end / steps])
    k = np.zeros(1)
    v = np.ones(1)
    ks = [0.0]
    vs = [1.0]
    for _ in range(steps):
        k, v = _rk4_step(k, v, a_arr, w_arr * w_arr, h)
        ks.append(float(k[0]))
        vs.append(float(v[0]))
    return np.linspace(0.0, t_end, steps + 1), np.array(ks), np.array(vs)


def energy(kdot: np.ndarray, k: np.ndarray, omega: float) -> np.ndarray:
    """|dK/dt|^2 + omega^2 |K|^2 along a trajectory."""
    return kdot * kdot + omega * omega * k * k


def _sigma(u: np.ndarray) -> np.ndarray:
    positive = u > 0
    return np.where(positive, np.exp(-1.0 / np.where(positive, u, 1.0)), 0.0)


def chi(s: np.ndarray) -> np.ndarray:
    """Smooth cutoff: 1 for s <= 1, 0 for s >= 2."""
    s = np.asarray(s, dtype=float)
    left = _sigma(2.0 - s)
    right = _sigma(s - 1.0)
    inside = (s > 1) & (s < 2)
    blend = left / np.where(inside, left + right, 1.0)
    return np.where(s <= 1, 1.0, np.where(s >= 2, 0.0, blend))


@dataclass(frozen=True)
class Localizer:
    """Partition phi0 + (1 - phi0 - phi1) + phi1 = 1 with disjoint outer supports."""

    delta: float
    big_m: float

    @classmethod
    def for_symbol(cls, sym: DissipationSymbol) -> "Localizer":
        return cls(delta=min(sym.delta, sym.big_m / 4), big_m=sym.big_m)

    def phi0(self, rho: np.ndarray) -> np.ndarray:
        return chi(np.asarray(rho, dtype=float) / (2 * self.delta))

    def phi1(self, rho: np.ndarray) -> np.ndarray:
        return 1.0 - chi(np.asarray(rho, dtype=float) / self.big_m)

    def mid(self, rho: np.ndarray) -> np.ndarray:
        return (1.0 - self.phi0(rho)) - self.phi1(rho)

    def weight(self, band: str, rho: np.ndarray) -> np.ndarray:
        if band == "low":
            return self.phi0(rho)
        if band == "high":
            return self.phi1(rho)
        if band == "mid":
            return self.mid(rho)
        return np.ones_like(np.asarray(rho, dtype=float))

    def breakpoints(self, band: str) -> Tuple[float, ...]:
        d2, d4, m1, m2 = 2 * self.delta, 4 * self.delta, self.big_m, 2 * self.big_m
        return {
            "low": (d2, d4),
            "mid": (d2, d4, m1, m2),
            "high": (m1, m2),
        }.get(band, ())

    def support(self, band: str) -> Tuple[float, float]:
        return {
            "low": (0.0, 4 * self.delta),
            "mid": (2 * self.delta, 2 * self.big_m),
            "high": (self.big_m, math.inf),
        }.get(band, (0.0, math.inf))


@dataclass(frozen=True)
class SpectralKernel:
    """K^(t, xi) times the weight of one frequency band."""

    sym: DissipationSymbol
    band: str = "full"
    loc: Optional[Localizer] = None

    def __post_init__(self) -> None:
        if self.band not in BANDS:
            raise ValueError(f"Unknown band: {self.band}")
        if self.band != "full" and self.loc is None:
            raise ValueError(f"Band '{self.band}' needs a Localizer")

    def _banded(self, full: np.ndarray, rho: np.ndarray) -> np.ndarray:
        if self.band == "full" or self.loc is None:
            return full
        if self.band == "mid":
            return full - full * self.loc.phi0(rho) - full * self.loc.phi1(rho)
        return full * self.loc.weight(self.band, rho)

    def evaluate(self, t: float, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        rho = np.sqrt(np.sum(xi * xi, axis=-1))
        return self._banded(khat(self.sym, t, xi), rho)

    def radial(self, t: float, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return self._banded(khat_radial(self.sym, t, rho), rho)

    def breakpoints(self) -> Tuple[float, ...]:
        return self.loc.breakpoints(self.band) if self.loc else ()

    def support(self) -> Tuple[float, float]:
        return self.loc.support(self.band) if self.loc else (0.0, math.inf)


def localize(
    kernel: SpectralKernel, loc: Optional[Localizer] = None
) -> Tuple[SpectralKernel, SpectralKernel, SpectralKernel]:
    """Split a full kernel into its low, intermediate and high frequency parts."""
    if kernel.band != "full":
        raise ValueError("localize expects the full kernel")
    loc = loc or Localizer.for_symbol(kernel.sym)
    if loc.delta > loc.big_m / 4:
        raise ValueError("Localizer radii overlap: need delta <= M/4")
    return (
        SpectralKernel(kernel.sym, "low", loc),
        SpectralKernel(kernel.sym, "mid", loc),
        SpectralKernel(kernel.sym, "high", loc),
    )


def band_kernel(sym: DissipationSymbol, band: str) -> SpectralKernel:
    if band == "full":
        return SpectralKernel(sym)
    return SpectralKernel(sym, band, Localizer.for_symbol(sym))


def mid_band_constant(
    sym: DissipationSymbol, loc: Optional[Localizer] = None, samples: int = 4096, seed: int = 0
) -> float:
    """0.9 times the sampled minimum of min{a/2, |xi|^2/a} over delta/2 <= |xi| <= 2M."""
    loc = loc or Localizer.for_symbol(sym)
    rng = np.random.default_rng(seed)
    radii = np.geomspace(loc.delta / 2, 2 * loc.big_m, samples)
    if sym.dim == 1:
        xi = radii[:, None] * np.where(rng.random(samples) < 0.5, -1.0, 1.0)[:, None]
    else:
        directions = rng.standard_normal((samples, sym.dim))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        xi = directions * radii[:, None]
    a = sym.evaluate(xi)
    with np.errstate(divide="ignore"):
        rates = np.minimum(a / 2, np.where(a > 0, radii**2 / np.where(a > 0, a, 1.0), np.inf))
    return 0.9 * float(np.min(rates))


def asymptotic_profile(sym: DissipationSymbol, t: float, rho: np.ndarray) -> np.ndarray:
    """t sinc(t|xi|) exp(-(a1/2) t |xi|^theta0)."""
    rho = np.asarray(rho, dtype=float)
    return t * np.sinc(t * rho / np.pi) * np.exp(-0.5 * sym.a1 * t * rho**sym.theta0)


def g_closed(b: np.ndarray) -> np.ndarray:
    """g with sqrt(1 - b) = 1 + b g, in the cancellation-free form -1/(1 + sqrt(1 - b))."""
    return -1.0 / (1.0 + np.sqrt(1.0 - np.asarray(b, dtype=float)))


def g_quadrature(b: np.ndarray, nodes: int = 64) -> np.ndarray:
    """-(1/2) int_0^1 (1 - b tau)^(-1/2) dtau by Gauss-Legendre."""
    x, w = roots_legendre(nodes)
    tau = 0.5 * (x + 1.0)
    b = np.asarray(b, dtype=float)
    integrand = (1.0 - b[..., None] * tau) ** -0.5
    return -0.5 * 0.5 * np.sum(integrand * w, axis=-1)


@dataclass(frozen=True)
class TaylorProfile:
    """Expansion of the low-frequency kernel in powers of t|xi| b g."""

    sym: DissipationSymbol
    order: int
    loc: Localizer

    def b(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        a = self.sym.radial(rho)
        safe = np.where(rho > 0, rho, 1.0)
        return np.where(rho > 0, a * a / (4 * safe * safe), 0.0)

    def f(self, rho: np.ndarray) -> np.ndarray:
        return np.sqrt(1.0 - self.b(rho))

    def g(self, rho: np.ndarray) -> np.ndarray:
        return g_closed(self.b(rho))

    def term(self, ell: int, t: float, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        a = self.sym.radial(rho)
        b = self.b(rho)
        f = np.sqrt(1.0 - b)
        phase = t * rho * b * g_closed(b)
        envelope = self.loc.phi0(rho) * np.exp(-t * a / 2)
        if ell == 0:
            return envelope * t * np.sinc(t * rho / np.pi) / f
        safe = np.where(rho > 0, rho, 1.0)
        return (
            envelope / (safe * f)
            * np.sin(t * rho + ell * np.pi / 2)
            * phase**ell / math.factorial(ell)
        )

    def partial_sum(self, t: float, rho: np.ndarray) -> np.ndarray:
        return sum(self.term(ell, t, rho) for ell in range(self.order + 1))

    def residual(self, t: float, rho: np.ndarray) -> np.ndarray:
        low = SpectralKernel(self.sym, "low", self.loc)
        return low.radial(t, rho) - self.partial_sum(t, rho)


def taylor_terms(
    sym: DissipationSymbol, order: int, loc: Optional[Localizer] = None
) -> TaylorProfile:
    """
    Build the Taylor profile of the low-frequency kernel.

    Args:
        sym: Radial symbol with theta0 > 1
        order: Expansion order N
        loc: Localizer (defaults to one whose phi0 lives inside |xi| <= delta)

    Returns:
        TaylorProfile with terms m_0..m_N and the residual
    """
    if sym.theta0 <= 1:
        raise SymbolError(f"Taylor profile needs theta0 > 1, got {sym.theta0}")
    if not sym.is_radial:
        raise SymbolError("Taylor profile needs a radial symbol")
    if loc is None:
        base = Localizer.for_symbol(sym)
        loc = Localizer(delta=base.delta / 4, big_m=base.big_m)
    probe = np.linspace(0.0, 0.25, 101)
    defect = float(np.max(np.abs(g_closed(probe) - g_quadrature(probe))))
    if defect > 1e-12:
        raise RuntimeError(f"Closed form of g disagrees with quadrature by {defect:.3g}")
    rho = np.linspace(0.0, 4 * loc.delta, 257)[1:]
    if float(np.max(TaylorProfile(sym, order, loc).b(rho))) > 0.25:
        raise SymbolError("Taylor profile needs b <= 1/4 on the low band")
    return TaylorProfile(sym=sym, order=order, loc=loc)
