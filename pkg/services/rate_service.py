"""
Rate Service Implementation
===========================

Predicted decay and singularity exponents for every damping class, norm
sweeps over time (or the scale tau), log-log and log-law fits, and the
verdicts that compare the two.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from services.norm_service import (
    LR,
    OP_EXACT_P1,
    OP_EXACT_P2Q2,
    OP_LOWER_TEST,
    OP_UPPER_YOUNG,
    NormReport,
    PQPair,
    d_exponent,
    lr_norm,
    op_norm_exact_p1,
    op_norm_exact_p2q2,
    op_norm_lower_test,
    op_norm_upper_young,
    operator_norm_reports,
    reciprocal,
    sandwich_holds,
)
from services.oscillator_service import (
    Localizer,
    SpectralKernel,
    band_kernel,
    mid_band_constant,
    taylor_terms,
)
from services.spectra_service import (
    QuadratureSpec,
    RadialMultiplier,
    RadialProfile,
    fft_inverse,
    frequency_scale,
    hankel_inverse,
    kernel_multiplier,
    kernel_r_grid,
)
from services.symbol_service import DissipationSymbol

logger = logging.getLogger(__name__)

CASES = ("ThmD", "ThmR", "EffLow", "EffHigh", "Theta1", "Crucial", "CrucialLog", "K12", "LemmaExp")
LOG_LAWS = ("none", "sqrt_log_t", "log_t", "sqrt_log_inv_t")
T_INF = "t->inf"
T_ZERO = "t->0"
TAU_ZERO = "tau->0"

BOTH = "both"
UPPER = "upper"
LOWER = "lower"

VERDICT_COLUMNS = [
    "case", "band", "n", "p", "q", "theta", "predicted", "fitted", "residual", "tol", "verdict",
    "direction",
]

Inverter = Callable[[RadialMultiplier, int, np.ndarray, Optional[QuadratureSpec]], RadialProfile]


class ApplicabilityError(ValueError):
    """Raised when a case is asked for outside the hypotheses of its estimate."""


class FitError(ValueError):
    """Raised when a fit window has too few or non-positive values."""


class SweepError(RuntimeError):
    """Raised when every point of a sweep failed."""


@dataclass(frozen=True)
class Prediction:
    case: str
    exponent: Optional[float]
    log_law: str = "none"
    regime_end: str = T_INF
    applicability: Tuple[Tuple[str, Any], ...] = ()
    eps_loss: bool = False
    coefficient: Optional[float] = None
    coefficient_bound: Optional[float] = None

    def __post_init__(self) -> None:
        if self.case not in CASES:
            raise ValueError(f"Unknown case: {self.case}")
        if self.log_law not in LOG_LAWS:
            raise ValueError(f"Unknown log law: {self.log_law}")
        if (self.exponent is None) == (self.log_law == "none"):
            raise ValueError("Exactly one of exponent and log_law drives a prediction")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "exponent": self.exponent,
            "log_law": self.log_law,
            "regime_end": self.regime_end,
            "applicability": dict(self.applicability),
            "eps_loss": self.eps_loss,
            "coefficient": self.coefficient,
            "coefficient_bound": self.coefficient_bound,
        }


@dataclass(frozen=True)
class NoClaim:
    """No estimate covers this band and pair; kept in reports, never dropped."""

    band: str
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {"case": "NoClaim", "band": self.band, "reason": self.reason}


def _is(value: Union[float, Fraction], target: float) -> bool:
    return math.isclose(float(value), target, rel_tol=0.0, abs_tol=1e-12)


def predicted_exponent(
    case: str,
    n: int,
    p: float,
    q: float,
    theta: float,
    r: float = math.inf,
    eta: float = 0.0,
    c: Optional[float] = None,
    band: str = "low",
) -> Prediction:
    """
    The exponent (or log law) asserted for one case.

    Args:
        case: One of CASES
        n: Dimension
        p, q: Lebesgue exponents, 1 <= p <= q <= inf
        theta: theta0 for low-frequency cases, theta1 for high-frequency ones,
            the diffusion order for Crucial and LemmaExp
        r: Kernel norm exponent for LemmaExp
        eta: Power factor |xi|^eta for LemmaExp
        c: Mid-band decay constant for K12
        band: "low" or "high", only used by Theta1

    Raises:
        ApplicabilityError: the case's hypotheses do not hold
    """
    pair = PQPair(p, q)
    inv_p, inv_q = pair.inv_p, pair.inv_q
    gap = n * (inv_p - inv_q)
    d = d_exponent(p, q, n)
    excess = max(d - 1, Fraction(0))
    log_pair = n == 2 and ((inv_p, inv_q) in ((Fraction(1), Fraction(1, 2)), (Fraction(1, 2), Fraction(0))))
    hyp = (("n", n), ("p", p), ("q", q), ("theta", theta))

    if case == "ThmD":
        if not theta > 1:
            raise ApplicabilityError(f"ThmD needs theta0 > 1, got {theta}")
        if log_pair:
            return Prediction(case, None, "sqrt_log_t", T_INF, hyp)
        return Prediction(case, float(1 - gap) + float(excess) * (1 - 1 / theta), "none", T_INF, hyp)

    if case == "ThmR":
        if not 0 <= theta < 1:
            raise ApplicabilityError(f"ThmR needs theta1 in [0, 1), got {theta}")
        if theta == 0:
            endpoint = inv_p == 1 or inv_q == 0
            if endpoint and not d < 1:
                raise ApplicabilityError("ThmR with theta1 = 0 at p = 1 or q = inf needs d(p,q) < 1")
            if not endpoint and not d <= 1:
                raise ApplicabilityError("ThmR with theta1 = 0 needs d(p,q) <= 1")
            return Prediction(case, float(1 - gap), "none", T_ZERO, hyp, eps_loss=endpoint)
        if log_pair:
            return Prediction(case, None, "sqrt_log_inv_t", T_ZERO, hyp)
        return Prediction(case, float(1 - gap) - float(excess) * (1 / theta - 1), "none", T_ZERO, hyp)

    if case == "EffLow":
        if not 0 <= theta < 1:
            raise ApplicabilityError(f"EffLow needs theta0 in [0, 1), got {theta}")
        if theta == 0 and inv_p == inv_q and inv_p in (0, 1):
            raise ApplicabilityError("EffLow with theta0 = 0 makes no claim for p = q = 1 or p = q = inf")
        if theta > 0 and (
            (inv_p == 1 and _is(n * (1 - inv_q), theta)) or (inv_q == 0 and _is(n * inv_p, theta))
        ):
            return Prediction(case, None, "log_t", T_INF, hyp)
        if float(gap) >= theta:
            return Prediction(case, -(float(gap) - theta) / (2 - theta), "none", T_INF, hyp)
        return Prediction(case, 1 - float(gap) / theta, "none", T_INF, hyp)

    if case == "EffHigh":
        if not 1 < theta <= 2:
            raise ApplicabilityError(f"EffHigh needs theta1 in (1, 2], got {theta}")
        if theta == 2:
            allowed = (
                (inv_p < 1 and inv_q > 0 and gap <= 2)
                or (inv_p == 1 and n * (1 - inv_q) < 2)
                or (inv_q == 0 and n * inv_p < 2)
            )
            if not allowed:
                raise ApplicabilityError("EffHigh with theta1 = 2 outside its admissible pairs")
            return Prediction(case, 0.0, "none", T_ZERO, hyp)
        if (inv_p == 1 and _is(n * (1 - inv_q), theta)) or (inv_q == 0 and _is(n * inv_p, theta)):
            return Prediction(case, 0.0, "none", T_ZERO, hyp, eps_loss=True)
        return Prediction(case, -max(float(gap) - theta, 0.0) / (2 - theta), "none", T_ZERO, hyp)

    if case == "Theta1":
        if not _is(theta, 1.0):
            raise ApplicabilityError(f"Theta1 needs theta = 1, got {theta}")
        return Prediction(case, float(1 - gap), "none", T_ZERO if band == "high" else T_INF, hyp)

    if case in ("Crucial", "CrucialLog"):
        if not 0 < theta <= 2:
            raise ApplicabilityError(f"Crucial needs theta in (0, 2], got {theta}")
        if log_pair:
            return Prediction(
                "CrucialLog", None, "sqrt_log_inv_t", TAU_ZERO, hyp,
                coefficient=math.pi, coefficient_bound=2 * math.pi,
            )
        return Prediction("Crucial", -float(excess), "none", TAU_ZERO, hyp)

    if case == "K12":
        if c is None or c < 0:
            raise ApplicabilityError("K12 needs the mid-band constant c >= 0")
        return Prediction(case, -c / 2, "none", T_INF, hyp + (("c", c),))

    if case == "LemmaExp":
        if not theta > 0:
            raise ApplicabilityError(f"LemmaExp needs theta > 0, got {theta}")
        inv_r = reciprocal(r)
        exponent = -(n / theta) * float(1 - inv_r) - eta / theta
        return Prediction(case, exponent, "none", T_INF, hyp + (("r", r), ("eta", eta)))

    raise ValueError(f"Unknown case: {case}")


def band_prediction(
    sym: DissipationSymbol, band: str, n: int, p: float, q: float
) -> Union[Prediction, NoClaim]:
    """The single case claiming this band and pair, or the reason none does."""
    if not sym.dissipative:
        return NoClaim(band, f"{sym.name} is not dissipative")
    try:
        if band == "low":
            theta = sym.theta0
            if theta > 1:
                return predicted_exponent("ThmD", n, p, q, theta)
            if _is(theta, 1.0):
                return predicted_exponent("Theta1", n, p, q, theta, band="low")
            if 0 <= theta < 1:
                return predicted_exponent("EffLow", n, p, q, theta)
            return NoClaim(band, f"theta0 = {theta} outside the covered range")
        if band == "high":
            theta = sym.theta1
            if sym.has_tag("regularity-loss"):
                return NoClaim(band, "regularity-loss symbol: no high-frequency rate is claimed")
            if 0 <= theta < 1:
                return predicted_exponent("ThmR", n, p, q, theta)
            if _is(theta, 1.0):
                return predicted_exponent("Theta1", n, p, q, theta, band="high")
            if 1 < theta <= 2:
                return predicted_exponent("EffHigh", n, p, q, theta)
            return NoClaim(band, f"theta1 = {theta}: regularity-loss or strongly damped high band")
        if band == "mid":
            c = mid_band_constant(sym)
            if c <= 0:
                return NoClaim(band, "mid-band constant is not positive")
            return predicted_exponent("K12", n, p, q, sym.theta0, c=c)
    except ApplicabilityError as e:
        return NoClaim(band, str(e))
    return NoClaim(band, "estimates are stated per frequency band")


@dataclass(frozen=True)
class NormSpec:
    """Which norm a sweep records."""

    kind: str
    p: float = 1.0
    q: float = math.inf
    tau: Optional[float] = None

    @property
    def pair(self) -> PQPair:
        return PQPair(self.p, self.q)


@dataclass
class Sweep:
    variable: str
    spec: NormSpec
    symbol: str = ""
    band: str = ""
    dim: int = 0
    xs: List[float] = field(default_factory=list)
    reports: List[Optional[NormReport]] = field(default_factory=list)
    failures: List[Optional[str]] = field(default_factory=list)

    def add(self, x: float, report: Optional[NormReport], failure: Optional[str] = None) -> None:
        self.xs.append(float(x))
        self.reports.append(report)
        self.failures.append(failure)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """x, value and quad_error of the successful points."""
        ok = [(x, r) for x, r in zip(self.xs, self.reports) if r is not None]
        return (
            np.array([x for x, _ in ok]),
            np.array([r.value for _, r in ok]),
            np.array([r.quad_error for _, r in ok]),
        )

    @property
    def failed(self) -> int:
        return sum(1 for f in self.failures if f is not None)

    def rows(self) -> List[Dict[str, Any]]:
        rows = []
        for x, report in zip(self.xs, self.reports):
            if report is None:
                row = {"symbol": self.symbol, "band": self.band, "kind": self.spec.kind,
                       "p": self.spec.p, "q": self.spec.q, "r": None, "t": None, "tau": None,
                       "value": None, "quad_error": None}
            else:
                row = report.to_row()
                row.update(symbol=self.symbol, band=self.band)
            row[self.variable] = x
            rows.append(row)
        return rows


_FFT_POINTS = {1: 4096, 2: 256, 3: 64, 4: 32}


def sweep_point(
    kernel: SpectralKernel,
    spec: NormSpec,
    t: float,
    transform: str = "hankel",
    quad_spec: Optional[QuadratureSpec] = None,
    points: int = 512,
    invert: Optional[Inverter] = None,
) -> NormReport:
    """Invert the kernel at one time and take the requested norm."""
    dim = kernel.sym.dim
    if transform == "fft":
        return _fft_point(kernel, spec, t)
    if transform != "hankel":
        raise ValueError(f"Unknown transform: {transform}")

    mult = kernel_multiplier(kernel, t)
    if spec.kind == OP_EXACT_P2Q2:
        report = op_norm_exact_p2q2(mult)
    elif spec.kind == OP_LOWER_TEST:
        tau = spec.tau or 2 * math.pi / frequency_scale(mult, dim)
        report = op_norm_lower_test(mult, dim, spec.pair, tau, quad_spec=quad_spec)
    else:
        grid = kernel_r_grid(mult, dim, points)
        profile = (invert or hankel_inverse)(mult, dim, grid, quad_spec)
        if spec.kind == LR:
            report = lr_norm(profile, spec.q)
        elif spec.kind == OP_EXACT_P1:
            report = op_norm_exact_p1(profile, spec.q)
        elif spec.kind == OP_UPPER_YOUNG:
            report = op_norm_upper_young(profile, spec.pair)
        else:
            raise ValueError(f"Unknown norm kind: {spec.kind}")
    report.meta.update(symbol=kernel.sym.name, band=kernel.band, t=t)
    return report


def _fft_point(kernel: SpectralKernel, spec: NormSpec, t: float) -> NormReport:
    dim = kernel.sym.dim
    direction = np.zeros(dim)
    direction[0] = 1.0
    cut = RadialMultiplier(
        func=lambda rho: kernel.evaluate(t, rho[..., None] * direction),
        osc_rate=t,
        support=kernel.support(),
    )
    resolution = 2 * math.pi / frequency_scale(cut, dim)
    extent = max(4.0, 2 * (t + 20 * resolution))
    field_ = fft_inverse(lambda xi: kernel.evaluate(t, xi), dim, extent, _FFT_POINTS.get(dim, 32))
    if spec.kind == OP_EXACT_P1:
        report = op_norm_exact_p1(field_, spec.q)
    elif spec.kind == OP_UPPER_YOUNG:
        report = op_norm_upper_young(field_, spec.pair)
    elif spec.kind == LR:
        report = lr_norm(field_, spec.q)
    else:
        raise ValueError(f"Norm kind {spec.kind} is not available on the FFT path")
    report.meta.update(symbol=kernel.sym.name, band=kernel.band, t=t)
    return report


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    xs = np.asarray(grid, dtype=float)
    if xs.size < 8 or np.any(xs <= 0) or math.log10(xs.max() / xs.min()) < 1.5:
        raise ValueError("Sweep grids need at least 8 positive points spanning 1.5 decades")
    return xs


def sweep_norms(
    kernel: SpectralKernel,
    spec: NormSpec,
    grid: Sequence[float],
    transform: str = "hankel",
    quad_spec: Optional[QuadratureSpec] = None,
    points: int = 512,
    invert: Optional[Inverter] = None,
) -> Sweep:
    """
    One norm report per time in the grid; failed points are recorded, not raised.

    Raises:
        SweepError: every point failed
    """
    xs = _check_grid(grid)
    logger.info(f"Sweeping {spec.kind} of {kernel.sym.name}/{kernel.band} over {xs.size} times")
    sweep = Sweep("t", spec, kernel.sym.name, kernel.band, kernel.sym.dim)
    for t in xs:
        try:
            sweep.add(t, sweep_point(kernel, spec, float(t), transform, quad_spec, points, invert))
        except Exception as e:
            logger.warning(f"Sweep point t={t:g} failed: {e}")
            sweep.add(t, None, str(e))
    if sweep.failed == len(sweep.xs):
        raise SweepError(f"All {len(sweep.xs)} sweep points failed")
    return sweep


@dataclass
class FitResult:
    slope: float
    intercept: float
    residual_rms: float
    window: Tuple[float, float]
    n_points: int
    verdict: Optional[bool] = None
    direction: str = BOTH
    law: str = "power"
    tolerance: Optional[float] = None
    prediction: Optional[Prediction] = None
    dropped: int = 0

    def to_row(self, band: str = "", n: Optional[int] = None, p: Any = None, q: Any = None,
               theta: Optional[float] = None) -> Dict[str, Any]:
        prediction = self.prediction
        predicted: Any = None
        if prediction is not None:
            predicted = prediction.coefficient if prediction.log_law != "none" else prediction.exponent
        return {
            "case": prediction.case if prediction else "",
            "band": band,
            "n": n,
            "p": p,
            "q": q,
            "theta": theta,
            "predicted": predicted,
            "fitted": self.slope,
            "residual": self.residual_rms,
            "tol": self.tolerance,
            "verdict": "" if self.verdict is None else ("pass" if self.verdict else "fail"),
            "direction": self.direction,
        }


def default_window(xs: np.ndarray, regime_end: str) -> Tuple[float, float]:
    """Drop the decade farthest from the asymptotic end when the grid spans two or more."""
    lo, hi = float(np.min(xs)), float(np.max(xs))
    if hi / lo < 100 * (1 - 1e-9):
        return lo, hi
    if regime_end == T_INF:
        return 10 * lo, hi
    return lo, hi / 10


def _window_points(
    xs: np.ndarray, values: np.ndarray, errors: np.ndarray, window: Tuple[float, float]
) -> Tuple[np.ndarray, np.ndarray, int]:
    lo, hi = window
    inside = (xs >= lo * (1 - 1e-12)) & (xs <= hi * (1 + 1e-12))
    accurate = errors <= config.FIT_MAX_REL_QUAD_ERROR * np.abs(values)
    keep = inside & accurate
    dropped = int(np.sum(inside & ~accurate))
    if dropped:
        logger.warning(f"Dropped {dropped} points with quadrature error above 1% of the value")
    if int(np.sum(keep)) < config.FIT_MIN_POINTS:
        raise FitError(f"Fit window {window} holds {int(np.sum(keep))} usable points, need {config.FIT_MIN_POINTS}")
    return xs[keep], values[keep], dropped


def _linear_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(residual**2)))


def _series(data: Union[Sweep, Tuple[Sequence[float], Sequence[float]]]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(data, Sweep):
        return data.arrays()
    xs, values = data[0], data[1]
    errors = data[2] if len(data) > 2 else np.zeros(len(xs))  # type: ignore[misc]
    return np.asarray(xs, float), np.asarray(values, float), np.asarray(errors, float)


def power_verdict(slope: float, prediction: Prediction, tol: float, direction: str) -> bool:
    """
    Compare a fitted slope with a predicted exponent.

    Exact norms need |slope - exponent| <= tol. Upper bounds certify only that
    the norm is no larger than predicted near the asymptotic end, lower bounds
    only that it is no smaller.
    """
    assert prediction.exponent is not None
    target = prediction.exponent
    if prediction.eps_loss:
        return target - tol <= slope <= target + config.EPS_CFG
    if direction == BOTH:
        return abs(slope - target) <= tol
    # at t -> inf a smaller slope means a smaller norm; at t -> 0 or tau -> 0 a larger one
    smaller_is_below = prediction.regime_end == T_INF
    if direction == UPPER:
        return slope <= target + tol if smaller_is_below else slope >= target - tol
    return slope >= target - tol if smaller_is_below else slope <= target + tol


def fit_power(
    data: Union[Sweep, Tuple[Sequence[float], ...]],
    window: Optional[Tuple[float, float]] = None,
    prediction: Optional[Prediction] = None,
    tol: float = config.POWER_TOL,
    direction: str = BOTH,
) -> FitResult:
    """
    Least-squares slope of log(value) against log(x).

    Raises:
        FitError: fewer than six usable points, or non-positive values
    """
    xs, values, errors = _series(data)
    if window is None:
        window = default_window(xs, prediction.regime_end if prediction else T_INF)
    x, y, dropped = _window_points(xs, values, errors, window)
    if np.any(y <= 0):
        raise FitError("Power fits need positive values")
    slope, intercept, rms = _linear_fit(np.log(x), np.log(y))
    verdict = None
    if prediction is not None and prediction.exponent is not None:
        verdict = power_verdict(slope, prediction, tol, direction)
    return FitResult(
        slope, intercept, rms, (float(x.min()), float(x.max())), int(x.size),
        verdict=verdict, direction=direction, law="power", tolerance=tol,
        prediction=prediction, dropped=dropped,
    )


def fit_loglaw(
    data: Union[Sweep, Tuple[Sequence[float], ...]],
    law: str,
    window: Optional[Tuple[float, float]] = None,
    prediction: Optional[Prediction] = None,
    scale: float = 1.0,
    tol: float = config.LOG_COEF_TOL,
) -> FitResult:
    """
    Fit a logarithmic law.

    sqrt_log_t regresses scale * value^2 on log t; sqrt_log_inv_t on log(1/x);
    log_t regresses value on log t. The verdict asks for a linear fit (rms at
    most 5% of the range) with positive slope and, when the prediction carries
    a coefficient, a slope within tol of it and below the coefficient bound.
    """
    if law not in LOG_LAWS or law == "none":
        raise ValueError(f"Unknown log law: {law}")
    xs, values, errors = _series(data)
    if window is None:
        window = default_window(xs, T_INF if law in ("sqrt_log_t", "log_t") else T_ZERO)
    x, y, dropped = _window_points(xs, values, errors, window)
    if np.any(y <= 0):
        raise FitError("Log-law fits need positive values")
    abscissa = np.log(x) if law in ("sqrt_log_t", "log_t") else np.log(1 / x)
    ordinate = y if law == "log_t" else scale * y**2
    slope, intercept, rms = _linear_fit(abscissa, ordinate)
    spread = float(np.ptp(ordinate))
    verdict = slope > 0 and rms <= 0.05 * spread
    if prediction is not None and prediction.coefficient is not None:
        verdict = verdict and abs(slope - prediction.coefficient) <= tol * prediction.coefficient
        if prediction.coefficient_bound is not None:
            verdict = verdict and slope <= prediction.coefficient_bound * (1 + tol)
    return FitResult(
        slope, intercept, rms, (float(x.min()), float(x.max())), int(x.size),
        verdict=bool(verdict), law=law, tolerance=tol, prediction=prediction, dropped=dropped,
    )


def fit_semilog(
    data: Union[Sweep, Tuple[Sequence[float], ...]], window: Optional[Tuple[float, float]] = None
) -> FitResult:
    """Least-squares slope of log(value) against x."""
    xs, values, errors = _series(data)
    window = window or (float(xs.min()), float(xs.max()))
    x, y, dropped = _window_points(xs, values, errors, window)
    if np.any(y <= 0):
        raise FitError("Semi-log fits need positive values")
    slope, intercept, rms = _linear_fit(x, np.log(y))
    return FitResult(slope, intercept, rms, (float(x.min()), float(x.max())), int(x.size),
                     law="semilog", dropped=dropped)


TOLERANCE_DEFAULTS = {
    "power": config.POWER_TOL,
    "lower_bound": config.LOWER_BOUND_TOL,
    "log_coefficient": config.LOG_COEF_TOL,
    "lemma_exp": 0.05,
}


def tolerance(name: str, overrides: Optional[Dict[str, float]] = None, scale: float = 1.0) -> float:
    """A fit tolerance, from the overrides when present, times the scale."""
    return float((overrides or {}).get(name, TOLERANCE_DEFAULTS[name])) * scale


def crucial_multiplier(tau: float, theta: float) -> RadialMultiplier:
    """sinc(rho) exp(-(tau rho)^theta)."""
    return RadialMultiplier(
        func=lambda rho: np.sinc(rho / np.pi) * np.exp(-((tau * rho) ** theta)),
        osc_rate=1.0,
        label=f"crucial(tau={tau:g},theta={theta:g})",
    )


@dataclass
class ExperimentOutcome:
    """Sweeps, fits and the overall verdict of one experiment."""

    prediction: Union[Prediction, NoClaim]
    sweeps: Dict[str, Sweep] = field(default_factory=dict)
    fits: Dict[str, FitResult] = field(default_factory=dict)
    passed: bool = False
    sandwich_ok: bool = True
    notes: List[str] = field(default_factory=list)


def _crucial_kinds(pair: PQPair) -> List[str]:
    if pair.p == 1:
        return [OP_EXACT_P1]
    if pair.p == 2 and pair.q == 2:
        return [OP_EXACT_P2Q2]
    return [OP_UPPER_YOUNG, OP_LOWER_TEST]


def crucial_setup(theta: float, n: int, p: float, q: float) -> ExperimentOutcome:
    """An empty outcome with one sweep per norm the pair needs."""
    pair = PQPair(p, q).canonical()
    prediction = predicted_exponent("Crucial", n, pair.p, pair.q, theta)
    outcome = ExperimentOutcome(prediction)
    for kind in _crucial_kinds(pair):
        outcome.sweeps[kind] = Sweep("tau", NormSpec(kind, pair.p, pair.q), "crucial", "full", n)
    return outcome


def crucial_point(
    tau: float, theta: float, n: int, pair: PQPair, quad_spec: Optional[QuadratureSpec] = None
) -> List[NormReport]:
    """Operator-norm reports of the crucial multiplier at one scale."""
    reports = operator_norm_reports(crucial_multiplier(tau, theta), n, pair, tau=tau, quad_spec=quad_spec)
    for report in reports:
        report.meta["tau"] = tau
    return reports


def record_crucial_point(outcome: ExperimentOutcome, tau: float, result: Union[List[NormReport], Exception]) -> None:
    if isinstance(result, Exception):
        logger.warning(f"Crucial point tau={tau:g} failed: {result}")
        for sweep in outcome.sweeps.values():
            sweep.add(tau, None, str(result))
        return
    for report in result:
        outcome.sweeps[report.kind].add(tau, report)
    if len(result) == 2 and not sandwich_holds(result[1], result[0]):
        outcome.sandwich_ok = False


def finish_crucial(
    outcome: ExperimentOutcome,
    window: Optional[Tuple[float, float]] = None,
    tolerance_scale: float = 1.0,
    tolerances: Optional[Dict[str, float]] = None,
) -> ExperimentOutcome:
    """
    Fit the recorded sweeps.

    Raises:
        SweepError: every point of a sweep failed
    """
    for kind, sweep in outcome.sweeps.items():
        if sweep.failed == len(sweep.xs):
            raise SweepError(f"All crucial sweep points failed for {kind}")
    prediction = outcome.prediction
    assert isinstance(prediction, Prediction)

    if prediction.log_law != "none":
        sweep = outcome.sweeps[OP_EXACT_P1]
        fit = fit_loglaw(sweep, prediction.log_law, window, prediction,
                         scale=(2 * math.pi) ** sweep.dim,
                         tol=tolerance("log_coefficient", tolerances, tolerance_scale))
        outcome.fits[OP_EXACT_P1] = fit
        if prediction.coefficient is not None:
            note = f"Log-law slope {fit.slope:.6g} is compared with the coefficient {prediction.coefficient:.6g}"
            if prediction.coefficient_bound is not None:
                note += f"; {prediction.coefficient_bound:.6g} is only an upper bound"
            outcome.notes.append(note)
        outcome.passed = bool(fit.verdict)
        return outcome

    for kind, sweep in outcome.sweeps.items():
        direction = {OP_UPPER_YOUNG: UPPER, OP_LOWER_TEST: LOWER}.get(kind, BOTH)
        tol = tolerance("lower_bound" if kind == OP_LOWER_TEST else "power", tolerances, tolerance_scale)
        fit = fit_power(sweep, window, prediction, tol)
        fit.direction = direction
        outcome.fits[kind] = fit
    outcome.passed = all(f.verdict for f in outcome.fits.values()) and outcome.sandwich_ok
    return outcome


def crucial_experiment(
    theta: float,
    n: int,
    p: float,
    q: float,
    tau_grid: Sequence[float],
    quad_spec: Optional[QuadratureSpec] = None,
    window: Optional[Tuple[float, float]] = None,
    tolerance_scale: float = 1.0,
) -> ExperimentOutcome:
    """
    Operator norms of sinc(|xi|) exp(-(tau|xi|)^theta) as tau -> 0.

    Exact pairs (p = 1 via duality, p = q = 2, and (1,2) through Plancherel)
    are fitted directly; other pairs run the Young upper bound and the
    test-function lower bound and need both slopes within tolerance.
    """
    taus = _check_grid(tau_grid)
    outcome = crucial_setup(theta, n, p, q)
    pair = PQPair(p, q).canonical()
    logger.info(f"Crucial experiment n={n} {pair.label()} theta={theta} over {taus.size} scales")
    for tau in taus:
        try:
            result: Union[List[NormReport], Exception] = crucial_point(float(tau), theta, n, pair, quad_spec)
        except Exception as e:
            result = e
        record_crucial_point(outcome, float(tau), result)
    return finish_crucial(outcome, window, tolerance_scale)


def _theorem_kind(pair: PQPair) -> str:
    if pair.p == 1:
        return OP_EXACT_P1
    if pair.p == 2 and pair.q == 2:
        return OP_EXACT_P2Q2
    return OP_UPPER_YOUNG


def theorem_setup(sym: DissipationSymbol, band: str, p: float, q: float) -> ExperimentOutcome:
    """
    An outcome holding the band prediction and one empty sweep, or a
    passed outcome with a note when no estimate covers the band.
    """
    prediction = band_prediction(sym, band, sym.dim, p, q)
    outcome = ExperimentOutcome(prediction)
    if isinstance(prediction, NoClaim):
        outcome.notes.append(prediction.reason)
        outcome.passed = True
        return outcome
    pair = PQPair(p, q).canonical()
    kind = _theorem_kind(pair)
    outcome.sweeps[kind] = Sweep("t", NormSpec(kind, pair.p, pair.q), sym.name, band, sym.dim)
    return outcome


def finish_theorem(
    outcome: ExperimentOutcome,
    window: Optional[Tuple[float, float]] = None,
    tolerance_scale: float = 1.0,
    tolerances: Optional[Dict[str, float]] = None,
) -> ExperimentOutcome:
    """
    Fit the recorded sweep against the band prediction.

    Raises:
        SweepError: every point failed
    """
    prediction = outcome.prediction
    if isinstance(prediction, NoClaim):
        return outcome
    kind, sweep = next(iter(outcome.sweeps.items()))
    if sweep.failed == len(sweep.xs):
        raise SweepError(f"All {len(sweep.xs)} sweep points failed")

    if prediction.case == "K12":
        fit = fit_semilog(sweep, window)
        fit.prediction = prediction
        fit.verdict = prediction.exponent is not None and prediction.exponent < 0 and fit.slope <= prediction.exponent
    elif prediction.log_law != "none":
        fit = fit_loglaw(sweep, prediction.log_law, window, prediction,
                         tol=tolerance("log_coefficient", tolerances, tolerance_scale))
    else:
        fit = fit_power(sweep, window, prediction, tolerance("power", tolerances, tolerance_scale),
                        BOTH if kind != OP_UPPER_YOUNG else UPPER)
    outcome.fits[kind] = fit
    outcome.passed = bool(fit.verdict)
    return outcome


def theorem_experiment(
    sym: DissipationSymbol,
    band: str,
    p: float,
    q: float,
    t_grid: Sequence[float],
    quad_spec: Optional[QuadratureSpec] = None,
    window: Optional[Tuple[float, float]] = None,
    tolerance_scale: float = 1.0,
    transform: str = "hankel",
    invert: Optional[Inverter] = None,
) -> ExperimentOutcome:
    """Sweep one band of a symbol's kernel and check it against its band prediction."""
    outcome = theorem_setup(sym, band, p, q)
    if isinstance(outcome.prediction, NoClaim):
        return outcome
    kind, sweep = next(iter(outcome.sweeps.items()))
    outcome.sweeps[kind] = sweep_norms(
        band_kernel(sym, band), sweep.spec, t_grid, transform, quad_spec, invert=invert
    )
    return finish_theorem(outcome, window, tolerance_scale)


def k12_exponential_check(
    sym: DissipationSymbol,
    p: float,
    q: float,
    t_grid: Sequence[float],
    quad_spec: Optional[QuadratureSpec] = None,
) -> FitResult:
    """
    Semi-log fit of the intermediate-frequency kernel norm.

    Passes when c > 0 and the fitted rate is at least c/2; the undamped
    control symbol has c = 0 and fails.
    """
    c = mid_band_constant(sym)
    prediction = predicted_exponent("K12", sym.dim, p, q, sym.theta0, c=max(c, 0.0))
    kernel = band_kernel(sym, "mid")
    pair = PQPair(p, q).canonical()
    kind = OP_EXACT_P1 if pair.p == 1 else (OP_EXACT_P2Q2 if pair.p == 2 and pair.q == 2 else OP_UPPER_YOUNG)
    xs = np.asarray(t_grid, dtype=float)
    sweep = Sweep("t", NormSpec(kind, pair.p, pair.q), sym.name, "mid", sym.dim)
    for t in xs:
        try:
            sweep.add(t, sweep_point(kernel, sweep.spec, float(t), quad_spec=quad_spec))
        except Exception as e:
            logger.warning(f"K12 point t={t:g} failed: {e}")
            sweep.add(t, None, str(e))
    fit = fit_semilog(sweep)
    fit.prediction = prediction
    fit.verdict = c > 0 and fit.slope <= -c / 2
    logger.info(f"K12 check {sym.name}: slope {fit.slope:.4g}, bound {-c / 2:.4g}, verdict {fit.verdict}")
    return fit


def diffusion_multiplier(sym: DissipationSymbol, t: float, eta: float = 0.0, band: str = "full") -> RadialMultiplier:
    """exp(-t a(|xi|)) |xi|^eta, optionally band-limited."""
    loc = Localizer.for_symbol(sym)

    def func(rho: np.ndarray) -> np.ndarray:
        values = np.exp(-t * sym.radial(rho)) * rho**eta
        return values if band == "full" else values * loc.weight(band, rho)

    return RadialMultiplier(
        func=func,
        breakpoints=loc.breakpoints(band),
        support=loc.support(band),
        label=f"exp(-t a)|xi|^{eta:g}@t={t:g}",
    )


def lemma_exp_check(
    sym: DissipationSymbol,
    r: float,
    t_grid: Sequence[float],
    band: str = "full",
    eta: float = 0.0,
    quad_spec: Optional[QuadratureSpec] = None,
    tol: float = 0.05,
) -> FitResult:
    """L^r norm of F^-1(exp(-t a) |xi|^eta) against -(n/theta)(1 - 1/r) - eta/theta."""
    prediction = predicted_exponent("LemmaExp", sym.dim, 1, math.inf, sym.theta0, r=r, eta=eta)
    xs = _check_grid(t_grid)
    values, errors = [], []
    for t in xs:
        mult = diffusion_multiplier(sym, float(t), eta, band)
        profile = hankel_inverse(mult, sym.dim, kernel_r_grid(mult, sym.dim), quad_spec)
        report = lr_norm(profile, r)
        values.append(report.value)
        errors.append(report.quad_error)
    window = (float(xs.min()), float(xs.max()))
    return fit_power((xs, values, errors), window, prediction, tol)


def residual_experiment(
    sym: DissipationSymbol,
    t_grid: Sequence[float],
    order: int = 0,
    margin: float = 0.2,
    quad_spec: Optional[QuadratureSpec] = None,
) -> Tuple[FitResult, FitResult, bool]:
    """
    L^inf slopes of the Taylor main term and of the order-N residual.

    Returns:
        (main-term fit, residual fit, residual slope <= main slope - margin)
    """
    profile = taylor_terms(sym, order)
    loc = profile.loc
    xs = _check_grid(t_grid)
    main, rest = [], []
    for t in xs:
        for target, func in (
            (main, lambda rho, t=t: profile.term(0, t, rho)),
            (rest, lambda rho, t=t: profile.residual(t, rho)),
        ):
            mult = RadialMultiplier(
                func=func, osc_rate=float(t), breakpoints=loc.breakpoints("low"),
                support=loc.support("low"), label=f"taylor@t={t:g}",
            )
            inverse = hankel_inverse(mult, sym.dim, kernel_r_grid(mult, sym.dim), quad_spec)
            target.append(lr_norm(inverse, math.inf))
    window = (float(xs.min()), float(xs.max()))
    main_fit = fit_power((xs, [r.value for r in main], [r.quad_error for r in main]), window)
    rest_fit = fit_power((xs, [r.value for r in rest], [r.quad_error for r in rest]), window)
    dominated = rest_fit.slope <= main_fit.slope - margin
    logger.info(f"Residual slope {rest_fit.slope:.4g} vs main-term slope {main_fit.slope:.4g}")
    return main_fit, rest_fit, dominated
