"""Parametric reverse waterfilling and the distortion-rate operations.

Every distortion-rate quantity in the package reduces to the same parametric
pair on a piecewise-constant curve (or a family of eigenvalue curves):

    R(theta) = 1/2 * sum_p int log2+ [lambda_p(f) / theta] df
    D(theta) = mmse + sum_p int min{lambda_p(f), theta} df

The solver inverts R(theta) by bisection.  Logarithms are base 2 throughout,
so rates are in bits and the flat-spectrum closed forms come out exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import (
    EigenCurves,
    SamplerSpec,
    ScalarCurve,
    eigen_curves_multi,
    maximal_af_sets,
    mmse_single,
    polyphase_conditional_psd,
    s_tilde_single,
)
from .spectra import (
    ComplexGainProfile,
    FrequencySet,
    SpectralDensity,
    SpectrumError,
    _dedup,
    _pw_aliased,
    _pw_eval,
    _pw_from_density,
    integrate,
    snr_ratio,
    superlevel_set_of_measure,
)

__all__ = [
    "WaterfillError",
    "UnattainableRateError",
    "ConvergenceError",
    "RateSpec",
    "WaterfillSolution",
    "rate_of_theta",
    "distortion_of_theta",
    "solve_theta_for_rate",
    "idrf_stationary",
    "idrf_discrete",
    "idrf_vector",
    "drf_sampled_single",
    "drf_sampled_multi",
    "drf_sampled_optimal",
    "d_dagger",
    "d_star_lower_bound",
    "polyphase_lower_bound",
    "drf_of_estimator",
]

BITS_PER_TIME = "bits-per-time-unit"
BITS_PER_SAMPLE = "bits-per-sample"


class WaterfillError(ValueError):
    pass


class UnattainableRateError(WaterfillError):
    """Positive rate requested from an identically-zero spectrum."""


class ConvergenceError(WaterfillError):
    """Bisection failed to bracket the requested rate."""


@dataclass(frozen=True)
class RateSpec:
    value: float
    unit: str = BITS_PER_TIME

    def __post_init__(self):
        if self.value < 0:
            raise WaterfillError(f"rate must be >= 0, got {self.value}")
        if self.unit not in (BITS_PER_TIME, BITS_PER_SAMPLE):
            raise WaterfillError(f"unknown rate unit {self.unit!r}")

    def per_time(self, fs: float) -> float:
        if self.unit == BITS_PER_SAMPLE:
            return self.value * fs
        return self.value


def _as_rate(R, fs: float | None = None) -> float:
    if isinstance(R, RateSpec):
        if R.unit == BITS_PER_SAMPLE:
            if fs is None:
                raise WaterfillError("bits-per-sample rate needs a sampling frequency")
            return R.per_time(fs)
        return R.value
    R = float(R)
    if R < 0:
        raise WaterfillError(f"rate must be >= 0, got {R}")
    return R


@dataclass(frozen=True)
class WaterfillSolution:
    theta: float
    rate: float
    distortion: float
    mmse_part: float
    lossy_part: float

    def __post_init__(self):
        gap = abs(self.distortion - self.mmse_part - self.lossy_part)
        if gap > 1e-10 * max(1.0, abs(self.distortion)):
            raise WaterfillError(f"distortion decomposition off by {gap}")


def _pieces(curves) -> tuple[np.ndarray, np.ndarray]:
    """Flatten any supported curve description into (widths, values)."""
    if isinstance(curves, (ScalarCurve, EigenCurves)):
        return curves.pieces()
    w, v = curves
    return np.asarray(w, dtype=float), np.asarray(v, dtype=float)


def rate_of_theta(curves, theta: float) -> float:
    """Bits per unit width: 1/2 * sum w * log2+(v / theta)."""
    if theta <= 0:
        raise WaterfillError(f"theta must be positive, got {theta}")
    w, v = _pieces(curves)
    above = v > theta
    if not np.any(above):
        return 0.0
    return float(0.5 * np.sum(w[above] * np.log2(v[above] / theta)))


def distortion_of_theta(sigma2: float, curves, theta: float) -> WaterfillSolution:
    if theta < 0:
        raise WaterfillError(f"theta must be >= 0, got {theta}")
    w, v = _pieces(curves)
    kept = float(np.sum(w * np.maximum(v - theta, 0.0)))
    lossy = float(np.sum(w * np.minimum(v, theta)))
    mmse = sigma2 - float(np.sum(w * v))
    rate = rate_of_theta(curves, theta) if theta > 0 else math.inf
    return WaterfillSolution(
        theta=theta,
        rate=rate,
        distortion=sigma2 - kept,
        mmse_part=mmse,
        lossy_part=lossy,
    )


def solve_theta_for_rate(curves, R, fs: float | None = None) -> float:
    """Water level theta with rate_of_theta(theta) = R, by bisection.

    R = 0 returns the curve maximum (rate exactly 0 there).  When the rate
    function has a flat stretch at the requested R, any theta on the stretch
    may come back; the distortion is identical for all of them.
    """
    R = _as_rate(R, fs)
    w, v = _pieces(curves)
    mask = w > 0
    vmax = float(np.max(v[mask])) if np.any(mask) else 0.0
    if vmax <= 0:
        if R > 0:
            raise UnattainableRateError(
                "curve is identically zero; no positive rate is attainable"
            )
        return 0.0
    if R == 0:
        return vmax
    tol = max(1e-10, 1e-9 * R)
    lo = vmax
    for _ in range(4096):
        lo *= 0.5
        if rate_of_theta(curves, lo) >= R:
            break
    else:
        raise ConvergenceError("could not bracket the requested rate from below")
    hi = 2.0 * lo if lo < vmax / 2 else vmax
    hi = min(max(hi, lo), vmax)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = rate_of_theta(curves, mid)
        if abs(r - R) <= tol:
            return mid
        if r > R:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"bisection did not reach rate {R} within 200 iterations")


def _waterfill(sigma2: float, curves, R, fs: float | None = None) -> WaterfillSolution:
    theta = solve_theta_for_rate(curves, R, fs)
    if theta == 0.0:
        # zero curve at zero rate
        return WaterfillSolution(0.0, 0.0, sigma2, sigma2, 0.0)
    return distortion_of_theta(sigma2, curves, theta)


def _density_pieces(S: SpectralDensity, F: FrequencySet | None = None):
    """(width, value) pieces of S, optionally restricted to F (mirror included)."""
    widths, vals = [], []
    for iv, v in S.segments:
        for half in ((iv.lo, iv.hi), (-iv.hi, -iv.lo)):
            if F is None:
                widths.append(half[1] - half[0])
                vals.append(v)
                continue
            for g in F.intervals:
                lo, hi = max(half[0], g.lo), min(half[1], g.hi)
                if hi > lo:
                    widths.append(hi - lo)
                    vals.append(v)
    if not widths:
        return np.array([1.0]), np.array([0.0])
    return np.array(widths), np.array(vals)


def idrf_stationary(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    H: ComplexGainProfile | None,
    R,
) -> WaterfillSolution:
    """Distortion-rate of the source given the full filtered noisy waveform.

    This is the no-sampling baseline: waterfilling over the conditional
    spectrum Sx^2 |H|^2 / ((Sx+Sn)|H|^2) on the whole line.
    """
    sigma2 = Sx.total_power()
    ratio = snr_ratio(Sx, Sn)
    w, v = _density_pieces(ratio, None if H is None else H.support())
    return _waterfill(sigma2, (w, v), R)


def idrf_discrete(curve: ScalarCurve, sigma2: float, rate_per_sample) -> WaterfillSolution:
    """Discrete-time counterpart on a 1-periodic conditional spectrum.

    curve lives on normalized frequency (-1/2, 1/2); the rate is bits per
    sample and the returned solution's rate field is in the same unit.
    """
    return _waterfill(sigma2, curve, rate_per_sample)


def idrf_vector(curves, M: int, rate_per_symbol, mmse: float) -> WaterfillSolution:
    """Vector source seen through a vector observation: eigenvalue waterfill.

    Rate is counted over all M coordinates; the distortion is averaged, so
    only the lossy term picks up the 1/M.
    """
    if M < 1:
        raise WaterfillError(f"M must be >= 1, got {M}")
    theta = solve_theta_for_rate(curves, rate_per_symbol)
    if theta == 0.0:
        return WaterfillSolution(0.0, 0.0, mmse, mmse, 0.0)
    w, v = _pieces(curves)
    lossy = float(np.sum(w * np.minimum(v, theta))) / M
    rate = rate_of_theta(curves, theta)
    return WaterfillSolution(theta, rate, mmse + lossy, mmse, lossy)


def drf_sampled_single(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    H: ComplexGainProfile | None,
    fs: float,
    R,
) -> WaterfillSolution:
    """Minimal distortion at rate R bits/time from single-branch samples at fs."""
    sigma2 = Sx.total_power()
    curve = s_tilde_single(Sx, Sn, H, fs)
    return _waterfill(sigma2, curve, R, fs)


def drf_sampled_multi(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    spec: SamplerSpec,
    R,
    N_grid: int = 2048,
) -> WaterfillSolution:
    """Same as drf_sampled_single but for a P-branch filter bank."""
    sigma2 = Sx.total_power()
    curves = eigen_curves_multi(Sx, Sn, spec, N_grid)
    return _waterfill(sigma2, curves, R, spec.fs)


def drf_sampled_optimal(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    fs: float,
    P: int,
    R,
) -> WaterfillSolution:
    """Distortion with the best P-branch filter bank at total rate fs.

    The optimal filters are indicators of the maximal aliasing-free sets of
    the SNR ratio, so the waterfill runs over the ratio restricted to their
    union; no eigen grid is needed.
    """
    sigma2 = Sx.total_power()
    ratio = snr_ratio(Sx, Sn)
    sets = maximal_af_sets(ratio, fs, P)
    widths, vals = [], []
    for F in sets:
        w, v = _density_pieces(ratio, F)
        widths.append(w)
        vals.append(v)
    pieces = (np.concatenate(widths), np.concatenate(vals))
    return _waterfill(sigma2, pieces, R, fs)


def d_dagger(Sx: SpectralDensity, Sn: SpectralDensity, fs: float, R) -> WaterfillSolution:
    """Limit of drf_sampled_optimal as the branch count grows.

    Waterfills the SNR ratio over its best superlevel set of measure fs; a
    lower bound on every finite-P optimum.
    """
    if fs <= 0:
        raise SpectrumError(f"fs must be positive, got {fs}")
    sigma2 = Sx.total_power()
    ratio = snr_ratio(Sx, Sn)
    F, _ = superlevel_set_of_measure(ratio, fs)
    return _waterfill(sigma2, _density_pieces(ratio, F), R, fs)


def d_star_lower_bound(Sx: SpectralDensity, Sn: SpectralDensity, fs: float, R) -> float:
    """Waterfill over the per-frequency best translate of the SNR ratio.

    No single-branch sampler at fs can do better than this, whatever the
    filter; the bound is met by the indicator of the maximal aliasing-free
    set.
    """
    sigma2 = Sx.total_power()
    ratio_pw = _pw_from_density(snr_ratio(Sx, Sn))
    sup = _pw_aliased(ratio_pw, fs, -fs / 2.0, fs / 2.0, op="sup")
    curve = ScalarCurve(sup.bp, np.real(sup.vals))
    return _waterfill(sigma2, curve, R, fs).distortion


def polyphase_lower_bound(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    H: ComplexGainProfile | None,
    fs: float,
    R,
    N_delta: int = 64,
) -> float:
    """Lower bound on drf_sampled_single via the polyphase decomposition.

    Each in-period offset delta gets its own waterfill at the per-sample rate
    R/fs over its conditional polyphase spectrum; the lossy terms are
    averaged over a uniform delta grid and added to the sampling MMSE.
    Equality holds above the Nyquist rate, where the polyphase spectra
    coincide.
    """
    if N_delta < 8:
        raise WaterfillError(f"N_delta must be >= 8, got {N_delta}")
    R = _as_rate(R, fs)
    mmse = mmse_single(Sx, Sn, H, fs)
    r_bar = R / fs
    lossy = 0.0
    for j in range(N_delta):
        curve = polyphase_conditional_psd(Sx, Sn, H, fs, j / N_delta)
        if curve.max_value() <= 0:
            continue
        theta = solve_theta_for_rate(curve, r_bar)
        w, v = curve.pieces()
        lossy += float(np.sum(w * np.minimum(v, theta)))
    return mmse + lossy / N_delta


def drf_of_estimator(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    H: ComplexGainProfile | None,
    fs: float,
    R,
) -> WaterfillSolution:
    """Distortion-rate of the optimal sampling estimator process itself.

    The estimator has spectrum s_tilde_single and no estimation-error floor,
    so the solution is pure lossy part; adding mmse_single reconstitutes
    drf_sampled_single at the same rate (separation).
    """
    curve = s_tilde_single(Sx, Sn, H, fs)
    sigma2_est = curve.integral()
    R = _as_rate(R, fs)
    if curve.max_value() <= 0:
        if R > 0:
            raise UnattainableRateError("estimator process is identically zero")
        return WaterfillSolution(0.0, 0.0, 0.0, 0.0, 0.0)
    theta = solve_theta_for_rate(curve, R)
    w, v = curve.pieces()
    lossy = float(np.sum(w * np.minimum(v, theta)))
    return WaterfillSolution(theta, rate_of_theta(curve, theta), lossy, 0.0, lossy)
