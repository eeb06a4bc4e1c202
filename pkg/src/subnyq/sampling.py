"""From spectra to waterfilling inputs.

This module owns everything that depends on the sampler: the scalar
conditional spectrum of the source given single-branch samples, its P x P
matrix generalization for filter banks, the resulting MMSE values, the
construction of maximal aliasing-free sets (which are the supports of the
optimal pre-sampling filters), the sampling-rate lower bound on the MMSE and
the polyphase decomposition used by the distortion lower bound.

Scalar paths are exact: inputs are piecewise-constant, and every grid is
refined by the translate lattice before values are read off, so the curves
returned here are the true piecewise-constant functions, not samples of them.
The matrix path evaluates on a frequency grid, but since the matrix entries
are themselves piecewise-constant the grid is refined by their breakpoints
and the eigenvalue curves come out exact as well.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import HermitianMatrix, hermitian_eig, inv_sqrt_psd
from .spectra import (
    BP_TOL,
    ComplexGainProfile,
    FrequencyInterval,
    FrequencySet,
    SpectralDensity,
    SpectrumError,
    _alias_grid,
    _dedup,
    _pw_aliased,
    _pw_empty,
    _pw_eval,
    _pw_from_density,
    _pw_from_gain,
    _pw_support_radius,
    _Pw,
    _translate_count,
    integrate,
    snr_ratio,
    superlevel_set_of_measure,
)

__all__ = [
    "SamplerSpec",
    "ScalarCurve",
    "EigenCurves",
    "s_tilde_single",
    "mmse_single",
    "build_branch_matrices",
    "eigen_curves_multi",
    "mmse_multi",
    "maximal_af_sets",
    "mmse_optimal",
    "landau_mmse_bound",
    "polyphase_conditional_psd",
]


def _thread_count() -> int:
    env = os.environ.get("SUBNYQ_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class SamplerSpec:
    """Uniform sampler: P filter branches, each sampled at fs/P.

    A branch gain of None stands for the ideal all-pass (identically 1);
    explicit profiles must have bounded support.
    """

    fs: float
    branches: tuple

    def __init__(self, fs: float, branches: Sequence[ComplexGainProfile | None]):
        if fs <= 0:
            raise SpectrumError(f"fs must be positive, got {fs}")
        branches = tuple(branches)
        if len(branches) < 1:
            raise SpectrumError("need at least one branch")
        for b in branches:
            if b is not None and not isinstance(b, ComplexGainProfile):
                raise SpectrumError(f"bad branch filter {b!r}")
        object.__setattr__(self, "fs", float(fs))
        object.__setattr__(self, "branches", branches)

    @property
    def P(self) -> int:
        return len(self.branches)


@dataclass(frozen=True)
class ScalarCurve:
    """Piecewise-constant nonnegative curve on the interval (bp[0], bp[-1])."""

    bp: np.ndarray
    vals: np.ndarray

    def widths(self) -> np.ndarray:
        return np.diff(self.bp)

    def pieces(self) -> tuple[np.ndarray, np.ndarray]:
        return self.widths(), self.vals

    def integral(self) -> float:
        return float(np.sum(self.widths() * self.vals))

    def max_value(self) -> float:
        return float(np.max(self.vals)) if self.vals.size else 0.0

    def evaluate(self, f: float) -> float:
        return float(_pw_eval(_Pw(self.bp, self.vals), np.array([f]))[0])


@dataclass(frozen=True)
class EigenCurves:
    """Per-frequency ascending eigenvalue curves on a common grid.

    lam has shape (n_cells, P); row i holds the eigenvalues on the cell
    (bp[i], bp[i+1]) sorted ascending.
    """

    bp: np.ndarray
    lam: np.ndarray

    @property
    def P(self) -> int:
        return self.lam.shape[1]

    def widths(self) -> np.ndarray:
        return np.diff(self.bp)

    def pieces(self) -> tuple[np.ndarray, np.ndarray]:
        w = np.repeat(self.widths(), self.lam.shape[1])
        return w, self.lam.ravel()

    def trace_integral(self) -> float:
        return float(np.sum(self.widths() * self.lam.sum(axis=1)))


def _gain_abs2(H: ComplexGainProfile | None) -> _Pw | None:
    if H is None:
        return None
    pw = _pw_from_gain(H)
    return _Pw(pw.bp, np.abs(pw.vals) ** 2)


def _mul_opt(pw: _Pw, weight: _Pw | None) -> _Pw:
    """pw * weight with weight=None meaning identically 1."""
    if weight is None:
        return pw
    bp = _dedup(np.concatenate([pw.bp, weight.bp]))
    mids = 0.5 * (bp[:-1] + bp[1:])
    return _Pw(bp, _pw_eval(pw, mids) * _pw_eval(weight, mids))


def _single_branch_pws(Sx, Sn, H):
    """Numerator Sx^2|H|^2 and denominator (Sx+Sn)|H|^2 as full-line pieces."""
    px = _pw_from_density(Sx)
    pn = _pw_from_density(Sn)
    bp = _dedup(np.concatenate([px.bp, pn.bp]))
    mids = 0.5 * (bp[:-1] + bp[1:])
    x = _pw_eval(px, mids)
    z = x + _pw_eval(pn, mids)
    w = _gain_abs2(H)
    num = _mul_opt(_Pw(bp, x * x), w)
    den = _mul_opt(_Pw(bp, z), w)
    return num, den


def _safe_ratio(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    nz = b > 0
    out[nz] = a[nz] / b[nz]
    return out


def s_tilde_single(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    H: ComplexGainProfile | None,
    fs: float,
) -> ScalarCurve:
    """Conditional spectrum of the source given the samples, on (-fs/2, fs/2).

    value(f) = sum_k Sx^2|H|^2 (f - fs k) / sum_k (Sx+Sn)|H|^2 (f - fs k),
    with 0/0 read as 0.  Only |H|^2 enters, so the phase of the pre-sampling
    filter is irrelevant by construction.
    """
    if fs <= 0:
        raise SpectrumError(f"fs must be positive, got {fs}")
    num, den = _single_branch_pws(Sx, Sn, H)
    lo, hi = -fs / 2.0, fs / 2.0
    bp = _dedup(np.concatenate([_alias_grid(num, fs, lo, hi),
                                _alias_grid(den, fs, lo, hi)]))
    mids = 0.5 * (bp[:-1] + bp[1:])
    kmax = max(_translate_count(num, fs, hi), _translate_count(den, fs, hi))
    a = np.zeros_like(mids)
    b = np.zeros_like(mids)
    for k in range(-kmax, kmax + 1):
        shifted = mids - fs * k
        a += _pw_eval(num, shifted)
        b += _pw_eval(den, shifted)
    vals = _safe_ratio(a, b)

    # structural sanity: the curve can never exceed the best single translate
    # of the per-frequency ratio Sx^2/(Sx+Sn) restricted to the filter support
    ratio = _Pw(num.bp, _safe_ratio(
        _pw_eval(num, 0.5 * (num.bp[:-1] + num.bp[1:])),
        _pw_eval(den, 0.5 * (den.bp[:-1] + den.bp[1:]))))
    sup = np.zeros_like(mids)
    for k in range(-kmax, kmax + 1):
        sup = np.maximum(sup, _pw_eval(ratio, mids - fs * k))
    if np.any(vals > sup + 1e-9 * max(1.0, float(sup.max(initial=0.0)))):
        raise SpectrumError("conditional spectrum exceeded its translate bound")
    return ScalarCurve(bp, vals)


def mmse_single(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    H: ComplexGainProfile | None,
    fs: float,
) -> float:
    """MMSE of estimating the source from single-branch samples at rate fs."""
    sigma2 = Sx.total_power()
    curve = s_tilde_single(Sx, Sn, H, fs)
    value = sigma2 - curve.integral()

    # cross-check against the unfolded form: integrate over the whole line
    # Sx(f) * (1 - Sx|H|^2(f) / aliased denominator at f)
    num, den = _single_branch_pws(Sx, Sn, H)
    px = _pw_from_density(Sx)
    radius = max(_pw_support_radius(px), _pw_support_radius(den))
    if radius > 0:
        den_per = _pw_aliased(den, fs, -radius, radius)
        bp = _dedup(np.concatenate([px.bp, num.bp, den_per.bp]))
        mids = 0.5 * (bp[:-1] + bp[1:])
        x = _pw_eval(px, mids)
        frac = _safe_ratio(_pw_eval(num, mids), _pw_eval(den_per, mids))
        alt = float(np.sum(np.diff(bp) * x) - np.sum(np.diff(bp) * frac))
        if abs(alt - value) > 1e-10 * max(1.0, sigma2):
            raise SpectrumError(
                f"mmse cross-check failed: folded {value} vs unfolded {alt}"
            )
    return value


def _pair_pws(Sx, Sn, spec: SamplerSpec):
    """For each branch pair (i,j): conj(H_i)H_j times (Sx+Sn) and times Sx^2."""
    px = _pw_from_density(Sx)
    pn = _pw_from_density(Sn)
    bp0 = _dedup(np.concatenate([px.bp, pn.bp]))
    m0 = 0.5 * (bp0[:-1] + bp0[1:])
    x = _pw_eval(px, m0)
    z = x + _pw_eval(pn, m0)
    base_z = _Pw(bp0, z.astype(complex))
    base_k = _Pw(bp0, (x * x).astype(complex))
    gains = [None if b is None else _pw_from_gain(b) for b in spec.branches]
    P = spec.P
    pair_z: list[list[_Pw]] = [[None] * P for _ in range(P)]
    pair_k: list[list[_Pw]] = [[None] * P for _ in range(P)]
    for i in range(P):
        for j in range(i, P):
            gi, gj = gains[i], gains[j]
            if gi is None and gj is None:
                pz, pk = base_z, base_k
            else:
                parts = [base_z.bp] + [g.bp for g in (gi, gj) if g is not None]
                bp = _dedup(np.concatenate(parts))
                mids = 0.5 * (bp[:-1] + bp[1:])
                w = np.ones_like(mids, dtype=complex)
                if gi is not None:
                    w = w * np.conj(_pw_eval(gi, mids))
                if gj is not None:
                    w = w * _pw_eval(gj, mids)
                pz = _Pw(bp, _pw_eval(base_z, mids) * w)
                pk = _Pw(bp, _pw_eval(base_k, mids) * w)
            pair_z[i][j] = pz
            pair_k[i][j] = pk
    return pair_z, pair_k


def _alias_eval(pw: _Pw, pts: np.ndarray, fs: float, kmax: int) -> np.ndarray:
    out = np.zeros(pts.shape, dtype=pw.vals.dtype)
    for k in range(-kmax, kmax + 1):
        out += _pw_eval(pw, pts - fs * k)
    return out


def _matrices_on_points(Sx, Sn, spec, pts: np.ndarray):
    """Aliased S_Y and K matrices stacked over the given frequencies."""
    pair_z, pair_k = _pair_pws(Sx, Sn, spec)
    P = spec.P
    n = len(pts)
    kmax = 1
    for i in range(P):
        for j in range(i, P):
            kmax = max(kmax, _translate_count(pair_z[i][j], spec.fs, spec.fs / 2.0))
    sy = np.zeros((n, P, P), dtype=complex)
    kk = np.zeros((n, P, P), dtype=complex)
    for i in range(P):
        for j in range(i, P):
            az = _alias_eval(pair_z[i][j], pts, spec.fs, kmax)
            ak = _alias_eval(pair_k[i][j], pts, spec.fs, kmax)
            sy[:, i, j] = az
            kk[:, i, j] = ak
            if i != j:
                sy[:, j, i] = np.conj(az)
                kk[:, j, i] = np.conj(ak)
    return sy, kk


def build_branch_matrices(
    Sx: SpectralDensity, Sn: SpectralDensity, spec: SamplerSpec, f: float
) -> tuple[HermitianMatrix, HermitianMatrix]:
    """Observation matrix S_Y(f) and weight matrix K(f) for the filter bank.

    Entry (i,j) of S_Y is the fs-aliased sum of (Sx+Sn) conj(H_i) H_j, and of
    K the same with Sx^2 in place of (Sx+Sn).
    """
    sy, kk = _matrices_on_points(Sx, Sn, spec, np.array([float(f)]))
    my, mk = HermitianMatrix(sy[0]), HermitianMatrix(kk[0])
    for m in (my, mk):
        w = hermitian_eig(m).eigenvalues
        if w.size and w[0] < -1e-10 * max(1.0, float(w[-1])):
            raise SpectrumError(f"branch matrix not PSD: min eigenvalue {w[0]}")
    return my, mk


def _grid_for_spec(Sx, Sn, spec: SamplerSpec, N_grid: int) -> np.ndarray:
    """Cell edges on (-fs/2, fs/2): uniform grid refined by exact breakpoints."""
    lo, hi = -spec.fs / 2.0, spec.fs / 2.0
    pts = [np.linspace(lo, hi, N_grid + 1)]
    pair_z, pair_k = _pair_pws(Sx, Sn, spec)
    for row in (pair_z, pair_k):
        for i in range(spec.P):
            for j in range(i, spec.P):
                pts.append(_alias_grid(row[i][j], spec.fs, lo, hi))
    return _dedup(np.concatenate(pts))


def eigen_curves_multi(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    spec: SamplerSpec,
    N_grid: int = 2048,
) -> EigenCurves:
    """Eigenvalue curves of the normalized conditional matrix spectrum.

    At each grid cell midpoint: lambda(S_Y^{-1/2} K S_Y^{-1/2}), ascending.
    Cells are refined by the exact matrix breakpoints, and midpoints of
    different cells are independent, so the work is mapped over a thread pool.
    """
    if N_grid < 16:
        raise SpectrumError(f"N_grid must be >= 16, got {N_grid}")
    bp = _grid_for_spec(Sx, Sn, spec, N_grid)
    mids = 0.5 * (bp[:-1] + bp[1:])
    sy, kk = _matrices_on_points(Sx, Sn, spec, mids)
    P = spec.P

    def eig_block(rng):
        out = np.empty((len(rng), P))
        for row, idx in enumerate(rng):
            t = inv_sqrt_psd(HermitianMatrix(sy[idx])).entries
            m = t @ kk[idx] @ t
            out[row] = hermitian_eig(HermitianMatrix(m)).eigenvalues
        return out

    chunks = np.array_split(np.arange(len(mids)), _thread_count())
    chunks = [c for c in chunks if len(c)]
    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        blocks = list(pool.map(eig_block, chunks))
    lam = np.vstack(blocks) if blocks else np.empty((0, P))

    lam_max = float(lam.max(initial=0.0))
    if lam.size and float(lam.min()) < -1e-10 * max(1.0, lam_max):
        raise SpectrumError(f"negative eigenvalue {lam.min()} in conditional spectrum")
    lam = np.maximum(lam, 0.0)
    curves = EigenCurves(bp, lam)
    sigma2 = Sx.total_power()
    if curves.trace_integral() > sigma2 + 1e-9 * max(1.0, sigma2):
        raise SpectrumError("estimator power exceeds source power")
    return curves


def mmse_multi(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    spec: SamplerSpec,
    N_grid: int = 2048,
) -> float:
    curves = eigen_curves_multi(Sx, Sn, spec, N_grid)
    val = Sx.total_power() - curves.trace_integral()
    if val < -1e-9 * max(1.0, Sx.total_power()):
        raise SpectrumError(f"negative mmse {val}")
    return max(val, 0.0)


def maximal_af_sets(
    ratio: SpectralDensity, fs: float, P: int = 1
) -> list[FrequencySet]:
    """Supports of the optimal filter bank: P disjoint aliasing-free sets.

    The base cell [-fs/(2P), fs/(2P)) is refined by every translate of the
    ratio's breakpoints; within each refined cell the translates by fs/P are
    ranked by ratio value (ties: smaller |f|, then negative side first) and
    the p-th best goes to set p.  Only the f >= 0 half of the cell is scanned;
    selections are mirrored, which keeps each set symmetric so an indicator
    filter on it has a real impulse response.
    """
    if fs <= 0 or P < 1:
        raise SpectrumError(f"need fs > 0 and P >= 1, got fs={fs}, P={P}")
    d = fs / P
    pw = _pw_from_density(ratio)
    bp = _alias_grid(pw, d, 0.0, d / 2.0)
    kmax = _translate_count(pw, d, d / 2.0)
    buckets: list[list[tuple[float, float]]] = [[] for _ in range(P)]
    for a, b in zip(bp[:-1], bp[1:]):
        m = 0.5 * (a + b)
        cands = []
        for k in range(-kmax, kmax + 1):
            v = float(_pw_eval(pw, np.array([m + k * d]))[0])
            if v > 0:
                c = m + k * d
                cands.append((-v, abs(c), 0 if c < 0 else 1, k))
        cands.sort()
        for p, (_, _, _, k) in enumerate(cands[:P]):
            buckets[p].append((a + k * d, b + k * d))
            buckets[p].append((-(b + k * d), -(a + k * d)))
    return [FrequencySet(iv for iv in bucket) for bucket in buckets]


def mmse_optimal(
    Sx: SpectralDensity, Sn: SpectralDensity, fs: float, P: int = 1
) -> tuple[float, list[FrequencySet]]:
    """Minimal sampling MMSE over all P-branch filter banks, plus the supports."""
    ratio = snr_ratio(Sx, Sn)
    sets = maximal_af_sets(ratio, fs, P)
    captured = sum(integrate(ratio, F) for F in sets)
    return Sx.total_power() - captured, sets


def landau_mmse_bound(Sx: SpectralDensity, Sn: SpectralDensity, fs: float) -> float:
    """Lower bound on any sampling MMSE at total rate fs (any P, any filters)."""
    if fs <= 0:
        raise SpectrumError(f"fs must be positive, got {fs}")
    ratio = snr_ratio(Sx, Sn)
    _, captured = superlevel_set_of_measure(ratio, fs)
    return Sx.total_power() - captured


def polyphase_conditional_psd(
    Sx: SpectralDensity,
    Sn: SpectralDensity,
    H: ComplexGainProfile | None,
    fs: float,
    delta: float,
    k_max: int | None = None,
) -> ScalarCurve:
    """Spectrum of the offset-delta polyphase component given the samples.

    Returned on normalized frequency phi in (-1/2, 1/2) in per-sample power
    units: averaging over a full cycle of delta gives fs times the
    s_tilde_single curve evaluated at fs*phi.
    The double translate sum in the numerator collapses to a squared modulus
    of a single phased sum.
    """
    if fs <= 0:
        raise SpectrumError(f"fs must be positive, got {fs}")
    px = _pw_from_density(Sx)
    pn = _pw_from_density(Sn)
    bp0 = _dedup(np.concatenate([px.bp, pn.bp]))
    m0 = 0.5 * (bp0[:-1] + bp0[1:])
    x = _pw_eval(px, m0)
    z = x + _pw_eval(pn, m0)
    hw = None if H is None else _pw_from_gain(H)
    if hw is None:
        sxz = _Pw(bp0, x.astype(complex))
        den = _Pw(bp0, z)
    else:
        bp = _dedup(np.concatenate([bp0, hw.bp]))
        mids = 0.5 * (bp[:-1] + bp[1:])
        g = _pw_eval(hw, mids)
        sxz = _Pw(bp, _pw_eval(_Pw(bp0, x.astype(complex)), mids) * np.conj(g))
        den = _Pw(bp, np.real(_pw_eval(_Pw(bp0, z.astype(complex)), mids)) * np.abs(g) ** 2)
    lo, hi = -fs / 2.0, fs / 2.0
    grid = _dedup(np.concatenate([_alias_grid(sxz, fs, lo, hi),
                                  _alias_grid(den, fs, lo, hi)]))
    mids = 0.5 * (grid[:-1] + grid[1:])
    if k_max is None:
        k_max = max(_translate_count(sxz, fs, hi), _translate_count(den, fs, hi))
    numer = np.zeros_like(mids, dtype=complex)
    denom = np.zeros_like(mids)
    for k in range(-k_max, k_max + 1):
        shifted = mids - fs * k
        numer += _pw_eval(sxz, shifted) * np.exp(2j * np.pi * k * delta)
        denom += _pw_eval(den, shifted)
    vals = fs * _safe_ratio(np.abs(numer) ** 2, denom)
    return ScalarCurve(grid / fs, vals)
