"""Shared fixtures-in-spirit: named test spectra and closed-form references."""

import math

from subnyq.spectra import ComplexGainProfile, SpectralDensity

SIGMA2 = 1.0


def rect_density(value=1.0, W=0.5):
    return SpectralDensity(((0.0, W, value),))


def rect_noise(gamma=5.0, W=0.5):
    return SpectralDensity(((0.0, W, 1.0 / gamma),))


def bandpass_density():
    # total power 1, support +-(1,2)
    return SpectralDensity(((1.0, 2.0, 0.5),))


def triangular_density(steps=8):
    # stepwise discretization of 1-|f| on (-1,1)
    return SpectralDensity(
        tuple((i / steps, (i + 1) / steps, 1.0 - (i + 0.5) / steps) for i in range(steps))
    )


def zero_density():
    return SpectralDensity(())


def lowpass_filter(cutoff):
    return ComplexGainProfile([(-cutoff, cutoff, 1.0)])


def rect_drf_closed(fs, R, gamma=math.inf, W=0.5):
    """Flat low-pass source through flat noise at SNR gamma, sampled at fs.

    Sub-Nyquist branch continuity-corrected: the distortion floor is the
    sampling MMSE 1 - (fs/2W) * gamma/(1+gamma), which meets the
    super-Nyquist branch at fs = 2W and restores D(R=0) = sigma^2.
    """
    g = 1.0 if gamma == math.inf else gamma / (1.0 + gamma)
    if fs < 2 * W:
        return 1.0 - (fs / (2 * W)) * g * (1.0 - 2.0 ** (-2.0 * R / fs))
    return 1.0 - g * (1.0 - 2.0 ** (-R / W))


def bandpass_drf_closed(fs, R):
    """Unit-power band-pass source on +-(1,2), noiseless, sampled at fs."""
    if fs >= 4:
        return 2.0 ** (-R)
    if fs >= 3:
        return 1.0 - (fs - 2) / 2 * (1 - 2.0 ** (-2 * R / (fs - 2)))
    if fs >= 2:
        return 1.0 - (4 - fs) / 2 * (1 - 2.0 ** (-2 * R / (4 - fs)))
    if fs >= 1.5:
        return 1.0 - (fs - 1) * (1 - 2.0 ** (-R / (fs - 1)))
    if fs >= 4.0 / 3.0:
        return 1.0 - (2 - fs) * (1 - 2.0 ** (-R / (2 - fs)))
    return 1.0 - fs / 2 * (1 - 2.0 ** (-2 * R / fs))


def random_density(rng, max_segments=5, f_hi=2.0, v_hi=2.0):
    """Random nonnegative piecewise-constant density on f >= 0."""
    n = rng.integers(1, max_segments + 1)
    edges = sorted(rng.uniform(0.0, f_hi, size=n + 1))
    segs = []
    for lo, hi in zip(edges, edges[1:]):
        if hi - lo < 1e-3:
            continue
        v = rng.uniform(0.0, v_hi)
        if v > 1e-3:
            segs.append((lo, hi, v))
    if not segs:
        segs = [(0.25, 1.0, 1.0)]
    return SpectralDensity(tuple(segs))
