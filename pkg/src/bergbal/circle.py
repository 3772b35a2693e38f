"""Fourier coefficients on the circle and their entire extension in the
frequency variable.

A smooth function S on the unit circle has coefficients
F(m) = int e^{-i m theta} S dtheta.  Splitting the integral by a partition
of unity subordinate to the two-arc cover

    U1 from I1 = (-3pi/4, 3pi/4),   U2 from I2 = (pi/4, 7pi/4),

and lifting each piece to its interval makes the frequency a free complex
parameter: the lifted integral is entire in xi and restricts to F on the
integers.  Off the integers the value depends on the chosen partition (the
restriction to Z is the invariant content), which the consistency report
demonstrates numerically.
"""
import numpy as np


_I1 = (-3.0 * np.pi / 4.0, 3.0 * np.pi / 4.0)
_I2 = (np.pi / 4.0, 7.0 * np.pi / 4.0)
_MAX_IM = 50.0


class CircleSample:
    """Trigonometric polynomial S(theta) = a0 + sum a_k cos k theta + b_k sin k theta.

    Dense uniform samples are reduced to coefficients by FFT (trigonometric
    interpolation), so periodicity is exact in either construction.
    """

    def __init__(self, cos_coeffs, sin_coeffs=()):
        a = np.atleast_1d(np.asarray(cos_coeffs, dtype=float))
        b = np.atleast_1d(np.asarray(sin_coeffs, dtype=float)) if len(sin_coeffs) \
            else np.zeros(0)
        if a.size == 0:
            raise ValueError("need at least the constant coefficient")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        n = max(a.size, b.size + 1)
        self.cos_coeffs = np.zeros(n)
        self.cos_coeffs[:a.size] = a
        self.sin_coeffs = np.zeros(max(n - 1, 0))
        self.sin_coeffs[:b.size] = b
        self.degree = n - 1

    @classmethod
    def from_samples(cls, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 4:
            raise ValueError("need a 1-d array of at least 4 uniform samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        n = v.size
        c = np.fft.rfft(v) / n
        a = np.concatenate([[c[0].real], 2.0 * c[1:].real])
        b = -2.0 * c[1:].imag
        if n % 2 == 0:
            a[-1] *= 0.5                       # Nyquist mode is shared
        return cls(a, b)

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        out = np.full_like(th, self.cos_coeffs[0])
        for k in range(1, self.degree + 1):
            out = out + self.cos_coeffs[k] * np.cos(k * th)
            if k - 1 < self.sin_coeffs.size:
                out = out + self.sin_coeffs[k - 1] * np.sin(k * th)
        return out

    def coefficient(self, m):
        """Complex Fourier coefficient c_m with S = sum c_m e^{i m theta}."""
        k = abs(int(m))
        if k > self.degree:
            return 0.0 + 0.0j
        if k == 0:
            return complex(self.cos_coeffs[0])
        a = self.cos_coeffs[k]
        b = self.sin_coeffs[k - 1] if k - 1 < self.sin_coeffs.size else 0.0
        c = 0.5 * complex(a, -b)
        return c if m > 0 else np.conj(c)


class PartitionPair:
    """Smooth partition of unity rho1 + rho2 = 1 subordinate to the two-arc
    cover, with supports held strictly inside the arcs by the profile margin."""

    def __init__(self, profile):
        if not 0.02 <= profile <= 0.45:
            raise ValueError(
                "profile margin %.3g outside [0.02, 0.45]: the remaining "
                "overlap is too small to smooth" % profile)
        self.profile = float(profile)
        half = 0.5 * np.pi * profile
        # rho1 = 1 on |theta| <= pi/4 + half, 0 beyond 3pi/4 - half
        self.support1 = (-_I1[1] + half, _I1[1] - half)
        self.support2 = (_I2[0] + half, _I2[1] - half)
        self._quad = None

    @staticmethod
    def _smoothstep(s):
        s = np.clip(s, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            f = np.where(s > 0.0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
            g = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
        return f / (f + g)

    def rho1(self, theta):
        th = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
        u = (np.abs(th) - 0.25 * np.pi) / (0.5 * np.pi)
        a = self.profile
        s = (u - a) / (1.0 - 2.0 * a)
        return 1.0 - self._smoothstep(s)

    def rho2(self, theta):
        return 1.0 - self.rho1(theta)

    def quadrature(self):
        """Panel Gauss-Legendre nodes/weights over the two lifted supports,
        with the cutoff values attached."""
        if self._quad is None:
            xg, wg = np.polynomial.legendre.leggauss(10)
            pieces = []
            for (lo, hi), rho in ((self.support1, self.rho1),
                                  (self.support2, self.rho2)):
                n_panels = max(32, int(np.ceil((hi - lo) / 0.04)))
                edges = np.linspace(lo, hi, n_panels + 1)
                mid = 0.5 * (edges[:-1] + edges[1:])
                hw = 0.5 * (edges[1] - edges[0])
                th = (mid[:, None] + hw * xg[None, :]).ravel()
                w = np.broadcast_to(hw * wg[None, :], (n_panels, xg.size)).ravel()
                pieces.append((th, w * rho(th)))
            self._quad = pieces
        return self._quad


def make_partition(profile=0.15):
    return PartitionPair(profile)


def fourier_coefficient(S, m):
    """int_0^{2pi} e^{-i m theta} S(theta) dtheta, exact coefficient arithmetic."""
    return 2.0 * np.pi * S.coefficient(m)


def entire_extension(S, pair, xi):
    """The lifted Fourier integral at complex frequency xi.

    Entire in xi; equals fourier_coefficient(S, m) at every integer m for any
    valid partition, while values off the integers depend on the partition.
    """
    xi = complex(xi)
    if abs(xi.imag) > _MAX_IM:
        raise ValueError("|Im xi| = %.3g exceeds the bound %.0f (integrand "
                         "grows like e^{|Im xi| 7pi/4})" % (abs(xi.imag), _MAX_IM))
    total = 0.0 + 0.0j
    for th, w in pair.quadrature():
        total += np.sum(w * S(th) * np.exp(-1j * xi * th))
    return total


class ConsistencyReport:
    def __init__(self, m_values, discrepancies, shift_discrepancy,
                 spread_at_half, values_at_half):
        self.m_values = m_values
        self.discrepancies = discrepancies
        self.max_discrepancy = float(np.max(discrepancies))
        self.shift_discrepancy = float(shift_discrepancy)
        self.spread_at_half = float(spread_at_half)
        self.values_at_half = values_at_half
        self.integers_agree = self.max_discrepancy <= 1e-10
        self.shift_invisible = self.shift_discrepancy <= 1e-10


def integer_consistency_report(S, partitions, m_range):
    """Agreement table between the entire extensions and the direct
    coefficients on m_range, the effect of the sin(pi xi) shift at the
    integers, and the spread of the extensions at xi = 1/2."""
    partitions = list(partitions)
    if len(partitions) < 2:
        raise ValueError("need at least two partitions to compare")
    m_values = [int(m) for m in m_range]
    if not m_values:
        raise ValueError("m_range must be non-empty")
    disc = np.zeros((len(partitions), len(m_values)))
    shift = 0.0
    for i, pair in enumerate(partitions):
        for jm, m in enumerate(m_values):
            e = entire_extension(S, pair, m)
            disc[i, jm] = abs(e - fourier_coefficient(S, m))
            shift = max(shift, abs((e + np.sin(np.pi * m)) - e))
    at_half = np.array([entire_extension(S, pair, 0.5) for pair in partitions])
    spread = max(abs(a - b) for a in at_half for b in at_half)
    return ConsistencyReport(m_values, disc, shift, spread, at_half)


def _mean_value_gap(S, pair, xi0, radius=0.5, n_points=24):
    """|F(xi0) - mean of F on the circle of given radius|, a numerical
    holomorphy check (exact mean-value property for entire functions)."""
    angles = 2.0 * np.pi * np.arange(n_points) / n_points
    ring = [entire_extension(S, pair, xi0 + radius * np.exp(1j * t))
            for t in angles]
    return abs(np.mean(ring) - entire_extension(S, pair, xi0))
