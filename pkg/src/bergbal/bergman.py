"""Gram matrices, Bergman kernels, the expansion fit, and weighted variants.

The section basis of O(m) is z^j, j = 0..m, with pointwise norm
e^{jt - m Phi(t)} in the log coordinate.  Circle invariance makes the Gram
matrix diagonal:

    G_jj = int e^{jt - m Phi(t)} Phi''(t) dt,

and the kernel (with the dimension/level normalization of degree one) is

    B_m(t) = (1/m) sum_j e^{jt - m Phi(t)} / G_jj.

Torus reweighting scales each monomial line by e^{j y} (the lift is fixed so
z^j has weight j; a different lift multiplies everything by a global factor).
"""
import numpy as np
from scipy.special import expit, betaln, betainc

from .model import (GridFunction, grid_function, integrate, scalar_curvature,
                    laplacian_apply, _fs_pieces, fs_derivative)

MAX_LEVEL = 200


class WindowError(ValueError):
    """Truncation window too small for the requested level."""


class DegenerateFitError(ValueError):
    """Expansion fit with an (numerically) rank-deficient design."""


class GramDiagonal:
    """Diagonal Gram matrix of the monomial basis at level m.

    Off-diagonal entries vanish identically by circle invariance and are
    never stored.
    """

    def __init__(self, level, entries, potential):
        self.level = int(level)
        self.entries = np.asarray(entries, dtype=float)
        self.potential = potential
        if self.entries.size != self.level + 1:
            raise ValueError("Gram diagonal must have m+1 entries")
        if np.any(self.entries <= 0.0) or not np.all(np.isfinite(self.entries)):
            raise ValueError("Gram entries must be positive and finite")


class BergmanReport:
    def __init__(self, level, kernel, expected_constant, sup_deviation, mean,
                 weight=0.0):
        self.level = level
        self.kernel = kernel
        self.expected_constant = expected_constant
        self.sup_deviation = sup_deviation
        self.mean = mean
        self.weight = weight


class TorusWeight:
    """Coefficient w of the torus generator; the level-m character weight is
    y = w / m^2 on the monomial z^j (weight j convention)."""

    def __init__(self, w):
        self.w = float(w)
        if not np.isfinite(self.w):
            raise ValueError("torus weight must be finite")

    def y(self, m):
        return self.w / float(m) ** 2


def _check_level(m):
    m = int(m)
    if not 1 <= m <= MAX_LEVEL:
        raise ValueError("level m must be in [1, %d], got %d" % (MAX_LEVEL, m))
    return m


def fs_tails(m, window):
    """Exact Fubini-Study tail integrals of x^j (1-x)^{m-j} dx beyond the window.

    Left tail is over t < -T (x < expit(-T)), right over t > T.  Multiplied by
    e^{-m c} these are the exact Gram tails for any potential whose
    perturbation equals the constant c beyond the window.
    """
    j = np.arange(m + 1)
    xT = expit(-window)
    base = np.exp(betaln(j + 1, m - j + 1))
    left = base * betainc(j + 1, m - j + 1, xT)
    right = base * betainc(m - j + 1, j + 1, xT)
    return left, right


def section_norms(m, P):
    """Squared L^2 norms of the monomial sections z^j, j = 0..m.

    Interior panels are integrated by the potential's scheme; the two tails
    are closed-form incomplete Beta integrals (the perturbation is constant
    outside the window), so the Fubini-Study diagonal reproduces the Beta
    oracle j!(m-j)!/(m+1)! to machine precision.
    """
    m = _check_level(m)
    T = P.window
    required = 15.0 + np.log(m)
    if T < required:
        raise WindowError(
            "window %.2f too small for level %d: need at least %.2f "
            "(default is %.2f)" % (T, m, required, 20.0 + np.log(m)))
    t = P.quad.nodes[1:-1]
    j = np.arange(m + 1)
    E = np.exp(j[:, None] * t[None, :] - m * P.node_values("Phi")[None, 1:-1])
    G = E @ (P.quad.inner_weights * P.node_values("dens")[1:-1])
    left, right = fs_tails(m, T)
    G = G + np.exp(-m * P.c_minus) * left + np.exp(-m * P.c_plus) * right
    return GramDiagonal(m, G, P)


def _basis_rows(m, P, weights):
    """Rows e^{jt - m Phi}/weights_j at all nodes, plus kernel derivatives.

    Derivatives attach through the recursion in a_j = j - m Phi':
      E' = a E, E'' = (a^2 - m Phi'') E, and so on.
    Returns the kernel values and d1..d4 arrays (each already summed over j
    and divided by m).
    """
    t = P.quad.nodes
    j = np.arange(m + 1)
    E = np.exp(j[:, None] * t[None, :] - m * P.node_values("Phi")[None, :])
    E = E / weights[:, None]
    a = j[:, None] - m * P.Phi_d(t, 1)[None, :]
    d2f = m * P.node_values("dens")[None, :]
    d3f = m * P.Phi_d(t, 3)[None, :]
    d4f = m * P.Phi_d(t, 4)[None, :]
    K = E.sum(axis=0) / m
    K1 = (a * E).sum(axis=0) / m
    K2 = ((a * a - d2f) * E).sum(axis=0) / m
    K3 = ((a ** 3 - 3.0 * d2f * a - d3f) * E).sum(axis=0) / m
    K4 = ((a ** 4 - 6.0 * d2f * a * a - 4.0 * d3f * a
           + 3.0 * d2f * d2f - d4f) * E).sum(axis=0) / m
    return K, K1, K2, K3, K4


def _kernel_at(m, P, weights, tpts):
    """Kernel values (1/m) sum_j e^{jt - m Phi}/weights_j at arbitrary points."""
    tpts = np.asarray(tpts, dtype=float)
    j = np.arange(m + 1)
    E = np.exp(j[:, None] * tpts[None, :] - m * P.Phi(tpts)[None, :])
    return (E / weights[:, None]).sum(axis=0) / m


def c_of_m(xi):
    """The expected kernel constant C_xi = (xi+1)/xi on the model.

    The Hilbert polynomial is P(xi) = xi + 1 and the polarization has degree
    one, so at integer xi = m this is N_m/m.
    """
    xi = float(xi)
    if xi <= 0.0:
        raise ValueError("C_xi has a pole at xi = 0; xi must be positive")
    return (xi + 1.0) / xi


def bergman_kernel(m, P):
    """Level-m Bergman kernel report; constant iff the metric is balanced."""
    m = _check_level(m)
    G = section_norms(m, P)
    K, K1, K2, K3, K4 = _basis_rows(m, P, G.entries)
    kern = grid_function(P, K, name="B_%d" % m, d1=K1, d2=K2, d3=K3, d4=K4)
    expected = c_of_m(m)
    return BergmanReport(m, kern, expected,
                         float(np.max(np.abs(K - expected))),
                         integrate(P, kern), weight=0.0)


def _beta_from_report(m, P, rep, name):
    dev = rep.kernel.values - rep.expected_constant
    dens = P.node_values("dens")
    lap = -rep.kernel.d2 / dens
    return grid_function(P, 2.0 * m * dev + (4.0 / 3.0) * lap, name=name)


def beta(m, P):
    """Modified kernel beta = 2m (Id + (2/(3m)) Delta)(B_m - C_m).

    Vanishes exactly iff B_m is constant; tends to sigma - 2 as m grows.
    """
    m = _check_level(m)
    return _beta_from_report(m, P, bergman_kernel(m, P), "beta_%d" % m)


def weighted_bergman(m, P, y):
    """Torus-weighted kernel: the j-th monomial line is scaled by e^{j y}.

    y = 0 reduces to bergman_kernel exactly (same code path, same arrays).
    """
    m = _check_level(m)
    y = float(y)
    if y == 0.0:
        return bergman_kernel(m, P)
    if abs(y) * m > 700.0:
        raise ValueError("weight scaling exp(m y) exceeds floating range: "
                         "|y| m = %.3g" % (abs(y) * m))
    G = section_norms(m, P)
    j = np.arange(m + 1)
    weights = G.entries * np.exp(j * y)
    K, K1, K2, K3, K4 = _basis_rows(m, P, weights)
    kern = grid_function(P, K, name="B_%d_weighted" % m,
                         d1=K1, d2=K2, d3=K3, d4=K4)
    expected = _c_weighted_from(m, P, weights, y)
    # self-consistency mean: same integral realized with the density pulled
    # back instead of the kernel shifted
    t = P.quad.nodes
    dens_shift = P.density(t - y)
    mass_l = float(P.Phi_d(-P.window - y, 1))
    mass_r = float(1.0 - P.Phi_d(P.window - y, 1))
    mean = float(P.quad.inner_weights @ (K[1:-1] * dens_shift[1:-1])
                 + mass_l * K[0] + mass_r * K[-1])
    return BergmanReport(m, kern, expected,
                         float(np.max(np.abs(K - expected))), mean, weight=y)


def _c_weighted_from(m, P, weights, y):
    K_shift = _kernel_at(m, P, weights, P.quad.nodes + y)
    return integrate(P, K_shift)


def c_weighted(m, P, y):
    """Weighted constant: mean of the weighted kernel against the volume
    pulled back by the torus element (density Phi''(t - y))."""
    m = _check_level(m)
    y = float(y)
    if abs(y) * m > 700.0:
        raise ValueError("weight scaling exp(m y) exceeds floating range")
    if y == 0.0:
        return c_of_m(m)
    G = section_norms(m, P)
    j = np.arange(m + 1)
    return _c_weighted_from(m, P, G.entries * np.exp(j * y), y)


def beta_weighted(m, P, W):
    """Weighted modified kernel with torus weight W (coefficient w, y = w/m^2).

    w = 0 reduces to beta(m, P) exactly.
    """
    m = _check_level(m)
    w = W.w if isinstance(W, TorusWeight) else float(W)
    if w == 0.0:
        return beta(m, P)
    y = w / float(m) ** 2
    rep = weighted_bergman(m, P, y)
    return _beta_from_report(m, P, rep, "beta_%d_weighted" % m)


class FitReport:
    def __init__(self, a1, a2, levels, residual_sup, first_order_error,
                 sup_a1_error, metadata):
        self.a1 = a1
        self.a2 = a2
        self.levels = levels
        self.residual_sup = residual_sup
        self.first_order_error = first_order_error
        self.sup_a1_error = sup_a1_error
        self.metadata = metadata


def expansion_fit(P, m_list):
    """Fit B_m(t) = 1 + a1 q + a2 q^2 (q = 1/m) per node over the levels.

    The constant term is pinned at 1.  Returns the fitted a1 as a grid
    function together with the per-level sup residuals, the per-level
    first-order errors sup|B_m - 1 - sigma/(2m)| (the sup of what is left
    after the first-order model; decays faster than 1/m), and
    sup|a1 - sigma/2|.
    """
    m_list = [int(m) for m in m_list]
    if len(set(m_list)) != len(m_list):
        raise DegenerateFitError("duplicated levels in %r" % (m_list,))
    if len(m_list) < 3:
        raise ValueError("need at least 3 levels, got %r" % (m_list,))
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ValueError("levels must be strictly increasing")
    if m_list[-1] > MAX_LEVEL:
        raise ValueError("max level %d exceeds %d" % (m_list[-1], MAX_LEVEL))
    q = 1.0 / np.asarray(m_list, dtype=float)
    V = np.stack([q, q * q], axis=1)
    cond = np.linalg.cond(V)
    if cond > 1e12:
        raise DegenerateFitError("fit design condition number %.2e" % cond)
    kernels = np.stack([bergman_kernel(m, P).kernel.values for m in m_list])
    coef, *_ = np.linalg.lstsq(V, kernels - 1.0, rcond=None)
    a1 = grid_function(P, coef[0], name="a1_fit")
    a2 = grid_function(P, coef[1], name="a2_fit")
    model = 1.0 + V @ coef
    residual_sup = np.max(np.abs(kernels - model), axis=1)
    sig = scalar_curvature(P).values
    first_order = np.array([np.max(np.abs(kernels[i] - 1.0 - 0.5 * sig / m))
                            for i, m in enumerate(m_list)])
    sup_a1 = float(np.max(np.abs(coef[0] - 0.5 * sig)))
    meta = {"degree": 2, "constant_pinned": True, "levels": list(m_list),
            "condition_number": float(cond)}
    return FitReport(a1, a2, list(m_list), residual_sup, first_order,
                     sup_a1, meta)


def gram_derivative(m, P, psi):
    """Directional derivative of the Gram diagonal along the path
    h_eps = e^{-eps psi} h with its induced volume:

        d/deps G_jj = int e^{jt - m Phi} (-m psi Phi'' + psi'') dt.

    psi must be mean-zero against the volume (tolerance 1e-10).
    """
    m = _check_level(m)
    mean = integrate(P, psi)
    if abs(mean) > 1e-10:
        raise ValueError("psi must be mean-zero against the volume; "
                         "mean = %.3e" % mean)
    t = P.quad.nodes[1:-1]
    j = np.arange(m + 1)
    E = np.exp(j[:, None] * t[None, :] - m * P.node_values("Phi")[None, 1:-1])
    vals = psi.values
    integrand = (-m * vals[1:-1] * P.node_values("dens")[1:-1]
                 + psi.derivative(2)[1:-1])
    out = E @ (P.quad.inner_weights * integrand)
    # psi'' vanishes beyond the window; the -m psi term has constant psi there
    left, right = fs_tails(m, P.window)
    out += (-m * vals[0]) * np.exp(-m * P.c_minus) * left
    out += (-m * vals[-1]) * np.exp(-m * P.c_plus) * right
    return out


def bergman_derivative(m, P, psi):
    """Full derivative of B_m along the same path:

        dB = -m psi B_m - (1/m) sum_j e^{jt - m Phi} dG_jj / G_jj^2.

    When dG vanishes (psi in the kernel of gram_derivative) this is the pure
    contraction term -m psi B_m.
    """
    m = _check_level(m)
    dG = gram_derivative(m, P, psi)
    G = section_norms(m, P)
    t = P.quad.nodes
    j = np.arange(m + 1)
    E = np.exp(j[:, None] * t[None, :] - m * P.node_values("Phi")[None, :])
    B = (E / G.entries[:, None]).sum(axis=0) / m
    corr = (E * (dG / G.entries ** 2)[:, None]).sum(axis=0) / m
    return grid_function(P, -m * psi.values * B - corr,
                         name="dB_%d" % m)
