"""Balanced and T-balanced metric solvers, continuation family, uniqueness probe.

Both solvers work in the exact finite-dimensional reduction x = log D, where
D is the Gram diagonal: every candidate metric is

    Phi_x(t) = (1/m) log sum_j e^{jt - x_j},

and balance is the fixed-point condition x = log((m+1) G(Phi_x)) up to the
neutral scale and translation directions.  The (m+1) factor pins the scale
gauge so the Fubini-Study diagonal is an exact fixed point; the translation
(torus) direction is handled by the selected recentering.  Solving in x
rather than in spline space keeps the problem exactly finite dimensional, so
Newton can reach residuals at the floating-point floor.
"""
import time

import numpy as np
from scipy.special import logsumexp, expit
from scipy.optimize import brentq

from .model import fs_derivative, _from_knot_values
from .bergman import section_norms, fs_tails, c_of_m

_DAMPING_FLOOR = 1.0 / 16.0


class SingularJacobianError(RuntimeError):
    """Newton system singular along the torus (translation) direction."""


class BracketError(RuntimeError):
    def __init__(self, scanned, values):
        self.scanned = np.asarray(scanned, dtype=float)
        self.values = np.asarray(values, dtype=float)
        super().__init__(
            "no sign change for the torus weight in the scanned bracket "
            "[%s] with moments [%s]" % (
                ", ".join("%.3g" % s for s in self.scanned),
                ", ".join("%.3g" % v for v in self.values)))


class SolverOptions:
    """tolerance on sup|B - C|; recentering in {none, even-symmetrize,
    moment-center}; damping in (0, 1]."""

    RECENTERINGS = ("none", "even-symmetrize", "moment-center")

    def __init__(self, tolerance=1e-8, max_iterations=500,
                 recentering="moment-center", damping=1.0):
        if not tolerance > 0:
            raise ValueError("tolerance must be positive")
        if max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if recentering not in self.RECENTERINGS:
            raise ValueError("recentering must be one of %r" % (self.RECENTERINGS,))
        if not 0.0 < damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")
        self.tolerance = float(tolerance)
        self.max_iterations = int(max_iterations)
        self.recentering = recentering
        self.damping = float(damping)


class BalanceResult:
    def __init__(self, level, potential, torus_weight, residual_history,
                 converged, iterations, wall_time, mode, diagnostics=None):
        self.level = level
        self.potential = potential
        self.torus_weight = torus_weight
        self.residual_history = np.asarray(residual_history, dtype=float)
        self.converged = bool(converged)
        self.iterations = int(iterations)
        self.wall_time = float(wall_time)
        self.mode = mode
        self.diagnostics = diagnostics or {}
        if self.residual_history.size == 0:
            raise ValueError("residual history must be non-empty")
        if not np.all(np.isfinite(self.residual_history)):
            raise ValueError("residual history contains non-finite entries")

    @property
    def final_residual(self):
        return float(self.residual_history[-1])


class FamilyReport:
    def __init__(self, levels, results, d_sup, sigma_sup, verdicts,
                 failure_index):
        self.levels = list(levels)
        self.results = results
        self.d_sup = np.asarray(d_sup, dtype=float)
        self.sigma_sup = np.asarray(sigma_sup, dtype=float)
        self.verdicts = verdicts
        self.failure_index = failure_index


class UniquenessReport:
    def __init__(self, results, distances, max_distance, passed, excluded):
        self.results = results
        self.distances = distances
        self.max_distance = max_distance
        self.passed = passed
        self.excluded = excluded


class _DSpace:
    """Shared arrays for one (m, window, grid) solve."""

    def __init__(self, m, window, grid_size, order=8):
        self.m = int(m)
        self.window = float(window)
        self.grid_size = int(grid_size)
        self.order = int(order)
        from .model import Quadrature
        self.quad = Quadrature(window, grid_size, order)
        self.t = self.quad.nodes
        self.w_in = self.quad.inner_weights
        self.j = np.arange(self.m + 1, dtype=float)
        self.tail_left, self.tail_right = fs_tails(self.m, self.window)
        self.C = c_of_m(self.m)
        self.fs0 = fs_derivative(self.t, 0)

    def pieces(self, x):
        """softmax cumulants of Phi_x at all nodes."""
        z = self.j[:, None] * self.t[None, :] - x[:, None]
        S = logsumexp(z, axis=0)
        p = np.exp(z - S[None, :])
        mu = self.j @ p
        d = self.j[:, None] - mu[None, :]
        k2 = np.einsum("jt,jt->t", p, d * d)
        Phi = S / self.m
        dens = k2 / self.m
        return p, mu, d, k2, Phi, dens

    def gram(self, x, parts=None):
        p, mu, d, k2, Phi, dens = parts if parts is not None else self.pieces(x)
        E = np.exp(self.j[:, None] * self.t[None, 1:-1] - self.m * Phi[None, 1:-1])
        G = E @ (self.w_in * dens[1:-1])
        cL = Phi[0] - self.fs0[0]
        cR = Phi[-1] - self.fs0[-1]
        G = G + np.exp(-self.m * cL) * self.tail_left \
              + np.exp(-self.m * cR) * self.tail_right
        return G, E, Phi, dens, (p, mu, d, k2)

    def kernel_sup(self, x, y, G, Phi):
        """sup |B_{m,y} - C| with C the exact constant at y = 0 and the
        self-consistent weighted mean otherwise."""
        K = self._kernel(x, y, G, self.t, Phi)
        C = self.C if y == 0.0 else self._weighted_mean(x, y, G, Phi)
        return float(np.max(np.abs(K - C))), K, C

    def _kernel(self, x, y, G, tpts, Phi=None):
        if Phi is None:
            Phi = logsumexp(self.j[:, None] * tpts[None, :] - x[:, None],
                            axis=0) / self.m
        D = G * np.exp(self.j * y)
        E = np.exp(self.j[:, None] * tpts[None, :] - self.m * Phi[None, :])
        return (E / D[:, None]).sum(axis=0) / self.m

    def _volume_integral(self, x, vals, mu, dens):
        mass_l = mu[0] / self.m
        mass_r = 1.0 - mu[-1] / self.m
        return float(self.w_in @ (vals[1:-1] * dens[1:-1])
                     + mass_l * vals[0] + mass_r * vals[-1])

    def _weighted_mean(self, x, y, G, Phi):
        """int K_y(u + y) dmu, the weighted constant of the current iterate."""
        Ks = self._kernel(x, y, G, self.t + y)
        p, mu, d, k2, Phi2, dens = self.pieces(x)
        return self._volume_integral(x, Ks, mu, dens)

    def moment_center(self, x, parts=None):
        p, mu, d, k2, Phi, dens = parts if parts is not None else self.pieces(x)
        mass_l = mu[0] / self.m
        mass_r = 1.0 - mu[-1] / self.m
        return float(self.w_in @ (self.t[1:-1] * dens[1:-1])
                     - self.window * mass_l + self.window * mass_r)

    def recenter(self, x, mode, parts=None):
        if mode == "even-symmetrize":
            return 0.5 * (x + x[::-1])
        if mode == "moment-center":
            return x - self.j * self.moment_center(x, parts)
        return x

    def jacobian(self, x, G, E, dens, softmax):
        """A_il = dG_i[psi_l]/G_i for the potential directions psi_l = dPhi/dx_l
        = -p_l/m, including the constant-tail contributions."""
        p, mu, d, k2 = softmax
        ppp = p * (d * d - k2[None, :])        # p_l''
        M = p[:, 1:-1] * dens[None, 1:-1] - ppp[:, 1:-1] / self.m
        A = (E * self.w_in[None, :]) @ M.T
        cL = np.exp(-self.m * (logsumexp(self.j * self.t[0] - x) / self.m
                               - self.fs0[0]))
        cR = np.exp(-self.m * (logsumexp(self.j * self.t[-1] - x) / self.m
                               - self.fs0[-1]))
        A += np.outer(cL * self.tail_left, p[:, 0])
        A += np.outer(cR * self.tail_right, p[:, -1])
        return A / G[:, None]

    def potential(self, x):
        # emit on the seed's own grid: a finer one would only amplify the
        # float noise of the knot values in the spline's edge derivatives
        knots = np.linspace(-self.window, self.window, self.grid_size)
        Phi = logsumexp(self.j[:, None] * knots[None, :] - x[:, None],
                        axis=0) / self.m
        vals = Phi - fs_derivative(knots, 0)
        return _from_knot_values(vals, self.window, self.grid_size,
                                 order=self.order)

    def sigma_core_err(self, x):
        """sup of |sigma - 2| over the core half-window, from the exact
        cumulants of Phi_x.  The tail nodes are excluded: there the density
        is ~e^{-T} and evaluating sigma of a near-reference iterate divides
        rounding noise by it."""
        core = np.abs(self.t) <= min(10.0, 0.5 * self.window)
        p, mu, d, k2, Phi, dens = self.pieces(x)
        p = p[:, core]
        d = d[:, core]
        k2 = k2[core]
        k3 = np.einsum("jt,jt->t", p, d ** 3)
        k4 = np.einsum("jt,jt->t", p, d ** 4) - 3.0 * k2 * k2
        sigma = -self.m * (k4 * k2 - k3 * k3) / k2 ** 3
        return float(np.max(np.abs(sigma - 2.0)))


def _seed(m, P):
    return np.log((m + 1) * section_norms(m, P).entries)


def tk_iterate(m, P0, opts=None):
    """Fixed-point iteration on the Gram diagonal (the classical self-map).

    Starting from the Gram diagonal of P0, iterate x -> log((m+1) G(Phi_x))
    with the selected damping and recentering.  The residual history records
    sup|B_m - C_m| per step.  Damping is halved automatically whenever the
    residual increases.  Non-convergence within max_iterations returns
    converged = False with the full history.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    ds = _DSpace(m, P0.window, P0.grid_size, P0.quad.order)
    x = _seed(m, P0)
    damping = opts.damping
    hist = []
    converged = False
    k = 0
    for k in range(opts.max_iterations):
        parts = ds.pieces(x)
        G, E, Phi, dens, softmax = ds.gram(x, parts)
        r, K, C = ds.kernel_sup(x, 0.0, G, Phi)
        hist.append(r)
        if r <= opts.tolerance:
            converged = True
            break
        # transients legitimately plateau ~20% above the running minimum;
        # only a clear blow-up signals that the map needs damping
        if r > 2.0 * min(hist):
            damping = max(0.5 * damping, _DAMPING_FLOOR)
        xn = np.log((m + 1) * G)
        x = x + damping * (xn - x)
        x = ds.recenter(x, opts.recentering)
    P = ds.potential(x)
    return BalanceResult(m, P, None, hist, converged, k, time.perf_counter() - t0,
                         mode="fixed-point",
                         diagnostics={"damping_final": damping,
                                      "moment_center": ds.moment_center(x),
                                      "sigma_core_err": ds.sigma_core_err(x)})


def _gauss_newton(ds, x0, y, opts):
    """Newton (exact Jacobian) on R(x) = log((m+1) G(Phi_x)) + j y - x.

    The scale and torus null directions are deflated by the augmented rows
    1^T dx = 0 and j^T dx = 0 (the moment-centering constraint); with
    recentering="none" the singular torus direction is reported instead.
    At y = 0 the roots are exactly the balanced diagonals.
    """
    m = ds.m
    x = x0.copy()
    hist = []
    converged = False
    k = 0
    stalls = 0
    for k in range(opts.max_iterations):
        parts = ds.pieces(x)
        G, E, Phi, dens, softmax = ds.gram(x, parts)
        r, K, C = ds.kernel_sup(x, y, G, Phi)
        hist.append(r)
        if r <= opts.tolerance:
            converged = True
            break
        if len(hist) >= 2 and hist[-1] > 0.5 * hist[-2]:
            stalls += 1
            if stalls >= 3:
                break
        else:
            stalls = 0
        R = np.log((m + 1) * G) + ds.j * y - x
        J = ds.jacobian(x, G, E, dens, softmax) - np.eye(m + 1)
        if opts.recentering == "none":
            sv = np.linalg.svd(J, compute_uv=False)
            if sv[-1] < 1e-8 * sv[0]:
                raise SingularJacobianError(
                    "Newton system singular on the mean-zero subspace: the "
                    "torus (translation) direction x_j ~ j is in the kernel; "
                    "project it out with moment-center recentering")
        Jaug = np.vstack([J, np.ones(m + 1), ds.j])
        rhs = np.concatenate([-R, [0.0, 0.0]])
        dx, *_ = np.linalg.lstsq(Jaug, rhs, rcond=None)
        x = x + opts.damping * dx
        x = ds.recenter(x, opts.recentering)
    return x, hist, converged, k


def _newton_orders(hist, floor=1e-13):
    """Local convergence orders from the residual history.

    Entries at the evaluation floor are excluded: once the residual sits on
    rounding noise the ratios stop reflecting the iteration.
    """
    rs = [r for r in hist if r > floor]
    orders = []
    for i in range(1, len(rs) - 1):
        den = np.log(rs[i] / rs[i - 1])
        if rs[i] < rs[i - 1] and rs[i + 1] < rs[i] and abs(den) > 1e-3:
            orders.append(float(np.log(rs[i + 1] / rs[i]) / den))
    return orders


def newton_balance(m, P0, opts=None, mode="exact"):
    """Newton's method for the balanced equation at level m.

    mode="exact" assembles the exact Jacobian of the Gram self-map and shows
    quadratic convergence; mode="quasi" replaces it by the scalar-curvature
    linearization (the fourth-order operator L), exact only in the large-m
    limit, and converges linearly.  The chosen mode is recorded.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    ds = _DSpace(m, P0.window, P0.grid_size, P0.quad.order)
    x0 = _seed(m, P0)
    if mode == "exact":
        x, hist, converged, k = _gauss_newton(ds, x0, 0.0, opts)
    elif mode == "quasi":
        x, hist, converged, k = _quasi_newton(ds, x0, opts)
    else:
        raise ValueError("mode must be 'exact' or 'quasi'")
    P = ds.potential(x)
    monotone = bool(np.all(np.diff(hist) < 0)) if len(hist) > 1 else True
    return BalanceResult(
        m, P, None, hist, converged, k, time.perf_counter() - t0,
        mode="newton-" + mode,
        diagnostics={"orders": _newton_orders(hist),
                     "monotone_history": monotone,
                     "moment_center": ds.moment_center(x),
                     "sigma_core_err": ds.sigma_core_err(x)})


def _quasi_newton(ds, x0, opts):
    """Steps solve L(delta phi) = -beta in the x coordinates by least squares."""
    m = ds.m
    x = x0.copy()
    hist = []
    converged = False
    k = 0
    for k in range(opts.max_iterations):
        parts = ds.pieces(x)
        p, mu, d, k2, Phi, dens = parts
        G, E, Phi, dens2, softmax = ds.gram(x, parts)
        r, K, C = ds.kernel_sup(x, 0.0, G, Phi)
        hist.append(r)
        if r <= opts.tolerance:
            converged = True
            break
        # beta of the current iterate, from the analytic kernel derivatives
        a = ds.j[:, None] - mu[None, :]
        D = G
        EK = np.exp(ds.j[:, None] * ds.t[None, :] - m * Phi[None, :]) / D[:, None]
        dev = EK.sum(axis=0) / m - ds.C
        K2 = ((a * a - k2[None, :]) * EK).sum(axis=0) / m
        beta_vals = 2.0 * m * dev + (4.0 / 3.0) * (-K2 / dens)
        # columns L(psi_l), psi_l = -p_l/m, via cumulants of the softmax
        k3 = np.einsum("jt,jt->t", p, d ** 3)
        k4 = np.einsum("jt,jt->t", p, d ** 4) - 3.0 * k2 * k2
        r1 = k3 / k2
        gpp = (k4 * k2 - k3 * k3) / (k2 * k2)
        sigma = -m * (k4 * k2 - k3 * k3) / k2 ** 3
        p2 = p * (d * d - k2[None, :])
        p3 = p * (d ** 3 - 3.0 * d * k2[None, :] - k3[None, :])
        p4 = p * (d ** 4 - 6.0 * d * d * k2[None, :]
                  - 4.0 * d * k3[None, :] + 3.0 * (k2 * k2)[None, :]
                  - k4[None, :])
        u = -p2 / k2[None, :]
        q3 = -p3 / k2[None, :]
        up = q3 - r1[None, :] * u
        upp = (-p4 / k2[None, :] - r1[None, :] * q3) \
            - gpp[None, :] * u - r1[None, :] * up
        cols = -(upp / dens[None, :] + sigma[None, :] * u)
        dx, *_ = np.linalg.lstsq(cols.T, -beta_vals, rcond=None)
        # project out the scale and torus directions
        for v in (np.ones(m + 1), ds.j - ds.j.mean()):
            dx = dx - v * (v @ dx) / (v @ v)
        x = x + opts.damping * dx
        x = ds.recenter(x, opts.recentering)
    return x, hist, converged, k


def _find_weight_bracket(moment, scan):
    """Bracket a sign change of the outer moment function over the scan grid."""
    vals = [moment(s) for s in scan]
    for (a, fa), (b, fb) in zip(zip(scan, vals), zip(scan[1:], vals[1:])):
        if np.sign(fa) != np.sign(fb):
            return a, b
    raise BracketError(scan, vals)


def t_balance(m, P0, opts=None, freeze_weight=None):
    """Simultaneous solve for (phi, y) making the weighted kernel constant.

    Inner: Gauss-Newton at fixed weight y.  Outer: one-dimensional root find
    on the moment pairing M(y) = int (K_y - C_y) f_moment dmu of the inner
    solution; y = 0 is accepted immediately when |M(0)| <= 1e-12.  Passing
    freeze_weight pins y (freeze_weight = 0 reproduces newton_balance
    exactly, same code path).
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    ds = _DSpace(m, P0.window, P0.grid_size, P0.quad.order)
    x0 = _seed(m, P0)
    state = {}

    def inner(y):
        x, hist, converged, k = _gauss_newton(ds, x0, y, opts)
        state[y] = (x, hist, converged, k)
        return x

    def moment(y):
        x = inner(y)
        parts = ds.pieces(x)
        p, mu, d, k2, Phi, dens = parts
        G, E, Phi, dens2, softmax = ds.gram(x, parts)
        K = ds._kernel(x, y, G, ds.t, Phi)
        C = ds._weighted_mean(x, y, G, Phi)
        f1 = mu / m
        f = f1 - ds._volume_integral(x, f1, mu, dens)
        return ds._volume_integral(x, (K - C) * f, mu, dens)

    if freeze_weight is not None:
        y = float(freeze_weight)
        inner(y)
    else:
        M0 = moment(0.0)
        if abs(M0) <= 1e-12:
            y = 0.0
        else:
            scan = [s for s in
                    (-0.3, -0.1, -0.03, -0.01, -1e-3, 1e-3, 0.01, 0.03, 0.1, 0.3)]
            a, b = _find_weight_bracket(moment, scan)
            y = brentq(moment, a, b, xtol=1e-12)
            inner(y)
    x, hist, converged, k = state[y]
    P = ds.potential(x)
    return BalanceResult(
        m, P, y, hist, converged, k, time.perf_counter() - t0,
        mode="t-balance",
        diagnostics={"orders": _newton_orders(hist),
                     "moment_center": ds.moment_center(x),
                     "sigma_core_err": ds.sigma_core_err(x)})


def balanced_family(m_range, P_seed, opts=None):
    """Continuation over increasing levels, warm-started from the previous
    solution; reports the distance curve d_m = sup|phi_m| to the constant
    scalar curvature reference (phi = 0) and the curve sup|sigma_m - 2|.

    The seed's window must accommodate the largest level.  A level that fails
    to converge truncates the report at its index.
    """
    opts = opts or SolverOptions()
    levels = [int(m) for m in m_range]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    results = []
    d_sup = []
    sigma_sup = []
    failure_index = None
    P = P_seed
    for i, m in enumerate(levels):
        res = newton_balance(m, P, opts)
        results.append(res)
        if not res.converged:
            failure_index = i
            break
        P = res.potential
        d_sup.append(float(np.max(np.abs(P.phi(P.quad.nodes)))))
        sigma_sup.append(res.diagnostics["sigma_core_err"])
    d = np.asarray(d_sup)
    s = np.asarray(sigma_sup)
    verdicts = {
        "all_converged": failure_index is None,
        "d_non_increasing": bool(np.all(d[1:] <= 1.1 * d[:-1])) if d.size > 1 else True,
        "d_last_below_first": bool(d[-1] < d[0]) if d.size > 1 else True,
        "sigma_decreasing": bool(np.all(np.diff(s) < 0)) if s.size > 1 else True,
    }
    return FamilyReport(levels[:len(results)], results, d, s, verdicts,
                        failure_index)


def uniqueness_probe(m, seeds, opts=None):
    """Balanced solves from several seeds; pairwise sup-distances of the
    moment-centered solutions.  Passes when all distances are <= 1e-6."""
    opts = opts or SolverOptions()
    if len(seeds) < 1:
        raise ValueError("need at least one seed")
    results = []
    excluded = []
    for i, seed in enumerate(seeds):
        res = newton_balance(m, seed, opts)
        results.append(res)
        if not res.converged:
            excluded.append(i)
    kept = [i for i in range(len(results)) if i not in excluded]
    T = min(results[i].potential.window for i in kept) if kept else 0.0
    grid = np.linspace(-T, T, 4097)
    dist = np.zeros((len(results), len(results)))
    for a in range(len(kept)):
        for b in range(a + 1, len(kept)):
            ia, ib = kept[a], kept[b]
            da = results[ia].potential.phi(grid)
            db = results[ib].potential.phi(grid)
            dist[ia, ib] = dist[ib, ia] = float(np.max(np.abs(da - db)))
    off = [dist[a, b] for a in kept for b in kept if a < b]
    max_distance = float(max(off)) if off else 0.0
    return UniquenessReport(results, dist, max_distance,
                            passed=bool(max_distance <= 1e-6 and kept),
                            excluded=excluded)
