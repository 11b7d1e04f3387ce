"""Free additive convolution via subordination fixed points.

The Cauchy transform of each input measure is evaluated in closed form
(atom sums plus exact logarithmic integrals of the piecewise-linear
density).  The subordination function

    w = z + H_nu(z + H_mu(w)),      H(w) = 1/G(w) - w,

is solved by damped Picard iteration with Newton finishing, walked down a
geometric ladder of imaginary heights so the final Stieltjes inversion can
happen very close to the real axis.  The output density is recovered as
-(1/pi) Im G_mu(omega(x + i eta)) on a grid that starts uniform and is then
refined where the recovered density curves fastest; free convolutions have
square-root type edges (and inverse-square-root spikes for near-atomic
inputs), so the refinement concentrates exactly there.

All evaluation is vectorized over grid points and deterministic for any
thread count: chunk boundaries are fixed and every point is independent.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measure import Measure, MeasureError

__all__ = [
    "ConvolutionParams",
    "ConvolutionError",
    "SubordinationError",
    "FoldDiagnostics",
    "DEFAULT_PARAMS",
    "cauchy_transform",
    "subordinator",
    "free_convolve",
    "free_convolve_n",
    "free_convolve_pow",
    "clt_sum",
]


class ConvolutionError(RuntimeError):
    """Numerical failure inside the convolution engine."""


class SubordinationError(ConvolutionError):
    """Fixed-point iteration failed to converge."""

    def __init__(self, z, residual, iterations):
        self.z = complex(z)
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"subordination did not converge at z={self.z:g} after "
            f"{self.iterations} iterations (residual {self.residual:.3e})")


@dataclass(frozen=True)
class ConvolutionParams:
    """Tuning knobs for the convolution engine.

    eta is the Stieltjes inversion height in units of the output support
    width.  grid_points is the size of the recovery grid, fp_tol the
    fixed-point residual target, fp_max_iter the per-height iteration cap,
    and mass_defect_limit the largest tolerated loss of mass before the run
    aborts.  transform_cells bounds the number of density cells used when
    evaluating transforms of intermediate fold results (inputs are projected
    conservatively; accuracy is guarded by the moment self-checks), and
    coarse_points sizes the support-location prepass.  richardson enables
    two-height extrapolation of the recovered density.
    """

    eta: float = 1e-6
    grid_points: int = 4096
    fp_tol: float = 1e-9
    fp_max_iter: int = 500
    mass_defect_limit: float = 1e-2
    transform_cells: int = 256
    coarse_points: int = 512
    richardson: bool = False

    def __post_init__(self):
        if self.eta <= 0 or self.fp_tol <= 0 or self.mass_defect_limit <= 0:
            raise MeasureError("eta, fp_tol and mass_defect_limit must be positive")
        if self.grid_points < 256:
            raise MeasureError("grid_points must be at least 256")
        if self.fp_max_iter < 1 or self.transform_cells < 16 or self.coarse_points < 64:
            raise MeasureError("invalid iteration or grid-size parameter")


DEFAULT_PARAMS = ConvolutionParams()

_CHUNK = 1024  # fixed z-chunk size; independent of the thread count


@dataclass(frozen=True)
class FoldDiagnostics:
    """Bookkeeping for a convolution run: worst mass defect, final height, folds."""

    mass_defect: float
    eta: float
    folds: int

    def merge(self, other: "FoldDiagnostics") -> "FoldDiagnostics":
        return FoldDiagnostics(max(self.mass_defect, other.mass_defect),
                               max(self.eta, other.eta),
                               self.folds + other.folds)


_NO_FOLD = FoldDiagnostics(0.0, 0.0, 0)


class _Transform:
    """Cached closed-form evaluator for G and G' of one measure.

    The continuous part contributes, per grid cell [x0, x1] with linear
    density a + b t,

        (a + b z) log((z - x0) / (z - x1)) - b (x1 - x0),

    which is regrouped by node so each evaluation costs one complex log per
    breakpoint.  Intermediate fold outputs may carry thousands of cells; they
    are projected onto an equal-mass grid of at most ``max_cells`` cells
    (mass preserving, so spikes keep their weight).
    """

    def __init__(self, measure: Measure, max_cells=None):
        self.apos = measure.atom_positions
        self.amass = measure.atom_masses
        self._measure = measure
        self._exact = None
        grid, dens = measure.grid, measure.density
        self.is_compressed = max_cells is not None and grid.size > max_cells + 1
        if self.is_compressed:
            grid, dens = _conservative_regrid(measure, int(max_cells))
        self.nodes = grid
        if grid.size:
            x0, x1 = grid[:-1], grid[1:]
            slope = (dens[1:] - dens[:-1]) / (x1 - x0)
            a = dens[:-1] - slope * x0
            # Cell i contributes (a_i + b_i z)(L_i - L_{i+1}); regrouped, node j
            # carries (a_j + b_j z) - (a_{j-1} + b_{j-1} z) with zero padding.
            self.alpha = np.concatenate([a, [0.0]]) - np.concatenate([[0.0], a])
            self.beta = np.concatenate([slope, [0.0]]) - np.concatenate([[0.0], slope])
            self.blin = float(np.sum(slope * (x1 - x0)))
        else:
            self.alpha = np.zeros(0)
            self.beta = np.zeros(0)
            self.blin = 0.0

    def exact(self) -> "_Transform":
        """Uncompressed companion evaluator (self when nothing was dropped)."""
        if not self.is_compressed:
            return self
        if self._exact is None:
            self._exact = _Transform(self._measure)
        return self._exact

    def g(self, z):
        g, _ = self._eval(z, need_deriv=False)
        return g

    def g_dg(self, z):
        return self._eval(z, need_deriv=True)

    def _eval(self, z, need_deriv):
        z = np.asarray(z, dtype=complex)
        g = np.zeros_like(z)
        dg = np.zeros_like(z) if need_deriv else None
        if self.apos.size:
            inv = 1.0 / (z[..., None] - self.apos)
            g += np.sum(self.amass * inv, axis=-1)
            if need_deriv:
                dg -= np.sum(self.amass * inv * inv, axis=-1)
        if self.nodes.size:
            diff = z[..., None] - self.nodes
            logs = np.log(diff)
            coef = self.alpha + self.beta * z[..., None]
            g += np.sum(coef * logs, axis=-1) - self.blin
            if need_deriv:
                dg += np.sum(self.beta * logs + coef / diff, axis=-1)
        return g, dg


def _conservative_regrid(measure: Measure, max_cells: int):
    """Project the continuous part onto an equal-mass grid of max_cells cells.

    Node placement follows the continuous mass distribution (plus a uniform
    skeleton so empty stretches stay representable); node values are cell
    averages of the exact CDF increments, which preserves local mass to
    first order and total mass exactly.
    """
    grid, dens = measure.grid, measure.density
    cmass = float(np.sum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid)))
    if cmass <= 0.0:
        return grid[:2], np.zeros(2)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cum_u, iu = np.unique(cum, return_index=True)
    n_mass = int(0.75 * max_cells)
    levels = np.linspace(0.0, cmass, n_mass + 1)
    nodes = np.interp(levels, cum_u, grid[iu])
    skeleton = np.linspace(grid[0], grid[-1], max_cells - n_mass + 1)
    new = np.unique(np.concatenate([nodes, skeleton]))
    min_gap = 1e-9 * (grid[-1] - grid[0])
    keep = np.concatenate([[True], np.diff(new) > min_gap])
    keep[-1] = True
    new = new[keep]
    if new.size < 2:
        new = grid[[0, -1]]
    new = _dedupe_sorted(new, 2e-7 * (grid[-1] - grid[0]))
    if new.size < 2:
        new = grid[[0, -1]]
    mids = np.concatenate([[new[0]], 0.5 * (new[1:] + new[:-1]), [new[-1]]])
    cdf_mid = measure._density_cdf(mids)
    avg = np.diff(cdf_mid) / np.diff(mids)
    raw = float(np.sum(0.5 * (avg[1:] + avg[:-1]) * np.diff(new)))
    if raw > 0.0:
        avg = avg * (cmass / raw)
    avg = np.clip(avg, 0.0, None)
    # Projection is mass preserving but perturbs moments at O(h^2), which
    # accumulates across folds; an affine correction restores the original
    # mean and variance of the continuous part exactly.
    m0, m1, m2 = _pl_moments(grid, dens)
    c0, c1, c2 = _pl_moments(new, avg)
    if c0 > 0.0 and m0 > 0.0:
        mean_t, var_t = m1 / m0, m2 / m0 - (m1 / m0) ** 2
        mean_c, var_c = c1 / c0, c2 / c0 - (c1 / c0) ** 2
        if var_c > 0.0 and var_t > 0.0:
            s = math.sqrt(var_t / var_c)
            new = (new - mean_c) * s + mean_t
            avg = avg * (m0 / c0) / s
    return new, avg


def _pl_moments(grid, dens):
    """Mass, first and second raw moments of a piecewise-linear density."""
    x0, x1 = grid[:-1], grid[1:]
    slope = (dens[1:] - dens[:-1]) / (x1 - x0)
    a = dens[:-1] - slope * x0
    m0 = float(np.sum(a * (x1 - x0) + 0.5 * slope * (x1 ** 2 - x0 ** 2)))
    m1 = float(np.sum(a * (x1 ** 2 - x0 ** 2) / 2 + slope * (x1 ** 3 - x0 ** 3) / 3))
    m2 = float(np.sum(a * (x1 ** 3 - x0 ** 3) / 3 + slope * (x1 ** 4 - x0 ** 4) / 4))
    return m0, m1, m2


def _dedupe_sorted(xs, min_gap):
    """Drop nodes closer than min_gap to the previously kept one; keep ends.

    Near-degenerate cells produce huge density slopes whose log terms cancel
    catastrophically in the transform evaluation, so they must not survive.
    """
    keep = [xs[0]]
    for x in xs[1:]:
        if x - keep[-1] > min_gap:
            keep.append(x)
    if keep[-1] < xs[-1]:
        # merging the last kept node into the endpoint only widens the gap
        if len(keep) > 1:
            keep[-1] = xs[-1]
        else:
            keep.append(xs[-1])
    return np.asarray(keep)


# -- public transforms -------------------------------------------------------


def cauchy_transform(mu: Measure, z):
    """G(z) = int d mu(t) / (z - t) for Im z > 0; exact for this representation."""
    zs = np.asarray(z, dtype=complex)
    if np.any(zs.imag <= 0.0):
        raise ValueError("Cauchy transform requires Im z > 0")
    out = _Transform(mu).g(zs)
    return complex(out) if np.isscalar(z) else out


def subordinator(mu: Measure, nu: Measure, z, params: ConvolutionParams = DEFAULT_PARAMS):
    """Subordination function omega_1(z) with G_{mu ⊞ nu}(z) = G_mu(omega_1(z)).

    Solves the fixed point w = z + H_nu(z + H_mu(w)) at the given z (scalar
    or array) by damped Picard iteration with Newton finishing.  Raises
    SubordinationError with the offending point and last residual if the
    iteration cap is hit.
    """
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(zs.imag <= 0.0):
        raise ValueError("subordination requires Im z > 0")
    tmu, tnu = _Transform(mu), _Transform(nu)
    w, ok, res = _iterate(tmu, tnu, zs, params)
    if not ok.all():
        # points deep in the lower heights can need the height continuation
        bad = np.flatnonzero(~ok)
        lo_m, hi_m = mu.support()
        lo_n, hi_n = nu.support()
        width = max((hi_m - lo_m) + (hi_n - lo_n), 1.0)
        for i in bad:
            eta_t = float(zs[i].imag)
            etas = np.geomspace(max(0.25 * width, 2 * eta_t), eta_t, 8)
            wi = None
            for eta in etas:
                zi = np.array([complex(zs[i].real, eta)])
                wi, oki, ri = _iterate(tmu, tnu, zi, params,
                                       w0=None if wi is None else wi)
                if not oki[0] and eta == etas[-1]:
                    raise SubordinationError(zs[i], ri[0], params.fp_max_iter)
            w[i] = wi[0]
    return complex(w[0]) if np.isscalar(z) or np.asarray(z).ndim == 0 else w


def _iterate(tmu, tnu, z, params, w0=None, tol=None):
    """Damped Picard plus Newton for w = z + H_nu(z + H_mu(w)), all points at
    once; returns (w, converged mask, last residuals) and never raises."""
    tol = params.fp_tol if tol is None else tol
    w = z.astype(complex).copy() if w0 is None else w0.astype(complex).copy()
    w.imag = np.maximum(w.imag, z.imag)
    theta = np.ones(z.shape)
    res_prev = np.full(z.shape, np.inf)
    last_res = np.full(z.shape, np.inf)
    best_res = np.full(z.shape, np.inf)
    best_w = w.copy()
    stall = np.zeros(z.shape, dtype=int)
    active = np.ones(z.shape, dtype=bool)
    for it in range(params.fp_max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        wa, za = w[idx], z[idx]
        gmu, dgmu = tmu.g_dg(wa)
        u = za + 1.0 / gmu - wa
        floor = 1e-12 * (1.0 + np.abs(za))
        u = np.where(u.imag > 0.0, u, u.real + 1j * floor)
        gnu, dgnu = tnu.g_dg(u)
        K = za + 1.0 / gnu - u
        f = wa - K
        res = np.abs(f)
        last_res[idx] = res
        scale = 1.0 + np.abs(wa)
        improved = res < best_res[idx]
        best_res[idx] = np.where(improved, res, best_res[idx])
        best_w[idx] = np.where(improved, wa, best_w[idx])
        stall[idx] = np.where(improved, 0, stall[idx] + 1)
        done = res <= tol * scale
        # Transform evaluations carry a small cancellation noise floor; once
        # iterates stop improving near it, accept the best point seen.
        stalled = (stall[idx] > 25) & (best_res[idx] <= 1e-6 * scale)
        worse = res > res_prev[idx]
        th = theta[idx]
        th = np.where(worse, np.maximum(0.5 * th, 0.05), np.minimum(1.25 * th, 1.0))
        theta[idx] = th
        res_prev[idx] = res
        # Newton on f(w) = w - K(w); fall back to damped Picard when the
        # derivative is degenerate or the residual is still large.
        hmu = -dgmu / (gmu * gmu) - 1.0
        hnu = -dgnu / (gnu * gnu) - 1.0
        fprime = 1.0 - hnu * hmu
        can_newton = (res < 1e-1 * scale) & (np.abs(fprime) > 1e-10)
        step = np.where(can_newton,
                        f / np.where(np.abs(fprime) > 1e-10, fprime, 1.0),
                        th * f)
        # Near a spectral gap the map can be expansive mid-plane and run off
        # to a noise-dominated slow zone; a step cap keeps the orbit local.
        cap = 0.3 * scale
        mag = np.abs(step)
        step = np.where(mag > cap, step * (cap / np.where(mag == 0.0, 1.0, mag)), step)
        wn = wa - step
        wn = np.where(wn.imag < za.imag, wn.real + 1j * za.imag, wn)
        wn = np.where(stalled, best_w[idx], wn)
        w[idx] = np.where(done, wa, wn)
        active[idx] = ~(done | stalled)
    return w, ~active, last_res


def _solve_level(tmu, tnu, z, params, w0, tol, allow_swap=True, allow_exact=True):
    """One height level over an ascending line of points, with rescue tiers.

    Tier 1: solve from the height warm start.  Tier 2: the subordination
    function is continuous in Re z, so failed points restart from the
    nearest converged neighbor, propagating in waves into failed clusters.
    Tier 3: where the output density nearly vanishes, omega_1 is large and
    the direct map amplifies evaluation noise through the partner measure's
    spectral gap; the mirrored iteration for the partner point omega_2 is
    well conditioned there, and omega_1 = z + H_nu(omega_2) maps it back.
    Tier 4: redo survivors with uncompressed transforms, whose noise floor
    is far lower.  Tier 5: accept a stalled point when its residual cannot
    move the recovered density (|G_mu'| tiny at large omega).
    """
    w, ok, res = _iterate(tmu, tnu, z, params, w0=w0, tol=tol)
    for _ in range(10):
        if ok.all():
            break
        good = np.flatnonzero(ok)
        if good.size == 0:
            break
        bad = np.flatnonzero(~ok)
        pos = np.searchsorted(good, bad)
        left = good[np.clip(pos - 1, 0, good.size - 1)]
        right = good[np.clip(pos, 0, good.size - 1)]
        nearest = np.where(np.abs(bad - left) <= np.abs(right - bad), left, right)
        wb, okb, resb = _iterate(tmu, tnu, z[bad], params, w0=w[nearest], tol=tol)
        w[bad] = np.where(okb, wb, w[bad])
        res[bad] = np.where(okb, resb, res[bad])
        ok[bad] = okb
        if not okb.any():
            break
    if not ok.all() and allow_swap:
        bad = np.flatnonzero(~ok)
        w2, ok2, res2 = _solve_level(tnu, tmu, z[bad], params, None, tol,
                                     allow_swap=False, allow_exact=False)
        hit = np.flatnonzero(ok2)
        if hit.size:
            zb = z[bad][hit]
            w1 = zb + 1.0 / tnu.g(w2[hit]) - w2[hit]
            w1 = np.where(w1.imag < zb.imag, w1.real + 1j * zb.imag, w1)
            w[bad[hit]] = w1
            res[bad[hit]] = res2[hit]
            ok[bad[hit]] = True
    if (not ok.all() and allow_exact
            and (tmu.is_compressed or tnu.is_compressed)
            and int(np.sum(~ok)) <= 256):
        bad = np.flatnonzero(~ok)
        we, oke, rese = _solve_level(tmu.exact(), tnu.exact(), z[bad], params,
                                     w[bad], tol, allow_swap=True,
                                     allow_exact=False)
        hit = np.flatnonzero(oke)
        if hit.size:
            w[bad[hit]] = we[hit]
            res[bad[hit]] = rese[hit]
            ok[bad[hit]] = True
    if not ok.all():
        # An isolated point's density error contributes only one cell of
        # mass; accept when the residual cannot move the density materially.
        bad = np.flatnonzero(~ok)
        _, dg = tmu.g_dg(w[bad])
        harmless = res[bad] * np.abs(dg) < 1e-5
        ok[bad[harmless]] = True
    return w, ok, res


def _ladder(tmu, tnu, x, eta_final, width, params, w0=None):
    """Height continuation over an ascending line of points.

    Descends about one decade per level so each warm start stays in the
    Newton basin.  Intermediate levels only produce warm starts, so their
    stragglers are carried forward as-is; the returned mask marks the points
    that converged at the final height.
    """
    eta_start = 0.25 * width
    if eta_start <= eta_final:
        levels = np.array([eta_final])
    else:
        n_lev = max(int(math.ceil(math.log10(eta_start / eta_final))) + 1, 2)
        levels = np.geomspace(eta_start, eta_final, n_lev)
    w = w0
    ok = np.ones(x.shape, dtype=bool)
    for j, eta in enumerate(levels):
        final = j == levels.size - 1
        lvl_tol = params.fp_tol if final else max(params.fp_tol, 1e-9)
        w, ok, _ = _solve_level(tmu, tnu, x + 1j * eta, params, w, lvl_tol)
    return w, ok


def _subordinate_line(tmu, tnu, x, eta_final, width, params, threads=1, stride=4):
    """omega_1 on the line Im z = eta_final, with a convergence mask.

    The continuation ladder runs on a strided subsample only; the remaining
    points start from interpolated omega values and are Newton-polished,
    with rescue for any that do not converge.
    """
    def run_chunk(xs_chunk):
        if xs_chunk.size <= 2 * stride:
            return _ladder(tmu, tnu, xs_chunk, eta_final, width, params)
        sub_idx = np.arange(0, xs_chunk.size, stride)
        if sub_idx[-1] != xs_chunk.size - 1:
            sub_idx = np.append(sub_idx, xs_chunk.size - 1)
        xs_sub = xs_chunk[sub_idx]
        w_sub, _ = _ladder(tmu, tnu, xs_sub, eta_final, width, params)
        w0 = (np.interp(xs_chunk, xs_sub, w_sub.real)
              + 1j * np.interp(xs_chunk, xs_sub, w_sub.imag))
        w0[sub_idx] = w_sub
        return _solve_level(tmu, tnu, xs_chunk + 1j * eta_final, params, w0,
                            params.fp_tol)[:2]

    chunks = [x[i:i + _CHUNK] for i in range(0, x.size, _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_chunk, chunks))
    else:
        parts = [run_chunk(c) for c in chunks]
    return (np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]))


# -- the convolution ----------------------------------------------------------


def free_convolve(mu: Measure, nu: Measure, params: ConvolutionParams = DEFAULT_PARAMS,
                  *, with_diagnostics=False, threads=1):
    """Free additive convolution mu ⊞ nu.

    The result is a Measure whose mean and variance are checked against the
    additivity of free cumulants (mean within 1e-4, variance within 1e-3);
    violations raise ConvolutionError, as does a mass defect beyond
    params.mass_defect_limit.
    """
    shifted = _shift_fast_path(mu, nu)
    if shifted is not None:
        return (shifted, _NO_FOLD) if with_diagnostics else shifted

    out_atoms = _surviving_atoms(mu, nu)
    atom_total = sum(m for _, m in out_atoms)
    tmu = _Transform(mu, params.transform_cells)
    tnu = _Transform(nu, params.transform_cells)
    lo_m, hi_m = mu.support()
    lo_n, hi_n = nu.support()
    lo0, hi0 = lo_m + lo_n, hi_m + hi_n
    w0 = hi0 - lo0

    # Coarse pass on the padded Minkowski support locates where mass lives.
    # Best effort is enough here: a straggler's density is clipped at the
    # Poisson peak so it cannot distort the support detection.
    pad0 = 0.05 * w0
    xc = np.linspace(lo0 - pad0, hi0 + pad0, params.coarse_points)
    eta_mid = max(params.eta, 1e-4) * (w0 + 2 * pad0)
    wc, _ = _subordinate_line(tmu, tnu, xc, eta_mid, w0 + 2 * pad0, params, threads)
    dens_c = np.clip(-tmu.g(wc).imag / math.pi, 0.0, 1.0 / (math.pi * eta_mid))
    cell = np.diff(xc)
    cmass = 0.5 * (dens_c[1:] + dens_c[:-1]) * cell
    cum = np.concatenate([[0.0], np.cumsum(cmass)])
    total_c = max(cum[-1], 1e-300)
    cut = 1e-7 * total_c
    i_lo = int(np.searchsorted(cum, cut)) - 1
    i_hi = int(np.searchsorted(cum, total_c - cut))
    lo1 = xc[max(i_lo, 0)]
    hi1 = xc[min(i_hi, xc.size - 1)]
    for p, _ in out_atoms:
        lo1, hi1 = min(lo1, p - 2 * cell[0]), max(hi1, p + 2 * cell[0])
    margin = 0.02 * (hi1 - lo1) + 2 * cell[0]
    lo1, hi1 = lo1 - margin, hi1 + margin

    # Fine pass: uniform grid plus curvature-driven refinement.  Output atoms
    # appear as Poisson bumps of known position, mass and width; they are
    # subtracted analytically so the refinement sees only the continuous
    # part, and reinstated as exact point masses at the end.
    w1 = hi1 - lo1
    eta_f = params.eta * w1
    excise = 2e-3 * w1 + 100.0 * eta_f
    xs, dens = _adaptive_density(tmu, tnu, lo1, hi1, eta_f, params, threads,
                                 atoms=out_atoms, excise=excise)
    if params.richardson:
        w_2eta, ok2 = _subordinate_line(tmu, tnu, xs, 2 * eta_f, w1, params, threads)
        rho_2 = -tmu.g(w_2eta).imag / math.pi - _atom_bumps(xs, out_atoms, 2 * eta_f)
        dens = np.where(ok2, 2.0 * dens - rho_2, dens)

    # The bump subtraction is a difference of two huge near-equal numbers
    # close to an atom; interpolate the continuous part across that window.
    dens = _excise_windows(xs, dens, out_atoms, excise)

    if dens.min() < -1e-6:
        raise ConvolutionError(
            f"recovered density fell to {dens.min():.3e}; subordination output "
            f"is unreliable (eta={eta_f:g}, support [{lo1:g}, {hi1:g}])")
    dens = np.clip(dens, 0.0, None)

    # Trim the Cauchy-smoothing tails outside the live support before
    # renormalizing; kept, their x^2-weighted mass biases the variance.
    xs, dens = _trim_tails(xs, dens, out_atoms, 0.002 * w1 + 50.0 * eta_f)
    raw = float(np.sum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs)))
    defect = abs(1.0 - raw - atom_total)
    if defect > params.mass_defect_limit:
        raise ConvolutionError(
            f"mass defect {defect:.3e} exceeds limit {params.mass_defect_limit:g} "
            f"(recovered {raw:.6f} continuous + {atom_total:.6f} atomic)")
    if raw > 0.0:
        dens = dens * ((1.0 - atom_total) / raw)
    out = Measure(atoms=out_atoms, grid=xs, density=dens)

    mean_err = abs(out.mean() - (mu.mean() + nu.mean()))
    var_err = abs(out.variance() - (mu.variance() + nu.variance()))
    if mean_err > 1e-4 or var_err > 1e-3:
        raise ConvolutionError(
            f"free cumulant self-check failed: mean error {mean_err:.2e}, "
            f"variance error {var_err:.2e} (defect {defect:.2e})")
    if with_diagnostics:
        return out, FoldDiagnostics(defect, eta_f, 1)
    return out


def _adaptive_density(tmu, tnu, lo, hi, eta_f, params, threads,
                      atoms=(), excise=0.0):
    """Recover the output density on an adaptively refined grid.

    Starts from a uniform grid of half the point budget and repeatedly splits
    the cells with the largest estimated trapezoid mass error (cell width
    squared times the local change of slope).  Cells are never split below
    the inversion height, where the Poisson-smoothed density has no further
    structure.  Poisson bumps of known output atoms are subtracted before
    the error assessment so refinement tracks the continuous part only.
    """
    width = hi - lo
    xs = np.linspace(lo, hi, params.grid_points // 2)
    ws, ok = _subordinate_line(tmu, tnu, xs, eta_f, width, params, threads)
    dens = -tmu.g(ws).imag / math.pi - _atom_bumps(xs, atoms, eta_f)
    dens = _patch_stragglers(xs, dens, ok, eta_f)
    cap = 2 * params.grid_points
    h_min = max(2.0 * eta_f, 1e-13 * width)
    for _ in range(16):
        if xs.size >= cap:
            break
        h = np.diff(xs)
        slope = np.diff(dens) / h
        curv = np.abs(np.diff(slope))
        cell_err = np.zeros(h.size)
        cell_err[1:] += curv * h[1:] ** 2
        cell_err[:-1] += curv * h[:-1] ** 2
        cell_err /= 12.0
        splittable = h > h_min
        if atoms:
            # inside the excision window the subtraction residual is noise,
            # not structure; never spend refinement points there
            mid = 0.5 * (xs[:-1] + xs[1:])
            for p, _m in atoms:
                splittable &= np.abs(mid - p) > excise
        total = float(np.sum(cell_err[splittable]))
        if total < 1e-6:
            break
        masked = np.where(splittable, cell_err, 0.0)
        thresh = max(1e-6 / h.size, 1e-3 * masked.max())
        pick = np.flatnonzero(splittable & (cell_err > thresh))
        if pick.size == 0:
            break
        if xs.size + pick.size > cap:
            order = np.argsort(cell_err[pick])[::-1]
            pick = pick[order[:cap - xs.size]]
            pick.sort()
        mids = 0.5 * (xs[pick] + xs[pick + 1])
        wm0 = 0.5 * (ws[pick] + ws[pick + 1])
        zm = mids + 1j * eta_f
        wm, okm, _ = _solve_level(tmu, tnu, zm, params, wm0, params.fp_tol)
        # a midpoint that cannot be pinned down adds no information; leave
        # its cell alone and let a later round (or the cap) settle it
        pick, keep = pick[okm], np.flatnonzero(okm)
        if pick.size == 0:
            break
        mids, wm = mids[keep], wm[keep]
        dm = -tmu.g(wm).imag / math.pi - _atom_bumps(mids, atoms, eta_f)
        xs = np.insert(xs, pick + 1, mids)
        dens = np.insert(dens, pick + 1, dm)
        ws = np.insert(ws, pick + 1, wm)
    return xs, dens


def _atom_bumps(xs, atoms, eta):
    """Poisson images of the output atoms at inversion height eta."""
    out = np.zeros_like(xs)
    for p, m in atoms:
        out += m * (eta / math.pi) / ((xs - p) ** 2 + eta ** 2)
    return out


def _excise_windows(xs, dens, atoms, excise):
    """Linear interpolation of the density across each atom's noise window."""
    if not atoms:
        return dens
    out = dens.copy()
    for p, _m in atoms:
        inside = np.abs(xs - p) <= excise
        if not inside.any() or inside.all():
            continue
        keep = ~inside
        out[inside] = np.interp(xs[inside], xs[keep], out[keep])
    return out


def _patch_stragglers(xs, dens, ok, eta_f):
    """Interpolate density values across unconverged grid points.

    Legitimate only where the surrounding density is negligible (spectral
    gap centers, where the subordination point is enormous and its residual
    is all evaluation noise).  A straggler next to real mass is a genuine
    failure and raises.
    """
    if ok.all():
        return dens
    good = np.flatnonzero(ok)
    bad = np.flatnonzero(~ok)
    if good.size < 2:
        raise SubordinationError(complex(xs[bad[0]], eta_f), math.nan, 0)
    patched = np.interp(xs[bad], xs[good], dens[good])
    level = 1e-2 * float(dens[good].max(initial=0.0))
    pos = np.searchsorted(good, bad)
    left = good[np.clip(pos - 1, 0, good.size - 1)]
    right = good[np.clip(pos, 0, good.size - 1)]
    near_mass = (patched > level) | (dens[left] > level) | (dens[right] > level)
    if np.any(near_mass):
        k = bad[near_mass][0]
        raise SubordinationError(complex(xs[k], eta_f), math.nan, 0)
    out = dens.copy()
    out[bad] = patched
    return out


def _shift_fast_path(mu, nu):
    """Convolving with a point mass is an exact translation."""
    if nu.grid.size == 0 and nu.atom_positions.size == 1:
        return mu.affine_pushforward(1.0, -float(nu.atom_positions[0]))
    if mu.grid.size == 0 and mu.atom_positions.size == 1:
        return nu.affine_pushforward(1.0, -float(mu.atom_positions[0]))
    return None


def _surviving_atoms(mu, nu):
    """Atoms of mu ⊞ nu: position a+b with mass m_a + m_b - 1 when positive.

    Only one pair can qualify since both masses must exceed one half.
    """
    if not mu.atom_positions.size or not nu.atom_positions.size:
        return []
    ia = int(np.argmax(mu.atom_masses))
    ib = int(np.argmax(nu.atom_masses))
    m = float(mu.atom_masses[ia] + nu.atom_masses[ib] - 1.0)
    if m > 1e-12:
        return [(float(mu.atom_positions[ia] + nu.atom_positions[ib]), m)]
    return []


def _trim_tails(xs, dens, atoms, expand, rel_level=1e-4):
    """Cut the grid down to where the density is alive.

    The inversion leaves a 1/d^2 Poisson baseline over the whole evaluation
    window; keeping it would bias second moments.  The live region is where
    the density exceeds ``rel_level`` of its maximum, expanded by ``expand``
    on both sides so the genuine edge roll-off survives.  Trimmed mass shows
    up in the caller's defect accounting.
    """
    dmax = float(dens.max(initial=0.0))
    if dmax <= 0.0:
        return xs, dens
    live = np.flatnonzero(dens > rel_level * dmax)
    lo_x = xs[live[0]] - expand
    hi_x = xs[live[-1]] + expand
    if atoms:
        lo_x = min(lo_x, min(p for p, _ in atoms) - expand)
        hi_x = max(hi_x, max(p for p, _ in atoms) + expand)
    i_lo = max(int(np.searchsorted(xs, lo_x, side="right")) - 1, 0)
    i_hi = min(int(np.searchsorted(xs, hi_x, side="left")), xs.size - 1)
    if i_hi - i_lo < 1:
        return xs, dens
    return xs[i_lo:i_hi + 1], dens[i_lo:i_hi + 1]


def free_convolve_n(measures, params: ConvolutionParams = DEFAULT_PARAMS,
                    *, order="left", with_diagnostics=False, threads=1):
    """Fold a list of measures under ⊞ (left fold by default, or "tree").

    The result is independent of the fold order up to the accumulated
    numerical tolerance; the balanced tree halves the error depth and is
    what the central-limit driver uses.
    """
    measures = list(measures)
    if not measures:
        raise MeasureError("free_convolve_n needs a nonempty list")
    diag = _NO_FOLD
    if order == "left":
        acc = measures[0]
        for m in measures[1:]:
            acc, d = free_convolve(acc, m, params, with_diagnostics=True, threads=threads)
            diag = diag.merge(d)
    elif order == "tree":
        layer = measures
        while len(layer) > 1:
            nxt = []
            for i in range(0, len(layer) - 1, 2):
                out, d = free_convolve(layer[i], layer[i + 1], params,
                                       with_diagnostics=True, threads=threads)
                diag = diag.merge(d)
                nxt.append(out)
            if len(layer) % 2:
                nxt.append(layer[-1])
            layer = nxt
        acc = layer[0]
    else:
        raise MeasureError(f"unknown fold order {order!r}")
    return (acc, diag) if with_diagnostics else acc


def free_convolve_pow(mu: Measure, n: int, params: ConvolutionParams = DEFAULT_PARAMS,
                      *, with_diagnostics=False, threads=1):
    """n-fold free self-convolution by binary splitting (log n convolutions)."""
    if n < 1:
        raise MeasureError("power must be a positive integer")
    diag = _NO_FOLD
    result = None
    power = mu
    k = int(n)
    while True:
        if k & 1:
            if result is None:
                result = power
            else:
                result, d = free_convolve(result, power, params,
                                          with_diagnostics=True, threads=threads)
                diag = diag.merge(d)
        k >>= 1
        if not k:
            break
        power, d = free_convolve(power, power, params,
                                 with_diagnostics=True, threads=threads)
        diag = diag.merge(d)
    return (result, diag) if with_diagnostics else result


def clt_sum(row, params: ConvolutionParams = DEFAULT_PARAMS,
            *, with_diagnostics=False, threads=1):
    """Distribution of (X_1 + ... + X_n) / B_n for a centered triangular row.

    Each measure is rescaled by 1/B_n and the row is folded under ⊞.  For
    rows of identical measures the fold uses binary splitting; otherwise a
    balanced tree.  The output is checked to have mean 0 within 1e-4 and
    variance 1 within 1e-3.
    """
    b_n = math.sqrt(row.b_n_sq)
    if not b_n > 0.0:
        raise MeasureError("row has zero total variance")
    rescaled = [m.affine_pushforward(b_n, 0.0) for m in row.measures]
    iid = all(m.is_same_representation(rescaled[0]) for m in rescaled[1:])
    if iid:
        out, diag = free_convolve_pow(rescaled[0], len(rescaled), params,
                                      with_diagnostics=True, threads=threads)
    else:
        out, diag = free_convolve_n(rescaled, params, order="tree",
                                    with_diagnostics=True, threads=threads)
    mean, var = out.centered_stats()
    if len(rescaled) > 1 and (abs(mean) > 1e-4 or abs(var - 1.0) > 1e-3):
        raise ConvolutionError(
            f"normalized sum self-check failed: mean {mean:.2e}, variance {var:.6f}")
    return (out, diag) if with_diagnostics else out
