"""Row statistics, truncation summaries, and convergence-rate functionals.

Everything here is a scalar functional of a triangular row of centered
measures: the Lindeberg tail ratio, the windowed third-moment ratio, the
truncation summary (window means, variances, relocated mass, and the
distance of the folded normalized truncation to the semicircle law), and
the right-hand sides of the Berry-Esseen type rate bounds.  None of the
rate evaluators embeds a universal constant; constants are always fitted
or supplied by the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .freeconv import ConvolutionParams, DEFAULT_PARAMS, free_convolve_n
from .measure import Measure, MeasureError, TruncationWindow, kolmogorov_distance_to_cdf
from .semicircle import STANDARD

__all__ = [
    "TriangularRow",
    "TruncationSummary",
    "GrowthFunction",
    "GClassCheck",
    "BoundReport",
    "build_row",
    "default_windows",
    "lindeberg_ratio",
    "windowed_third_ratio",
    "summarize_truncation",
    "truncated_third_moment_bound",
    "truncation_affine_bound",
    "affine_semicircle_gap",
    "third_moment_rate",
    "second_moment_rate",
    "weighted_moment_rate",
    "power_moment_rate",
    "check_g_class",
    "lindeberg_profile",
    "fit_constant",
]


@dataclass(frozen=True)
class TriangularRow:
    """A finite row of centered measures with their variances and B_n^2."""

    measures: tuple
    sigma_sq: tuple
    b_n_sq: float

    @property
    def n(self) -> int:
        return len(self.measures)

    @property
    def b_n(self) -> float:
        return math.sqrt(self.b_n_sq)


def build_row(measures, center_tol: float = 1e-9) -> TriangularRow:
    """Assemble a triangular row; every measure must be centered."""
    measures = tuple(measures)
    if not measures:
        raise MeasureError("a row needs at least one measure")
    sigma_sq = []
    for j, m in enumerate(measures):
        mean = m.moment(1)
        if abs(mean) > center_tol:
            raise MeasureError(f"measure {j} is not centered (mean {mean:.3e})")
        sigma_sq.append(m.moment(2))
    b_n_sq = float(sum(sigma_sq))
    if not b_n_sq > 0.0:
        raise MeasureError("row has zero total variance")
    return TriangularRow(measures, tuple(sigma_sq), b_n_sq)


def _check_eps(eps):
    if not 0.0 < eps <= 1.0:
        raise MeasureError(f"epsilon must lie in (0, 1], got {eps!r}")


def lindeberg_ratio(row: TriangularRow, eps: float) -> float:
    """Tail variance fraction: sum of x^2 integrals over |x| > eps B_n, over B_n^2."""
    _check_eps(eps)
    c = eps * row.b_n
    val = sum(m.tail_second_moment(c) for m in row.measures) / row.b_n_sq
    return min(max(val, 0.0), 1.0)


def windowed_third_ratio(row: TriangularRow, eps: float) -> float:
    """Windowed third-moment sum over B_n^3; never exceeds eps."""
    _check_eps(eps)
    c = eps * row.b_n
    val = sum(m.windowed_abs_third(c) for m in row.measures) / row.b_n ** 3
    if val > eps * (1.0 + 1e-9) + 1e-15:
        raise MeasureError(f"windowed third-moment ratio {val!r} exceeded its cap {eps!r}")
    return max(val, 0.0)


def default_windows(row: TriangularRow):
    """Symmetric windows [-B_n, B_n] for every row member."""
    b = row.b_n
    return [TruncationWindow(-b, b) for _ in row.measures]


@dataclass(frozen=True)
class TruncationSummary:
    """Everything the truncation construction produces for one row.

    alpha and beta_sq are the means and variances of the truncated measures,
    m_n and n_n_sq their sums, gamma_n the total relocated mass.  delta_n is
    the Kolmogorov distance between the folded normalized truncation and the
    standard semicircle law.
    """

    windows: tuple
    alpha: tuple
    beta_sq: tuple
    m_n: float
    n_n_sq: float
    gamma_n: float
    delta_n: float
    truncated: tuple
    normalized: tuple
    convolved: Measure
    mass_defect: float

    @property
    def n_n(self) -> float:
        return math.sqrt(self.n_n_sq)


def summarize_truncation(row: TriangularRow, windows,
                         params: ConvolutionParams = DEFAULT_PARAMS,
                         threads: int = 1) -> TruncationSummary:
    """Truncate each row member, normalize, fold, and measure the distance.

    Each truncated measure is recentered by its own window mean before the
    common 1/N_n rescale; the shifts add up to M_n, so the folded law is the
    law of (sum - M_n) / N_n.
    """
    windows = list(windows)
    if len(windows) != row.n:
        raise MeasureError(f"need {row.n} windows, got {len(windows)}")
    truncated, alpha, beta_sq, gammas = [], [], [], []
    for m, w in zip(row.measures, windows):
        nu = m.truncate(w)
        a, b2 = nu.centered_stats()
        truncated.append(nu)
        alpha.append(a)
        beta_sq.append(b2)
        gammas.append(1.0 - m.prob_closed_interval(w.t, w.tau))
    m_n = float(sum(alpha))
    n_n_sq = float(sum(beta_sq))
    gamma_n = float(sum(gammas))
    if not n_n_sq > 0.0:
        raise MeasureError("all truncated measures are degenerate (N_n = 0)")
    n_n = math.sqrt(n_n_sq)
    normalized = [nu.affine_pushforward(n_n, a) for nu, a in zip(truncated, alpha)]
    convolved, diag = free_convolve_n(normalized, params, order="tree",
                                      with_diagnostics=True, threads=threads)
    delta_n = kolmogorov_distance_to_cdf(convolved, STANDARD.cdf)
    return TruncationSummary(tuple(windows), tuple(alpha), tuple(beta_sq),
                             m_n, n_n_sq, gamma_n, delta_n,
                             tuple(truncated), tuple(normalized), convolved,
                             diag.mass_defect)


def truncated_third_moment_bound(summary: TruncationSummary, scale: float) -> float:
    """(2 sqrt(2) scale / N_n^{3/2}) (sum of |x|^3 integrals of the truncated parts)^{1/2}."""
    if scale <= 0.0:
        raise MeasureError("scale must be positive")
    if not summary.n_n_sq > 0.0:
        raise MeasureError("degenerate summary (N_n = 0)")
    third = sum(nu.abs_moment(3) for nu in summary.truncated)
    return 2.0 * math.sqrt(2.0) * scale * math.sqrt(third) / summary.n_n ** 1.5


def truncation_affine_bound(summary: TruncationSummary, a: float, b: float) -> float:
    """Right-hand side of the no-moment affine comparison bound.

    delta_n + gamma_n + |a b - M_n| / (pi N_n) + (2 / pi) |a / N_n - 1|,
    with the explicit constants of the semicircle shift and scale
    deviation inequalities.
    """
    if a <= 0.0:
        raise MeasureError("a must be positive")
    if not summary.n_n_sq > 0.0:
        raise MeasureError("degenerate summary (N_n = 0)")
    n_n = summary.n_n
    return (summary.delta_n + summary.gamma_n
            + abs(a * b - summary.m_n) / (math.pi * n_n)
            + (2.0 / math.pi) * abs(a / n_n - 1.0))


def affine_semicircle_gap(mu: Measure, a: float, b: float, points: int = 40001) -> float:
    """sup_x |F_mu(a (x + b)) - F_w(x)|, the left side of the affine bound."""
    if a <= 0.0:
        raise MeasureError("a must be positive")
    lo, hi = mu.support()
    xs = np.linspace(min(-2.5, lo / a - b), max(2.5, hi / a - b), points)
    bps = np.concatenate([mu.grid, mu.atom_positions]) / a - b
    xs = np.unique(np.concatenate([xs, bps, np.array([-2.0, 2.0])]))
    gap = np.abs(mu.cdf(a * (xs + b)) - STANDARD.cdf(xs))
    best = float(gap.max())
    if mu.atom_positions.size:
        at = mu.atom_positions / a - b
        left = np.abs(mu.cdf_left(mu.atom_positions) - STANDARD.cdf(at))
        best = max(best, float(left.max()))
    return best


# -- rate evaluators (constants always excluded) ------------------------------


def third_moment_rate(row: TriangularRow) -> float:
    """(sum of third absolute moments)^{1/2} / B_n^{3/2}."""
    total = sum(m.abs_moment(3) for m in row.measures)
    return math.sqrt(total) / (row.b_n * math.sqrt(row.b_n))


def second_moment_rate(row: TriangularRow, eps: float) -> float:
    """(tail ratio + windowed third ratio)^{1/2} at the given epsilon."""
    return math.sqrt(lindeberg_ratio(row, eps) + windowed_third_ratio(row, eps))


@dataclass(frozen=True)
class GrowthFunction:
    """Even weight function for the 2+g moment; power laws integrate exactly."""

    fn: object
    label: str
    power: float | None = None

    def __call__(self, x):
        return self.fn(x)

    @classmethod
    def power_law(cls, delta: float) -> "GrowthFunction":
        if not 0.0 < delta <= 1.0:
            raise MeasureError(f"power-law exponent must lie in (0, 1], got {delta!r}")
        return cls(fn=lambda x: abs(x) ** delta, label=f"|x|^{delta:g}", power=delta)


@dataclass(frozen=True)
class GClassCheck:
    ok: bool
    reason: str | None = None
    witness: tuple | None = None


def check_g_class(g, probe_grid) -> GClassCheck:
    """Verify the admissibility of a growth function on positive probes.

    Conditions: nonnegative, even, nondecreasing on the positive axis, and
    x / g(x) nondecreasing there.  Returns the first violating probe pair.
    """
    xs = np.asarray(probe_grid, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or np.any(xs <= 0.0) or np.any(np.diff(xs) <= 0.0):
        raise MeasureError("probe grid must be sorted, positive, of length >= 2")
    pos = np.asarray([float(g(float(x))) for x in xs])
    neg = np.asarray([float(g(float(-x))) for x in xs])
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise MeasureError("growth function is non-finite at a probe")
    tol = 1e-12
    for i, x in enumerate(xs):
        if pos[i] < -tol:
            return GClassCheck(False, "negative value", (float(x), float(pos[i])))
        if abs(neg[i] - pos[i]) > tol * max(1.0, abs(pos[i])):
            return GClassCheck(False, "not even", (float(x), float(neg[i] - pos[i])))
    for i in range(xs.size - 1):
        if pos[i + 1] < pos[i] * (1.0 - 1e-12) - tol:
            return GClassCheck(False, "g not nondecreasing",
                               (float(xs[i]), float(xs[i + 1])))
    with np.errstate(divide="ignore"):
        ratio = np.where(pos > 0.0, xs / np.where(pos == 0.0, 1.0, pos), np.inf)
    for i in range(xs.size - 1):
        if ratio[i + 1] < ratio[i] * (1.0 - 1e-12) - tol:
            return GClassCheck(False, "x/g(x) not nondecreasing",
                               (float(xs[i]), float(xs[i + 1])))
    return GClassCheck(True)


def _default_probes(row: TriangularRow):
    hi = max(row.b_n, max(max(abs(s) for s in m.support()) for m in row.measures))
    return np.geomspace(1e-3 * hi, hi, 64)


def weighted_moment_rate(row: TriangularRow, g) -> float:
    """(sum of x^2 g(x) integrals)^{1/2} / (B_n g(B_n)^{1/2}) for admissible g."""
    check = check_g_class(g, _default_probes(row))
    if not check.ok:
        raise MeasureError(f"growth function rejected: {check.reason} at {check.witness}")
    g_bn = float(g(row.b_n))
    if not g_bn > 0.0:
        raise MeasureError(f"g(B_n) = {g_bn!r} must be positive")
    total = sum(m.g_moment(g) for m in row.measures)
    return math.sqrt(total) / (row.b_n * math.sqrt(g_bn))


def power_moment_rate(row: TriangularRow, delta: float) -> float:
    """Rate with weight |x|^delta; at delta = 1 this is the third-moment rate."""
    return weighted_moment_rate(row, GrowthFunction.power_law(delta))


def lindeberg_profile(rows, eps: float):
    """Tail variance fractions along a sequence of rows at fixed epsilon."""
    return [lindeberg_ratio(r, eps) for r in rows]


def fit_constant(pairs) -> float:
    """Smallest C with measured <= C * rhs over all supplied pairs."""
    pairs = list(pairs)
    if not pairs:
        raise MeasureError("fit_constant needs at least one pair")
    worst = 0.0
    for measured, rhs in pairs:
        if not rhs > 0.0:
            raise MeasureError(f"rate values must be positive, got {rhs!r}")
        worst = max(worst, measured / rhs)
    return worst


@dataclass(frozen=True)
class BoundReport:
    """Per-row bundle of the measured distance and every rate evaluator."""

    n: int
    delta_measured: float
    lam: dict
    ell: dict
    rate_split: dict
    rate_third: float
    rate_weighted: float
    rate_power: float
    fitted_c: float
    mass_defect: float
