"""Monte Carlo free convolution via randomly rotated symmetric matrices.

Sums of independently rotated large symmetric matrices are asymptotically
free, so the pooled eigenvalue distribution of

    sum_j  Q_j diag(sample_j) Q_j^T,      Q_j Haar orthogonal,

approximates the free additive convolution of the sampled measures.  This
is an independent route to the same object the analytic engine computes,
used for validation only.  Spectra are deterministic quantile samples so
the only noise left is rotation-induced.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measure import Measure, MeasureError

__all__ = [
    "EnsembleSpec",
    "spectral_sample",
    "haar_orthogonal",
    "jacobi_eigenvalues",
    "symmetric_eigenvalues",
    "free_sum_esd",
]


@dataclass(frozen=True)
class EnsembleSpec:
    """Matrix size, trial count, seed, and eigensolver selection."""

    matrix_size: int
    trials: int
    seed: int
    eigensolver: str = "lapack"

    def __post_init__(self):
        if self.matrix_size < 16:
            raise MeasureError(f"matrix size must be at least 16, got {self.matrix_size}")
        if self.trials < 1:
            raise MeasureError("trial count must be positive")
        if self.eigensolver not in ("lapack", "jacobi"):
            raise MeasureError(f"unknown eigensolver {self.eigensolver!r}")


def spectral_sample(mu: Measure, n: int) -> np.ndarray:
    """Deterministic spectrum: quantiles of mu at (i - 1/2) / n, sorted.

    The empirical measure of the sample is within 1/n of mu in Kolmogorov
    distance.
    """
    if n < 16:
        raise MeasureError(f"sample size must be at least 16, got {n}")
    levels = (np.arange(n) + 0.5) / n
    return np.sort(np.asarray(mu.quantile(levels), dtype=float))


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian with sign-fixed R."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def jacobi_eigenvalues(a, tol_scale: float = 1e-10, max_sweeps: int = 40) -> np.ndarray:
    """Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.

    Sweeps row pairs in fixed cyclic order until the off-diagonal Frobenius
    norm falls below tol_scale times the matrix Frobenius norm.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MeasureError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-10 * max(1.0, np.abs(a).max())):
        raise MeasureError("matrix must be symmetric")
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol_scale * scale:
            return np.sort(np.diag(a).copy())
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
    raise MeasureError(f"Jacobi sweep cap {max_sweeps} hit (off-diagonal {off:.3e})")


def symmetric_eigenvalues(a, method: str = "lapack") -> np.ndarray:
    if method == "jacobi":
        return jacobi_eigenvalues(a)
    return np.sort(np.linalg.eigvalsh(np.asarray(a, dtype=float)))


def free_sum_esd(measures, spec: EnsembleSpec, threads: int = 1) -> Measure:
    """Pooled empirical spectral distribution of the rotated-sum ensemble.

    Per trial, each measure's quantile spectrum is conjugated by a fresh
    Haar orthogonal matrix and the conjugates are summed; eigenvalues are
    pooled across trials with mass 1/(N * trials) each.  Per-trial random
    streams come from spawning the seed, so pooling is reproducible for any
    thread count.
    """
    measures = list(measures)
    if not measures:
        raise MeasureError("free_sum_esd needs a nonempty list")
    n = spec.matrix_size
    samples = [spectral_sample(m, n) for m in measures]
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.trials)

    def one_trial(i):
        rng = np.random.Generator(np.random.Philox(seeds[i]))
        total = np.zeros((n, n))
        for sample in samples:
            q = haar_orthogonal(n, rng)
            total += (q * sample) @ q.T
        try:
            return symmetric_eigenvalues(total, spec.eigensolver)
        except MeasureError as exc:
            raise MeasureError(f"trial {i}: {exc}") from exc

    order = range(spec.trials)
    if threads > 1 and spec.trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(one_trial, order))
    else:
        spectra = [one_trial(i) for i in order]
    pooled = np.concatenate(spectra)
    mass = 1.0 / pooled.size
    return Measure(atoms=zip(pooled, np.full(pooled.size, mass)))
