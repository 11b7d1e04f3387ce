"""Numerical free probability: compact measures, semicircle analytics,
free additive convolution by subordination, convergence-rate functionals,
and a random-matrix Monte Carlo cross-check."""

from .measure import (Measure, MeasureError, TruncationWindow,
                      kolmogorov_distance, kolmogorov_distance_to_cdf)
from .semicircle import STANDARD, SemicircleLaw, scale_deviation, shift_deviation
from .freeconv import (ConvolutionError, ConvolutionParams, DEFAULT_PARAMS,
                       FoldDiagnostics, SubordinationError, cauchy_transform,
                       clt_sum, free_convolve, free_convolve_n, free_convolve_pow,
                       subordinator)
from .bounds import (BoundReport, GClassCheck, GrowthFunction, TriangularRow,
                     TruncationSummary, affine_semicircle_gap, build_row,
                     check_g_class, default_windows, fit_constant,
                     lindeberg_profile, lindeberg_ratio, power_moment_rate,
                     second_moment_rate, summarize_truncation,
                     third_moment_rate, truncated_third_moment_bound,
                     truncation_affine_bound, weighted_moment_rate,
                     windowed_third_ratio)
from .oracle import (EnsembleSpec, free_sum_esd, haar_orthogonal,
                     jacobi_eigenvalues, spectral_sample, symmetric_eigenvalues)

__version__ = "0.1.0"
