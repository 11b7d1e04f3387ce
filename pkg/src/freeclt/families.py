"""Distribution families used by the experiment drivers.

All central-limit families are centered by construction.  The two-point
family exposes the asymmetric case, truncated_power gives polynomially
heavy tails at desk scale (compact support, unit variance), and the
counterexample row keeps a fixed variance share in one far atom so the
Lindeberg ratio stays bounded away from zero.
"""
from __future__ import annotations

import math

import numpy as np

from .measure import Measure, MeasureError

__all__ = [
    "rademacher",
    "two_point",
    "uniform_sym",
    "truncated_power",
    "uniform_cycle_row",
    "lindeberg_counterexample_row",
    "family_row",
    "FAMILY_NAMES",
]


def rademacher() -> Measure:
    return Measure(atoms=[(-1.0, 0.5), (1.0, 0.5)])


def two_point(p: float, centered: bool = True) -> Measure:
    """Two atoms with masses p and 1-p.

    Centered: atoms at -(1-p) and p, mean zero, variance p(1-p).
    Uncentered: atoms at 0 and 1 (useful where no moment condition is needed).
    """
    if not 0.0 < p < 1.0:
        raise MeasureError(f"mass parameter must lie in (0, 1), got {p!r}")
    if centered:
        return Measure(atoms=[(-(1.0 - p), p), (p, 1.0 - p)])
    return Measure(atoms=[(0.0, p), (1.0, 1.0 - p)])


def uniform_sym(half_width: float) -> Measure:
    if half_width <= 0.0:
        raise MeasureError(f"half width must be positive, got {half_width!r}")
    return Measure.uniform(-half_width, half_width)


def truncated_power(delta: float, cut: float, nodes: int = 801) -> Measure:
    """Symmetric density proportional to |x|^(-3-delta) on cut <= |x| <= K.

    K is solved so the variance equals one, which requires
    sqrt(delta / (2 + delta)) < cut < 1.  The 2+d moments are finite for
    d < delta by construction; heavier weights blow up as cut decreases.
    """
    if not 0.0 < delta <= 1.0:
        raise MeasureError(f"delta must lie in (0, 1], got {delta!r}")
    lo_cut = math.sqrt(delta / (2.0 + delta))
    if not lo_cut < cut < 1.0:
        raise MeasureError(
            f"cut must lie in ({lo_cut:.6f}, 1) for delta={delta:g}, got {cut!r}")

    def variance_gap(k):
        norm = 2.0 * (cut ** (-2.0 - delta) - k ** (-2.0 - delta)) / (2.0 + delta)
        var = 2.0 * (cut ** (-delta) - k ** (-delta)) / delta
        return var / norm - 1.0

    k_hi = 2.0 * cut
    while variance_gap(k_hi) < 0.0:
        k_hi *= 2.0
        if k_hi > 1e9:
            raise MeasureError("failed to bracket the support endpoint")
    k_lo = cut * (1.0 + 1e-12)
    for _ in range(200):
        k_mid = 0.5 * (k_lo + k_hi)
        if variance_gap(k_mid) < 0.0:
            k_lo = k_mid
        else:
            k_hi = k_mid
    k = 0.5 * (k_lo + k_hi)

    half = np.geomspace(cut, k, nodes)
    dens_half = half ** (-3.0 - delta)
    bridge = cut * (1.0 - 1e-9)
    grid = np.concatenate([-half[::-1], [-bridge, bridge], half])
    dens = np.concatenate([dens_half[::-1], [0.0, 0.0], dens_half])
    mass = np.sum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))
    return Measure(grid=grid, density=dens / mass)


def uniform_cycle_row(n: int, widths=(0.5, 1.0, 1.5)):
    """Non-identical bounded row: uniform half-widths cycling through the list."""
    widths = [float(w) for w in widths]
    return [uniform_sym(widths[j % len(widths)]) for j in range(n)]


def lindeberg_counterexample_row(n: int):
    """Row whose last member keeps half the total variance in a far atom pair.

    With a = sqrt(n - 1) the atom pair at +-a holds variance share 1/2 and
    lies outside eps B_n whenever eps < 1/sqrt(2), so the tail ratio stays
    at least 1/2 along the whole sequence instead of vanishing.
    """
    if n < 2:
        return [rademacher()]
    a = math.sqrt(n - 1.0)
    hog = Measure(atoms=[(-a, 0.5), (a, 0.5)])
    return [rademacher() for _ in range(n - 1)] + [hog]


def _build_one(cfg: dict) -> Measure:
    name = cfg.get("name")
    if name == "rademacher":
        return rademacher()
    if name == "two_point":
        return two_point(float(cfg["p"]), bool(cfg.get("centered", True)))
    if name == "uniform":
        return uniform_sym(float(cfg["half_width"]))
    if name == "truncated_power":
        return truncated_power(float(cfg["delta"]), float(cfg["cut"]),
                               int(cfg.get("nodes", 801)))
    raise MeasureError(f"unknown family {name!r}")


FAMILY_NAMES = ("rademacher", "two_point", "uniform", "truncated_power",
                "mixed", "uniform_cycle", "lindeberg_counterexample")


def family_row(cfg: dict, n: int):
    """Measures of the row at size n for a family configuration.

    Simple families are independent copies (the same object n times, which
    lets the convolution engine use binary splitting); mixed cycles through
    its component configurations.
    """
    if n < 1:
        raise MeasureError("row size must be positive")
    name = cfg.get("name")
    if name == "mixed":
        comps = [_build_one(c) for c in cfg["components"]]
        if not comps:
            raise MeasureError("mixed family needs components")
        return [comps[j % len(comps)] for j in range(n)]
    if name == "uniform_cycle":
        return uniform_cycle_row(n, cfg.get("widths", (0.5, 1.0, 1.5)))
    if name == "lindeberg_counterexample":
        return lindeberg_counterexample_row(n)
    one = _build_one(cfg)
    return [one] * n
