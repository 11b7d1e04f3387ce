"""Batch experiment runner: central-limit sweeps, rate reports, demos.

Configuration is one JSON document; outputs are CSV tables (fixed schema,
9 significant digits, byte-reproducible) and self-contained log-log SVG
plots regenerable from the CSV alone.  Exit codes: 0 success, 2 config
error, 3 numerical failure.

Timing is off by default so that CSV outputs are byte-identical across
thread counts and reruns; set "record_timing": true to fill the wall_ms
column (and forfeit byte reproducibility of that column).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .families import FAMILY_NAMES, family_row
from .freeconv import ConvolutionError, ConvolutionParams, clt_sum, free_convolve
from .measure import Measure, MeasureError, kolmogorov_distance, kolmogorov_distance_to_cdf
from .oracle import EnsembleSpec, free_sum_esd
from .semicircle import STANDARD
from .svgplot import log_log_svg

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "main",
           "run_clt_sweep", "run_lindeberg_demo", "run_oracle_check",
           "run_bounds_report"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


DEFAULT_EPSILONS = (0.05, 0.1, 0.25, 0.5, 1.0)


@dataclass
class ExperimentConfig:
    family: dict
    n_values: list
    epsilons: list = field(default_factory=lambda: list(DEFAULT_EPSILONS))
    g_delta: float = 0.5
    conv: ConvolutionParams = field(default_factory=ConvolutionParams)
    oracle: EnsembleSpec | None = None
    output_prefix: str = "report"
    record_timing: bool = False
    threads: int = 1


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {"family", "n_values", "epsilons", "g_spec", "conv_params",
             "oracle_spec", "output_prefix", "record_timing"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    family = raw.get("family")
    if not isinstance(family, dict) or "name" not in family:
        raise ConfigError("config needs a family object with a name")
    if family["name"] not in FAMILY_NAMES:
        raise ConfigError(f"unknown family {family['name']!r}; "
                          f"expected one of {sorted(FAMILY_NAMES)}")
    try:
        family_row(family, 1)
    except (MeasureError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad family parameters: {exc}") from exc
    n_values = raw.get("n_values")
    if (not isinstance(n_values, list) or not n_values
            or any(int(n) != n or n < 1 for n in n_values)
            or sorted(n_values) != n_values):
        raise ConfigError("n_values must be a nonempty ascending list of positive integers")
    epsilons = raw.get("epsilons", list(DEFAULT_EPSILONS))
    if not epsilons or any(not 0.0 < e <= 1.0 for e in epsilons):
        raise ConfigError("epsilons must lie in (0, 1]")
    g_spec = raw.get("g_spec", 0.5)
    if isinstance(g_spec, dict):
        g_spec = g_spec.get("delta", 0.5)
    g_delta = float(g_spec)
    if not 0.0 < g_delta <= 1.0:
        raise ConfigError("g_spec delta must lie in (0, 1]")
    try:
        conv = ConvolutionParams(**raw.get("conv_params", {}))
    except (TypeError, MeasureError) as exc:
        raise ConfigError(f"bad conv_params: {exc}") from exc
    oracle = None
    if raw.get("oracle_spec") is not None:
        try:
            oracle = EnsembleSpec(**raw["oracle_spec"])
        except (TypeError, MeasureError) as exc:
            raise ConfigError(f"bad oracle_spec: {exc}") from exc
    return ExperimentConfig(
        family=family,
        n_values=[int(n) for n in n_values],
        epsilons=[float(e) for e in epsilons],
        g_delta=g_delta,
        conv=conv,
        oracle=oracle,
        output_prefix=str(raw.get("output_prefix", "report")),
        record_timing=bool(raw.get("record_timing", False)),
    )


# -- formatting ---------------------------------------------------------------


def _fmt9(x) -> str:
    """Decimal with 9 significant digits, no exponent notation."""
    x = float(x)
    if x == 0.0:
        return "0"
    return np.format_float_positional(x, precision=9, unique=False, fractional=False)


def _eps_col(eps: float) -> str:
    return f"rhs_thm3_eps{eps:g}"


def _csv_header(epsilons) -> list:
    return (["n", "delta", "rhs_cg"] + [_eps_col(e) for e in epsilons]
            + ["rhs_thm4", "rhs_cor", "fitted_c", "mass_defect", "wall_ms"])


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# -- report computation --------------------------------------------------------


def _report_rows(cfg: ExperimentConfig):
    """One BoundReport per n for the configured family."""
    g = bounds.GrowthFunction.power_law(cfg.g_delta)
    reports = []
    fit_pairs = []
    for n in cfg.n_values:
        t0 = time.perf_counter()
        row = bounds.build_row(family_row(cfg.family, n))
        out, diag = clt_sum(row, cfg.conv, with_diagnostics=True, threads=cfg.threads)
        delta = kolmogorov_distance_to_cdf(out, STANDARD.cdf)
        lam = {e: bounds.lindeberg_ratio(row, e) for e in cfg.epsilons}
        ell = {e: bounds.windowed_third_ratio(row, e) for e in cfg.epsilons}
        split = {e: bounds.second_moment_rate(row, e) for e in cfg.epsilons}
        rate_third = bounds.third_moment_rate(row)
        rate_weighted = bounds.weighted_moment_rate(row, g)
        rate_power = bounds.power_moment_rate(row, cfg.g_delta)
        fit_pairs.append((delta, rate_third))
        fitted = bounds.fit_constant(fit_pairs)
        wall_ms = (time.perf_counter() - t0) * 1e3 if cfg.record_timing else 0.0
        reports.append((bounds.BoundReport(
            n=n, delta_measured=delta, lam=lam, ell=ell, rate_split=split,
            rate_third=rate_third, rate_weighted=rate_weighted,
            rate_power=rate_power, fitted_c=fitted,
            mass_defect=diag.mass_defect), wall_ms))
    return reports


def _rows_to_csv(cfg, reports):
    rows = []
    for rep, wall_ms in reports:
        cells = [str(rep.n), _fmt9(rep.delta_measured), _fmt9(rep.rate_third)]
        cells += [_fmt9(rep.rate_split[e]) for e in cfg.epsilons]
        cells += [_fmt9(rep.rate_weighted), _fmt9(rep.rate_power),
                  _fmt9(rep.fitted_c), _fmt9(rep.mass_defect),
                  str(int(round(wall_ms)))]
        rows.append(cells)
    return rows


def run_bounds_report(cfg: ExperimentConfig) -> str:
    """CSV of measured distances and every rate column, one row per n."""
    reports = _report_rows(cfg)
    path = cfg.output_prefix + ".csv"
    _write_csv(path, _csv_header(cfg.epsilons), _rows_to_csv(cfg, reports))
    return path


def run_clt_sweep(cfg: ExperimentConfig):
    """Bounds report plus a log-log plot of the distance against every rate."""
    reports = _report_rows(cfg)
    csv_path = cfg.output_prefix + ".csv"
    _write_csv(csv_path, _csv_header(cfg.epsilons), _rows_to_csv(cfg, reports))
    xs = [rep.n for rep, _ in reports]
    series = {"delta": [rep.delta_measured for rep, _ in reports],
              "rhs_cg": [rep.rate_third for rep, _ in reports]}
    for e in cfg.epsilons:
        series[_eps_col(e)] = [rep.rate_split[e] for rep, _ in reports]
    series["rhs_thm4"] = [rep.rate_weighted for rep, _ in reports]
    series["rhs_cor"] = [rep.rate_power for rep, _ in reports]
    svg_path = cfg.output_prefix + ".svg"
    with open(svg_path, "w") as fh:
        fh.write(log_log_svg(xs, series, title="Distance to the semicircle law vs n",
                             xlabel="n", ylabel="value"))
    return csv_path, svg_path


def run_lindeberg_demo(cfg: ExperimentConfig) -> str:
    """Tail ratios and distances along the row sequence, with a verdict row.

    The verdict on the last row is "violated" when the tail ratio at the
    smallest configured epsilon has not decayed (still above 0.05 and above
    half its initial value); bounded non-identical families decay to zero.
    """
    eps_list = cfg.epsilons
    rows = []
    lam_track = []
    for n in cfg.n_values:
        row = bounds.build_row(family_row(cfg.family, n))
        out = clt_sum(row, cfg.conv, threads=cfg.threads)
        delta = kolmogorov_distance_to_cdf(out, STANDARD.cdf)
        lams = [bounds.lindeberg_ratio(row, e) for e in eps_list]
        lam_track.append(lams[0])
        rows.append([str(n)] + [_fmt9(v) for v in lams] + [_fmt9(delta), ""])
    violated = lam_track[-1] > max(0.05, 0.5 * lam_track[0])
    rows[-1][-1] = "violated" if violated else "ok"
    header = ["n"] + [f"lambda_eps{e:g}" for e in eps_list] + ["delta", "lindeberg_status"]
    path = cfg.output_prefix + ".csv"
    _write_csv(path, header, rows)
    return path


def run_oracle_check(cfg: ExperimentConfig) -> str:
    """Distance between the analytic normalized sum and the Monte Carlo ESD."""
    if cfg.oracle is None:
        raise ConfigError("oracle-check needs an oracle_spec")
    rows = []
    for n in cfg.n_values:
        row = bounds.build_row(family_row(cfg.family, n))
        analytic = clt_sum(row, cfg.conv, threads=cfg.threads)
        b_n = row.b_n
        rescaled = [m.affine_pushforward(b_n, 0.0) for m in row.measures]
        esd = free_sum_esd(rescaled, cfg.oracle, threads=cfg.threads)
        d = kolmogorov_distance(analytic, esd)
        rows.append([str(n), _fmt9(d), "1" if d > 0.03 else "0"])
    path = cfg.output_prefix + ".csv"
    _write_csv(path, ["n", "delta_oracle", "flagged"], rows)
    return path


def _run_convolve(args) -> int:
    with open(args.a) as fh:
        mu = Measure.from_json(json.load(fh))
    with open(args.b) as fh:
        nu = Measure.from_json(json.load(fh))
    params = ConvolutionParams()
    if args.config:
        params = load_config(args.config).conv
    out = free_convolve(mu, nu, params, threads=args.threads)
    text = json.dumps(out.to_json())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="freeclt",
        description="Free central limit theorem experiments: convolution sweeps, "
                    "rate reports, Lindeberg demos, Monte Carlo cross-checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        p.add_argument("--config", required=needs_config,
                       help="path to the JSON experiment configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the oracle seed from the config")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; never changes numeric output")

    for name, help_text in [
            ("clt-sweep", "sweep n, emit rate CSV and log-log SVG"),
            ("lindeberg", "tail-ratio demo along a triangular family"),
            ("oracle-check", "compare the analytic sum with the matrix ensemble"),
            ("bounds-report", "rate CSV only")]:
        p = sub.add_parser(name, help=help_text)
        add_common(p)

    p = sub.add_parser("convolve", help="free-convolve two measure JSON files")
    p.add_argument("--a", required=True, help="first measure JSON file")
    p.add_argument("--b", required=True, help="second measure JSON file")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    add_common(p, needs_config=False)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "convolve":
            return _run_convolve(args)
        cfg = load_config(args.config)
        cfg.threads = max(int(args.threads), 1)
        if args.seed is not None and cfg.oracle is not None:
            cfg.oracle = EnsembleSpec(cfg.oracle.matrix_size, cfg.oracle.trials,
                                      int(args.seed), cfg.oracle.eigensolver)
        if args.command == "clt-sweep":
            csv_path, svg_path = run_clt_sweep(cfg)
            print(csv_path)
            print(svg_path)
        elif args.command == "lindeberg":
            print(run_lindeberg_demo(cfg))
        elif args.command == "oracle-check":
            print(run_oracle_check(cfg))
        elif args.command == "bounds-report":
            print(run_bounds_report(cfg))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvolutionError, MeasureError, OSError, json.JSONDecodeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
