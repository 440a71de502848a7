"""Command line entry point: coefficient/rate tables, moment and oracle runs,
the verification report and parameter sweeps.

Every CSV starts with a schema-versioned comment line, then the column
header; floats are written in scientific notation with 9 significant digits.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import effective_lifetime, summarize
from .config import ConfigError, RunConfig, SweepSpec, load_config, load_sweep, parse_values
from .modulation import build_coefficients, coefficient_tail_mass
from .moments import IntegrationError, output_grid, simulate_moments
from .oracle import (
    TAIL_LIMIT,
    CutoffError,
    default_cutoff,
    fft_coefficients,
    quadrature_population,
    simulate_oracle,
)
from .rates import (
    ExactRates,
    average_gamma,
    build_rate_profile,
    gamma_minimum,
    rates_double_sum,
)

log = logging.getLogger("optophonon")

SCHEMA_VERSION = 1
THREADS_ENV = "OPTOPHONON_THREADS"

SIMULATE_COLUMNS = ("t", "S_ee", "nb", "g2", "Re_Seeb", "Im_Seeb", "Seendb", "b2b2", "gamma")
ORACLE_COLUMNS = SIMULATE_COLUMNS + ("trace_err", "min_eig", "tailN")
SWEEP_COLUMNS = ("peak_nb", "lifetime", "average_gamma", "final_g2", "status")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.8e}"


def write_csv(path: Path, kind: str, columns, rows, trailer: str | None = None) -> None:
    """Write one table; ``trailer`` becomes a final comment line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(f"# optophonon {kind} schema={SCHEMA_VERSION}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
        if trailer:
            fh.write(f"# {trailer}\n")


def make_table(cfg: RunConfig):
    return build_coefficients(cfg.signal, cfg.m_max)


def make_rate_source(cfg: RunConfig, table):
    if cfg.run.exact_rates:
        return ExactRates(cfg.params, table)
    return build_rate_profile(cfg.params, table, cfg.run.rate_grid)


def moment_rows(series):
    g2 = series.g2
    cols = [series.times, series.column("s_ee"), series.nb, g2,
            series.column("seeb_re"), series.column("seeb_im"),
            series.column("seendb"), series.b2b2, series.gamma]
    return np.column_stack(cols)


def _coeff_rows(table):
    return [(int(m), float(c)) for m, c in zip(table.orders, table.values)]


def _rate_rows(cfg, table, source):
    t = output_grid(cfg.run.t_end, cfg.run.output_dt)
    return np.column_stack([t, source.gamma(t), source.omega(t)])


def run_coeffs(cfg: RunConfig, out: Path) -> int:
    table = make_table(cfg)
    write_csv(out / "coeffs.csv", "coeffs", ("m", "C_m"), _coeff_rows(table))
    print(f"coefficients: M={table.M} nonzero={table.n_significant} "
          f"parseval_residual={table.parseval_residual():.3e}")
    return EXIT_OK


def run_rates(cfg: RunConfig, out: Path) -> int:
    table = make_table(cfg)
    source = make_rate_source(cfg, table)
    write_csv(out / "rates.csv", "rates", ("t", "gamma", "Omega"), _rate_rows(cfg, table, source))
    print(f"average gamma={average_gamma(cfg.params, table):.9e} "
          f"min gamma={gamma_minimum(cfg.params, table):.9e}")
    return EXIT_OK


def run_simulation(cfg: RunConfig, out: Path | None = None) -> int:
    """Moment run: writes simulate.csv (plus optional rates/coeffs) and
    prints the run summary. Returns the exit status."""
    out = Path(out if out is not None else (cfg.output.path or "."))
    table = make_table(cfg)
    source = make_rate_source(cfg, table)
    if cfg.output.emit_coeffs:
        write_csv(out / "coeffs.csv", "coeffs", ("m", "C_m"), _coeff_rows(table))
    if cfg.output.emit_rates:
        write_csv(out / "rates.csv", "rates", ("t", "gamma", "Omega"), _rate_rows(cfg, table, source))
    try:
        series = simulate_moments(cfg.params, cfg.ics, source, cfg.run.t_end,
                                  cfg.run.output_dt, cfg.run.tol)
    except IntegrationError as exc:
        rows = moment_rows(exc.series) if exc.series is not None else []
        write_csv(out / "simulate.csv", "simulate", SIMULATE_COLUMNS, rows,
                  trailer=f"INCOMPLETE: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    write_csv(out / "simulate.csv", "simulate", SIMULATE_COLUMNS, moment_rows(series))
    s = summarize(series, cfg.params, table)
    print(f"average gamma   {s['average_gamma']:.9e}")
    print(f"min gamma       {s['min_gamma']:.9e}")
    print(f"peak nb         {s['peak_nb']:.9e}")
    print(f"lifetime        {s['lifetime']:.9e}")
    print(f"final g2        {s['final_g2']:.9e}")
    return EXIT_OK


def _oracle_cutoff(cfg: RunConfig) -> int:
    return cfg.run.fock_cutoff if cfg.run.fock_cutoff is not None else default_cutoff(cfg.params)


def run_oracle(cfg: RunConfig, out: Path) -> int:
    table = make_table(cfg)
    source = make_rate_source(cfg, table)
    try:
        series = simulate_oracle(cfg.params, cfg.ics, source, _oracle_cutoff(cfg),
                                 cfg.run.t_end, cfg.run.output_dt, cfg.run.tol)
    except (CutoffError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    rows = np.column_stack([moment_rows(series), series.trace_err, series.min_eig, series.tail])
    write_csv(out / "oracle.csv", "oracle", ORACLE_COLUMNS, rows)
    print(f"fock cutoff {series.fock_cutoff}, max tail {np.max(series.tail):.3e}, "
          f"max trace error {np.max(series.trace_err):.3e}")
    return EXIT_OK


@dataclasses.dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    enforced: bool = True

    def line(self) -> str:
        tag = ("PASS" if self.passed else "FAIL") if self.enforced else "INFO"
        return f"{tag} {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def _rel_dev(a, b, floor=1e-6):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ok = ~(np.isnan(a) | np.isnan(b))
    return float(np.max(np.abs(a[ok] - b[ok]) / np.maximum(np.abs(b[ok]), floor)))


def _cauchy_schwarz(states) -> float:
    """Largest |<S_ee b>|^2 - <S_ee><S_ee b+b> over the rows."""
    s, zr, zi, sn = states[:, 0], states[:, 1], states[:, 2], states[:, 4]
    return float(np.max(zr * zr + zi * zi - s * sn))


def verify_checks(cfg: RunConfig) -> list[Check]:
    """Moments vs oracle vs quadrature, plus table and rate consistency."""
    checks = []
    table = make_table(cfg)
    ref = fft_coefficients(cfg.signal, table.M)
    checks.append(Check("coefficients_vs_fft", float(np.max(np.abs(ref - table.values))), 1e-8,
                        bool(np.max(np.abs(ref - table.values)) <= 1e-8)))
    res = table.parseval_residual()
    checks.append(Check("parseval", res, 1e-8, res <= 1e-8))
    tail = coefficient_tail_mass(table, table.M)
    checks.append(Check("coefficient_tail_mass", tail, 1e-12, tail <= 1e-12))

    exact = ExactRates(cfg.params, table)
    worst = 0.0
    for t in np.linspace(0.0, 2.0 * math.pi / cfg.signal.omega, 7):
        g_ref, o_ref = rates_double_sum(cfg.params, table, t)
        scale = max(abs(g_ref), abs(o_ref), 1e-300)
        worst = max(worst, abs(exact.gamma(t) - g_ref) / scale, abs(exact.omega(t) - o_ref) / scale)
    checks.append(Check("rates_vs_double_sum", worst, 1e-10, worst <= 1e-10))

    source = make_rate_source(cfg, table)
    try:
        moments = simulate_moments(cfg.params, cfg.ics, source, cfg.run.t_end,
                                   cfg.run.output_dt, cfg.run.tol)
    except IntegrationError as exc:
        checks.append(Check(f"moment_integration ({exc})", math.nan, 0.0, False))
        return checks
    quad_s = quadrature_population(source, moments.times, cfg.ics.s_ee)
    dev = float(np.max(np.abs(moments.column("s_ee") - quad_s)))
    checks.append(Check("population_vs_quadrature", dev, 1e-6, dev <= 1e-6))
    cs = _cauchy_schwarz(moments.states)
    checks.append(Check("cauchy_schwarz_moments", cs, 1e-9, cs <= 1e-9))

    gmin = gamma_minimum(cfg.params, table)
    s = moments.column("s_ee")
    over = float(max(np.max(s) - cfg.ics.s_ee, -np.min(s)))
    checks.append(Check("population_bounds", over, 0.0, over <= 1e-12, enforced=gmin >= 0.0))

    cutoff = _oracle_cutoff(cfg)
    try:
        oracle = simulate_oracle(cfg.params, cfg.ics, source, cutoff, cfg.run.t_end,
                                 cfg.run.output_dt, cfg.run.tol, escalate=False)
    except RuntimeError as exc:
        checks.append(Check(f"oracle_integration ({exc})", math.nan, 0.0, False))
        return checks
    tail_max = float(np.max(oracle.tail))
    checks.append(Check(f"tail_occupation (N={cutoff})", tail_max, TAIL_LIMIT, tail_max <= TAIL_LIMIT))
    trace = float(np.max(oracle.trace_err))
    checks.append(Check("oracle_trace", trace, 1e-10, trace <= 1e-10))
    min_eig = float(np.min(oracle.min_eig))
    checks.append(Check("oracle_min_eigenvalue", min_eig, -1e-8, min_eig >= -1e-8, enforced=False))
    cs = _cauchy_schwarz(oracle.states)
    checks.append(Check("cauchy_schwarz_oracle", cs, 1e-9, cs <= 1e-9))
    for name, a, b in (("S_ee", moments.column("s_ee"), oracle.column("s_ee")),
                       ("nb", moments.nb, oracle.nb),
                       ("g2", moments.g2, oracle.g2)):
        d = _rel_dev(a, b)
        checks.append(Check(f"moments_vs_oracle_{name}", d, 1e-3, d <= 1e-3))
    return checks


def run_verify(cfg: RunConfig, out: Path | None = None) -> int:
    checks = verify_checks(cfg)
    lines = [c.line() for c in checks]
    for line in lines:
        print(line)
    failed = [c for c in checks if c.enforced and not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed" if not failed
          else f"{len(failed)} check(s) failed")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_FAILED if failed else EXIT_OK


def sweep_point(spec: SweepSpec, value: float) -> tuple:
    """One sweep row; failures are reported in the status column."""
    from .config import with_field

    try:
        cfg = with_field(spec.base, spec.axis, value)
        table = make_table(cfg)
        source = make_rate_source(cfg, table)
        series = simulate_moments(cfg.params, cfg.ics, source, cfg.run.t_end,
                                  cfg.run.output_dt, cfg.run.tol)
        s = summarize(series, cfg.params, table)
        return (value, s["peak_nb"], s["lifetime"], s["average_gamma"], s["final_g2"], "ok")
    except (ValueError, IntegrationError) as exc:
        msg = " ".join(str(exc).replace(",", ";").split())
        return (value, math.nan, math.nan, math.nan, math.nan, f"error: {msg}")


def sweep_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def run_sweep(spec: SweepSpec, out: Path | None = None, threads: int | None = None) -> int:
    out = Path(out if out is not None else (spec.base.output.path or "."))
    threads = threads if threads is not None else sweep_threads()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(lambda v: sweep_point(spec, v), spec.values))
    write_csv(out / "sweep.csv", "sweep", (spec.axis,) + SWEEP_COLUMNS, rows)
    for row in rows:
        print(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return EXIT_OK if all(r[-1] == "ok" for r in rows) else EXIT_FAILED


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    run = cfg.run
    if args.exact_rates:
        run = dataclasses.replace(run, exact_rates=True)
    if args.t_end is not None:
        if not args.t_end > 0:
            raise ConfigError(f"--t-end must be > 0, got {args.t_end}")
        run = dataclasses.replace(run, t_end=args.t_end)
    if args.tol is not None:
        if not 1e-12 <= args.tol <= 1e-4:
            raise ConfigError(f"--tol must lie in [1e-12, 1e-4], got {args.tol}")
        run = dataclasses.replace(run, tol=args.tol)
    if args.fock_cutoff is not None:
        if args.fock_cutoff < 1:
            raise ConfigError(f"--fock-cutoff must be >= 1, got {args.fock_cutoff}")
        run = dataclasses.replace(run, fock_cutoff=args.fock_cutoff)
    return dataclasses.replace(cfg, run=run)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with [system] [signal] [run] [output]")
    common.add_argument("--out", type=Path, help="output directory (default: [output] path or .)")
    common.add_argument("--exact-rates", action="store_true",
                        help="evaluate gamma(t) exactly instead of the tabulated profile")
    common.add_argument("--t-end", type=float, help="final time in units of 1/kappa_c")
    common.add_argument("--tol", type=float, help="integrator tolerance")
    common.add_argument("--fock-cutoff", type=int, help="phonon Fock cutoff for the oracle")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="optophonon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common], help="write the coefficient table C_m")
    sub.add_parser("rates", parents=[common], help="write gamma(t) and Omega(t)")
    sub.add_parser("simulate", parents=[common], help="integrate the moment equations")
    sub.add_parser("oracle", parents=[common], help="integrate the density-matrix reference")
    sub.add_parser("verify", parents=[common], help="run the consistency checks")
    sw = sub.add_parser("sweep", parents=[common],
                        help=f"sweep one parameter (threads from ${THREADS_ENV})")
    sw.add_argument("--axis", help="field to sweep, e.g. lambda, kappa, A_1, nbar")
    sw.add_argument("--values", help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        if args.command == "sweep":
            values = parse_values(args.values) if args.values is not None else None
            spec = load_sweep(text, args.axis, values)
            spec = dataclasses.replace(spec, base=_apply_overrides(spec.base, args))
            return run_sweep(spec, args.out)
        cfg = _apply_overrides(load_config(text), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out if args.out is not None else (cfg.output.path or "."))
    if args.command == "coeffs":
        return run_coeffs(cfg, out)
    if args.command == "rates":
        return run_rates(cfg, out)
    if args.command == "simulate":
        return run_simulation(cfg, out)
    if args.command == "oracle":
        return run_oracle(cfg, out)
    return run_verify(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
