"""
Command-line front end.

Subcommands: feasibility, solve, analytic, montecarlo, sweep, compare.
CSV output uses the columns in config.CSV_COLUMNS, preceded by '#' metadata
lines. Exit codes: 0 success, 1 usage, 2 numerical, 3 I/O.
"""
import argparse
import csv
import sys
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

try:
    from .analytic_rates import user_rates
    from .channel_model import NetworkDims, PowerProfile, draw_channels, mi_optimum, mi_projection
    from .config import (
        ALL_METHODS, ANALYTIC_METHODS, CSV_COLUMNS, EXIT_IO, EXIT_NUMERICAL, EXIT_OK,
        DEFAULT_TRIALS, EXIT_USAGE, GAME_METHODS, IA_METHODS, PRESETS, SNR_GRID_DB
    )
    from .exceptions import (
        ConfigError, CsvFormatError, DimensionError, DomainError, ImproperSystemError,
        NonConvergenceError, NumericalError
    )
    from .feasibility import build_equation_system, enumerate_dmt_points, is_proper_general, is_proper_symmetric
    from .ia_solver import SolverOptions, interference_capture, solve_alternating, verify_alignment
    from .logger import logger
    from .monte_carlo import ErgodicResult, GameOptions, estimate_ergodic, simulate_ia, simulate_wf_game
    from .sweep_settings import SweepSettings, SweepSpec, merge_overrides
    from .utils import format_error_message
except ImportError:
    from analytic_rates import user_rates
    from channel_model import NetworkDims, PowerProfile, draw_channels, mi_optimum, mi_projection
    from config import (
        ALL_METHODS, ANALYTIC_METHODS, CSV_COLUMNS, EXIT_IO, EXIT_NUMERICAL, EXIT_OK,
        DEFAULT_TRIALS, EXIT_USAGE, GAME_METHODS, IA_METHODS, PRESETS, SNR_GRID_DB
    )
    from exceptions import (
        ConfigError, CsvFormatError, DimensionError, DomainError, ImproperSystemError,
        NonConvergenceError, NumericalError
    )
    from feasibility import build_equation_system, enumerate_dmt_points, is_proper_general, is_proper_symmetric
    from ia_solver import SolverOptions, interference_capture, solve_alternating, verify_alignment
    from logger import logger
    from monte_carlo import ErgodicResult, GameOptions, estimate_ergodic, simulate_ia, simulate_wf_game
    from sweep_settings import SweepSettings, SweepSpec, merge_overrides
    from utils import format_error_message


# ============================================================================
# CSV ROWS
# ============================================================================

@dataclass
class SweepRow:
    snr_db: float
    method: str
    user: str
    rate_bits: float
    ci_halfwidth: float = 0.0
    trials_used: Optional[int] = None
    trials_discarded: Optional[int] = None

    def to_csv(self) -> List[str]:
        return [
            f"{self.snr_db:g}",
            self.method,
            self.user,
            f"{self.rate_bits:.10g}",
            f"{self.ci_halfwidth:.10g}",
            "" if self.trials_used is None else str(self.trials_used),
            "" if self.trials_discarded is None else str(self.trials_discarded),
        ]


def analytic_rows(snr_db: float, method: str, rates: Sequence[float]) -> List[SweepRow]:
    rows = [SweepRow(snr_db, method, str(k), r) for k, r in enumerate(rates)]
    rows.append(SweepRow(snr_db, method, "sum", float(sum(rates))))
    return rows


def estimate_rows(snr_db: float, result: ErgodicResult) -> List[SweepRow]:
    rows = []
    labelled = [(str(k), e) for k, e in enumerate(result.per_user)] + [("sum", result.sum_rate)]
    for user, est in labelled:
        rows.append(SweepRow(snr_db, result.method, user, est.mean, est.ci_halfwidth,
                             est.trials_used, est.trials_discarded))
    return rows


def write_csv(rows: Sequence[SweepRow], handle: TextIO, metadata: Sequence[str] = ()):
    for line in metadata:
        handle.write(f"# {line}\n")
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.to_csv())


def read_csv(path: str) -> Tuple[List[str], List[SweepRow]]:
    """
    Parse a sweep CSV.

    Returns:
        (metadata lines without the leading '#', rows)

    Raises:
        CsvFormatError: If the header or a row does not follow the schema
    """
    metadata, body = [], []
    with open(path, 'r', encoding='utf-8', newline='') as f:
        for line in f:
            if line.startswith('#'):
                metadata.append(line[1:].strip())
            elif line.strip():
                body.append(line)

    reader = csv.reader(body)
    header = next(reader, None)
    if header != CSV_COLUMNS:
        raise CsvFormatError(f"{path}: expected columns {CSV_COLUMNS}, got {header}")

    rows = []
    for n, fields in enumerate(reader, start=2):
        if len(fields) != len(CSV_COLUMNS):
            raise CsvFormatError(f"{path}, row {n}: expected {len(CSV_COLUMNS)} fields, got {len(fields)}")
        try:
            rows.append(SweepRow(
                snr_db=float(fields[0]),
                method=fields[1],
                user=fields[2],
                rate_bits=float(fields[3]),
                ci_halfwidth=float(fields[4]) if fields[4] else 0.0,
                trials_used=int(fields[5]) if fields[5] else None,
                trials_discarded=int(fields[6]) if fields[6] else None,
            ))
        except ValueError as e:
            raise CsvFormatError(f"{path}, row {n}: {e}")
    return metadata, rows


def _metadata(title: str, dims: NetworkDims, methods: Sequence[str], timestamp: bool,
              seed: Optional[int] = None, trials: Optional[int] = None,
              update_order: Optional[str] = None) -> List[str]:
    lines = [title, f"dims: {dims.describe()}", f"methods: {','.join(methods)}"]
    if seed is not None:
        lines.append(f"seed: {seed}")
    if trials is not None:
        lines.append(f"trials: {trials}")
    if update_order is not None:
        lines.append(f"game_update_order: {update_order}")
    if timestamp:
        lines.append(f"generated: {datetime.now().isoformat(timespec='seconds')}")
    return lines


def _emit(rows: Sequence[SweepRow], out: Optional[str], metadata: Sequence[str]):
    if out is None:
        write_csv(rows, sys.stdout, metadata)
        return
    try:
        with open(out, 'w', encoding='utf-8', newline='') as f:
            write_csv(rows, f, metadata)
    except OSError as e:
        logger.error(f"Cannot write {out}: {e}")
        raise
    logger.info(f"Wrote {len(rows)} rows to {out}")


# ============================================================================
# SWEEPS
# ============================================================================

def parse_snr_grid(text: str) -> List[float]:
    """'0:2.5:30' (inclusive range) or '0,10,20'."""
    try:
        if ':' in text:
            start, step, stop = (float(x) for x in text.split(':'))
            if step <= 0 or stop < start:
                raise ConfigError(f"bad SNR range {text}")
            count = int(round((stop - start) / step))
            return [round(start + i * step, 10) for i in range(count + 1)]
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse SNR grid '{text}'")


def check_properness(dims: NetworkDims, methods: Sequence[str], force: bool = False):
    """IA-based methods on improper dimensions need force."""
    if not any(m in IA_METHODS or m in ANALYTIC_METHODS for m in methods):
        return
    report = is_proper_general(build_equation_system(dims))
    if report.proper:
        return
    if not force:
        raise ImproperSystemError(f"{dims.describe()} is improper ({report.summary()}); use --force to run anyway")
    logger.warning(f"Running IA methods on improper dimensions {dims.describe()} ({report.summary()})")


def run_sweep(spec: SweepSpec, force: bool = False) -> List[SweepRow]:
    """Evaluate every method at every SNR point; IA receivers share their realizations."""
    spec.validate()
    check_properness(spec.dims, spec.methods, force)
    rows = []
    for snr in spec.snr_db:
        powers = PowerProfile.equal(spec.dims.K, snr)
        ia_results = None
        for method in spec.methods:
            if method in ANALYTIC_METHODS:
                rows.extend(analytic_rows(snr, method, user_rates(method, spec.dims, powers)))
            elif method in IA_METHODS:
                if ia_results is None:
                    ia_results = simulate_ia(spec.dims, powers, spec.trials, spec.seed, spec.solver)
                rows.extend(estimate_rows(snr, ia_results[method]))
            elif method in GAME_METHODS:
                rows.extend(estimate_rows(snr, simulate_wf_game(spec.dims, powers, spec.trials, spec.seed, spec.game)))
        logger.info(f"SNR {snr:g} dB finished ({spec.dims.describe()})")
    return rows


def resolve_specs(args: argparse.Namespace) -> List[SweepSpec]:
    """Config file, then preset, then flags; one spec per network configuration."""
    base = SweepSettings(args.config).load_dict() if args.config else {}
    overrides = {
        'snr_db': parse_snr_grid(args.snr) if args.snr else None,
        'methods': args.methods.split(',') if args.methods else None,
        'trials': args.trials,
        'seed': args.seed,
        'solver_max_iters': args.max_iters,
        'solver_tol': args.tol,
        'solver_restarts': args.restarts,
        'game_max_iters': args.game_max_iters,
        'game_tol': args.game_tol,
        'game_update_order': args.update_order,
    }

    if args.preset:
        preset = PRESETS[args.preset]
        specs = []
        for K, n_t, n_r, d, dprime in preset['configs']:
            data = dict(base)
            data.update(_dims_dict(NetworkDims.symmetric(K, n_t, n_r, d, dprime)))
            data['methods'] = list(preset['methods'])
            specs.append(SweepSpec.from_dict(merge_overrides(data, overrides)))
        return specs

    dims = _optional_dims(args)
    data = dict(base)
    if dims is not None:
        data.update(_dims_dict(dims))
    if 'K' not in data:
        raise ConfigError("give --preset, --config, or the network flags --K --nt --nr --d --dprime")
    return [SweepSpec.from_dict(merge_overrides(data, overrides))]


def output_paths(out: Optional[str], specs: Sequence[SweepSpec]) -> List[Optional[str]]:
    """One file per configuration; several configurations get a K/d/d' suffix."""
    if len(specs) == 1:
        return [out]
    if out is None:
        raise ConfigError("--out is required when a preset holds several configurations")
    base = Path(out)
    paths = []
    for spec in specs:
        dims = spec.dims
        tag = f"K{dims.K}_d{dims.d[0]}_dp{dims.dprime[0]}"
        paths.append(str(base.with_name(f"{base.stem}_{tag}{base.suffix or '.csv'}")))
    return paths


# ============================================================================
# COMPARISON
# ============================================================================

@dataclass
class CompareReport:
    """Per (snr, method) deltas b - a of the mean per-user and sum rates."""

    deltas: List[Tuple[float, str, float, float]] = field(default_factory=list)
    crossovers: Dict[str, List[str]] = field(default_factory=dict)
    gaps: Dict[str, List[Tuple[float, str, float]]] = field(default_factory=dict)

    @property
    def max_abs_delta(self) -> float:
        return max((max(abs(du), abs(ds)) for _, _, du, ds in self.deltas), default=0.0)


def _rate_table(rows: Sequence[SweepRow]) -> Dict[Tuple[float, str], Tuple[float, float]]:
    """(snr, method) -> (mean per-user rate, sum rate)."""
    users: Dict[Tuple[float, str], List[float]] = {}
    sums: Dict[Tuple[float, str], float] = {}
    for row in rows:
        key = (row.snr_db, row.method)
        if row.user == "sum":
            sums[key] = row.rate_bits
        else:
            users.setdefault(key, []).append(row.rate_bits)
    return {key: (sum(users.get(key, [0.0])) / max(len(users.get(key, [])), 1), total)
            for key, total in sums.items()}


def find_crossovers(table: Dict[Tuple[float, str], Tuple[float, float]], first: str, second: str) -> List[str]:
    """SNR intervals where the sum-rate leader between two methods changes."""
    snrs = sorted(s for s, m in table if m == first and (s, second) in table)
    events = []
    previous = None
    for snr in snrs:
        lead = table[(snr, first)][1] - table[(snr, second)][1]
        if previous is not None and (previous[1] > 0) != (lead > 0):
            winner = first if lead > 0 else second
            events.append(f"{winner} overtakes in sum rate between {previous[0]:g} and {snr:g} dB")
        previous = (snr, lead)
    return events


def _signed_gaps(table, analytic: str, simulated: str) -> List[Tuple[float, str, float]]:
    """Analytic minus simulated mean per-user rate."""
    return [(snr, f"{analytic} - {simulated}", table[(snr, analytic)][0] - table[(snr, simulated)][0])
            for snr, m in sorted(table) if m == analytic and (snr, simulated) in table]


def compare_rows(rows_a: Sequence[SweepRow], rows_b: Sequence[SweepRow],
                 labels: Tuple[str, str] = ("a", "b")) -> CompareReport:
    table_a, table_b = _rate_table(rows_a), _rate_table(rows_b)
    report = CompareReport()
    for key in sorted(set(table_a) & set(table_b)):
        (user_a, sum_a), (user_b, sum_b) = table_a[key], table_b[key]
        report.deltas.append((key[0], key[1], user_b - user_a, sum_b - sum_a))

    for label, table in zip(labels, (table_a, table_b)):
        methods = sorted({m for _, m in table})
        events = []
        for i, first in enumerate(methods):
            for second in methods[i + 1:]:
                events.extend(f"{first} vs {second}: {e}" for e in find_crossovers(table, first, second))
        report.crossovers[label] = events
        report.gaps[label] = (_signed_gaps(table, 'ia_bound_thm2', 'ia_optimum')
                              + _signed_gaps(table, 'ia_projection_analytic', 'ia_projection'))
    return report


def format_compare_report(report: CompareReport, labels: Tuple[str, str]) -> str:
    lines = [f"Deltas ({labels[1]} - {labels[0]}):",
             f"{'snr_db':>8}  {'method':<24}{'per-user':>12}{'sum':>12}"]
    for snr, method, du, ds in report.deltas:
        lines.append(f"{snr:>8g}  {method:<24}{du:>+12.4f}{ds:>+12.4f}")
    if not report.deltas:
        lines.append("  (no common SNR/method points)")
    for label in labels:
        lines.append(f"Crossovers in {label}:")
        events = report.crossovers.get(label) or ["none"]
        lines.extend(f"  {e}" for e in events)
        gaps = report.gaps.get(label, [])
        if gaps:
            lines.append(f"Signed gaps in {label} (analytic - simulated, per user):")
            lines.extend(f"  {snr:>6g} dB  {name:<40}{gap:>+10.4f}" for snr, name, gap in gaps)
    return "\n".join(lines)


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def _dims_dict(dims: NetworkDims) -> dict:
    return {'K': dims.K, 'M': list(dims.M), 'N': list(dims.N), 'd': list(dims.d), 'dprime': list(dims.dprime)}


def _optional_dims(args: argparse.Namespace) -> Optional[NetworkDims]:
    values = [args.K, args.nt, args.nr, args.d, args.dprime]
    if all(v is None for v in values):
        return None
    if any(v is None for v in values):
        raise ConfigError("network flags --K --nt --nr --d --dprime must be given together")
    return NetworkDims.symmetric(*values)


def _required_dims(args: argparse.Namespace) -> NetworkDims:
    dims = _optional_dims(args)
    if dims is None:
        raise ConfigError("network flags --K --nt --nr --d --dprime are required")
    return dims


def _solver_options(args: argparse.Namespace) -> SolverOptions:
    defaults = SolverOptions()
    return SolverOptions(
        max_iters=args.max_iters if args.max_iters is not None else defaults.max_iters,
        tol=args.tol if args.tol is not None else defaults.tol,
        restarts=args.restarts if args.restarts is not None else defaults.restarts,
    )


def _game_options(args: argparse.Namespace) -> GameOptions:
    defaults = GameOptions()
    return GameOptions(
        max_iters=args.game_max_iters if args.game_max_iters is not None else defaults.max_iters,
        tol=args.game_tol if args.game_tol is not None else defaults.tol,
        update_order=args.update_order or defaults.update_order,
    )


def cmd_feasibility(args: argparse.Namespace) -> int:
    if (args.d is None) != (args.dprime is None):
        raise ConfigError("give both d and d' or neither")

    if args.d is not None:
        report = is_proper_symmetric(args.K, args.n_t, args.n_r, args.d, args.dprime)
        print(report.summary())
        print(f"  K={args.K}, N_T={args.n_t}, N_R={args.n_r}, d={args.d}, d'={args.dprime}; "
              f"diversity {args.dprime - args.d + 1}")
        print(f"  note: {report.note}")
        return EXIT_OK

    points = enumerate_dmt_points(args.K, args.n_t, args.n_r)
    print(f"Proper (d, d') pairs for K={args.K}, N_T={args.n_t}, N_R={args.n_r}:")
    print(f"{'d':>4}{'dprime':>8}{'margin':>8}{'diversity':>11}{'total_dof':>11}")
    for p in points:
        print(f"{p.d:>4}{p.dprime:>8}{p.margin:>8}{p.diversity:>11}{p.total_dof:>11}")
    if not points:
        print("  (none)")

    if args.out:
        try:
            with open(args.out, 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["d", "dprime", "margin", "diversity", "total_dof"])
                for p in points:
                    writer.writerow([p.d, p.dprime, p.margin, p.diversity, p.total_dof])
        except OSError as e:
            logger.error(f"Cannot write {args.out}: {e}")
            raise
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    dims = _required_dims(args)
    powers = PowerProfile.equal(dims.K, args.snr)
    channels = draw_channels(dims, args.seed)
    solution = solve_alternating(channels, dims, _solver_options(args), powers, args.seed)
    report = verify_alignment(channels, solution)

    print(f"{dims.describe()}, seed {args.seed}")
    print(f"  leakage     {solution.residual_leakage:.3e}")
    print(f"  iterations  {solution.iterations} (restart {solution.restart})")
    print(f"  converged   {solution.converged}")
    print(f"  aligned     {report.aligned}, ranks ok {report.ranks_ok}, unitary {report.unitary}")
    print(f"Mutual information at {args.snr:g} dB (bits):")
    print(f"{'user':>6}{'optimum':>12}{'projection':>12}{'captured':>10}")
    for k in range(dims.K):
        print(f"{k:>6}{mi_optimum(channels, solution, powers, k):>12.4f}"
              f"{mi_projection(channels, solution, powers, k):>12.4f}"
              f"{interference_capture(channels, solution, k):>10.4f}")
    return EXIT_OK


def cmd_analytic(args: argparse.Namespace) -> int:
    dims = _required_dims(args)
    methods = args.methods.split(',') if args.methods else list(ANALYTIC_METHODS)
    unknown = [m for m in methods if m not in ANALYTIC_METHODS]
    if unknown:
        raise ConfigError(f"not analytic methods: {unknown}")
    snrs = parse_snr_grid(args.snr) if args.snr else list(SNR_GRID_DB)

    rows = []
    for snr in snrs:
        powers = PowerProfile.equal(dims.K, snr)
        for method in methods:
            rows.extend(analytic_rows(snr, method, user_rates(method, dims, powers)))
    _emit(rows, args.out, _metadata("ia-dmt analytic", dims, methods, not args.no_timestamp))
    return EXIT_OK


def cmd_montecarlo(args: argparse.Namespace) -> int:
    dims = _required_dims(args)
    check_properness(dims, [args.method], args.force)
    powers = PowerProfile.equal(dims.K, args.snr)
    result = estimate_ergodic(args.method, dims, powers, args.trials, args.seed,
                              _solver_options(args), _game_options(args))
    rows = estimate_rows(args.snr, result)
    if args.out:
        _emit(rows, args.out, _metadata("ia-dmt montecarlo", dims, [args.method], not args.no_timestamp,
                                        args.seed, args.trials, result.update_order))
    print(f"{args.method} at {args.snr:g} dB, {dims.describe()}: "
          f"{result.sum_rate.trials_used} trials used, {result.sum_rate.trials_discarded} discarded")
    print(f"{'user':>6}{'rate_bits':>12}{'ci':>10}")
    for row in rows:
        print(f"{row.user:>6}{row.rate_bits:>12.4f}{row.ci_halfwidth:>10.4f}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    specs = resolve_specs(args)
    if args.save_config:
        if len(specs) != 1:
            raise ConfigError("--save-config needs a single network configuration")
        SweepSettings(args.save_config).save(specs[0])

    for spec, out in zip(specs, output_paths(args.out, specs)):
        rows = run_sweep(spec, args.force)
        order = spec.game.update_order if any(m in GAME_METHODS for m in spec.methods) else None
        _emit(rows, out, _metadata("ia-dmt sweep", spec.dims, spec.methods, not args.no_timestamp,
                                   spec.seed, spec.trials, order))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    _, rows_a = read_csv(args.first)
    _, rows_b = read_csv(args.second)
    labels = (Path(args.first).name, Path(args.second).name)
    print(format_compare_report(compare_rows(rows_a, rows_b, labels), labels))
    return EXIT_OK


# ============================================================================
# PARSER
# ============================================================================

class CliParser(argparse.ArgumentParser):
    """Usage errors become ConfigError so they map to exit code 1."""

    def error(self, message):
        raise ConfigError(message)


def _add_network_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("network (symmetric)")
    g.add_argument("--K", type=int, help="number of users")
    g.add_argument("--nt", type=int, help="transmit antennas N_T")
    g.add_argument("--nr", type=int, help="receive antennas N_R")
    g.add_argument("--d", type=int, help="streams per user")
    g.add_argument("--dprime", type=int, help="interference-free receive dimensions d'")


def _add_solver_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("IA solver")
    g.add_argument("--max-iters", dest="max_iters", type=int, help="iteration cap per restart")
    g.add_argument("--tol", type=float, help="normalized leakage threshold")
    g.add_argument("--restarts", type=int, help="random initializations")


def _add_game_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("waterfilling game")
    g.add_argument("--game-max-iters", dest="game_max_iters", type=int, help="best-response sweeps")
    g.add_argument("--game-tol", dest="game_tol", type=float, help="max relative covariance change")
    g.add_argument("--update-order", dest="update_order", choices=["sequential", "simultaneous"])


def build_parser() -> CliParser:
    parser = CliParser(prog="ia-dmt", description="Interference alignment with receive diversity")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("feasibility", help="properness test or DMT table")
    p.add_argument("K", type=int)
    p.add_argument("n_t", type=int)
    p.add_argument("n_r", type=int)
    p.add_argument("d", type=int, nargs="?")
    p.add_argument("dprime", type=int, nargs="?")
    p.add_argument("--out", help="CSV file for the DMT table")
    p.set_defaults(handler=cmd_feasibility)

    p = sub.add_parser("solve", help="solve IA on one channel draw")
    _add_network_args(p)
    _add_solver_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr", type=float, default=10.0, help="SNR in dB for the reported rates")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("analytic", help="closed-form rates over an SNR grid")
    _add_network_args(p)
    p.add_argument("--snr", help="grid 'start:step:stop' or list 'a,b,c' (dB)")
    p.add_argument("--methods", help=f"comma list from {','.join(ANALYTIC_METHODS)}")
    p.add_argument("--out")
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true")
    p.set_defaults(handler=cmd_analytic)

    p = sub.add_parser("montecarlo", help="one Monte-Carlo estimate")
    _add_network_args(p)
    _add_solver_args(p)
    _add_game_args(p)
    p.add_argument("--method", choices=list(IA_METHODS + GAME_METHODS), default="ia_optimum")
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true", help="allow improper dimensions")
    p.add_argument("--out")
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true")
    p.set_defaults(handler=cmd_montecarlo)

    p = sub.add_parser("sweep", help="SNR sweep to CSV")
    _add_network_args(p)
    _add_solver_args(p)
    _add_game_args(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", help="JSON sweep spec; flags override its values")
    p.add_argument("--save-config", dest="save_config", help="write the resolved spec as JSON")
    p.add_argument("--snr", help="grid 'start:step:stop' or list 'a,b,c' (dB)")
    p.add_argument("--methods", help=f"comma list from {','.join(ALL_METHODS)}")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--force", action="store_true", help="allow IA methods on improper dimensions")
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("compare", help="deltas and crossovers between two sweep CSVs")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(handler=cmd_compare)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch, and map errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, 'handler', None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.handler(args)
    except (ConfigError, DimensionError, DomainError, ImproperSystemError) as e:
        logger.error(format_error_message(e))
        return EXIT_USAGE
    except (NumericalError, NonConvergenceError) as e:
        logger.error(format_error_message(e))
        return EXIT_NUMERICAL
    except (CsvFormatError, OSError) as e:
        logger.error(format_error_message(e))
        return EXIT_IO
