"""Command-line front end: ``automation-inequality {sweep,grid,signs,oring,skills}``.

Exit codes: 0 success, 1 domain or runtime failure, 2 invalid arguments.
Options may also come from a ``--config`` file of ``key = value`` lines
(keys are option names, dashes or underscores); flags on the command line win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import oring, skills, statics, sweep
from .core import Correlation, ScenarioParams
from .errors import LoadError, ModelError, ParameterError

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

DEFAULT_RHOS = "-2,-1,-0.5,0,0.5,0.9"


class UsageError(Exception):
    pass


def read_config(path: str) -> dict[str, str]:
    """``key = value`` per line; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{n}: expected 'key = value', got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _common(p: argparse.ArgumentParser, formats=("csv", "json"), default="csv"):
    p.add_argument("--config", help="key = value file; command-line flags override it")
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")


def _scenario(p: argparse.ArgumentParser):
    p.add_argument("--b", type=float, default=4.0, help="high skill level B (default 4)")
    p.add_argument("--c", type=float, default=2.0, help="skill ratio C, 1 < C < B (default 2)")
    p.add_argument("--corr", choices=[c.value for c in Correlation], default="positive")
    p.add_argument("--rho", type=float, default=0.0, help="CES substitution parameter, <= 1")


def _axis(p: argparse.ArgumentParser):
    p.add_argument("--a-min", type=float, default=0.0)
    p.add_argument("--a-max", type=float, default=None, help="default 2*B*C")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--spacing", choices=["linear", "log"], default="linear")


def build_parser() -> argparse.ArgumentParser:
    return _build()[0]


def _build() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="automation-inequality", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="inequality along one capability axis")
    _common(p)
    _scenario(p)
    _axis(p)
    p.add_argument("--task", type=int, choices=[1, 2], default=1)

    p = sub.add_parser("grid", help="inequality over a grid of both capabilities")
    _common(p)
    _scenario(p)
    _axis(p)

    p = sub.add_parser("signs", help="check the comparative-statics sign table")
    _common(p, formats=("json",), default="json")
    p.add_argument("--seed", type=_nonneg_int, required=True)
    p.add_argument("--draws", type=_nonneg_int, default=200)
    p.add_argument("--rhos", type=_float_list, default=DEFAULT_RHOS)
    p.add_argument("--b-max", type=float, default=10.0)
    p.add_argument("--columns", type=_name_list, default=",".join(statics.COLUMNS))
    p.add_argument("--zero-tol", type=float, default=statics.Tolerances.zero_tol)
    p.add_argument("--expected-fixture", help="JSON sign table to check instead of the built-in one")
    p.add_argument("--list-points", choices=["all", "mismatches", "none"], default="mismatches")

    p = sub.add_parser("oring", help="assortative matching Monte Carlo and conditional oracle")
    _common(p, formats=("json",), default="json")
    p.add_argument("--seed", type=_nonneg_int, required=True)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=0.5)
    p.add_argument("--corr-pop", type=float, default=0.0)
    p.add_argument("--n", type=int, default=2, help="firm size")
    p.add_argument("--workers", type=int, default=100_000)
    p.add_argument("--oracle-draws", type=_nonneg_int, default=10**6)
    p.add_argument("--raw-levels", action="store_true", help="pool raw level deviations (no per-firm scaling)")

    p = sub.add_parser("skills", help="weighted skill correlations by group")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--groups", type=_name_list, required=True, help="comma-separated group label columns")
    p.add_argument("--id-column", default="id")
    p.add_argument("--skill-a", default="skill_a")
    p.add_argument("--skill-b", default="skill_b")
    p.add_argument("--weight", default="weight", help="weight column; all weights are 1 if absent")
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--min-size", type=int, default=skills.DEFAULT_MIN_SIZE)
    p.add_argument("--delimiter", default=",")
    return parser, dict(sub.choices)


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser, subparsers = _build()
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and known.command:
        config = read_config(known.config)
        subparser = subparsers.get(known.command)
        if subparser is not None:
            dests = {a.dest for a in subparser._actions}
            unknown = sorted(set(config) - dests)
            if unknown:
                raise UsageError(f"unknown config key(s) for {known.command}: {unknown}")
            # string defaults go through each option's type conversion
            for action in subparser._actions:
                if action.dest in config:
                    action.required = False
                    if action.const is True:  # store_true flag
                        config[action.dest] = config[action.dest].lower() in ("1", "true", "yes", "on")
            subparser.set_defaults(**config)
    return parser.parse_args(argv)


def _write(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise LoadError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _note(args, text: str) -> None:
    # diagnostics share stdout only when the data goes to a file
    print(text, file=sys.stdout if args.out else sys.stderr)


def _params(args) -> ScenarioParams:
    return ScenarioParams(args.b, args.c, Correlation(args.corr))


def _sweep_config(args, task) -> sweep.SweepConfig:
    return sweep.SweepConfig(
        _params(args), args.rho, task, args.a_min, args.a_max, args.points, args.spacing
    )


def _emit_series(args, series: sweep.SweepSeries) -> None:
    _write(series.to_json() + "\n" if args.format == "json" else series.to_csv(), args.out)


def cmd_sweep(args) -> int:
    series = sweep.sweep_single(_sweep_config(args, args.task))
    _emit_series(args, series)
    features = sweep.detect_extrema(series)
    _note(args, f"{len(features)} feature(s) in |delta| (baseline {series.abs_delta0!r})")
    for f in features:
        at = "" if f.at is None else f" (refined {f.at!r})"
        _note(args, f"{f.kind}: A{args.task} in [{f.lo!r}, {f.hi!r}]{at}")
    return EXIT_OK


def cmd_grid(args) -> int:
    series = sweep.sweep_multi(_sweep_config(args, sweep.BOTH))
    _emit_series(args, series)
    rows = series.rows
    idle = sum(not r.adopted for r in rows)
    above = sum(r.ratio > 1 for r in rows)
    zero = sum(r.abs_delta == 0 for r in rows)
    _note(args, f"{len(rows)} cells: {idle} without adoption, {zero} with zero gap, {above} above baseline")
    return EXIT_OK


def cmd_signs(args) -> int:
    table = statics.SIGN_TABLE
    if args.expected_fixture:
        try:
            rows = json.loads(Path(args.expected_fixture).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read sign fixture {args.expected_fixture}: {exc}") from exc
        table = statics.table_from_json(rows)
    tol = statics.Tolerances(zero_tol=args.zero_tol)
    report = statics.verify_sign_table(
        args.draws, args.rhos, args.seed, tol, table, tuple(args.columns), args.threads, args.b_max
    )
    _write(report.to_json(args.list_points) + "\n", args.out)
    doc = report.to_dict("none")
    _note(
        args,
        f"{'PASS' if report.passed else 'FAIL'}: {doc['n_checks']} checks at {doc['n_points']} points, "
        f"{doc['n_mismatches']} mismatched, {len(report.skipped)} skipped",
    )
    for key, counts in doc["summary"].items():
        if counts["mismatched"]:
            _note(args, f"  mismatch {key}: {counts['mismatched']}/{counts['checked']}")
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_oring(args) -> int:
    params = oring.PopulationParams(args.mu, args.scale, args.corr_pop)
    if args.workers < 2 * args.n:
        raise ParameterError(f"need at least 2 firms: workers={args.workers}, n={args.n}")
    result = oring.run_matching(
        params, args.workers, args.n, args.seed, args.oracle_draws, not args.raw_levels, args.threads
    )
    _write(result.to_json() + "\n", args.out)
    _note(
        args,
        f"measured {result.measured_corr:.6f} (se {result.measured_se:.6f}), "
        f"predicted {result.predicted_corr:.6f}, gap {result.abs_gap:.6f}",
    )
    return EXIT_OK


def cmd_skills(args) -> int:
    if args.min_size < 2:
        raise ParameterError(f"--min-size must be >= 2, got {args.min_size}")
    schema = skills.Schema(args.id_column, args.skill_a, args.skill_b, args.weight, tuple(args.groups))
    loaded = skills.load_records(args.input, schema, args.delimiter)
    result = skills.grouped_correlations(loaded.records, schema.groups, args.min_size, not args.unweighted)
    _write(result.to_json() + "\n" if args.format == "json" else result.to_csv(), args.out)
    _note(args, f"{len(loaded)} records, dropped {loaded.dropped or 0}, {len(result.groups)} groups")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "grid": cmd_grid, "signs": cmd_signs, "oring": cmd_oring, "skills": cmd_skills}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise ParameterError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
