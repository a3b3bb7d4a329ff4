"""Command-line entry point: sample, mine, indicators, discover, eval, project."""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .bayesnet import DataSet, NetworkError, forward_sample, hide_latents, load_alarm, parse_network, resolve_alias
from .eventlog import LogParseError, parse_log
from .evaluation import ExperimentConfig, run_experiment
from .fuzzymine import MiningConfig, ProcessCycleError, ProcessModel, export_dot, mine, topological_order
from .indicators import TargetSpec, compute_indicators, discretize
from .mag import CapabilityError, latent_project
from .smmb import orient_with_process_order, smmb
from .structlearn import DEFAULT_CAP, UPDATE_RULES, ScoringContext

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAPABILITY = 0, 1, 2, 3

CONFIG_HELP = """\
Config file format: one 'key = value' per line, '#' starts a comment.
Keys are long flag names without dashes (underscores or dashes both work)
and set defaults for any subcommand that has that flag; explicit flags win."""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8", newline="") as f:
        return f.read()


def _load_net(spec: str):
    if spec.lower() == "alarm":
        return load_alarm()
    return parse_network(_read_text(spec))


def _latents(text: str) -> list[str]:
    if text.strip().lower() in ("", "none"):
        return []
    return [resolve_alias(x.strip()) for x in text.split(",") if x.strip()]


def _emit(path: str | None, text: str, outputs: list[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        atomic_write(path, text)
        outputs.append(str(path))


# subcommands ---------------------------------------------------------------

def cmd_sample(args, outputs):
    net = _load_net(args.net)
    data = hide_latents(forward_sample(net, args.n, args.seed), _latents(args.latents))
    buf = io.StringIO()
    data.to_csv(buf)
    _emit(args.out, buf.getvalue(), outputs)


def cmd_mine(args, outputs):
    config = MiningConfig(args.preserve, args.ratio, args.cutoff, args.eps, args.max_cycle)
    model, report = mine(parse_log(_read_text(args.log)), config)
    _emit(args.out, export_dot(model), outputs)
    if args.report:
        _emit(args.report, report.to_json() + "\n", outputs)
    if args.model:
        _emit(args.model, json.dumps(model.to_json(), indent=2) + "\n", outputs)


def cmd_indicators(args, outputs):
    event_log = parse_log(_read_text(args.log))
    model = ProcessModel.from_json(json.loads(_read_text(args.model)))
    target = TargetSpec(args.target, args.takeoff, args.scheduled or None, args.reference)
    table = compute_indicators(event_log, model, target, detect_parallel=not args.no_parallel)
    buf = io.StringIO()
    table.to_csv(buf)
    _emit(args.out, buf.getvalue(), outputs)
    if args.discrete:
        dt = discretize(table, args.bins)
        buf = io.StringIO()
        dt.to_csv(buf)
        _emit(args.discrete, buf.getvalue(), outputs)
        _emit(args.discrete + ".bins.json", dt.boundaries_json() + "\n", outputs)


def _load_dataset(path: str) -> DataSet:
    text = _read_text(path)
    header = text.split("\n", 1)[0]
    if header.split(",")[0] == "Case":
        # discretized indicator table: drop the case column
        lines = [",".join(line.split(",")[1:]) for line in text.splitlines() if line]
        text = "\n".join(lines) + "\n"
    return DataSet.from_csv(text)


def cmd_discover(args, outputs):
    data = _load_dataset(args.data)
    target = resolve_alias(args.target)
    ctx = ScoringContext(data, cap=args.cap, update=args.update)
    mb = smmb(ctx, target)
    if args.model:
        model = ProcessModel.from_json(json.loads(_read_text(args.model)))
        order = topological_order(model)
        pos = None
        if args.target_after:
            if args.target_after not in order:
                raise ValueError(f"--target-after activity {args.target_after!r} is not in the model")
            pos = {target: order.index(args.target_after) + 0.5}
        mb = orient_with_process_order(mb, order, target_position=pos)
    _emit(args.out, mb.to_json() + "\n", outputs)
    if args.dot:
        _emit(args.dot, mb.to_dot(), outputs)


def cmd_eval(args, outputs):
    net = _load_net(args.net)
    config = ExperimentConfig(tuple(_latents(args.latents)), args.n, args.repeats, args.target, args.seed,
                              update=args.update)
    result = run_experiment(net, config, jobs=args.jobs)
    if args.out:
        _emit(args.out, result.to_json() + "\n", outputs)
    print(result.table())
    if not result.ok:
        raise CapabilityError("every repeat failed: " + "; ".join(r.error or "" for r in result.repeats))


def cmd_project(args, outputs):
    net = _load_net(args.net)
    mag = latent_project(net, _latents(args.latents), method=args.method)
    _emit(args.out, mag.to_json() + "\n", outputs)


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="aclp", description="Process mining and local causal discovery.",
                epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"aclp {__version__}")
    p.add_argument("--config", help="key = value file providing flag defaults")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("sample", help="forward-sample a network to a CSV data set", formatter_class=fmt)
    s.add_argument("--net", default="alarm", help="BIF file, or 'alarm' for the bundled network")
    s.add_argument("--n", type=int, default=2500, help="number of rows")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.add_argument("--latents", default="none", help="comma-separated variables to drop, or 'none'")
    s.add_argument("--out", help="output CSV (stdout when omitted)")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("mine", help="mine a process model from an event log", formatter_class=fmt)
    s.add_argument("--log", required=True, help="event log CSV (Case, Activity, Timestamp, ...)")
    s.add_argument("--preserve", type=float, default=0.27, help="preserve threshold for two-way conflicts")
    s.add_argument("--ratio", type=float, default=0.35, help="ratio threshold for two-way conflicts")
    s.add_argument("--cutoff", type=float, default=0.2, help="edge filter cutoff")
    s.add_argument("--eps", type=float, default=0.05, help="similarity tolerance for longer cycles")
    s.add_argument("--max-cycle", type=int, default=8, help="longest cycle inspected")
    s.add_argument("--out", help="DOT output (stdout when omitted)")
    s.add_argument("--report", help="conflict report JSON")
    s.add_argument("--model", help="model JSON, input for 'indicators' and 'discover'")
    s.set_defaults(func=cmd_mine)

    s = sub.add_parser("indicators", help="per-case link durations from a log and a model", formatter_class=fmt)
    s.add_argument("--log", required=True, help="event log CSV")
    s.add_argument("--model", required=True, help="model JSON written by 'mine --model'")
    s.add_argument("--target", default="FLIGHTDELAY", help="name of the delay column")
    s.add_argument("--takeoff", default="REALTAKEOFF", help="activity whose start ends the delay")
    s.add_argument("--scheduled", default="ScheduledTakeoff", help="event attribute with the planned time ('' to skip)")
    s.add_argument("--reference", help="fallback activity whose end starts the delay")
    s.add_argument("--no-parallel", action="store_true", help="do not merge parallel blocks")
    s.add_argument("--bins", type=int, default=3, help="equal-frequency bins for --discrete")
    s.add_argument("--out", help="raw indicator CSV (stdout when omitted)")
    s.add_argument("--discrete", help="discretized CSV; bin boundaries go to <path>.bins.json")
    s.set_defaults(func=cmd_indicators)

    s = sub.add_parser("discover", help="Markov blanket of a target variable", formatter_class=fmt)
    s.add_argument("--data", required=True, help="discrete CSV (from 'sample' or 'indicators --discrete')")
    s.add_argument("--target", required=True, help="target variable (ALARM aliases accepted)")
    s.add_argument("--model", help="model JSON used to orient undirected edges by process order")
    s.add_argument("--target-after", help="activity after which the target is placed in the process order")
    s.add_argument("--update", choices=UPDATE_RULES, default="blanket", help="working-set update rule")
    s.add_argument("--cap", type=int, default=DEFAULT_CAP, help="largest variable set of a local search")
    s.add_argument("--out", help="blanket JSON (stdout when omitted)")
    s.add_argument("--dot", help="blanket DOT")
    s.set_defaults(func=cmd_discover)

    s = sub.add_parser("eval", help="repeated blanket recovery on a known network", formatter_class=fmt)
    s.add_argument("--net", default="alarm", help="BIF file, or 'alarm'")
    s.add_argument("--latents", default="none", help="comma-separated hidden variables, or 'none'")
    s.add_argument("--n", type=int, default=2500, help="rows per data set")
    s.add_argument("--repeats", type=int, default=5, help="number of data sets")
    s.add_argument("--target", default="VTUB", help="target variable")
    s.add_argument("--seed", type=int, default=0, help="base seed; per-repeat seeds are derived from it")
    s.add_argument("--update", choices=UPDATE_RULES, default="blanket", help="working-set update rule")
    s.add_argument("--jobs", type=int, default=1, help="repeats run in parallel")
    s.add_argument("--out", help="results JSON")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("project", help="project a network with hidden variables onto a MAG", formatter_class=fmt)
    s.add_argument("--net", default="alarm", help="BIF file, or 'alarm'")
    s.add_argument("--latents", default="none", help="comma-separated hidden variables, or 'none'")
    s.add_argument("--method", choices=("ancestral", "brute"), default="ancestral", help="adjacency test")
    s.add_argument("--out", help="MAG JSON (stdout when omitted)")
    s.set_defaults(func=cmd_project)
    return p


def read_config(path: str) -> dict[str, str]:
    out = {}
    for i, line in enumerate(_read_text(path).splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{i}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subs.choices.values():
        for action in sp._actions:
            if action.dest in values:
                raw = values[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    val = raw.lower() in ("1", "true", "yes", "on")
                else:
                    val = action.type(raw) if action.type else raw
                sp.set_defaults(**{action.dest: val})
                action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        if not argv:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise UsageError("--config needs a path")
            _apply_config(parser, read_config(argv[i + 1]))
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"aclp: {exc}", file=sys.stderr)
        return EXIT_DATA

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = time.time()
    outputs: list[str] = []
    try:
        args.func(args, outputs)
    except CapabilityError as exc:
        print(f"aclp: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (OSError, LogParseError, NetworkError, ProcessCycleError, ValueError, KeyError) as exc:
        print(f"aclp {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    if outputs:
        _write_manifest(args, argv, outputs, started)
    return EXIT_OK


def _write_manifest(args, argv, outputs, started) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command", "verbose", "config")}
    in_keys = ("log", "data", "net") if args.command == "mine" else ("log", "model", "data", "net")
    inputs = [config[k] for k in in_keys if config.get(k)]
    manifest = {
        "subcommand": args.command,
        "argv": argv,
        "inputs": inputs,
        "config": config,
        "seed": config.get("seed"),
        "outputs": outputs,
        "version": __version__,
        "started": started,
        "finished": time.time(),
    }
    atomic_write(outputs[0] + ".manifest.json", json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


if __name__ == "__main__":
    sys.exit(main())
