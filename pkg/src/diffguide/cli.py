"""Command-line entry point: ``diffguide <command> ...``.

Input and output are JSON lines. Exit codes: 0 success, 1 a library
error (reported as one JSON object on stderr), 2 bad usage.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import ExitStack
from typing import Iterable, Sequence, TextIO

from . import anomaly, diff, fusion, history
from .config import RunConfig
from .embedding import EmbeddingProvider
from .errors import ConfigError, DiffGuideError
from .evaluation import Scenario, load_trail, make_report, run_trials
from .features import EvidenceRecord, StateRecord
from .llm import Tracer

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        sys.exit(EXIT_USAGE)


def _read_lines(path: str | None, stdin: TextIO) -> list[str]:
    if path is None or path == "-":
        lines = stdin.readlines()
    else:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    return [ln for ln in lines if ln.strip()]


def _states(path: str | None, stdin: TextIO) -> list[StateRecord]:
    return [StateRecord.from_json(ln) for ln in _read_lines(path, stdin)]


def _one_state(path: str) -> StateRecord:
    states = _states(path, sys.stdin)
    if len(states) != 1:
        raise UsageError(f"{path}: expected exactly one state, found {len(states)}")
    return states[0]


def _evidence(path: str | None) -> list[EvidenceRecord]:
    if path is None:
        return []
    return [EvidenceRecord.from_dict(json.loads(ln)) for ln in _read_lines(path, sys.stdin)]


def _diffs(path: str | None, stdin: TextIO) -> list[diff.Difference]:
    return [diff.Difference.from_dict(json.loads(ln)) for ln in _read_lines(path, stdin)]


def _emit(out: TextIO, lines: Iterable[str]) -> None:
    for line in lines:
        out.write(line + "\n")


def _norm(args, config: RunConfig) -> diff.Norm:
    return diff.Norm.parse(args.norm) if args.norm else config.norm


def _history_store(args, config: RunConfig, writer: bool) -> history.HistoryStore:
    path = args.history or config.history_path
    if path is None:
        raise UsageError("no history file: pass --history or set 'history' in the config")
    return history.HistoryStore(path, writer=writer)


# -- command handlers ----------------------------------------------------------


def cmd_diff(args, config: RunConfig, out: TextIO) -> None:
    norm = _norm(args, config)
    session = diff.Session()
    if args.diff_cmd in ("temporal", "latest"):
        stream = _states(args.infile, sys.stdin)
        if args.diff_cmd == "latest" or args.latest:
            _emit(out, [diff.latest_difference(stream, norm, session).to_json()])
        else:
            if len(stream) < 2:
                raise diff.InsufficientHistory(f"need at least 2 states, got {len(stream)}")
            diff.check_ordered(stream)
            _emit(out, (diff.temporal_delta(a, b, norm, session).to_json()
                        for a, b in zip(stream, stream[1:])))
    elif args.diff_cmd == "spatial":
        subs = _states(args.infile, sys.stdin)
        if args.variability:
            v = diff.spatial_variability(subs, norm)
            _emit(out, [json.dumps({"variability": v, "m": len(subs), "norm": norm.value},
                                   separators=(",", ":"))])
        else:
            _emit(out, (d.to_json() for d in diff.pairwise_spatial_differences(subs, norm, session)))
    elif args.diff_cmd == "topn":
        cmd_topn(args, config, out)
    elif args.diff_cmd == "history":
        with _history_store(args, config, writer=False) as store:
            _emit(out, (history.compare_with_history(s, store, args.strategy, norm, session).to_json()
                        for s in _states(args.infile, sys.stdin)))
    elif args.diff_cmd == "external":
        s_t, s_prev = _one_state(args.state), _one_state(args.prev)
        d = fusion.external_difference(s_t, _evidence(args.evidence), s_prev,
                                       _evidence(args.prev_evidence), norm, session)
        _emit(out, [d.to_json()])
    elif args.diff_cmd == "internal":
        d = fusion.internal_difference(_one_state(args.state), _one_state(args.prev), norm, session)
        _emit(out, [d.to_json()])


def cmd_topn(args, config: RunConfig, out: TextIO) -> None:
    diffs = _diffs(args.infile, sys.stdin)
    weights = config.weight_profile(args.weights)
    _emit(out, (d.to_json() for d in diff.select_main_differences(diffs, args.n, weights)))


def cmd_detect(args, config: RunConfig, out: TextIO) -> None:
    if args.mode == "threshold":
        diffs = _diffs(args.infile, sys.stdin)
        theta = args.theta
        if theta is None and args.estimate:
            with _history_store(args, config, writer=False) as store:
                mags, labels = anomaly.history_magnitudes(store, _norm(args, config))
            theta = anomaly.estimate_threshold(mags, args.k_sigma or config.thresholds.k_sigma, labels)
        if theta is None:
            theta = config.thresholds.theta
        if math.isinf(theta):
            raise UsageError("no threshold: pass --theta, --estimate, or set thresholds.theta")
        _emit(out, (anomaly.detect_threshold(d, theta).to_json() for d in diffs))
    else:
        eta = config.thresholds.eta if args.eta is None else args.eta
        metric = args.metric or config.norm
        with _history_store(args, config, writer=False) as store:
            _emit(out, (anomaly.detect_history(s, store, eta, metric).to_json()
                        for s in _states(args.infile, sys.stdin)))


def cmd_history(args, config: RunConfig, out: TextIO) -> None:
    if args.history_cmd == "add":
        with _history_store(args, config, writer=True) as store:
            for s in _states(args.infile, sys.stdin):
                store.append(s, args.label)
                _emit(out, [store.records()[-1].to_json()])
    elif args.history_cmd == "relabel":
        with _history_store(args, config, writer=True) as store:
            store.relabel(args.state_id, args.label)
            _emit(out, [store.records()[-1].to_json()])
    elif args.history_cmd == "list":
        with _history_store(args, config, writer=False) as store:
            records = store.records() if args.all else store.list()
            _emit(out, (r.to_json() for r in records))
    elif args.history_cmd == "ref":
        with _history_store(args, config, writer=False) as store:
            _emit(out, [history.select_reference(store, args.strategy).to_json()])
    elif args.history_cmd == "raw":
        with _history_store(args, config, writer=False) as store:
            payload = store.raw_lookup(args.state_id)
        if isinstance(payload, bytes):
            out.flush()
            buffer = getattr(out, "buffer", None)
            if buffer is not None:
                buffer.write(payload)
                buffer.flush()
            else:
                out.write(payload.decode("utf-8", errors="surrogateescape"))
        else:
            _emit(out, [payload])


def cmd_fuse(args, config: RunConfig, out: TextIO) -> None:
    fused = fusion.fuse(_one_state(args.state), _evidence(args.evidence))
    d = fused.base.to_dict()
    d["dims"] = fused.fused.to_list()
    _emit(out, [json.dumps(d, separators=(",", ":"), ensure_ascii=False)])


def cmd_eval(args, config: RunConfig, out: TextIO) -> None:
    if args.eval_cmd == "report":
        report = make_report(load_trail(_read_lines(args.trail, sys.stdin)),
                             args.alpha or config.alpha)
    else:
        scenario = Scenario.load(args.scenario)
        kind = args.backend or scenario.backend.get("kind", "mock")
        if kind == scenario.backend.get("kind", "mock"):
            backend = scenario.make_backend()
        elif kind == "remote" and config.backend:
            backend = config.make_backend()
        else:
            raise ConfigError(f"no {kind} backend configured for this scenario")
        if args.provider == "hash":
            provider = EmbeddingProvider("deterministic_hash")
        elif args.provider is None and scenario.provider:
            provider = scenario.make_provider()
        elif config.provider:
            provider = config.make_provider()
        else:
            provider = EmbeddingProvider("deterministic_hash")
        with ExitStack() as stack:
            trail = stack.enter_context(open(args.trail, "w", encoding="utf-8", newline="\n")) \
                if args.trail else None
            tracer = Tracer(stack.enter_context(open(args.trace, "w", encoding="utf-8"))) \
                if args.trace else None
            results = run_trials(scenario, backend, provider, args.n, trail=trail,
                                 tracer=tracer, parallel=args.parallel)
        report = make_report(results, args.alpha or scenario.alpha, scenario.name)
    if args.csv:
        out.write(report.to_csv())
    else:
        _emit(out, [report.to_json()])


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="run configuration (TOML)")
    common.add_argument("--norm", choices=["l1", "l2", "linf", "L1", "L2", "Linf"],
                        help="difference norm (default from config, else L2)")

    def infile(p):
        p.add_argument("--in", dest="infile", metavar="FILE",
                       help="JSON lines input (default: standard input)")

    def history_opt(p):
        p.add_argument("--history", metavar="FILE", help="history file (overrides config)")

    parser = _Parser(prog="diffguide", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_diff = sub.add_parser("diff", help="compute differences between states")
    dsub = p_diff.add_subparsers(dest="diff_cmd", required=True, parser_class=_Parser)
    p = dsub.add_parser("temporal", parents=[common], help="later-minus-earlier deltas of a stream")
    infile(p)
    p.add_argument("--latest", action="store_true", help="only the last pair of the stream")
    p = dsub.add_parser("latest", parents=[common], help="delta between the last two states")
    infile(p)
    p = dsub.add_parser("spatial", parents=[common], help="pairwise deltas between region states")
    infile(p)
    p.add_argument("--variability", action="store_true",
                   help="emit the mean pairwise magnitude instead of the deltas")
    p = dsub.add_parser("topn", parents=[common], help="main differences by impact")
    infile(p)
    p.add_argument("-n", type=int, required=True, help="number of differences to keep")
    p.add_argument("--weights", metavar="ID", help="weight profile id from the config")
    p = dsub.add_parser("history", parents=[common], help="states minus a history reference")
    infile(p)
    history_opt(p)
    p.add_argument("--strategy", choices=[s.value for s in history.ReferenceStrategy],
                   default="latest")
    for name, helptext in (("external", "difference of states fused with evidence"),
                           ("internal", "difference of states alone")):
        p = dsub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--state", required=True, metavar="FILE", help="current state")
        p.add_argument("--prev", required=True, metavar="FILE", help="previous state")
        if name == "external":
            p.add_argument("--evidence", metavar="FILE", help="evidence at the current instant")
            p.add_argument("--prev-evidence", metavar="FILE",
                           help="evidence at the previous instant")

    p = sub.add_parser("topn", parents=[common], help="main differences by impact")
    infile(p)
    p.add_argument("-n", type=int, required=True, help="number of differences to keep")
    p.add_argument("--weights", metavar="ID", help="weight profile id from the config")

    p = sub.add_parser("detect", parents=[common], help="flag abnormal differences or states")
    infile(p)
    history_opt(p)
    p.add_argument("--mode", choices=["threshold", "history"], required=True)
    p.add_argument("--theta", type=float, help="magnitude threshold (threshold mode)")
    p.add_argument("--estimate", action="store_true",
                   help="estimate theta from normal history magnitudes")
    p.add_argument("--k-sigma", type=float, help="sigma multiplier for --estimate")
    p.add_argument("--eta", type=float, help="distance tolerance (history mode)")
    p.add_argument("--metric", choices=["l1", "l2", "linf"], help="distance (history mode)")

    p_hist = sub.add_parser("history", help="manage the append-only state history")
    hsub = p_hist.add_subparsers(dest="history_cmd", required=True, parser_class=_Parser)
    p = hsub.add_parser("add", parents=[common], help="append states")
    infile(p)
    history_opt(p)
    p.add_argument("--label", choices=list(history.LABELS), default="unlabeled")
    p = hsub.add_parser("relabel", parents=[common], help="append a superseding label")
    history_opt(p)
    p.add_argument("state_id")
    p.add_argument("--label", choices=list(history.LABELS), required=True)
    p = hsub.add_parser("list", parents=[common], help="current record per state")
    history_opt(p)
    p.add_argument("--all", action="store_true", help="full log including superseded records")
    p = hsub.add_parser("ref", parents=[common], help="selected reference state")
    history_opt(p)
    p.add_argument("--strategy", choices=[s.value for s in history.ReferenceStrategy],
                   default="latest")
    p = hsub.add_parser("raw", parents=[common], help="stored raw payload of a state")
    history_opt(p)
    p.add_argument("state_id")

    p = sub.add_parser("fuse", parents=[common], help="fuse a state with evidence")
    p.add_argument("--state", required=True, metavar="FILE")
    p.add_argument("--evidence", metavar="FILE")

    p_eval = sub.add_parser("eval", help="direct vs. difference prompting evaluation")
    esub = p_eval.add_subparsers(dest="eval_cmd", required=True, parser_class=_Parser)
    p = esub.add_parser("run", parents=[common], help="run trials and report")
    p.add_argument("--scenario", required=True, metavar="FILE", help="scenario file (TOML)")
    p.add_argument("--backend", choices=["mock", "remote"], help="backend kind")
    p.add_argument("--provider", choices=["hash"],
                   help="force the deterministic hash embedding provider")
    p.add_argument("-n", type=int, help="trials per method (default from scenario)")
    p.add_argument("--alpha", type=float, help="significance level")
    p.add_argument("--trail", metavar="FILE", help="write per-trial JSON lines here")
    p.add_argument("--trace", metavar="FILE", help="log request/response bodies as JSON lines")
    p.add_argument("--parallel", type=int, default=1, metavar="K", help="concurrent trials")
    p.add_argument("--csv", action="store_true", help="emit method,trial,similarity CSV")
    p = esub.add_parser("report", parents=[common], help="report from a persisted trail")
    p.add_argument("--trail", metavar="FILE", help="trail JSON lines (default: stdin)")
    p.add_argument("--alpha", type=float, help="significance level")
    p.add_argument("--csv", action="store_true", help="emit method,trial,similarity CSV")
    return parser


HANDLERS = {"diff": cmd_diff, "topn": cmd_topn, "detect": cmd_detect,
            "history": cmd_history, "fuse": cmd_fuse, "eval": cmd_eval}


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = RunConfig.load(getattr(args, "config", None))
        HANDLERS[args.command](args, config, out)
    except UsageError as exc:
        sys.stderr.write(json.dumps({"error": "usage", "message": str(exc)}) + "\n")
        return EXIT_USAGE
    except DiffGuideError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return EXIT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_ERROR
    out.flush()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
