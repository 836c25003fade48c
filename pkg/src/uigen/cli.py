"""Operator command line: run sessions, manage suites, evaluate annotations, serve HTTP.

Exit codes: 0 success, 1 validation failure, 2 runtime error. Structured
output goes to stdout (or --out); errors go to stderr as `error <code>: ...`.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import EngineError, InvalidConfigError
from .evalharness import (
    SuiteSeedConfig,
    aggregate_instances,
    compute_fleiss_kappa,
    compute_win_tie_loss,
    filter_judgments,
    generate_prompt_suite,
    read_judgments,
    render_win_tie_loss,
    suite_from_dict,
    validate_suite,
)
from .pipeline import UserQuery
from .provider import Provider, ProviderError, ReplayArchive, provider_from_env
from .refinement import RefinementConfig, run_refinement, session_to_dict
from .store import SessionStore

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _fail(code: str, message: str, exit_code: int = EXIT_RUNTIME) -> int:
    print(f"error {code}: {message}", file=sys.stderr)
    return exit_code


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _provider_from_flags(args) -> Provider:
    if getattr(args, "replay", None):
        return Provider(mode="replay", archive=ReplayArchive.load(args.replay))
    if getattr(args, "record", None):
        import os

        env = dict(os.environ)
        env["UIGEN_PROVIDER_MODE"] = "record"
        env["UIGEN_REPLAY_ARCHIVE"] = args.record
        return provider_from_env(env)
    return provider_from_env()


def _cmd_run(args) -> int:
    try:
        provider = _provider_from_flags(args)
    except (ValueError, FileNotFoundError) as exc:
        return _fail("provider-unavailable", str(exc))
    try:
        config = RefinementConfig(
            candidates_per_iteration=args.candidates,
            max_iterations=args.max_iters,
            score_threshold=args.threshold,
            reward_origin=args.reward,
            generation_mode=args.mode.replace("-", "_"),
            representation_mode={"structured": "structured", "natural": "natural_language"}[
                args.representation
            ],
        )
    except InvalidConfigError as exc:
        return _fail("config-out-of-bounds", str(exc), EXIT_VALIDATION)
    query = UserQuery(id="cli", text=args.query)
    try:
        session = run_refinement(query, config, provider)
    except ProviderError as exc:
        return _fail("provider-error", str(exc))
    trace = session_to_dict(session)
    summary = {
        "id": session.id,
        "status": session.status,
        "iterations": [
            {
                "index": record.index,
                "scores": [evaluation.overall for _, evaluation in record.candidates],
                "selected": record.selected,
                "best_so_far": {"artifact_id": record.best_so_far[0], "score": record.best_so_far[1]},
            }
            for record in session.iterations
        ],
        "final_artifact": session.final_artifact,
        "error": session.error,
    }
    if args.out:
        _emit(trace, args.out)
        print(json.dumps(summary, indent=2))
    else:
        _emit(summary, None)
    if session.status in ("converged", "exhausted"):
        return EXIT_OK
    return _fail("session-failed", session.error or "session did not finish")


def _cmd_suite_generate(args) -> int:
    try:
        provider = _provider_from_flags(args)
    except (ValueError, FileNotFoundError) as exc:
        return _fail("provider-unavailable", str(exc))
    try:
        suite = generate_prompt_suite(provider, SuiteSeedConfig(seed=args.seed))
    except EngineError as exc:
        return _fail("suite-generation-failed", str(exc))
    _emit(suite.to_dict(), args.out)
    return EXIT_OK


def _cmd_suite_validate(args) -> int:
    try:
        suite = suite_from_dict(json.loads(Path(args.input).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        return _fail("unreadable-suite", str(exc))
    report = validate_suite(suite)
    _emit(report.to_dict(), args.out)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _cmd_eval_kappa(args) -> int:
    try:
        data = json.loads(Path(args.input).read_text())
    except (OSError, ValueError) as exc:
        return _fail("unreadable-input", str(exc))
    matrix = data.get("matrix", data) if isinstance(data, dict) else data
    try:
        kappa = compute_fleiss_kappa(matrix, raters_per_instance=args.raters)
    except EngineError as exc:
        return _fail("kappa-failed", str(exc), EXIT_VALIDATION)
    _emit({"kappa": kappa}, args.out)
    return EXIT_OK


def _cmd_eval_winloss(args) -> int:
    try:
        judgments = read_judgments(args.input)
    except (OSError, ValueError, KeyError) as exc:
        return _fail("unreadable-input", str(exc))
    trap_keys = {}
    if args.traps:
        trap_keys = json.loads(Path(args.traps).read_text())
    labels = tuple(part.strip() for part in args.pair.split(","))
    if len(labels) != 2 or not all(labels):
        return _fail("bad-pair", "expected --pair A,B", EXIT_VALIDATION)
    report = filter_judgments(judgments, trap_keys)
    aggregates = aggregate_instances(report.kept)
    try:
        table = compute_win_tie_loss(aggregates, (labels[0], labels[1]))
    except EngineError as exc:
        return _fail("no-instances", str(exc), EXIT_VALIDATION)
    _emit(table.to_dict(), args.out)
    print(render_win_tie_loss(table), file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store = SessionStore(args.store)
    try:
        provider = _provider_from_flags(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"warning provider-unavailable: {exc}; sessions will return 503", file=sys.stderr)
        provider = None
    app = create_app(
        store,
        provider,
        console_dir=args.console,
        iteration_delay_s=args.iteration_delay,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uigen")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one refinement session for a query")
    run.add_argument("query")
    run.add_argument("--candidates", type=int, default=3)
    run.add_argument("--max-iters", type=int, default=5)
    run.add_argument("--threshold", type=float, default=90.0)
    run.add_argument("--reward", choices=["adaptive", "static"], default="adaptive")
    run.add_argument("--mode", choices=["iterative", "one-shot"], default="iterative")
    run.add_argument("--representation", choices=["structured", "natural"], default="structured")
    run.add_argument("--replay", help="replay archive path")
    run.add_argument("--record", help="record archive path (backend from env)")
    run.add_argument("--out", help="write the full session trace to this file")
    run.set_defaults(func=_cmd_run)

    suite = sub.add_parser("suite", help="prompt suite tools")
    suite_sub = suite.add_subparsers(dest="suite_command", required=True)
    generate = suite_sub.add_parser("generate")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--replay")
    generate.add_argument("--record")
    generate.add_argument("--out")
    generate.set_defaults(func=_cmd_suite_generate)
    validate = suite_sub.add_parser("validate")
    validate.add_argument("--input", required=True)
    validate.add_argument("--out")
    validate.set_defaults(func=_cmd_suite_validate)

    evaluate = sub.add_parser("eval", help="evaluation statistics")
    eval_sub = evaluate.add_subparsers(dest="eval_command", required=True)
    kappa = eval_sub.add_parser("kappa")
    kappa.add_argument("--input", required=True)
    kappa.add_argument("--raters", type=int, default=3)
    kappa.add_argument("--out")
    kappa.set_defaults(func=_cmd_eval_kappa)
    winloss = eval_sub.add_parser("winloss")
    winloss.add_argument("--input", required=True)
    winloss.add_argument("--pair", required=True)
    winloss.add_argument("--traps")
    winloss.add_argument("--out")
    winloss.set_defaults(func=_cmd_eval_winloss)

    import os

    serve = sub.add_parser("serve", help="serve the HTTP API and console")
    serve.add_argument("--port", type=int, default=int(os.environ.get("UIGEN_PORT", "8400")))
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--store", default=os.environ.get("UIGEN_STORE", "./uigen-store"))
    serve.add_argument("--replay")
    serve.add_argument("--record")
    serve.add_argument("--console", help="directory of built console assets")
    serve.add_argument("--iteration-delay", type=float, default=0.0, help=argparse.SUPPRESS)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        return _fail(type(exc).__name__, str(exc))
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
