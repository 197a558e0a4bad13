"""Command-line entry point.

Subcommands: one-shot generation (joke), a line-oriented chat REPL (chat),
JSON-lines batch runs (batch), rating-study statistics (eval), dumping the
bundled study corpus (corpus), and the HTTP server (serve). Data goes to
stdout, diagnostics to stderr; exit codes are stable: 0 success, 1
validation/loader error, 2 backend or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backend import (
    Backend,
    BackendConfig,
    BackendError,
    DEFAULT_API_KEY_ENV,
    DEFAULT_ENDPOINT,
    DEFAULT_MODEL,
    LiveBackend,
    load_script,
)
from .domain import JokeResponse, TopicValidationError
from .evaluation import (
    EvalError,
    SOURCE_ORDER,
    Source,
    bundled_corpus,
    load_ratings,
    system_stats,
    table2_from_means,
)
from .pipeline import (
    FilterPolicy,
    PipelineConfig,
    PipelineError,
    generate_joke,
    run_batch,
)
from .prompts import PromptError, PromptSet, default_prompt_set, load_prompt_set
from .service import DEFAULT_LISTEN, create_app

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BACKEND = 2


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--backend",
        default="live",
        metavar="live|scripted:<file>",
        help="completion backend (default: live)",
    )
    common.add_argument("--endpoint", default=DEFAULT_ENDPOINT, help="live endpoint URL")
    common.add_argument("--model", default=DEFAULT_MODEL, help="live model name")
    common.add_argument(
        "--api-key-env",
        default=DEFAULT_API_KEY_ENV,
        help=f"environment variable holding the API key (default {DEFAULT_API_KEY_ENV})",
    )
    common.add_argument("--temperature", type=float, default=0.8)
    common.add_argument(
        "--k", type=int, default=5, help="associations generated per handle"
    )
    common.add_argument(
        "--retries", type=int, default=2, help="re-prompts allowed per stage"
    )
    common.add_argument(
        "--strict-punchline",
        action="store_true",
        help="reject jokes that do not end with the constructed punch line",
    )
    common.add_argument(
        "--filter",
        choices=[p.value for p in FilterPolicy],
        default=FilterPolicy.OFF.value,
        help="fitness filter applied to finished candidates",
    )
    common.add_argument("--prompts-dir", default=None, help="custom prompt templates")
    common.add_argument("--seed", type=int, default=0, help="seed for any sampling")
    common.add_argument("--trace", action="store_true", help="include the stage trace")
    common.add_argument("--json", action="store_true", help="emit JSON instead of text")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="witscript2",
        description="Conversational joke generation over a five-stage pipeline.",
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    p_joke = sub.add_parser("joke", parents=[common], help="generate one joke")
    p_joke.add_argument("text", help="the topic sentence")

    sub.add_parser("chat", parents=[common], help="interactive chat REPL")

    p_batch = sub.add_parser(
        "batch", parents=[common], help="generate jokes for a file of topics"
    )
    p_batch.add_argument("input", help="file with one topic per line")
    p_batch.add_argument("output", help="JSON-lines output file, or - for stdout")
    p_batch.add_argument("--parallel", type=int, default=1, help="worker pool size")

    p_eval = sub.add_parser(
        "eval", parents=[common], help="rating-study statistics"
    )
    p_eval.add_argument("ratings", nargs="?", help="ratings CSV (pair_id,rater_id,rating)")
    p_eval.add_argument("pairs", nargs="?", help="JSON map of pair_id to source")
    p_eval.add_argument(
        "--from-table1",
        action="store_true",
        help="report the bundled corpus means instead of loading a study",
    )

    p_corpus = sub.add_parser(
        "corpus", parents=[common], help="dump the bundled 52-pair corpus"
    )
    p_corpus.add_argument("--input", type=int, default=None, help="filter to one input id")

    p_serve = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p_serve.add_argument("--listen", default=DEFAULT_LISTEN, help="host:port to bind")
    p_serve.add_argument("--static-dir", default=None, help="chat UI assets to serve at /")

    return parser


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def make_backend(args: argparse.Namespace) -> Backend:
    if args.backend == "live":
        return LiveBackend(
            BackendConfig(
                endpoint_url=args.endpoint,
                model_name=args.model,
                api_key_env_var=args.api_key_env,
            )
        )
    if args.backend.startswith("scripted:"):
        return load_script(args.backend[len("scripted:"):])
    raise ValueError(f"unknown backend {args.backend!r}; use live or scripted:<file>")


def make_config(args: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        associations_per_handle=args.k,
        retries_per_stage=args.retries,
        strict_punchline=args.strict_punchline,
        filter_policy=FilterPolicy(args.filter),
        temperature=args.temperature,
    )


def make_prompts(args: argparse.Namespace) -> PromptSet:
    if args.prompts_dir:
        return load_prompt_set(args.prompts_dir)
    return default_prompt_set()


def _trace_lines(response: JokeResponse) -> list[str]:
    return [
        f"{record.stage.value}: attempts={record.attempts} {record.parsed_summary}"
        for record in response.trace
    ]


def _print_joke(response: JokeResponse, args: argparse.Namespace) -> None:
    if args.json:
        print(response.to_json(include_trace=args.trace))
        return
    print(response.joke_text)
    if args.trace:
        for line in _trace_lines(response):
            print(line)


def cmd_joke(args: argparse.Namespace) -> int:
    try:
        backend = make_backend(args)
        prompt_set = make_prompts(args)
        config = make_config(args)
    except (ValueError, OSError, PromptError) as exc:
        return _fail(str(exc), EXIT_BACKEND)
    try:
        response = generate_joke(args.text, backend, prompt_set, config)
    except TopicValidationError as exc:
        return _fail(f"{exc.code}: {exc}", EXIT_INVALID)
    except (PipelineError, BackendError) as exc:
        return _fail(f"{exc.code}: {exc}", EXIT_BACKEND)
    _print_joke(response, args)
    return EXIT_OK


def cmd_chat(args: argparse.Namespace) -> int:
    try:
        backend = make_backend(args)
        prompt_set = make_prompts(args)
        config = make_config(args)
    except (ValueError, OSError, PromptError) as exc:
        return _fail(str(exc), EXIT_BACKEND)
    show_trace = args.trace
    print(
        "say something and I'll try to riff on it "
        "(:trace toggles the trace, :quit exits)",
        file=sys.stderr,
    )
    while True:
        print("> ", end="", file=sys.stderr, flush=True)
        line = sys.stdin.readline()
        if not line:
            return EXIT_OK
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            return EXIT_OK
        if line == ":trace":
            show_trace = not show_trace
            print(f"trace {'on' if show_trace else 'off'}", file=sys.stderr)
            continue
        try:
            response = generate_joke(line, backend, prompt_set, config)
        except (TopicValidationError, PipelineError, BackendError) as exc:
            print(f"error: {exc.code}: {exc}", file=sys.stderr)
            continue
        print(response.joke_text)
        if show_trace:
            for trace_line in _trace_lines(response):
                print(trace_line)


def cmd_batch(args: argparse.Namespace) -> int:
    try:
        backend = make_backend(args)
        prompt_set = make_prompts(args)
        config = make_config(args)
        topics = [
            line.strip()
            for line in Path(args.input).read_text("utf-8").splitlines()
            if line.strip()
        ]
    except (ValueError, OSError, PromptError) as exc:
        return _fail(str(exc), EXIT_BACKEND)

    items = run_batch(topics, backend, prompt_set, config, parallel=args.parallel)
    lines = []
    for item in items:
        if item.ok:
            lines.append(item.response.to_json(include_trace=args.trace))
        else:
            error = item.error
            stage = getattr(error, "stage", None)
            lines.append(
                json.dumps(
                    {
                        "input": item.input_text,
                        "error": getattr(error, "code", type(error).__name__),
                        "stage": stage.value if stage is not None else None,
                        "message": str(error),
                    },
                    ensure_ascii=False,
                )
            )
    try:
        if args.output == "-":
            for line in lines:
                print(line)
        else:
            Path(args.output).write_text(
                "".join(line + "\n" for line in lines), encoding="utf-8"
            )
    except OSError as exc:
        return _fail(str(exc), EXIT_BACKEND)
    return EXIT_OK if all(item.ok for item in items) else EXIT_INVALID


def _print_stats_rows(rows: list[dict], as_json: bool) -> None:
    if as_json:
        print(json.dumps(rows, ensure_ascii=False, indent=2))
        return
    label_width = max(len(r["label"]) for r in rows) + 2
    print(f"{'System'.ljust(label_width)}{'Mean rating'.rjust(12)}   % jokes (3 or 4)")
    for row in rows:
        pct = row["pct_jokes"]
        pct_text = f"{pct:.2f}" if isinstance(pct, float) else str(pct)
        print(f"{row['label'].ljust(label_width)}{row['mean_rating']:>12.2f}   {pct_text}")


def cmd_eval(args: argparse.Namespace) -> int:
    if args.from_table1:
        means = table2_from_means(bundled_corpus())
        rows = [
            {
                "source": source.value,
                "label": source.label,
                "mean_rating": means[source],
                "pct_jokes": None if args.json else "n/a (raw ratings unpublished)",
            }
            for source in SOURCE_ORDER
        ]
        _print_stats_rows(rows, args.json)
        return EXIT_OK
    if not args.ratings or not args.pairs:
        return _fail("eval needs a ratings CSV and a pair-source map", EXIT_INVALID)
    try:
        records = load_ratings(args.ratings)
        raw_map = json.loads(Path(args.pairs).read_text("utf-8"))
        pair_source_map = {pair: Source(source) for pair, source in raw_map.items()}
        stats = system_stats(records, pair_source_map)
    except (EvalError, OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INVALID)
    _print_stats_rows([s.to_dict() for s in stats], args.json)
    return EXIT_OK


def cmd_corpus(args: argparse.Namespace) -> int:
    pairs = bundled_corpus()
    if args.input is not None:
        pairs = tuple(p for p in pairs if p.input_id == args.input)
        if not pairs:
            return _fail(f"unknown input id {args.input}", EXIT_INVALID)
    print(json.dumps([p.to_dict() for p in pairs], ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    try:
        backend = make_backend(args)
        prompt_set = make_prompts(args)
        config = make_config(args)
        host, _, port_text = args.listen.rpartition(":")
        port = int(port_text)
    except (ValueError, OSError, PromptError) as exc:
        return _fail(str(exc), EXIT_BACKEND)
    app = create_app(backend, prompt_set, config, static_dir=args.static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=port)
    return EXIT_OK


_COMMANDS = {
    "joke": cmd_joke,
    "chat": cmd_chat,
    "batch": cmd_batch,
    "eval": cmd_eval,
    "corpus": cmd_corpus,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
