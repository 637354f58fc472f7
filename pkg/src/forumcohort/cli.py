"""Thin command-line client for the pipeline service.

Without ``--base-url`` the CLI mounts the service in-process over an ASGI
transport, so the full pipeline works offline with no server running;
with ``--base-url`` the same requests go to a remote instance. Every run
prints the resolved configuration before the command result.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from typing import Optional

import httpx

_EXIT_CODES = {"usage": 1, "data": 2, "numeric": 3}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the CLI contract wants 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="forumcohort", description=__doc__)
    parser.add_argument("--base-url", default=None, help="remote service URL; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
        return p

    p = stage("ingest", "parse dump files into a cleaned post store")
    p.add_argument("inputs", nargs="+", help="newline-delimited dump files")

    p = stage("label", "label anxiety-forum posts from user timelines")
    p.add_argument("--posts", required=True, help="posts store from ingest")

    p = stage("split", "leakage-safe train/test split with per-side balancing")
    p.add_argument("--labeled", required=True, help="labeled store from label")

    stage("synth", "generate a synthetic labeled corpus")

    p = stage("train", "fit a model on a labeled training store")
    p.add_argument("--train", required=True, help="training store")
    p.add_argument("--model", required=True, choices=["nb", "lr", "transformer"])

    p = stage("evaluate", "score a trained model on a labeled store")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--test", required=True, help="test store")

    p = stage("grid", "hyperparameter grid search for a keyword model family")
    p.add_argument("--family", required=True, choices=["nb", "lr"])
    p.add_argument("--train", required=True, help="training store")
    p.add_argument("--validation", default=None, help="validation store (default: carve from train)")

    p = stage("explain", "occlusion attribution report for one post")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--store", required=True, help="store containing the post")
    p.add_argument("--post-id", required=True)
    p.add_argument("--max-phrase-len", type=int, default=None)

    p = stage("report", "aggregate evaluation results into a run report")
    p.add_argument("--eval", dest="evals", action="append", required=True, help="evaluation json (repeatable)")
    p.add_argument("--manifest", default=None, help="split manifest to hash into the report")

    p = stage("predict", "positive-class probabilities for ad-hoc texts")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--text", dest="texts", action="append", required=True, help="text (repeatable)")

    p = sub.add_parser("serve", help="run the service under uvicorn")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _payload(args: argparse.Namespace) -> dict:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            raise SystemExit(1)
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    payload: dict = {"out_dir": args.out, "overrides": overrides}
    if args.config is not None:
        payload["config_file"] = args.config
    if args.seed is not None:
        payload["seed"] = args.seed
    if getattr(args, "max_phrase_len", None) is not None:
        payload["overrides"].setdefault("max_phrase_len", str(args.max_phrase_len))
    return payload


def _request_body(args: argparse.Namespace) -> tuple[str, dict]:
    payload = _payload(args)
    command = args.command
    if command == "ingest":
        payload["inputs"] = args.inputs
    elif command == "label":
        payload["posts_path"] = args.posts
    elif command == "split":
        payload["labeled_path"] = args.labeled
    elif command == "train":
        payload["train_path"] = args.train
        payload["model"] = args.model
    elif command == "evaluate":
        payload.update(model_path=args.model, vocab_path=args.vocab, test_path=args.test)
    elif command == "grid":
        payload.update(family=args.family, train_path=args.train)
        if args.validation:
            payload["validation_path"] = args.validation
    elif command == "explain":
        payload.update(
            model_path=args.model,
            vocab_path=args.vocab,
            store_path=args.store,
            post_id=args.post_id,
        )
    elif command == "report":
        payload["eval_paths"] = args.evals
        if args.manifest:
            payload["manifest_path"] = args.manifest
    elif command == "predict":
        payload.update(model_path=args.model, vocab_path=args.vocab, texts=args.texts)
    return f"/{command}", payload


async def _post_in_process(path: str, payload: dict) -> httpx.Response:
    from .service.app import create_app

    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(
        transport=transport, base_url="http://forumcohort.local", timeout=None
    ) as client:
        return await client.post(path, json=payload)


def call_service(path: str, payload: dict, base_url: Optional[str]) -> httpx.Response:
    if base_url:
        with httpx.Client(base_url=base_url, timeout=None) as client:
            return client.post(path, json=payload)
    return asyncio.run(_post_in_process(path, payload))


def _print_response(body: dict) -> None:
    resolved = body.pop("resolved_config", {})
    print("# resolved config")
    for key in sorted(resolved):
        print(f"{key} = {resolved[key]}")
    print("# result")
    print(json.dumps(body, indent=2, sort_keys=True))


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    path, payload = _request_body(args)
    try:
        response = call_service(path, payload, args.base_url)
    except httpx.HTTPError as exc:
        print(f"error: service unreachable: {exc}", file=sys.stderr)
        return 1

    try:
        body = response.json()
    except json.JSONDecodeError:
        print(f"error: malformed service response: {response.text[:200]}", file=sys.stderr)
        return 1

    if response.status_code == 200:
        _print_response(body)
        return 0

    detail = body.get("detail", {})
    if isinstance(detail, dict) and "kind" in detail:
        print(f"error ({detail['kind']}): {detail.get('message', '')}", file=sys.stderr)
        return _EXIT_CODES.get(detail["kind"], 1)
    print(f"error: {json.dumps(detail) if detail else response.text[:200]}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
