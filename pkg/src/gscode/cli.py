"""Command-line client for the pipeline service.

Subcommands run against an in-process application by default; --server
points them at a running instance instead.  Exit codes: 0 success, 1 failed
run, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

# CLI flag spellings -> config enum values
VOCAB_FLAGS = {
    "closed": "closed_vocab",
    "charcnn": "charcnn",
    "sentinel": "pointer_sentinel",
    "gsc": "gsc",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gscode",
                                     description="graph models over source-code ASTs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--server", help="URL of a running service (default: in-process)")
        p.add_argument("--json", action="store_true", help="print the raw JSON response")

    p = sub.add_parser("extract", help="scan a corpus and write a split manifest")
    p.add_argument("--input", required=True, help="corpus root directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--unseen-repos", type=int, default=1)
    p.add_argument("--seen-fraction", type=float, default=0.15)
    p.add_argument("--val-fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-token-run", type=int, default=150)
    common(p)

    p = sub.add_parser("instances", help="generate task instances per split")
    p.add_argument("--input", required=True, help="corpus root directory")
    p.add_argument("--manifest", required=True, help="manifest from extract")
    p.add_argument("--out", required=True)
    p.add_argument("--task", required=True, choices=["fitb", "varnaming"])
    p.add_argument("--repr", default="augast", choices=["ast", "augast"])
    p.add_argument("--vocab", default="gsc", choices=sorted(VOCAB_FLAGS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-nodes", type=int, default=500)
    p.add_argument("--per-variable", type=int, default=1)
    common(p)

    p = sub.add_parser("train", help="train a model on generated instances")
    p.add_argument("--data", required=True, help="directory with instance files")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--task", choices=["fitb", "varnaming"])
    p.add_argument("--repr", choices=["ast", "augast"])
    p.add_argument("--vocab", choices=sorted(VOCAB_FLAGS))
    p.add_argument("--gnn", choices=["ggnn", "dtnn", "rgcn"])
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--mixture", choices=["normalized", "paper-literal"])
    common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True,
                   choices=["train", "validation", "seen", "unseen"])
    p.add_argument("--threads", type=int)
    common(p)

    p = sub.add_parser("baseline", help="random-guess FITB baseline")
    p.add_argument("--instances", required=True, help="FITB instance file")
    p.add_argument("--radius", type=int, default=8)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    common(p)

    p = sub.add_parser("predict", help="run a checkpoint on one source file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--file", required=True)
    p.add_argument("--target", help="identifier to hide")
    p.add_argument("--top", type=int, default=5)
    common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _request_body(args) -> tuple[str, dict]:
    if args.command == "extract":
        return "/extract", {
            "input_dir": args.input,
            "out_dir": args.out,
            "unseen_repo_count": args.unseen_repos,
            "seen_file_fraction": args.seen_fraction,
            "val_fraction": args.val_fraction,
            "seed": args.seed,
            "min_token_run": args.min_token_run,
        }
    if args.command == "instances":
        return "/instances", {
            "input_dir": args.input,
            "manifest_path": args.manifest,
            "out_dir": args.out,
            "task": args.task,
            "representation": args.repr,
            "vocab_strategy": VOCAB_FLAGS[args.vocab],
            "seed": args.seed,
            "max_nodes": args.max_nodes,
            "per_variable": args.per_variable,
        }
    if args.command == "train":
        body = {
            "data_dir": args.data,
            "out_dir": args.out,
            "config_path": args.config,
            "task": args.task,
            "representation": args.repr,
            "vocab_strategy": VOCAB_FLAGS[args.vocab] if args.vocab else None,
            "gnn": args.gnn,
            "seed": args.seed,
            "hidden": args.hidden,
            "rounds": args.rounds,
            "lr": args.lr,
            "batch_size": args.batch_size,
            "patience": args.patience,
            "max_epochs": args.max_epochs,
            "mixture": args.mixture,
        }
        return "/train", {k: v for k, v in body.items() if v is not None}
    if args.command == "eval":
        body = {
            "checkpoint_path": args.checkpoint,
            "data_dir": args.data,
            "split": args.split,
            "threads": args.threads,
        }
        return "/eval", {k: v for k, v in body.items() if v is not None}
    if args.command == "baseline":
        return "/baseline", {
            "instances_path": args.instances,
            "radius": args.radius,
            "trials": args.trials,
            "seed": args.seed,
        }
    if args.command == "predict":
        body = {
            "checkpoint_path": args.checkpoint,
            "file_path": args.file,
            "target": args.target,
            "top": args.top,
        }
        return "/predict", {k: v for k, v in body.items() if v is not None}
    raise AssertionError(f"unhandled command {args.command!r}")


def _post(args, route: str, body: dict):
    import httpx

    if args.server:
        return httpx.post(args.server.rstrip("/") + route, json=body, timeout=None)

    import asyncio

    from .service import create_app

    async def call():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://gscode") as client:
            return await client.post(route, json=body, timeout=None)

    return asyncio.run(call())


def _summarize(command: str, data: dict, out) -> None:
    if command == "extract":
        sizes = data["split_sizes"]
        print(
            f"{data['units']} files in {data['repos']} repos; "
            f"train/validation/seen/unseen = {sizes['train']}/{sizes['validation']}/"
            f"{sizes['seen_test']}/{sizes['unseen_test']}; "
            f"duplication {data['duplication_fraction']:.1%}",
            file=out,
        )
        print(f"manifest: {data['manifest_path']}", file=out)
    elif command == "instances":
        counts = ", ".join(f"{k}={v}" for k, v in sorted(data["counts"].items()))
        print(f"wrote instances to {data['out_dir']}: {counts}", file=out)
        for failure in data["failures"]:
            print(f"skipped {failure['unit']}: {failure['reason']}", file=out)
    elif command == "train":
        print(
            f"trained {data['epochs']} epochs (config {data['config_digest']}); "
            f"best validation metric {data['best_metric']:.4f}",
            file=out,
        )
        print(f"checkpoint: {data['checkpoint_path']}", file=out)
    elif command == "eval":
        line = (
            f"{data['split']}: {data['count']} instances, "
            f"accuracy {data['accuracy']:.4f}, top-5 {data['top5_accuracy']:.4f}"
        )
        if "subword_accuracy" in data:
            line += (
                f", subword {data['subword_accuracy']:.4f}, "
                f"edit {data['edit_distance']:.2f} "
                f"(normalized {data['normalized_edit_distance']:.3f})"
            )
        print(line + f" [{data['wall_clock_s']:.1f}s]", file=out)
    elif command == "baseline":
        print(
            f"radius-{data['radius']} random guess over {data['count']} instances: "
            f"{data['mc_accuracy']:.4f} +/- {data['std_error']:.4f} "
            f"(exact expectation {data['exact_expectation']:.4f})",
            file=out,
        )
    elif command == "predict":
        if "candidates" in data:
            print(f"blank fit for '{data['target']}' in {data['file']}:", file=out)
            for i, c in enumerate(data["candidates"], start=1):
                where = f"{c['line']}:{c['column']}" if c["line"] is not None else "?"
                print(f"  {i}. {c['name']} @ {where} (score {c['score']:.4f})", file=out)
        else:
            print(f"names for '{data['target']}' in {data['file']}:", file=out)
            for i, n in enumerate(data["names"], start=1):
                print(f"  {i}. {' '.join(n['words'])} (logp {n['log_prob']:.4f})", file=out)
    else:
        print(json.dumps(data, indent=2, sort_keys=True), file=out)


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad usage

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    route, body = _request_body(args)
    try:
        response = _post(args, route, body)
    except Exception as exc:  # connection failures against --server
        print(f"error: {exc}", file=err)
        return 1
    if response.status_code == 422:
        detail = response.json().get("detail")
        print(f"usage error: {detail}", file=err)
        return 2
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        print(f"error: {detail}", file=err)
        return 1
    data = response.json()
    if args.json:
        print(json.dumps(data, indent=2, sort_keys=True), file=out)
    else:
        _summarize(args.command, data, out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
