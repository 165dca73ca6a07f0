"""Command-line pipeline: one subcommand per stage, text artifacts out.

disasm | cfg | selectors | connect | paths | features | detect
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import subprocess
import sys
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path

from . import connector, features, ingest
from .cfg import build_cfg, cfg_to_dict, cfg_to_dot, extract_selectors
from .disasm import disassemble, format_listing
from .paths import PathLimits, enumerate_paths, path_id, write_paths

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_USAGE = 2
EXIT_COMPONENT_MISSING = 3

CLASSIFIER_ENV = "PATHLAB_CLASSIFIER"


@dataclass
class PipelineConfig:
    limits: PathLimits
    window: int
    split_ratio: float
    seed: int
    rpc: str | None
    output_dir: Path
    jobs: int = ingest.DEFAULT_JOBS
    oversample: bool = True

    def __post_init__(self):
        if not 0 < self.split_ratio < 1:
            raise ValueError("split ratio must be in (0, 1)")


def _dump(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _limits(args) -> PathLimits:
    return PathLimits(
        max_paths_per_entry=args.max_paths,
        max_path_length=args.max_length,
        max_block_revisits=args.max_revisits,
    )


def _add_limit_flags(sub) -> None:
    sub.add_argument("--max-paths", type=int, default=64, help="paths kept per entry")
    sub.add_argument("--max-length", type=int, default=2048, help="token budget per path")
    sub.add_argument("--max-revisits", type=int, default=2, help="times a block may repeat in one path")


def cmd_disasm(args) -> int:
    code = ingest.load_bytecode(args.file)
    listing = format_listing(disassemble(code))
    if listing:
        print(listing)
    return EXIT_OK


def cmd_cfg(args) -> int:
    code = ingest.load_bytecode(args.file)
    cfg = build_cfg(code, split_calls=args.split_calls)
    if args.dot:
        text = cfg_to_dot(cfg) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    _dump(cfg_to_dict(cfg, extract_selectors(cfg)), args.out)
    return EXIT_OK


def cmd_selectors(args) -> int:
    code = ingest.load_bytecode(args.file)
    cfg = build_cfg(code)
    for sel in extract_selectors(cfg):
        print(f"0x{sel.hex} entry_block={sel.entry_block} source={sel.source}")
    return EXIT_OK


def _connect_from_args(args) -> connector.RCfg:
    caller_file, callee_file = args.caller, args.callee
    if getattr(args, "swap", False):
        caller_file, callee_file = callee_file, caller_file
    caller = ingest.load_bytecode(caller_file)
    callee = ingest.load_bytecode(callee_file)
    return connector.connect(caller, callee)


def cmd_connect(args) -> int:
    _dump(connector.rcfg_to_dict(_connect_from_args(args)), args.out)
    return EXIT_OK


def cmd_paths(args) -> int:
    if args.single:
        graph = connector.ContractGraph.analyze(
            ingest.load_bytecode(args.single), split_calls=False
        )
    else:
        if not (args.caller and args.callee):
            print("error: provide --caller and --callee, or --single", file=sys.stderr)
            return EXIT_USAGE
        graph = _connect_from_args(args)
    found = enumerate_paths(graph, _limits(args))
    if args.out:
        with open(args.out, "w") as fp:
            write_paths(found, fp)
    else:
        write_paths(found, sys.stdout)
    return EXIT_OK


def cmd_features(args) -> int:
    config = PipelineConfig(
        limits=_limits(args),
        window=args.window,
        split_ratio=args.split,
        seed=args.seed,
        rpc=args.rpc or os.environ.get(ingest.RPC_URL_ENV) or None,
        output_dir=Path(args.out),
        jobs=args.jobs,
        oversample=not args.no_oversample,
    )
    manifest = ingest.load_manifest(args.manifest)
    resolved = ingest.resolve_manifest(
        manifest,
        cache_dir=args.cache,
        endpoint=config.rpc,
        jobs=config.jobs,
        base_dir=Path(args.manifest).parent,
    )

    corpus = []
    for rv in resolved:
        if rv.skipped:
            print(f"skipped {rv.event.event_id}: {rv.reason}", file=sys.stderr)
            continue
        rcfg = connector.connect(rv.caller, rv.callee)
        for p in enumerate_paths(rcfg, config.limits):
            corpus.append(
                dc_replace(
                    p,
                    id=path_id((rv.event.event_id,) + p.tokens),
                    label=rv.event.label,
                )
            )
    if not corpus:
        print("error: no feasible paths in any resolved event", file=sys.stderr)
        return EXIT_PIPELINE

    graph, _ = features.build_feature_graph(corpus, window=config.window)
    features.export_dataset(
        graph,
        corpus,
        config.output_dir,
        ratio=config.split_ratio,
        seed=config.seed,
        oversample=config.oversample,
    )
    print(f"bundle written to {config.output_dir}")
    return EXIT_OK


def cmd_detect(args) -> int:
    bundle = Path(args.bundle)
    if not (bundle / "paths").exists():
        print(f"error: {bundle} is not a dataset bundle", file=sys.stderr)
        return EXIT_PIPELINE
    command = args.classifier or os.environ.get(CLASSIFIER_ENV)
    if not command:
        print(
            "classifier component not configured: set --classifier or "
            f"{CLASSIFIER_ENV} to its launch command",
            file=sys.stderr,
        )
        return EXIT_COMPONENT_MISSING
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    argv = shlex.split(command) + [
        "detect",
        "--bundle",
        str(bundle),
        "--out-dir",
        str(out_dir),
    ]
    try:
        proc = subprocess.run(argv)
    except FileNotFoundError:
        print(f"classifier command not found: {argv[0]}", file=sys.stderr)
        return EXIT_COMPONENT_MISSING
    if proc.returncode != 0:
        print(f"classifier exited with {proc.returncode}", file=sys.stderr)
        return EXIT_PIPELINE
    verdicts = out_dir / "verdicts"
    if verdicts.exists():
        sys.stdout.write(verdicts.read_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathlab",
        description="cross-contract bytecode graph and path analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disasm", help="print an instruction listing")
    p.add_argument("file", help="hex bytecode file")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("cfg", help="recover and export the block graph")
    p.add_argument("file")
    p.add_argument("--split-calls", action="store_true", help="end blocks at call operations")
    p.add_argument("--dot", action="store_true", help="emit graph-description text instead")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_cfg)

    p = sub.add_parser("selectors", help="list dispatcher function ids")
    p.add_argument("file")
    p.set_defaults(func=cmd_selectors)

    p = sub.add_parser("connect", help="splice callee functions into the caller graph")
    p.add_argument("--caller", required=True)
    p.add_argument("--callee", required=True)
    p.add_argument("--swap", action="store_true", help="exchange the two roles")
    p.add_argument("--out")
    p.set_defaults(func=cmd_connect)

    p = sub.add_parser("paths", help="enumerate feasible data paths")
    p.add_argument("--caller")
    p.add_argument("--callee")
    p.add_argument("--swap", action="store_true")
    p.add_argument("--single", help="one contract, no connection")
    p.add_argument("--out")
    _add_limit_flags(p)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("features", help="build the dataset bundle from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="bundle directory")
    p.add_argument("--split", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=features.DEFAULT_WINDOW)
    p.add_argument("--cache", default="cache")
    p.add_argument("--rpc", help=f"node endpoint (or {ingest.RPC_URL_ENV})")
    p.add_argument("--jobs", type=int, default=ingest.DEFAULT_JOBS)
    p.add_argument("--no-oversample", action="store_true")
    _add_limit_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("detect", help="run the classifier component on a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", default="detect-out")
    p.add_argument("--classifier", help=f"launch command (or {CLASSIFIER_ENV})")
    p.set_defaults(func=cmd_detect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        ingest.BadHex,
        ingest.BadManifest,
        ingest.RpcError,
        ingest.EmptyCode,
        features.EmptyCorpus,
        features.MissingLabels,
        connector.MidBlockCall,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
