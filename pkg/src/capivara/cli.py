"""Command-line entry point: ingest, simulate, validate, inspect.

Machine-readable output goes to stdout, diagnostics to stderr. Exit codes:
0 success, 1 validation or parse failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import chain as chainmod
from . import sim as simmod
from .crypto import MockSignatureScheme
from .ingest import read_events, write_events
from .pkgbuild import PkgbuildError, parse_pkgbuild


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_ingest(args: argparse.Namespace) -> int:
    try:
        events, skipped = read_events(args.events)
    except OSError as exc:
        _err(f"cannot read events: {exc}")
        return 1
    kept = []
    for event in events:
        try:
            parse_pkgbuild(event.text)
        except PkgbuildError:
            skipped += 1
            continue
        kept.append(event)
    try:
        write_events(kept, args.out)
    except OSError as exc:
        _err(f"cannot write timeline: {exc}")
        return 1
    print(f"{len(kept)} events, {skipped} skipped")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = simmod.SimConfig.from_file(args.config) if args.config else simmod.SimConfig()
        config.master_seed = args.seed
        config.validate()
    except (simmod.SimConfigError, OSError) as exc:
        _err(f"bad config: {exc}")
        return 2
    try:
        events, skipped = read_events(args.timeline)
    except OSError as exc:
        _err(f"cannot read timeline: {exc}")
        return 1
    if skipped:
        _err(f"timeline: skipped {skipped} malformed lines")
    result = simmod.run(config, events)
    try:
        chainmod.write_chain(result.chain, args.out)
        if args.metrics:
            simmod.emit_metrics(result, args.metrics)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return 1
    print(f"blocks={len(result.chain)} head={result.chain.head_hash}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        chain = chainmod.read_chain(args.chain, MockSignatureScheme())
    except (OSError, chainmod.ChainFileError) as exc:
        _err(f"cannot read chain: {exc}")
        return 1
    report = chainmod.verify_chain(chain)
    if report.ok:
        print(f"valid blocks={len(chain)} head={chain.head_hash}")
        return 0
    for violation in report.violations:
        print(violation)
    return 1


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        chain = chainmod.read_chain(args.chain, MockSignatureScheme())
    except (OSError, chainmod.ChainFileError) as exc:
        _err(f"cannot read chain: {exc}")
        return 1
    if args.trails:
        report, state = chainmod.replay(chain)
        if state is None:
            for violation in report.violations:
                print(violation, file=sys.stderr)
            return 1
        for name in sorted(state.registry.trails):
            trail = state.registry.trails[name]
            created = trail.activated_height if trail.activated_height is not None else "-"
            print(f"{name} {trail.status.value} members={len(trail.members)} created={created}")
        return 0
    if args.hash is not None:
        block = chain.block_by_hash(args.hash)
        if block is None:
            _err(f"no block with hash {args.hash}")
            return 1
    else:
        if args.block < 0 or args.block >= len(chain.blocks):
            _err(f"no block at height {args.block}")
            return 1
        block = chain.blocks[args.block]
    print(json.dumps(block.to_obj(), sort_keys=True, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capivara",
        description="Decentralized package-repository blockchain simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="normalize a package-history event file")
    p_ingest.add_argument("--events", required=True, help="input event JSONL")
    p_ingest.add_argument("--out", required=True, help="normalized timeline JSONL")
    p_ingest.set_defaults(func=cmd_ingest)

    p_sim = sub.add_parser("simulate", help="replay a timeline into a chain")
    p_sim.add_argument("--timeline", required=True, help="timeline JSONL from ingest")
    p_sim.add_argument("--config", help="simulation config JSON (defaults apply)")
    p_sim.add_argument("--seed", required=True, type=int, help="master seed")
    p_sim.add_argument("--out", required=True, help="chain file to write")
    p_sim.add_argument("--metrics", help="directory for metrics CSVs")
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", help="replay-validate a chain file")
    p_val.add_argument("--chain", required=True, help="chain file")
    p_val.set_defaults(func=cmd_validate)

    p_ins = sub.add_parser("inspect", help="print a block or the trail registry")
    p_ins.add_argument("--chain", required=True, help="chain file")
    group = p_ins.add_mutually_exclusive_group(required=True)
    group.add_argument("--block", type=int, help="block height")
    group.add_argument("--hash", help="block hash")
    group.add_argument("--trails", action="store_true", help="trail registry summary")
    p_ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
