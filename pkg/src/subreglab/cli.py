"""Command-line front end.

Verbs::

    subreglab run SPEC [SPEC ...]      run experiment spec files
    subreglab replicate-all            rerun every built-in worked case
    subreglab catalog list             list catalog map identifiers
    subreglab catalog describe ID      show one catalog entry

Exit codes: 0 pass, 1 fail/violation (or any replication row failing),
2 spec/capability errors.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .errors import SubregLabError
from .experiments import load_spec, run, run_replicate_all, write_result
from .maps import catalog, get_entry


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subreglab",
        description="desk-scale higher-order subregularity laboratory",
    )
    parser.add_argument("--version", action="version", version=f"subreglab {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="run experiment spec files")
    run_p.add_argument("specs", nargs="+", metavar="SPEC")
    _common_flags(run_p)

    rep_p = sub.add_parser("replicate-all", help="rerun every built-in worked case")
    _common_flags(rep_p)

    cat_p = sub.add_parser("catalog", help="inspect the map catalog")
    cat_sub = cat_p.add_subparsers(dest="catalog_verb", required=True)
    cat_sub.add_parser("list", help="list catalog identifiers")
    desc = cat_sub.add_parser("describe", help="describe one catalog entry")
    desc.add_argument("id")
    return parser


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=None, help="directory for output files")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1, metavar="N")
    p.add_argument(
        "--seed", type=int, default=None, help="seed for randomized property sampling"
    )


def _cmd_run(args) -> int:
    try:
        specs = [load_spec(p) for p in args.specs]
    except SubregLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    def execute(spec):
        return run(spec, seed=args.seed)

    try:
        if args.threads > 1 and len(specs) > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                results = list(pool.map(execute, specs))
        else:
            results = [execute(s) for s in specs]
    except SubregLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    code = 0
    for spec, result in zip(args.specs, results):
        written = write_result(result, args.out_dir)
        print(
            f"{spec}: kind={result.spec.kind} verdict={result.verdict} "
            f"({result.wall_clock:.3f}s) -> {written[0]}"
        )
        code = max(code, result.exit_code)
    return code


def _cmd_replicate_all(args) -> int:
    summary, path = run_replicate_all(
        out_dir=args.out_dir, fmt=args.format, threads=args.threads
    )
    width = max(len(r.name) for r in summary.results)
    for r in summary.results:
        print(f"{r.status:4s}  {r.name:{width}s}  {r.detail}")
    n_pass = sum(r.passed for r in summary.results)
    print(f"{n_pass}/{len(summary.results)} criteria passed")
    if path is not None:
        print(f"matrix -> {path}")
    return 0 if summary.all_passed else 1


def _cmd_catalog(args) -> int:
    if args.catalog_verb == "list":
        for entry in catalog():
            print(f"{entry.label:22s} base={entry.base_point} {entry.notes.split(';')[0]}")
        return 0
    try:
        entry = get_entry(args.id)
    except LookupError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    m = entry.map
    print(f"id:             {entry.label}")
    print(f"base point:     {entry.base_point}")
    print(f"domain:         {m.domain}")
    print(f"known order:    {entry.known_order}")
    print(f"known modulus:  {entry.known_modulus_bound}")
    print(f"has inverse:    {m.has_inverse}")
    print(f"anchors:        {m.anchors}")
    print(f"truncation:     {m.truncation_scale}")
    print(f"has potential:  {entry.potential is not None}")
    print(f"notes:          {entry.notes}")
    xbar = entry.base_point[0]
    for off in (0.5, 0.25, 0.125):
        x = xbar + off
        if m.domain.contains(x):
            print(f"eval({x!r}) = {m.eval(x)}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.verb == "run":
        return _cmd_run(args)
    if args.verb == "replicate-all":
        return _cmd_replicate_all(args)
    return _cmd_catalog(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
