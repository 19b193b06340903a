"""Command line interface.

Subcommands: index (encode a library), search (query an index), synth
(generate test data) and report (aggregate run statistics). Exit codes:
0 success, 1 usage error, 2 I/O error, 3 data or format incompatibility.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import ConfigFileError, resolve_run_config
from .encoder import EncodingError, gen_item_memory
from .fdr import fdr_summary, filter_fdr
from .index import (
    CacheBudgetError,
    IndexBuildError,
    IndexFormatError,
    LibraryIndex,
    build_index,
)
from .pipeline import encode_queries, encode_references
from .search import search_all
from .spectra_io import MgfParseError, parse_mgf, read_psms, write_mgf, write_psms
from .synth import SynthConfig, generate_dataset, read_ground_truth, write_ground_truth

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3

class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; this tool reserves 2
    # for I/O problems, so usage errors are remapped to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        metavar="FILE",
        help="key=value config file (default: $RAPIDOMS_CONFIG if set)",
    )


def _add_index_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bin-size", type=float, dest="bin_size")
    parser.add_argument("--mz-min", type=float, dest="mz_min")
    parser.add_argument("--mz-max", type=float, dest="mz_max")
    parser.add_argument("--levels", type=int, dest="levels")
    parser.add_argument("--dim", type=int, dest="dim")
    parser.add_argument("--seed", type=int, dest="seed")
    parser.add_argument("--max-r", type=int, dest="max_r")
    parser.add_argument("--decoy-prefix", dest="decoy_prefix")


def _add_search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol-ppm", type=float, dest="tol_ppm")
    parser.add_argument("--open-tol-da", type=float, dest="open_tol_da")
    parser.add_argument("--q-block", type=int, dest="q_block")
    parser.add_argument("--max-q", type=int, dest="max_q")
    parser.add_argument("--fdr", type=float, dest="fdr")
    parser.add_argument(
        "--cache-budget-bytes", type=int, dest="cache_budget_bytes"
    )
    parser.add_argument("--workers", type=int, dest="workers")
    parser.add_argument("--decoy-prefix", dest="decoy_prefix")
    parser.add_argument(
        "--count-comparisons",
        action=argparse.BooleanOptionalAction,
        dest="count_comparisons",
        default=None,
    )
    parser.add_argument(
        "--stats-json", metavar="FILE", help="also write statistics as JSON"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="hdoms",
        description="Open modification spectral library search with binary "
        "hypervector encoding.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_index = sub.add_parser("index", help="encode an MGF library into an index")
    p_index.add_argument("library", help="reference library (MGF)")
    p_index.add_argument("out_index", help="output index file")
    _add_index_flags(p_index)
    _add_config_flag(p_index)
    p_index.set_defaults(handler=cmd_index)

    p_search = sub.add_parser("search", help="search queries against an index")
    p_search.add_argument("queries", help="query spectra (MGF)")
    p_search.add_argument("index", help="index file built by 'hdoms index'")
    p_search.add_argument("out_tsv", help="output PSM table (TSV)")
    _add_search_flags(p_search)
    _add_config_flag(p_search)
    p_search.set_defaults(handler=cmd_search)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("out_dir", help="output directory")
    p_synth.add_argument("--n-refs", type=int, default=1000)
    p_synth.add_argument("--n-queries", type=int, default=1000)
    p_synth.add_argument("--peaks", type=int, default=30, dest="peaks")
    p_synth.add_argument("--perturb-rate", type=float, default=0.0)
    p_synth.add_argument("--dropout-rate", type=float, default=0.0)
    p_synth.add_argument("--decoy-fraction", type=float, default=0.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument(
        "--charges", default="2,3", help="comma separated charge states"
    )
    p_synth.add_argument("--pmz-min", type=float, default=400.0)
    p_synth.add_argument("--pmz-max", type=float, default=1600.0)
    p_synth.add_argument("--query-pmz-shift-da", type=float, default=0.0)
    p_synth.add_argument("--levels", type=int, default=64)
    p_synth.add_argument("--bin-size", type=float, default=0.05)
    p_synth.set_defaults(handler=cmd_synth)

    p_report = sub.add_parser(
        "report", help="aggregate search statistics and PSM files"
    )
    p_report.add_argument(
        "--run",
        nargs=2,
        metavar=("PSMS", "STATS"),
        action="append",
        required=True,
        help="one search run: PSM table and stats JSON (repeatable)",
    )
    p_report.add_argument(
        "--ground-truth", metavar="FILE", help="sidecar from 'hdoms synth'"
    )
    p_report.add_argument("--out", metavar="FILE", help="CSV output (default stdout)")
    p_report.set_defaults(handler=cmd_report)
    return parser


def _flag_dict(args: argparse.Namespace, keys: list[str]) -> dict[str, object]:
    return {key: getattr(args, key, None) for key in keys}


_INDEX_KEYS = ["bin_size", "mz_min", "mz_max", "levels", "dim", "seed", "max_r", "decoy_prefix"]
_SEARCH_KEYS = [
    "tol_ppm",
    "open_tol_da",
    "q_block",
    "max_q",
    "fdr",
    "cache_budget_bytes",
    "workers",
    "decoy_prefix",
    "count_comparisons",
]


def cmd_index(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args.config, _flag_dict(args, _INDEX_KEYS))
    spectra, skipped = parse_mgf(args.library, cfg.decoy_prefix)
    print(f"parsed {len(spectra)} spectra ({skipped} skipped)")
    im = gen_item_memory(
        cfg.preprocess.num_bins(), cfg.preprocess.num_levels, cfg.dim, cfg.seed
    )
    refs = encode_references(spectra, cfg.preprocess, im)
    blocks = build_index(refs, cfg.max_r, im, cfg.preprocess, args.out_index)
    for charge in sorted(blocks):
        count = sum(1 for r in refs if r.charge == charge)
        print(f"charge={charge} records={count} blocks={blocks[charge]}")
    print(
        f"indexed {len(refs)} references into {sum(blocks.values())} blocks "
        f"across {len(blocks)} charges"
    )
    return EXIT_OK


def cmd_search(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args.config, _flag_dict(args, _SEARCH_KEYS))
    with LibraryIndex.open(args.index, cfg.cache_budget_bytes) as index:
        # Encoding parameters come from the index itself; queries are
        # preprocessed with the embedded snapshot and encoded with the
        # embedded item memory, so they always match the references.
        spectra, skipped = parse_mgf(args.queries, cfg.decoy_prefix)
        queries = encode_queries(
            spectra, index.preprocess_config, index.item_memory
        )
        std_psms, open_psms, stats = search_all(
            queries, index, cfg.search, workers=cfg.workers
        )
        std_result = filter_fdr(std_psms, cfg.fdr)
        open_result = filter_fdr(open_psms, cfg.fdr)
        write_psms(std_result.accepted + open_result.accepted, args.out_tsv)
        summary = fdr_summary(std_result, open_result)
        print(f"queries={len(queries)} skipped={skipped}")
        print(stats.as_key_values())
        print(summary.as_key_values())
        if args.stats_json:
            payload = stats.to_dict()
            payload["config"] = {
                "tol_ppm": cfg.search.tol_ppm,
                "open_tol_da": cfg.search.open_tol_da,
                "q_block": cfg.search.q_block,
                "max_q": cfg.search.max_q,
                "fdr_threshold": cfg.fdr.threshold,
                "workers": cfg.workers,
            }
            payload["results"] = {
                "standard": {
                    "accepted": summary.standard_accepted,
                    "cutoff": summary.cutoff_standard,
                    "fdr": summary.fdr_standard,
                },
                "open": {
                    "accepted": summary.open_accepted,
                    "cutoff": summary.cutoff_open,
                    "fdr": summary.fdr_open,
                },
                "overlap_queries": summary.overlap_queries,
            }
            with open(args.stats_json, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    charges = tuple(int(c) for c in args.charges.split(",") if c.strip())
    cfg = SynthConfig(
        n_refs=args.n_refs,
        n_queries=args.n_queries,
        peaks_per_spectrum=args.peaks,
        perturb_rate=args.perturb_rate,
        dropout_rate=args.dropout_rate,
        decoy_fraction=args.decoy_fraction,
        seed=args.seed,
        charges=charges,
        pmz_min=args.pmz_min,
        pmz_max=args.pmz_max,
        query_pmz_shift_da=args.query_pmz_shift_da,
        num_levels=args.levels,
        bin_size=args.bin_size,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    refs, queries, truth = generate_dataset(cfg)
    write_mgf(refs, out_dir / "library.mgf")
    write_mgf(queries, out_dir / "queries.mgf")
    write_ground_truth(truth, out_dir / "ground_truth.tsv")
    print(
        f"wrote {len(refs)} references ({len(refs) - cfg.n_refs} decoys), "
        f"{len(queries)} queries to {out_dir}"
    )
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    truth = None
    if args.ground_truth:
        truth = {g.query_id: g.ref_id for g in read_ground_truth(args.ground_truth)}
    rows = []
    for psms_path, stats_path in args.run:
        psms = read_psms(psms_path)
        with open(stats_path, "r", encoding="utf-8") as fh:
            stats = json.load(fh)
        std = [p for p in psms if p.mode == "standard"]
        opn = [p for p in psms if p.mode == "open"]
        row = {
            "open_tol_da": stats.get("config", {}).get("open_tol_da"),
            "comparisons": stats.get("comparisons"),
            "blocks_scored": stats.get("blocks_scored"),
            "standard_accepted": len(std),
            "open_accepted": len(opn),
            "overlap_queries": len(
                {p.query_id for p in std} & {p.query_id for p in opn}
            ),
            "cutoff_standard": stats.get("results", {})
            .get("standard", {})
            .get("cutoff"),
            "cutoff_open": stats.get("results", {}).get("open", {}).get("cutoff"),
        }
        if truth is not None:
            for mode, mode_psms in (("standard", std), ("open", opn)):
                correct = sum(
                    1 for p in mode_psms if truth.get(p.query_id) == p.ref_id
                )
                row[f"precision_{mode}"] = (
                    round(correct / len(mode_psms), 6) if mode_psms else ""
                )
        else:
            row["precision_standard"] = ""
            row["precision_open"] = ""
        rows.append(row)
    rows.sort(key=lambda r: (r["open_tol_da"] is None, r["open_tol_da"]))
    columns = [
        "open_tol_da",
        "comparisons",
        "blocks_scored",
        "standard_accepted",
        "open_accepted",
        "overlap_queries",
        "cutoff_standard",
        "cutoff_open",
        "precision_standard",
        "precision_open",
    ]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            writer.writerows(rows)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(
            f"open_tol_da={row['open_tol_da']} comparisons={row['comparisons']} "
            f"standard={row['standard_accepted']} open={row['open_accepted']} "
            f"overlap={row['overlap_queries']}",
            file=sys.stderr,
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.handler(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"hdoms: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (
        MgfParseError,
        IndexFormatError,
        IndexBuildError,
        EncodingError,
        CacheBudgetError,
        ConfigFileError,
        json.JSONDecodeError,
    ) as exc:
        print(f"hdoms: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"hdoms: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"hdoms: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
