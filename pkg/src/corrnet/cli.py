"""Command-line entry point: ``corrnet <subcommand> --config cfg.json``.

Subcommands mirror the pipeline stages and persist their artifacts in the
output directory: ``ingest-check``, ``rmt``, ``graph``, ``communities``,
``report`` (also writes the cross-window table and manifest), ``run``
(everything), and ``synth`` (write a synthetic price file).
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from pathlib import Path

from .errors import ConfigError, CorrnetError, DependencyError, NumericalError
from .market_data import (
    RankingSnapshot,
    load_price_panel,
    synthesize_panel,
    write_price_panel,
    write_ranking_snapshot,
)
from . import pipeline

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3
STAGE_OF = {"ingest-check": "ingest", "rmt": "rmt", "graph": "graph", "communities": "communities", "report": "report"}
HELP = {
    "ingest-check": "validate prices, slice windows, keep complete assets",
    "rmt": "returns, correlation matrix, spectrum and figure data",
    "graph": "correlation distances and the minimum spanning tree",
    "communities": "Louvain communities on the tree",
    "report": "leading assets per community, cross-window table, manifest",
    "run": "every stage for every window",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="corrnet", description="Correlation-network analysis of price panels, one stage per subcommand."
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*STAGE_OF, "run"):
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", required=name != "ingest-check", help="pipeline config (JSON)")
        s.add_argument("--out", help="override output_dir")
        s.add_argument("--seed", type=int, help="override Louvain seed")
        s.add_argument("--workers", type=int, help="override worker count")
        if name == "communities":
            s.add_argument("--weight-mode", choices=("inverse-similarity", "unweighted"))
        if name == "ingest-check":
            s.add_argument("--prices", help="validate a price file without a config")
    s = sub.add_parser("synth", help="write a synthetic factor-model price file")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--assets", type=int, default=20)
    s.add_argument("--days", type=int, default=100, help="number of daily returns")
    s.add_argument("--factors", type=int, default=1)
    s.add_argument("--loading", type=float, default=0.7, help="factor loading scale")
    s.add_argument("--start", type=date.fromisoformat, default=date(2019, 1, 1))
    s.add_argument("--out", required=True, help="output directory (prices.csv, ranking.csv)")
    return p


def _check_prices(path) -> int:
    panel = load_price_panel(path)
    print(
        f"{path}: {panel.n_assets} assets, {panel.n_dates} dates "
        f"({panel.dates[0]}..{panel.dates[-1]}), {int(panel.missing.sum())} missing cells, "
        f"{int((~panel.missing.any(axis=1)).sum())} complete assets"
    )
    return EXIT_OK


def _synth(args) -> int:
    panel = synthesize_panel(args.seed, args.assets, args.days, args.factors, args.loading, start=args.start)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_price_panel(panel, out / "prices.csv")
    write_ranking_snapshot(
        RankingSnapshot(None, {a: i + 1 for i, a in enumerate(panel.asset_ids)}), out / "ranking.csv"
    )
    print(f"wrote {out / 'prices.csv'} ({panel.n_assets} assets x {panel.n_dates} dates)")
    return EXIT_OK


def _report_status(results: dict) -> int:
    for wid, r in results.items():
        if r.get("status") == "failed":
            print(f"{wid}: FAILED at {r['stage']}: {r['error_type']}: {r['message']}", file=sys.stderr)
        else:
            print(f"{wid}: ok")
    return pipeline.exit_code({k: (v if v.get("status") == "failed" else {"status": "ok"}) for k, v in results.items()})


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        if args.command == "ingest-check" and args.prices:
            return _check_prices(args.prices)
        if not args.config:
            raise ConfigError("--config is required")
        cfg = pipeline.load_config(
            args.config,
            output_dir=str(Path(args.out).resolve()) if args.out else None,
            seed=args.seed,
            workers=args.workers,
            weight_mode=getattr(args, "weight_mode", None),
        )
        if args.command == "run":
            manifest = pipeline.run_pipeline(cfg)
            return _report_status(manifest["windows"])
        stage = STAGE_OF[args.command]
        results = pipeline.run_stage(cfg, stage)
        if stage == "report":
            statuses = {k: (v if v.get("status") == "failed" else {"status": "ok"}) for k, v in results.items()}
            manifest = pipeline.finalize(cfg, statuses)
            return _report_status(manifest["windows"])
        return _report_status(results)
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorrnetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
