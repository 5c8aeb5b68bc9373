"""End-to-end pipeline over one or more analysis windows.

Every stage reads the previous stage's files from the output directory and
writes its own, so stages can be re-run independently. Files live in
``<out>/<window_id>/`` and are named ``<window_id>.<stage>.<what>.<ext>``.

Config (JSON)::

    {
      "price_file": "prices.csv",
      "ranking_files": ["rank_2019-12-29.csv", {"path": "r2.csv", "as_of": "2020-06-28"}],
      "windows": [{"id": "T1", "start": "2019-01-01", "end": "2019-05-05"}],
      "top_k": 50,                  # optional, by rank in ranking_files[top_k_snapshot]
      "top_k_snapshot": 0,
      "min_community_size": 4,
      "weight_mode": "inverse-similarity",
      "seed": 0,
      "output_dir": "out",
      "workers": 1,
      "histogram_bins": 40
    }

Window dates are return days: a window ``start..end`` uses closes from the
day before ``start`` through ``end``, so ``T`` equals the number of calendar
days in the window. Relative paths resolve against the config file.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text, read_csv, write_csv
from .correlation import (
    CorrelationMatrix,
    correlation_histogram,
    correlation_matrix,
    distance_matrix,
    histogram_rows,
    read_matrix,
    write_matrix,
)
from .errors import ConfigError, CorrnetError, DependencyError, DomainError, NumericalError
from .market_data import (
    AnalysisWindow,
    PricePanel,
    filter_complete,
    load_price_panel,
    load_ranking_snapshot,
    return_window,
    write_price_panel,
)
from .network import (
    WEIGHT_MODES,
    communities_of_mst,
    dense_graph_from_distances,
    mst_kruskal,
    mst_prim,
    read_tree,
    write_dot,
    write_partition,
    write_tree,
    read_partition,
    CommunityPartition,
    modularity,
    tree_weights,
)
from .portfolio import (
    DEFAULT_MIN_COMMUNITY_SIZE,
    build_portfolio_report,
    cross_window_consistency,
    write_consistency,
    write_report,
)
from .returns import NormalizedReturns, log_returns, normalize_returns
from .spectra import (
    bulk_vs_deviating_ks,
    classify_eigenvalues,
    eigendecompose,
    ipr,
    mp_bounds,
    mp_density,
    pooled_components,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "rmt", "graph", "communities", "report")
SUBCOMMAND = {
    "ingest": "ingest-check",
    "rmt": "rmt",
    "graph": "graph",
    "communities": "communities",
    "report": "report",
}
MP_OVERLAY_POINTS = 2001


@dataclass(frozen=True)
class WindowSpec:
    window_id: str
    start: date
    end: date


@dataclass(frozen=True)
class RankingSource:
    path: str
    as_of: date | None = None


@dataclass(frozen=True)
class PipelineConfig:
    price_file: str
    windows: tuple[WindowSpec, ...]
    ranking_files: tuple[RankingSource, ...] = ()
    top_k: int | None = None
    top_k_snapshot: int = 0
    min_community_size: int = DEFAULT_MIN_COMMUNITY_SIZE
    weight_mode: str = "inverse-similarity"
    seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    histogram_bins: int = 40

    def __post_init__(self):
        if not self.windows:
            raise ConfigError("at least one window is required")
        ids = [w.window_id for w in self.windows]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate window ids: {ids}")
        for w in self.windows:
            if not w.window_id or any(c in w.window_id for c in "/\\."):
                raise ConfigError(f"window id {w.window_id!r} must be non-empty without '/', '\\' or '.'")
            if not w.start < w.end:
                raise ConfigError(f"window {w.window_id}: start {w.start} must precede end {w.end}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.min_community_size < 1:
            raise ConfigError("min_community_size must be >= 1")
        if self.top_k is not None:
            if self.top_k < 2:
                raise ConfigError("top_k must be >= 2")
            if not 0 <= self.top_k_snapshot < len(self.ranking_files):
                raise ConfigError("top_k needs a ranking file at index top_k_snapshot")
        if self.workers < 1 or self.histogram_bins < 1:
            raise ConfigError("workers and histogram_bins must be >= 1")

    def echo(self) -> dict:
        d = asdict(self)
        d["windows"] = [
            {"id": w.window_id, "start": w.start.isoformat(), "end": w.end.isoformat()} for w in self.windows
        ]
        d["ranking_files"] = [
            {"path": r.path, "as_of": r.as_of.isoformat() if r.as_of else None} for r in self.ranking_files
        ]
        return d


def _parse_date(value, what) -> date:
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{what}: bad ISO date {value!r}") from None


def config_from_dict(raw: dict, base_dir: str | os.PathLike | None = None, **overrides) -> PipelineConfig:
    """Build a config from parsed JSON; relative paths resolve against ``base_dir``."""
    raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
    known = {f for f in PipelineConfig.__dataclass_fields__} | {"price_file", "windows"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def resolve(p):
        p = Path(p)
        return str(p if p.is_absolute() else base / p)

    if "price_file" not in raw or "windows" not in raw:
        raise ConfigError("config needs 'price_file' and 'windows'")
    try:
        windows = tuple(
            WindowSpec(str(w["id"]), _parse_date(w["start"], w["id"]), _parse_date(w["end"], w["id"]))
            for w in raw["windows"]
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"each window needs id, start, end ({exc})") from None
    rankings = []
    for r in raw.get("ranking_files", []):
        if isinstance(r, str):
            rankings.append(RankingSource(resolve(r)))
        else:
            as_of = _parse_date(r["as_of"], "ranking as_of") if r.get("as_of") else None
            rankings.append(RankingSource(resolve(r["path"]), as_of))
    kwargs = {
        k: raw[k]
        for k in ("top_k", "top_k_snapshot", "min_community_size", "weight_mode", "seed", "workers", "histogram_bins")
        if k in raw
    }
    return PipelineConfig(
        price_file=resolve(raw["price_file"]),
        windows=windows,
        ranking_files=tuple(rankings),
        output_dir=resolve(raw.get("output_dir", "out")),
        **kwargs,
    )


def load_config(path, **overrides) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(raw, path.parent, **overrides)


# -- artifact paths ---------------------------------------------------------


def artifact(cfg: PipelineConfig, window_id: str, stage: str, what: str, ext: str = "csv") -> Path:
    return Path(cfg.output_dir) / window_id / f"{window_id}.{stage}.{what}.{ext}"


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        sub = SUBCOMMAND[stage]
        raise DependencyError(f"missing {path.name}; run `{sub}` first", required=sub)
    return path


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# -- stages -------------------------------------------------------------------


class _Inputs:
    """Lazily loaded shared inputs; safe to share across window threads once loaded."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self._panel = None
        self._snapshots = None

    @property
    def panel(self) -> PricePanel:
        if self._panel is None:
            self._panel = load_price_panel(self.cfg.price_file)
        return self._panel

    @property
    def snapshots(self):
        if self._snapshots is None:
            self._snapshots = [load_ranking_snapshot(r.path, r.as_of) for r in self.cfg.ranking_files]
        return self._snapshots

    def preload(self):
        self.panel, self.snapshots  # noqa: B018


def stage_ingest(cfg: PipelineConfig, w: WindowSpec, inputs: _Inputs) -> dict:
    panel = return_window(inputs.panel, w.start, w.end)
    complete = filter_complete(panel)
    n_complete = complete.n_assets
    if cfg.top_k is not None:
        snap = inputs.snapshots[cfg.top_k_snapshot]
        ranked = sorted((snap.rank_of(a), a) for a in complete.asset_ids if snap.rank_of(a) is not None)
        keep = [a for _, a in ranked[: cfg.top_k]]
        if len(keep) < 2:
            raise DomainError(f"only {len(keep)} complete assets are ranked in the top-k snapshot")
        complete = complete.select_assets(keep)
    window = AnalysisWindow.of(complete)
    write_price_panel(complete, artifact(cfg, w.window_id, "ingest", "prices"))
    summary = {
        "window_id": w.window_id,
        "stage": "ingest",
        "start": w.start.isoformat(),
        "end": w.end.isoformat(),
        "n_assets_in_file": panel.n_assets,
        "n_complete": n_complete,
        "N": window.n_assets,
        "T": window.n_days,
        "Q": window.q_factor,
    }
    _write_json(artifact(cfg, w.window_id, "ingest", "summary", "json"), summary)
    return summary


def _read_normalized(cfg, wid) -> NormalizedReturns:
    header, rows = read_csv(_require(artifact(cfg, wid, "rmt", "normalized_returns"), "rmt"))
    stats = _read_json(_require(artifact(cfg, wid, "rmt", "summary", "json"), "rmt"))
    ids = tuple(r[0] for r in rows)
    values = np.array([[float(v) for v in r[1:]] for r in rows])
    return NormalizedReturns(ids, values, stats["row_means"], stats["row_stds"])


def stage_rmt(cfg: PipelineConfig, w: WindowSpec) -> dict:
    wid = w.window_id
    panel = load_price_panel(_require(artifact(cfg, wid, "ingest", "prices"), "ingest"))
    g = normalize_returns(log_returns(panel))
    C = correlation_matrix(g)
    window = AnalysisWindow.of(panel)
    bounds = mp_bounds(window.q_factor)
    spec = eigendecompose(C)
    part = classify_eigenvalues(spec, bounds)
    ks = bulk_vs_deviating_ks(spec, part)
    iprs = ipr(spec)
    bins = cfg.histogram_bins

    write_csv(
        artifact(cfg, wid, "rmt", "normalized_returns"),
        ["asset_id", *(f"t{j}" for j in range(g.n_days))],
        ([a, *row.tolist()] for a, row in zip(g.asset_ids, g.values)),
    )
    write_matrix(C.asset_ids, C.values, artifact(cfg, wid, "rmt", "correlation"))
    export_histograms(cfg, wid, C, spec, part, bounds, iprs, bins)

    summary = {
        "window_id": wid,
        "stage": "rmt",
        "N": window.n_assets,
        "T": window.n_days,
        "Q": window.q_factor,
        "lambda_minus": bounds.lambda_minus,
        "lambda_plus": bounds.lambda_plus,
        "lambda_max": spec.lambda_max,
        "n_deviating": part.n_deviating,
        "n_above": part.n_above,
        "n_below": part.n_below,
        "mean_ipr": iprs.mean_ipr,
        "ks_statistic": _num(ks.statistic) if ks else None,
        "ks_p_value": _num(ks.p_value) if ks else None,
        "row_means": g.row_means.tolist(),
        "row_stds": g.row_stds.tolist(),
    }
    _write_json(artifact(cfg, wid, "rmt", "summary", "json"), summary)
    return summary


def export_histograms(cfg, wid, C: CorrelationMatrix, spec, part, bounds, iprs, bins: int = 40) -> list[Path]:
    """Data behind the four figures: correlation, eigenvalue, eigenvector and IPR distributions."""
    paths = []

    def out(what, header, rows):
        p = artifact(cfg, wid, "rmt", what)
        write_csv(p, header, rows)
        paths.append(p)

    out("fig1_correlation_hist", ["bin_left", "bin_right", "count"], correlation_histogram(C, bins))

    lam = spec.eigenvalues
    bulk = set(part.bulk_indices)
    out(
        "fig2_eigenvalues",
        ["eigenvalue_rank", "eigenvalue", "is_lambda1", "in_bulk"],
        [(k + 1, float(lam[k]), int(k == 0), int(k in bulk)) for k in range(len(lam))],
    )
    for what, values in (("fig2_eigenvalue_hist", lam), ("fig2_eigenvalue_hist_excl_lambda1", lam[1:])):
        hi = max(float(values.max(initial=0.0)), bounds.lambda_plus)
        rows = histogram_rows(values, bins, (0.0, hi * 1.000001))
        out(
            what,
            ["bin_left", "bin_right", "count", "mp_density"],
            [(l, r, c, mp_density(0.5 * (l + r), bounds.q_factor, bounds.sigma_sq)) for l, r, c in rows],
        )
    grid = np.linspace(bounds.lambda_minus, bounds.lambda_plus, MP_OVERLAY_POINTS)
    dens = mp_density(grid, bounds.q_factor, bounds.sigma_sq)
    out("fig2_mp_overlay", ["lambda", "mp_density"], zip(grid.tolist(), dens.tolist()))

    bulk_c = pooled_components(spec, part.bulk_indices)
    dev_c = pooled_components(spec, part.deviating_indices)
    top_c = pooled_components(spec, [0])
    everything = np.concatenate([bulk_c, dev_c])
    edges = np.histogram_bin_edges(everything, bins=bins)
    counts = [np.histogram(x, bins=edges)[0] for x in (bulk_c, dev_c, top_c)]
    centres = 0.5 * (edges[:-1] + edges[1:])
    normal = np.exp(-0.5 * centres**2) / math.sqrt(2 * math.pi)
    out(
        "fig3_eigenvector_hist",
        ["bin_left", "bin_right", "count_bulk", "count_deviating", "count_lambda1", "normal_density"],
        [
            (float(edges[k]), float(edges[k + 1]), int(counts[0][k]), int(counts[1][k]), int(counts[2][k]), float(normal[k]))
            for k in range(len(centres))
        ],
    )
    out(
        "fig4_ipr",
        ["eigenvalue_rank", "eigenvalue", "ipr", "mean_ipr"],
        [(k + 1, float(lam[k]), float(iprs.values[k]), iprs.mean_ipr) for k in range(len(lam))],
    )
    return paths


def stage_graph(cfg: PipelineConfig, w: WindowSpec) -> dict:
    wid = w.window_id
    ids, values = read_matrix(_require(artifact(cfg, wid, "rmt", "correlation"), "rmt"))
    D = distance_matrix(CorrelationMatrix(ids, values))
    g = dense_graph_from_distances(D)
    tree = mst_prim(g)
    check = mst_kruskal(g)
    if tree.edge_set() != check.edge_set():
        raise NumericalError(f"Prim and Kruskal disagree for window {wid}")
    write_matrix(ids, D.values, artifact(cfg, wid, "graph", "distance"))
    write_tree(tree, artifact(cfg, wid, "graph", "mst"))
    summary = {
        "window_id": wid,
        "stage": "graph",
        "n_nodes": g.n,
        "n_dense_edges": len(g.edges),
        "mst_edges": len(tree.edges),
        "mst_total_weight": tree.total_weight,
        "duplicate_asset_pairs": [[ids[u], ids[v]] for u, v in g.flagged_edges],
    }
    _write_json(artifact(cfg, wid, "graph", "summary", "json"), summary)
    return summary


def _read_tree(cfg, wid):
    ids, _ = read_matrix(_require(artifact(cfg, wid, "graph", "distance"), "graph"))
    return read_tree(_require(artifact(cfg, wid, "graph", "mst"), "graph"), ids)


def stage_communities(cfg: PipelineConfig, w: WindowSpec) -> dict:
    wid = w.window_id
    tree = _read_tree(cfg, wid)
    part = communities_of_mst(tree, cfg.weight_mode, cfg.seed)
    write_partition(part, artifact(cfg, wid, "communities", "assignment"))
    write_dot(tree, part, artifact(cfg, wid, "communities", "mst", "dot"), name=wid)
    summary = {
        "window_id": wid,
        "stage": "communities",
        "weight_mode": cfg.weight_mode,
        "seed": cfg.seed,
        "n_communities": part.n_communities,
        "community_sizes": {str(k): v for k, v in part.community_sizes.items()},
        "modularity": part.modularity,
        "pass_modularity": list(part.pass_modularity),
    }
    _write_json(artifact(cfg, wid, "communities", "summary", "json"), summary)
    return summary


def stage_report(cfg: PipelineConfig, w: WindowSpec, inputs: _Inputs):
    wid = w.window_id
    g = _read_normalized(cfg, wid)
    assignment = read_partition(_require(artifact(cfg, wid, "communities", "assignment"), "communities"))
    tree = _read_tree(cfg, wid)
    labels = tuple(assignment[a] for a in tree.node_ids)
    part = CommunityPartition(tree.node_ids, labels, modularity(tree_weights(tree, cfg.weight_mode), labels))
    report = build_portfolio_report(part, g, cfg.min_community_size, inputs.snapshots)
    path = artifact(cfg, wid, "report", "portfolio")
    write_report(report, path, len(inputs.snapshots))
    summary = {
        "window_id": wid,
        "stage": "report",
        "n_rows": len(report.rows),
        "excluded_communities": list(report.excluded_communities),
        "leading_assets": report.leading_assets(),
    }
    _write_json(artifact(cfg, wid, "report", "summary", "json"), summary)
    return summary, report


# -- orchestration ------------------------------------------------------------


def _failure(stage: str, exc: Exception) -> dict:
    return {"status": "failed", "stage": stage, "error_type": type(exc).__name__, "message": str(exc)}


def run_stage(cfg: PipelineConfig, stage: str, inputs: _Inputs | None = None) -> dict[str, dict]:
    """Run one stage for every window. Returns ``{window_id: summary-or-failure}``."""
    inputs = inputs or _Inputs(cfg)
    if stage in ("ingest", "report"):
        inputs.preload()

    def one(w):
        try:
            if stage == "ingest":
                return stage_ingest(cfg, w, inputs)
            if stage == "rmt":
                return stage_rmt(cfg, w)
            if stage == "graph":
                return stage_graph(cfg, w)
            if stage == "communities":
                return stage_communities(cfg, w)
            if stage == "report":
                return stage_report(cfg, w, inputs)[0]
        except DependencyError:
            raise
        except (CorrnetError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("window %s failed at %s: %s", w.window_id, stage, exc)
            return _failure(stage, exc)
        raise ValueError(f"unknown stage {stage!r}")

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(one, cfg.windows))
    return {w.window_id: r for w, r in zip(cfg.windows, results)}


def _window_chain(cfg: PipelineConfig, w: WindowSpec, inputs: _Inputs) -> dict:
    stage = "ingest"
    try:
        stage_ingest(cfg, w, inputs)
        for stage, fn in (("rmt", stage_rmt), ("graph", stage_graph), ("communities", stage_communities)):
            fn(cfg, w)
        stage = "report"
        stage_report(cfg, w, inputs)
    except (CorrnetError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.warning("window %s failed at %s: %s", w.window_id, stage, exc)
        return _failure(stage, exc)
    return {"status": "ok"}


def run_pipeline(cfg: PipelineConfig, timestamp: str | None = None) -> dict:
    """Run every stage for every window, then the cross-window table and manifest.

    A failing window is recorded in the manifest; the others carry on.
    """
    inputs = _Inputs(cfg)
    inputs.preload()
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        statuses = list(pool.map(lambda w: _window_chain(cfg, w, inputs), cfg.windows))
    return finalize(cfg, dict(zip((w.window_id for w in cfg.windows), statuses)), inputs, timestamp)


def finalize(cfg: PipelineConfig, statuses: dict, inputs: _Inputs | None = None, timestamp: str | None = None) -> dict:
    """Cross-window consistency table (two or more good windows) and the manifest."""
    inputs = inputs or _Inputs(cfg)
    windows = {}
    reports = []
    for w in cfg.windows:
        status = statuses.get(w.window_id, {"status": "ok"})
        if status.get("status") != "ok":
            windows[w.window_id] = status
            continue
        entry = _manifest_entry(cfg, w.window_id)
        windows[w.window_id] = entry
        if entry["status"] == "ok":
            _, report = stage_report(cfg, w, inputs)
            reports.append((w.window_id, report))
    outputs = []
    if len(reports) >= 2:
        table = cross_window_consistency(reports, inputs.snapshots)
        path = Path(cfg.output_dir) / "all.consistency.table.csv"
        write_consistency(table, path)
        outputs.append(path.name)
    manifest = {
        "tool": "corrnet",
        "version": __version__,
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.echo(),
        "windows": windows,
        "outputs": outputs,
    }
    root = Path(cfg.output_dir)
    for entry in windows.values():
        for p in [*entry.get("files", []), *([entry["report"]] if "report" in entry else [])]:
            if not (root / p).exists():
                raise DependencyError(f"claimed output {p} is missing")
    _write_json(Path(cfg.output_dir) / "manifest.json", manifest)
    return manifest


def _manifest_entry(cfg: PipelineConfig, wid: str) -> dict:
    summaries = {}
    for stage in STAGES:
        p = artifact(cfg, wid, stage, "summary", "json")
        if not p.exists():
            return {"status": "incomplete", "missing_stage": stage}
        summaries[stage] = _read_json(p)
    rmt, graph, comm = summaries["rmt"], summaries["graph"], summaries["communities"]
    root = Path(cfg.output_dir)
    files = sorted(p.relative_to(root).as_posix() for p in (root / wid).iterdir() if not p.name.startswith(".tmp-"))
    return {
        "status": "ok",
        "N": rmt["N"],
        "T": rmt["T"],
        "Q": rmt["Q"],
        "lambda_minus": rmt["lambda_minus"],
        "lambda_plus": rmt["lambda_plus"],
        "n_deviating": rmt["n_deviating"],
        "lambda_max": rmt["lambda_max"],
        "mean_ipr": rmt["mean_ipr"],
        "ks_statistic": rmt["ks_statistic"],
        "ks_p_value": rmt["ks_p_value"],
        "n_dense_edges": graph["n_dense_edges"],
        "mst_total_weight": graph["mst_total_weight"],
        "n_communities": comm["n_communities"],
        "modularity": comm["modularity"],
        "report": artifact(cfg, wid, "report", "portfolio").relative_to(root).as_posix(),
        "files": files,
    }


def exit_code(manifest_windows: dict) -> int:
    """0 all ok, 3 partial, 2 all failed numerically, 1 all failed otherwise."""
    failed = [w for w in manifest_windows.values() if w.get("status") != "ok"]
    if not failed:
        return 0
    if len(failed) < len(manifest_windows):
        return 3
    numeric = {"NumericalError", "LinAlgError", "FloatingPointError", "ZeroDivisionError"}
    return 2 if all(w.get("error_type") in numeric for w in failed) else 1
