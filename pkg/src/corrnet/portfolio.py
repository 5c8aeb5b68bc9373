"""Per-community PCA and leading-asset reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._io import write_csv
from .correlation import gram_correlation
from .errors import DegenerateError, DomainError, IntegrityError
from .market_data import RankingSnapshot
from .network import CommunityPartition
from .returns import NormalizedReturns

DEFAULT_MIN_COMMUNITY_SIZE = 4
TIE_TOL = 1e-12


@dataclass(frozen=True)
class PcaResult:
    """Correlation PCA of one community.

    ``component_loadings[k]`` is the k-th principal axis over ``asset_ids``.
    """

    asset_ids: tuple[str, ...]
    component_loadings: np.ndarray = field(repr=False)
    explained_variance: np.ndarray = field(repr=False)
    explained_variance_ratio: np.ndarray = field(repr=False)

    @property
    def first_component(self) -> np.ndarray:
        return self.component_loadings[0]


@dataclass(frozen=True)
class LeadingAsset:
    community_label: int | None
    asset_id: str
    loading_magnitude: float
    pc1_variance_ratio: float
    tie: bool = False


@dataclass(frozen=True)
class ReportRow:
    community_label: int
    community_size: int
    leading: LeadingAsset
    ranks: tuple[int | None, ...]

    @property
    def leading_asset(self) -> str:
        return self.leading.asset_id


@dataclass(frozen=True)
class PortfolioReport:
    rows: tuple[ReportRow, ...]
    excluded_communities: tuple[int, ...]
    min_community_size: int
    members: dict = field(default_factory=dict, repr=False)

    def leading_assets(self) -> list[str]:
        return [r.leading_asset for r in self.rows]


@dataclass(frozen=True)
class ConsistencyTable:
    window_ids: tuple[str, ...]
    presence: dict  # asset_id -> frozenset of window ids
    ranks: dict  # asset_id -> tuple of ranks (None if unranked) per snapshot

    def count(self, asset_id: str) -> int:
        return len(self.presence[asset_id])

    def common_to_all(self) -> list[str]:
        return sorted(a for a, w in self.presence.items() if len(w) == len(self.window_ids))

    def assets_with_count(self, n: int) -> list[str]:
        return sorted(a for a, w in self.presence.items() if len(w) == n)


def community_pca(g: NormalizedReturns, members: Sequence[str]) -> PcaResult:
    """Eigendecomposition of the members' correlation submatrix.

    Each component is signed so its largest-magnitude loading is positive.
    """
    members = tuple(members)
    if len(members) < 2:
        raise DegenerateError(f"community {list(members)} has fewer than two members")
    if len(set(members)) != len(members):
        raise DomainError("community members must be distinct")
    C = gram_correlation(g.rows(members))
    w, v = np.linalg.eigh(C)
    order = np.argsort(w, kind="stable")[::-1]
    w = np.maximum(w[order], 0.0)
    v = v[:, order]
    pivots = np.argmax(np.abs(v), axis=0)
    v = v * np.where(v[pivots, np.arange(v.shape[1])] < 0, -1.0, 1.0)
    return PcaResult(members, v.T.copy(), w, w / len(members))


def leading_asset(p: PcaResult, community_label: int | None = None) -> LeadingAsset:
    """Member with the largest absolute loading on the first component.

    Loadings equal to within ``TIE_TOL`` are tied; the lexicographically
    smallest asset id wins and ``tie`` is set.
    """
    mags = np.abs(p.first_component)
    top = mags.max()
    tied = [a for a, m in zip(p.asset_ids, mags) if top - m <= TIE_TOL]
    chosen = min(tied)
    idx = p.asset_ids.index(chosen)
    return LeadingAsset(
        community_label, chosen, float(mags[idx]), float(p.explained_variance_ratio[0]), len(tied) > 1
    )


def build_portfolio_report(
    partition: CommunityPartition,
    g: NormalizedReturns,
    min_community_size: int = DEFAULT_MIN_COMMUNITY_SIZE,
    snapshots: Sequence[RankingSnapshot] = (),
) -> PortfolioReport:
    missing = set(g.asset_ids).difference(partition.node_ids)
    if missing:
        raise DomainError(f"partition does not cover {sorted(missing)}")
    rows, excluded, members = [], [], {}
    for label, size in partition.community_sizes.items():
        group = partition.members(label)
        members[label] = tuple(group)
        if size < max(min_community_size, 2):
            excluded.append(label)
            continue
        lead = leading_asset(community_pca(g, group), label)
        ranks = tuple(s.rank_of(lead.asset_id) for s in snapshots)
        rows.append(ReportRow(label, size, lead, ranks))
    return PortfolioReport(tuple(rows), tuple(excluded), min_community_size, members)


def cross_window_consistency(
    reports: Sequence[tuple[str, PortfolioReport]],
    snapshots: Sequence[RankingSnapshot] = (),
) -> ConsistencyTable:
    """Which assets lead a community in which windows."""
    if len(reports) < 2:
        raise DomainError("need at least two windows")
    ids = [w for w, _ in reports]
    if len(set(ids)) != len(ids):
        raise IntegrityError(f"duplicate window ids in {ids}")
    presence: dict[str, set] = {}
    for wid, report in reports:
        for a in report.leading_assets():
            presence.setdefault(a, set()).add(wid)
    ranks = {a: tuple(s.rank_of(a) for s in snapshots) for a in presence}
    return ConsistencyTable(tuple(ids), {a: frozenset(w) for a, w in sorted(presence.items())}, ranks)


def write_report(report: PortfolioReport, dest, n_snapshots: int | None = None) -> None:
    """Report CSV with at least two ``rank_snap`` columns; blank means unranked."""
    width = max(2, n_snapshots or 0, max((len(r.ranks) for r in report.rows), default=0))
    header = ["community", "size", "leading_asset", "pc1_ratio"] + [f"rank_snap{i + 1}" for i in range(width)]
    rows = []
    for r in report.rows:
        ranks = list(r.ranks) + [None] * (width - len(r.ranks))
        rows.append([r.community_label, r.community_size, r.leading_asset, r.leading.pc1_variance_ratio, *ranks])
    write_csv(dest, header, rows)


def write_consistency(table: ConsistencyTable, dest) -> None:
    n_snap = max((len(r) for r in table.ranks.values()), default=0)
    header = ["asset_id", *table.window_ids, "windows"] + [f"rank_snap{i + 1}" for i in range(n_snap)]
    rows = []
    for a, present in table.presence.items():
        marks = [1 if w in present else 0 for w in table.window_ids]
        rows.append([a, *marks, len(present), *table.ranks[a]])
    write_csv(dest, header, rows)
