"""Random-matrix diagnostics, correlation networks and community PCA for asset returns."""

__version__ = "0.1.0"

from importlib import resources

from .correlation import CorrelationMatrix, DistanceMatrix, correlation_matrix, distance_matrix
from .market_data import (
    AnalysisWindow,
    PricePanel,
    RankingSnapshot,
    filter_complete,
    load_price_panel,
    load_ranking_snapshot,
    return_window,
    slice_window,
    synthesize_panel,
)
from .network import (
    CommunityPartition,
    SpanningTree,
    WeightedGraph,
    communities_of_mst,
    dense_graph_from_distances,
    louvain,
    modularity,
    mst_kruskal,
    mst_prim,
)
from .portfolio import (
    build_portfolio_report,
    community_pca,
    cross_window_consistency,
    leading_asset,
)
from .returns import NormalizedReturns, ReturnMatrix, log_returns, normalize_returns
from .spectra import (
    classify_eigenvalues,
    eigendecompose,
    ipr,
    ks_two_sample,
    mp_bounds,
    mp_density,
    scaled_components,
)

__all__ = [
    "__version__",
    "BUNDLED_SEED",
    "bundled_dataset_path",
    "AnalysisWindow",
    "build_portfolio_report",
    "classify_eigenvalues",
    "communities_of_mst",
    "community_pca",
    "CommunityPartition",
    "correlation_matrix",
    "CorrelationMatrix",
    "cross_window_consistency",
    "dense_graph_from_distances",
    "distance_matrix",
    "DistanceMatrix",
    "eigendecompose",
    "filter_complete",
    "ipr",
    "ks_two_sample",
    "leading_asset",
    "load_price_panel",
    "load_ranking_snapshot",
    "log_returns",
    "louvain",
    "modularity",
    "mp_bounds",
    "mp_density",
    "mst_kruskal",
    "mst_prim",
    "normalize_returns",
    "NormalizedReturns",
    "PricePanel",
    "RankingSnapshot",
    "return_window",
    "ReturnMatrix",
    "scaled_components",
    "slice_window",
    "SpanningTree",
    "synthesize_panel",
    "WeightedGraph",
]

BUNDLED_SEED = 2019


def bundled_dataset_path():
    """Path of the bundled synthetic 20-asset, 100-return price file."""
    return resources.files(__name__) / "data" / "synthetic_20x100.csv"
