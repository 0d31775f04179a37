"""Express-lane auction simulator and markout analytics.

Reproduces the TimeBoost-style mechanism (sealed second-price auction with
a 0.001 ETH reserve selling a 200ms sequencing advantage per minute),
generates synthetic CEX-DEX arbitrage activity under mean-reverting
stochastic volatility, and runs the markout / correlation / regression
pipeline on simulated or ingested data.
"""

__version__ = "0.1.0"

from .amm import ArbTrade, Direction, Pool, optimal_arb, swap_exact_in
from .auction import AuctionConfig, Bid, settle, submit_bid
from .core import (
    NO_WINNER,
    AssetPair,
    AuctionRound,
    FastLaneTransaction,
    NoWinner,
    RoundSchedule,
    TimePoint,
    Won,
    prefix_window,
    round_of,
)
from .ingest import Dataset, load_dataset, write_dataset
from .markout import (
    MarkoutRecord,
    PriceBook,
    aggregate,
    cold_start_share,
    compute_markouts,
    filter_positive,
    markout,
    markout_sweep,
    pair_with_bids,
)
from .prices import (
    PriceSeries,
    VarianceSeries,
    VolModelParams,
    mid_at,
    realized_variance,
    simulate_correlated_paths,
    simulate_path,
)
from .sequencer import DualLaneSequencer, Lane, SequencedTx
from .stats import RegressionResult, autocorrelation, ols, pearson, spearman

__all__ = [
    "__version__",
    "ArbTrade", "Direction", "Pool", "optimal_arb", "swap_exact_in",
    "AuctionConfig", "Bid", "settle", "submit_bid",
    "NO_WINNER", "AssetPair", "AuctionRound", "FastLaneTransaction", "NoWinner",
    "RoundSchedule", "TimePoint", "Won", "prefix_window", "round_of",
    "Dataset", "load_dataset", "write_dataset",
    "MarkoutRecord", "PriceBook", "aggregate", "cold_start_share",
    "compute_markouts", "filter_positive", "markout", "markout_sweep", "pair_with_bids",
    "PriceSeries", "VarianceSeries", "VolModelParams", "mid_at",
    "realized_variance", "simulate_correlated_paths", "simulate_path",
    "DualLaneSequencer", "Lane", "SequencedTx",
    "RegressionResult", "autocorrelation", "ols", "pearson", "spearman",
]
