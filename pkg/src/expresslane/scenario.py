"""Seeded end-to-end simulation: auctions, sequencing, arbitrage, exports.

A scenario wires the pieces together minute by minute. While minute m-1
trades, bidders submit bids for round m using only information available at
their submission instant (trailing realized variance of the signal asset,
and the already-markable part of the in-progress winner's markout). The
settled winner of round m then runs the express-lane arbitrage against the
pools during minute m, racing a configurable stream of delayed normal-lane
noise trades through the sequencer, which is what keeps the pool state
imperfectly known to the arbitrageur.

A run is fully determined by (config, seed): one master seed fans out into
independent substreams for paths, bid timing, bidder noise, and trade noise.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from decimal import Decimal

import numpy as np

from . import __version__
from .agents import (
    AdaptivePrev,
    BidContext,
    ConstantNoise,
    LognormalDist,
    MWConditional,
    SignalModel,
)
from .amm import Direction, Pool, optimal_arb, swap_exact_in
from .auction import AuctionConfig, Bid, settle, submit_bid
from .core import (
    AssetPair,
    AuctionRound,
    FastLaneTransaction,
    RoundSchedule,
    Won,
    round_of,
)
from .ingest import Dataset
from .markout import PriceBook, markout
from .prices import VolModelParams, simulate_correlated_paths
from .sequencer import DualLaneSequencer, Lane


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries the field path."""


@dataclass
class AssetConfig:
    symbol: str
    p0: float = 1.0
    kappa: float = 0.0
    theta: float = 0.0
    xi: float = 0.0
    v0: float | None = None
    drift: float = 0.0
    fixed_sigma: float | None = None
    stable: bool = False


@dataclass
class PoolConfig:
    base: str
    quote: str
    reserve_base: float
    reserve_quote: float
    fee: float = 0.0005


@dataclass
class BidderConfig:
    bidder_id: str
    strategy: str  # mw_conditional | adaptive_prev | constant_noise
    params: dict = field(default_factory=dict)


@dataclass
class NoiseConfig:
    intensity_per_sec: float = 0.0
    size_frac: float = 1e-4  # of the input-side reserve
    size_sigma: float = 0.5


@dataclass
class ArbConfig:
    latency_ms: int = 50
    gas_fee_usd: float = 0.02


@dataclass
class ScenarioConfig:
    horizon_minutes: int
    seed: int = 0
    genesis_ms: int = 60_000  # prices start at t=0; round 0 bids during [0, 45s]
    reserve_eth: str = "0.001"
    sequencer_delay_ms: int = 200
    markout_ms: int = 5000
    numeraire: str = "WETH"  # asset whose USD mid converts ETH bids
    signal_asset: str | None = None  # defaults to the first pool's base
    assets: list[AssetConfig] = field(default_factory=list)
    correlation: list[list[float]] | None = None
    pools: list[PoolConfig] = field(default_factory=list)
    bidders: list[BidderConfig] = field(default_factory=list)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    arb: ArbConfig = field(default_factory=ArbConfig)

    def validate(self) -> None:
        if self.horizon_minutes < 0:
            raise ConfigError("horizon_minutes: must be non-negative")
        if self.genesis_ms < 60_000:
            raise ConfigError("genesis_ms: need at least one minute of pre-genesis history")
        if self.markout_ms < 0:
            raise ConfigError("markout_ms: must be non-negative")
        symbols = [a.symbol for a in self.assets]
        if len(set(symbols)) != len(symbols):
            raise ConfigError("assets: duplicate symbols")
        known = set(symbols)
        for i, p in enumerate(self.pools):
            for side in ("base", "quote"):
                if getattr(p, side) not in known:
                    raise ConfigError(f"pools[{i}].{side}: unknown asset {getattr(p, side)!r}")
            if p.reserve_base <= 0 or p.reserve_quote <= 0:
                raise ConfigError(f"pools[{i}]: reserves must be positive")
        if self.pools or self.bidders:
            if self.numeraire not in known:
                raise ConfigError(f"numeraire: unknown asset {self.numeraire!r}")
            num = next(a for a in self.assets if a.symbol == self.numeraire)
            if num.stable:
                raise ConfigError("numeraire: must be a simulated (non-stable) asset")
        sig = self.signal_asset or (self.pools[0].base if self.pools else None)
        if self.bidders and sig is not None and sig not in known:
            raise ConfigError(f"signal_asset: unknown asset {sig!r}")
        ids = [b.bidder_id for b in self.bidders]
        if len(set(ids)) != len(ids):
            raise ConfigError("bidders: duplicate bidder_id")
        for i, b in enumerate(self.bidders):
            if b.strategy not in ("mw_conditional", "adaptive_prev", "constant_noise"):
                raise ConfigError(f"bidders[{i}].strategy: unknown strategy {b.strategy!r}")
        if self.correlation is not None:
            n_sim = sum(1 for a in self.assets if not a.stable)
            m = np.asarray(self.correlation, dtype=float)
            if m.shape != (n_sim, n_sim):
                raise ConfigError(
                    f"correlation: must be {n_sim}x{n_sim} over the non-stable assets"
                )
        Decimal(self.reserve_eth)  # raises InvalidOperation on junk

    # --- JSON round trip -----------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        def take(d: dict, fields: dict, path: str) -> dict:
            unknown = set(d) - set(fields)
            if unknown:
                raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
            return d

        top_fields = {f.name for f in cls.__dataclass_fields__.values()}
        take(data, dict.fromkeys(top_fields), "config")
        kwargs = dict(data)
        try:
            kwargs["assets"] = [
                AssetConfig(**take(a, AssetConfig.__dataclass_fields__, f"assets[{i}]"))
                for i, a in enumerate(data.get("assets", []))
            ]
            kwargs["pools"] = [
                PoolConfig(**take(p, PoolConfig.__dataclass_fields__, f"pools[{i}]"))
                for i, p in enumerate(data.get("pools", []))
            ]
            kwargs["bidders"] = [
                BidderConfig(**take(b, BidderConfig.__dataclass_fields__, f"bidders[{i}]"))
                for i, b in enumerate(data.get("bidders", []))
            ]
            if "noise" in data:
                kwargs["noise"] = NoiseConfig(
                    **take(data["noise"], NoiseConfig.__dataclass_fields__, "noise")
                )
            if "arb" in data:
                kwargs["arb"] = ArbConfig(**take(data["arb"], ArbConfig.__dataclass_fields__, "arb"))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _build_strategy(cfg: BidderConfig):
    p = dict(cfg.params)
    try:
        if cfg.strategy == "mw_conditional":
            model = SignalModel(
                n_bidders=int(p.pop("n_bidders")),
                value_dist=LognormalDist(float(p.pop("mu_v")), float(p.pop("sigma_v"))),
                noise_dist=LognormalDist(0.0, float(p.pop("sigma_e"))),
            )
            strat = MWConditional(model, value_scale=float(p.pop("value_scale")))
        elif cfg.strategy == "adaptive_prev":
            strat = AdaptivePrev(alpha=float(p.pop("alpha")), beta=float(p.pop("beta")))
        else:
            strat = ConstantNoise(
                mean_eth=float(p.pop("mean_eth")), jitter_eth=float(p.pop("jitter_eth", 0.0))
            )
    except KeyError as exc:
        raise ConfigError(f"bidders[{cfg.bidder_id}].params: missing {exc}") from exc
    if p:
        raise ConfigError(f"bidders[{cfg.bidder_id}].params: unknown keys {sorted(p)}")
    return strat


class _Tape:
    """Per-asset tick arrays plus O(1) trailing realized variance."""

    def __init__(self, series):
        self.series = series
        self.px = series.prices
        r2 = np.diff(np.log(self.px)) ** 2
        self.r2_cumsum = np.concatenate(([0.0], np.cumsum(r2)))  # index: ending tick

    def price_at_tick(self, idx: int) -> float:
        return float(self.px[idx])

    def trailing_rv(self, t: int, window_ms: int = 60_000) -> float:
        # returns ending at ticks in [t - window, t)
        hi = min((t - 1) // 1000, len(self.px) - 1)
        lo = max((t - window_ms - 1) // 1000, 0)
        if hi <= lo:
            return 0.0
        return float(self.r2_cumsum[hi] - self.r2_cumsum[lo])


def simulate(config: ScenarioConfig) -> tuple[Dataset, dict]:
    """Run a scenario; returns (dataset, run manifest). Deterministic per seed."""
    config.validate()
    horizon_ms = config.horizon_minutes * 60_000
    genesis = config.genesis_ms
    pad_ms = config.markout_ms + 15_000
    path_horizon = genesis + horizon_ms + pad_ms

    seq = np.random.SeedSequence(config.seed)
    children = seq.spawn(4 + len(config.bidders))
    path_seed = children[0]
    rng_noise = np.random.default_rng(children[1])
    rng_submit = np.random.default_rng(children[2])
    rng_sizes = np.random.default_rng(children[3])
    bidder_rngs = [np.random.default_rng(c) for c in children[4:]]

    sim_specs = {
        a.symbol: (
            VolModelParams(
                kappa=a.kappa,
                theta=a.theta,
                xi=a.xi,
                v0=a.theta if a.v0 is None else a.v0,
                drift=a.drift,
                fixed_sigma=a.fixed_sigma,
            ),
            a.p0,
        )
        for a in config.assets
        if not a.stable
    }
    corr = np.asarray(config.correlation, dtype=float) if config.correlation else None
    ticks = (
        simulate_correlated_paths(sim_specs, path_horizon, path_seed, corr)
        if sim_specs
        else {}
    )
    stable_values = {a.symbol: a.p0 for a in config.assets if a.stable}
    book = PriceBook(ticks, stable_values)
    tapes = {sym: _Tape(s) for sym, s in ticks.items()}

    manifest = {
        "generator": f"expresslane {__version__}",
        "config_sha256": config.config_hash(),
        "seed": config.seed,
        "horizon_minutes": config.horizon_minutes,
        "prng": "numpy PCG64 via SeedSequence substreams",
    }
    if config.horizon_minutes == 0:
        ds = Dataset([], [], ticks, provenance=f"simulated ({manifest['config_sha256'][:12]})")
        manifest.update(n_rounds=0, n_txs=0)
        return ds, manifest

    def usd_of(symbol: str, tick_idx: int) -> float:
        if symbol in tapes:
            return tapes[symbol].price_at_tick(tick_idx)
        return stable_values[symbol]

    pools = [
        Pool(AssetPair(p.base, p.quote), p.reserve_base, p.reserve_quote, p.fee)
        for p in config.pools
    ]
    strategies = [_build_strategy(b) for b in config.bidders]
    auction_cfg = AuctionConfig(reserve_eth=Decimal(config.reserve_eth))
    signal_symbol = config.signal_asset or (config.pools[0].base if config.pools else None)

    winner_by_round: dict[int, str] = {}
    sequencer = DualLaneSequencer(
        delay_ms=config.sequencer_delay_ms,
        genesis=genesis,
        winner_lookup=winner_by_round.get,
    )

    rounds: list[AuctionRound] = []
    txs: list[FastLaneTransaction] = []
    txs_by_round: dict[int, list[FastLaneTransaction]] = {}
    tx_counter = 0

    def observed_markout(round_number: int, as_of: int) -> float | None:
        if round_number < 0:
            return None
        total = 0.0
        for tx in txs_by_round.get(round_number, ()):
            if tx.timestamp + config.markout_ms <= as_of:
                total += markout(tx, book, config.markout_ms).profit_usd
        return total

    def execute(drained) -> None:
        nonlocal tx_counter
        for item in drained:
            kind, pool_idx, direction, amount_in, meta = item.payload
            pool = pools[pool_idx]
            buy_base = direction is Direction.BUY_BASE
            try:
                amount_out, new_pool = swap_exact_in(pool, amount_in, buy_base)
            except ValueError:
                continue  # sized against a stale snapshot that no longer admits it
            pools[pool_idx] = new_pool
            if kind != "arb":
                continue
            rnd = round_of(item.arrival, genesis)
            pair = pool.pair
            tx = FastLaneTransaction(
                tx_id=f"sim-{tx_counter}",
                timestamp=item.arrival,
                round_number=rnd,
                winner_id=meta,
                token_in=pair.quote if buy_base else pair.base,
                token_out=pair.base if buy_base else pair.quote,
                amount_in=amount_in,
                amount_out=amount_out,
                gas_fee_usd=config.arb.gas_fee_usd,
            )
            tx_counter += 1
            txs.append(tx)
            txs_by_round.setdefault(rnd, []).append(tx)

    for r in range(config.horizon_minutes):
        # --- auction for round r (bids submitted during minute r-1) ------
        schedule = RoundSchedule.standard(r, genesis + r * 60_000)
        round_r = AuctionRound(schedule)
        window = schedule.bidding_close - schedule.bidding_open
        for cfg_b, strat, rng_b in zip(config.bidders, strategies, bidder_rngs):
            t_sub = schedule.bidding_open + int(rng_submit.integers(0, window + 1))
            num_idx = t_sub // 1000
            ctx = BidContext(
                round_number=r,
                prev_minute_variance=(
                    tapes[signal_symbol].trailing_rv(t_sub) if signal_symbol in tapes else 0.0
                ),
                prev_winner_markout_usd=observed_markout(r - 1, t_sub),
                eth_usd=usd_of(config.numeraire, num_idx),
            )
            bid_eth = strat.bid_eth(ctx, rng_b)
            amount = Decimal(bid_eth).quantize(Decimal("1e-9"))
            if amount > 0:
                round_r = submit_bid(round_r, Bid(cfg_b.bidder_id, amount, t_sub))
        round_r = settle(round_r, auction_cfg)
        rounds.append(round_r)
        if isinstance(round_r.outcome, Won):
            winner_by_round[r] = round_r.outcome.winner_id
        winner = winner_by_round.get(r)

        # --- trading during minute r -------------------------------------
        for k in range(60):
            t_k = schedule.minute_start + k * 1000
            execute(sequencer.drain(t_k))
            idx = t_k // 1000
            if winner is not None:
                for pi, pool in enumerate(pools):
                    ext = usd_of(pool.pair.base, idx) / usd_of(pool.pair.quote, idx)
                    trade = optimal_arb(pool, ext)
                    if trade is None:
                        continue
                    quote_usd = usd_of(pool.pair.quote, idx)
                    if trade.profit_quote * quote_usd <= config.arb.gas_fee_usd:
                        continue
                    sequencer.enqueue(
                        ("arb", pi, trade.direction, trade.amount_in, winner),
                        Lane.EXPRESS,
                        arrival=t_k + config.arb.latency_ms,
                        submitter=winner,
                    )
            if config.noise.intensity_per_sec > 0.0:
                for pi, pool in enumerate(pools):
                    if rng_noise.random() >= config.noise.intensity_per_sec:
                        continue
                    buy = rng_noise.random() < 0.5
                    reserve = pool.reserve_quote if buy else pool.reserve_base
                    size = (
                        config.noise.size_frac
                        * reserve
                        * float(np.exp(config.noise.size_sigma * rng_sizes.standard_normal()))
                    )
                    direction = Direction.BUY_BASE if buy else Direction.SELL_BASE
                    arrival = t_k + int(rng_noise.integers(0, 1000))
                    sequencer.enqueue(
                        ("noise", pi, direction, size, None), Lane.NORMAL, arrival=arrival
                    )
        # flush trades effective before the next minute starts
        execute(sequencer.drain(schedule.minute_end - 1))

    execute(sequencer.drain(genesis + horizon_ms + config.sequencer_delay_ms + 2000))
    txs.sort(key=lambda t: (t.round_number, t.timestamp, t.tx_id))

    ds = Dataset(
        rounds, txs, ticks, provenance=f"simulated ({manifest['config_sha256'][:12]})"
    )
    ds.validate()
    manifest.update(n_rounds=len(rounds), n_txs=len(txs))
    return ds, manifest


# --- canned scenarios --------------------------------------------------------


def default_config(horizon_minutes: int = 1440, seed: int = 0) -> ScenarioConfig:
    """Reference scenario: three common-value bidders over variance signals.

    Volatility persistence (half-life ~20 min) is what lets bidders track
    trends: minute-level markouts stay noisy while block aggregates line up
    with bids.
    """
    mw = {
        "n_bidders": 3,
        "mu_v": 3.2,  # prior over per-minute extractable USD value
        "sigma_v": 1.8,
        "sigma_e": 1.0,
        "value_scale": 1.6e7,  # USD value per unit of trailing minute variance
    }
    return ScenarioConfig(
        horizon_minutes=horizon_minutes,
        seed=seed,
        assets=[
            AssetConfig(
                symbol="WETH",
                p0=3000.0,
                kappa=5.5e-4,  # half-life ~= 21 minutes
                theta=-17.0,  # per-second log variance: sigma ~ 2bp/s
                xi=0.055,
                drift=0.0,
            ),
            AssetConfig(symbol="USDC", p0=1.0, stable=True),
        ],
        pools=[
            PoolConfig(
                base="WETH", quote="USDC",
                reserve_base=60_000.0, reserve_quote=180_000_000.0, fee=0.0005,
            )
        ],
        bidders=[
            BidderConfig("selene", "mw_conditional", dict(mw)),
            BidderConfig("wintergreen", "mw_conditional", dict(mw)),
            BidderConfig("chronos", "mw_conditional", dict(mw)),
        ],
        noise=NoiseConfig(intensity_per_sec=0.05, size_frac=5e-5),
        arb=ArbConfig(latency_ms=50, gas_fee_usd=0.02),
    )


def constant_sigma_config(
    sigma_per_sec: float, horizon_minutes: int = 240, seed: int = 0
) -> ScenarioConfig:
    """Constant-volatility scenario for variance-scaling measurements."""
    return ScenarioConfig(
        horizon_minutes=horizon_minutes,
        seed=seed,
        assets=[
            AssetConfig(symbol="WETH", p0=3000.0, fixed_sigma=sigma_per_sec),
            AssetConfig(symbol="USDC", p0=1.0, stable=True),
        ],
        pools=[
            PoolConfig(
                base="WETH", quote="USDC",
                reserve_base=20_000.0, reserve_quote=60_000_000.0, fee=0.0001,
            )
        ],
        bidders=[BidderConfig("solo", "constant_noise", {"mean_eth": 0.002})],
        noise=NoiseConfig(intensity_per_sec=0.0),
        arb=ArbConfig(latency_ms=50, gas_fee_usd=0.0),
    )


def adaptive_config(horizon_minutes: int = 240, seed: int = 0) -> ScenarioConfig:
    """Two adaptive bidders chasing the previous minute's observed markout."""
    cfg = default_config(horizon_minutes=horizon_minutes, seed=seed)
    cfg.bidders = [
        BidderConfig("echo", "adaptive_prev", {"alpha": 1.2, "beta": 0.001}),
        BidderConfig("mimic", "adaptive_prev", {"alpha": 0.8, "beta": 0.0012}),
    ]
    return cfg
