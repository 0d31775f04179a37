"""Analytics report bundle: every table the pipeline reproduces, as CSV.

analyze() is a pure function of the dataset and options: section order,
row order, and float rendering (shortest exact repr) are all fixed, so
re-running on the same inputs reproduces identical bytes. Tables that lack
enough data are still emitted, with an explicit "insufficient" marker, and
the run continues.
"""
from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import os
import re
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

from . import stats
from .core import Won
from .ingest import Dataset
from .markout import (
    PriceBook,
    aggregate,
    cold_start_share,
    compute_markouts,
    filter_positive,
    pair_with_bids,
)
from .prices import realized_variance
from .stats import DegenerateVariance, RankDeficient, SeriesTooShort

INSUFFICIENT = "insufficient"


@dataclass
class AnalyzeOptions:
    markout_ms: int = 5000
    filtered: str = "both"  # on | off | both
    prefix_seconds: tuple[int, ...] = (15, 30)
    block_minutes: tuple[int, ...] = (5, 10, 15, 30, 60)
    autocorr_max_lag: int = 6
    cold_start_seconds: int = 5
    include_idle: bool = True
    eth_asset: str = "WETH"  # converts ETH bids to USD when its series exists
    variance_asset: str | None = None  # OLS regressor asset; default: busiest traded

    def filter_flags(self) -> tuple[bool, ...]:
        if self.filtered == "on":
            return (True,)
        if self.filtered == "off":
            return (False,)
        if self.filtered == "both":
            return (False, True)
        raise ValueError(f"filtered must be on/off/both, got {self.filtered!r}")


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[tuple]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


@dataclass
class ReportBundle:
    tables: list[Table]
    extra_files: dict[str, str] = field(default_factory=dict)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def files(self) -> dict[str, str]:
        out = {f"{t.name}.csv": t.to_csv_text() for t in self.tables}
        out.update(self.extra_files)
        out["summary.md"] = render_summary(self)
        return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Decimal):
        return str(v)
    return str(v)


def _corr_pair(xs, ys) -> tuple:
    """(pearson, spearman) or insufficiency markers."""
    try:
        p = stats.pearson(xs, ys)
    except (SeriesTooShort, DegenerateVariance):
        return INSUFFICIENT, INSUFFICIENT
    try:
        s = stats.spearman(xs, ys)
    except (SeriesTooShort, DegenerateVariance):
        s = INSUFFICIENT
    return p, s


def analyze(dataset: Dataset, options: AnalyzeOptions = AnalyzeOptions()) -> ReportBundle:
    """Run the full analytics pipeline over a simulated or ingested dataset."""
    dataset.validate()
    rounds = sorted(dataset.rounds, key=lambda r: r.schedule.round_number)
    book = PriceBook(dataset.ticks)
    records, dropped = compute_markouts(dataset.txs, book, options.markout_ms)
    eth_usd = dataset.ticks.get(options.eth_asset)
    winners = sorted({r.outcome.winner_id for r in rounds if isinstance(r.outcome, Won)})

    tx_by_id = {tx.tx_id: tx for tx in dataset.txs}
    tables = [
        Table("run_info", ["key", "value"], [
            ("markout_ms", options.markout_ms),
            ("n_rounds", len(rounds)),
            ("n_won_rounds", sum(1 for r in rounds if isinstance(r.outcome, Won))),
            ("n_txs", len(dataset.txs)),
            ("n_markout_records", len(records)),
            ("n_dropped_missing_price", dropped),
            ("n_positive_markouts", len(filter_positive(records))),
            ("bid_units", "usd" if eth_usd is not None else "eth"),
        ]),
        _activity_table(records, rounds, winners, dataset),
        _per_bidder_table(records, rounds, winners, options, eth_usd),
        _prefix_table(records, rounds, winners, options, eth_usd),
        _block_table(records, rounds, options, eth_usd),
        _shift_table(records, rounds, options, eth_usd),
        _autocorr_table(records, rounds, options),
        _ols_table(records, rounds, dataset, options, eth_usd, tx_by_id),
        _cold_start_table(records, rounds, options),
    ]

    extra: dict[str, str] = {}
    for flt in options.filter_flags():
        try:
            agg = aggregate(records, rounds, filtered=flt, include_idle=options.include_idle)
            paired = pair_with_bids(agg, rounds, bid_kind="paid", shift=0, eth_usd=eth_usd)
        except SeriesTooShort:
            continue
        buf = io.StringIO()
        _write_paired(buf, paired, rounds, eth_usd)
        suffix = "filtered" if flt else "unfiltered"
        extra[f"paired_minutes_{suffix}.csv"] = buf.getvalue()
    return ReportBundle(tables, extra)


def _write_paired(buf, paired, rounds, eth_usd) -> None:
    # same column set as markout.write_paired_csv, but to a string buffer
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window_id", "start_ts", "winner", "bid_eth", "bid_usd", "markout_usd", "filtered_flag"])
    by_round = {r.schedule.round_number: r for r in rounds}
    from .markout import _round_bid

    for wid, bid, mk in zip(paired.window_ids, paired.bids, paired.markouts_usd):
        r = by_round[wid]
        bid_eth = float(_round_bid(r, paired.bid_kind))
        bid_usd = bid if paired.bid_units == "usd" else None
        w.writerow([
            wid, r.schedule.minute_start, r.winner_id or "",
            _fmt(bid_eth), _fmt(bid_usd), _fmt(mk), int(paired.filtered),
        ])


def _activity_table(records, rounds, winners, dataset) -> Table:
    by_winner_rounds: dict[str, int] = {}
    for r in rounds:
        if isinstance(r.outcome, Won):
            by_winner_rounds[r.outcome.winner_id] = by_winner_rounds.get(r.outcome.winner_id, 0) + 1
    rows = []
    for w in winners:
        w_recs = [rec for rec in records if rec.winner_id == w]
        w_pos = filter_positive(w_recs)
        n_rounds = by_winner_rounds.get(w, 0)
        total_paid = sum(
            (r.outcome.paid_eth for r in rounds if isinstance(r.outcome, Won) and r.outcome.winner_id == w),
            Decimal(0),
        )
        total_bid = sum(
            (r.outcome.highest_bid_eth for r in rounds if isinstance(r.outcome, Won) and r.outcome.winner_id == w),
            Decimal(0),
        )
        gas = sum(tx.gas_fee_usd for tx in dataset.txs if tx.winner_id == w)
        rows.append((
            w,
            len(w_recs),
            n_rounds,
            len(w_recs) / n_rounds if n_rounds else float("nan"),
            sum(1 for _ in w_pos),
            gas,
            sum(rec.profit_usd for rec in w_recs),
            sum(rec.profit_usd for rec in w_pos),
            total_paid,
            total_bid,
        ))
    return Table(
        "activity",
        [
            "winner", "n_txs", "rounds_won", "avg_txs_per_round", "n_positive_txs",
            "gas_usd", "markout_unfiltered_usd", "markout_filtered_usd",
            "total_paid_eth", "total_bid_eth",
        ],
        rows,
    )


def _per_bidder_table(records, rounds, winners, options, eth_usd) -> Table:
    rows = []
    for w in winners:
        for flt in options.filter_flags():
            try:
                agg = aggregate(
                    records, rounds, filtered=flt, winner=w, include_idle=options.include_idle
                )
            except SeriesTooShort:
                agg = None
            for kind in ("highest", "paid"):
                if agg is None or len(agg) == 0:
                    rows.append((w, int(flt), kind, INSUFFICIENT, INSUFFICIENT, 0))
                    continue
                try:
                    paired = pair_with_bids(agg, rounds, bid_kind=kind, shift=0, eth_usd=eth_usd)
                    p, s = _corr_pair(paired.bids, paired.markouts_usd)
                    n = len(paired)
                except SeriesTooShort:
                    p = s = INSUFFICIENT
                    n = 0
                rows.append((w, int(flt), kind, p, s, n))
    return Table(
        "per_bidder_correlations",
        ["winner", "filtered", "bid_kind", "pearson", "spearman", "n_windows"],
        rows,
    )


def _prefix_table(records, rounds, winners, options, eth_usd) -> Table:
    rows = []
    for w in winners:
        for secs in options.prefix_seconds:
            for flt in options.filter_flags():
                for kind in ("highest", "paid"):
                    try:
                        agg = aggregate(
                            records, rounds, prefix_seconds=secs, filtered=flt,
                            winner=w, include_idle=options.include_idle,
                        )
                        paired = pair_with_bids(agg, rounds, bid_kind=kind, shift=0, eth_usd=eth_usd)
                        p, s = _corr_pair(paired.bids, paired.markouts_usd)
                        n = len(paired)
                    except SeriesTooShort:
                        p = s = INSUFFICIENT
                        n = 0
                    rows.append((w, secs, int(flt), kind, p, s, n))
    return Table(
        "prefix_correlations",
        ["winner", "prefix_seconds", "filtered", "bid_kind", "pearson", "spearman", "n_windows"],
        rows,
    )


def _block_table(records, rounds, options, eth_usd) -> Table:
    rows = []
    for k in options.block_minutes:
        for flt in options.filter_flags():
            for kind in ("highest", "paid"):
                try:
                    agg = aggregate(
                        records, rounds, block_minutes=k, filtered=flt,
                        include_idle=options.include_idle,
                    )
                    paired = pair_with_bids(agg, rounds, bid_kind=kind, shift=0, eth_usd=eth_usd)
                    p, s = _corr_pair(paired.bids, paired.markouts_usd)
                    n = len(paired)
                except SeriesTooShort:
                    p = s = INSUFFICIENT
                    n = 0
                rows.append((k, int(flt), kind, p, s, n))
    return Table(
        "block_correlations",
        ["block_minutes", "filtered", "bid_kind", "pearson", "spearman", "n_windows"],
        rows,
    )


def _shift_table(records, rounds, options, eth_usd) -> Table:
    labels = {1: "next_period", 0: "current_period", -1: "previous_period"}
    rows = []
    for shift in (1, 0, -1):
        for flt in options.filter_flags():
            for kind in ("highest", "paid"):
                try:
                    agg = aggregate(records, rounds, filtered=flt, include_idle=options.include_idle)
                    paired = pair_with_bids(agg, rounds, bid_kind=kind, shift=shift, eth_usd=eth_usd)
                    p, s = _corr_pair(paired.bids, paired.markouts_usd)
                    n = len(paired)
                except SeriesTooShort:
                    p = s = INSUFFICIENT
                    n = 0
                rows.append((labels[shift], int(flt), kind, p, s, n))
    return Table(
        "shift_correlations",
        ["bid_of", "filtered", "bid_kind", "pearson", "spearman", "n_pairs"],
        rows,
    )


def _autocorr_table(records, rounds, options) -> Table:
    won = [r for r in rounds if isinstance(r.outcome, Won)]
    won.sort(key=lambda r: r.schedule.round_number)
    series: dict[str, list[float]] = {
        "highest_bid": [float(r.outcome.highest_bid_eth) for r in won],
        "paid_bid": [float(r.outcome.paid_eth) for r in won],
    }
    for flt, name in ((False, "markout_unfiltered"), (True, "markout_filtered")):
        try:
            agg = aggregate(records, rounds, filtered=flt, include_idle=options.include_idle)
            series[name] = list(agg.sums_usd)
        except SeriesTooShort:
            series[name] = []
    rows = []
    for name in ("highest_bid", "paid_bid", "markout_unfiltered", "markout_filtered"):
        s = series[name]
        for lag in range(1, options.autocorr_max_lag + 1):
            if len(s) - lag >= stats.MIN_POINTS:
                try:
                    coef = stats.pearson(s[:-lag], s[lag:])
                except DegenerateVariance:
                    coef = INSUFFICIENT
            else:
                coef = INSUFFICIENT
            rows.append((name, lag, coef))
    return Table("autocorrelation", ["series", "lag", "coefficient"], rows)


def _pick_variance_asset(dataset: Dataset, options: AnalyzeOptions) -> str | None:
    if options.variance_asset is not None:
        return options.variance_asset
    counts: dict[str, int] = {}
    for tx in dataset.txs:
        for tok in (tx.token_in, tx.token_out):
            if tok in dataset.ticks:
                counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        return None
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def _ols_table(records, rounds, dataset, options, eth_usd, tx_by_id) -> Table:
    cols = ["model", "term", "coefficient", "std_error", "r_squared", "adj_r_squared",
            "f_statistic", "n_obs"]
    asset = _pick_variance_asset(dataset, options)
    won = [r for r in rounds if isinstance(r.outcome, Won)]
    if asset is None or not won:
        return Table("ols", cols, [("variance_per_minute", INSUFFICIENT, None, None, None, None, None, 0)])
    genesis = won[0].schedule.minute_start - won[0].schedule.round_number * 60_000

    pair_records = [
        rec for rec in records
        if rec.tx_id in tx_by_id
        and asset in (tx_by_id[rec.tx_id].token_in, tx_by_id[rec.tx_id].token_out)
    ]
    try:
        agg = aggregate(pair_records, rounds, filtered=True, include_idle=options.include_idle)
    except SeriesTooShort:
        agg = None
    rows: list[tuple] = []
    if agg is None or len(agg) < 4:
        return Table("ols", cols, [("variance_per_minute", INSUFFICIENT, None, None, None, None, None, 0)])

    var_series = realized_variance(dataset.ticks[asset], 60_000, origin=genesis)
    var_by_round = dict(enumerate(var_series.values))
    y_by_round = dict(zip(agg.window_ids, agg.sums_usd))

    def add_model(name: str, pairs: list[tuple[float, float]]) -> None:
        if len(pairs) < 4:
            rows.append((name, INSUFFICIENT, None, None, None, None, None, len(pairs)))
            return
        xs = [p[0] for p in pairs]
        ys = [p[1] for p in pairs]
        try:
            res = stats.ols(ys, xs, intercept=True)
        except (RankDeficient, SeriesTooShort, DegenerateVariance):
            rows.append((name, INSUFFICIENT, None, None, None, None, None, len(pairs)))
            return
        for term, i in (("const", 0), (name, 1)):
            rows.append((
                name, term, float(res.coefficients[i]), float(res.std_errors[i]),
                res.r_squared, res.adj_r_squared, res.f_statistic, res.n_observations,
            ))

    add_model(
        "variance_per_minute",
        [(var_by_round[w], y_by_round[w]) for w in agg.window_ids if w in var_by_round],
    )
    try:
        paired0 = pair_with_bids(agg, rounds, bid_kind="paid", shift=0, eth_usd=eth_usd)
        add_model("paid_bid", list(zip(paired0.bids, paired0.markouts_usd)))
    except SeriesTooShort:
        rows.append(("paid_bid", INSUFFICIENT, None, None, None, None, None, 0))
    try:
        paired1 = pair_with_bids(agg, rounds, bid_kind="paid", shift=1, eth_usd=eth_usd)
        add_model("paid_bid_next_round", list(zip(paired1.bids, paired1.markouts_usd)))
    except SeriesTooShort:
        rows.append(("paid_bid_next_round", INSUFFICIENT, None, None, None, None, None, 0))
    return Table("ols", cols, rows)


def _cold_start_table(records, rounds, options) -> Table:
    shares = cold_start_share(records, rounds, options.cold_start_seconds)
    return Table(
        "cold_start",
        ["first_seconds", "tx_share", "markout_share_unfiltered", "markout_share_filtered",
         "uniform_benchmark"],
        [(
            options.cold_start_seconds, shares.tx_share, shares.markout_share_unfiltered,
            shares.markout_share_filtered, shares.uniform_benchmark,
        )],
    )


def render_summary(bundle: ReportBundle) -> str:
    """Markdown rendering of every table, for humans."""
    out = ["# Express-lane analytics report", ""]
    for t in bundle.tables:
        out.append(f"## {t.name}")
        out.append("")
        out.append("| " + " | ".join(t.columns) + " |")
        out.append("|" + "---|" * len(t.columns))
        for row in t.rows:
            cells = []
            for v in row:
                if isinstance(v, float):
                    cells.append(f"{v:.4g}")
                else:
                    cells.append(_fmt(v))
            out.append("| " + " | ".join(cells) + " |")
        out.append("")
    return "\n".join(out)


def write_report(bundle: ReportBundle, out_dir) -> list[str]:
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    written = []
    for name, text in sorted(bundle.files().items()):
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(str(path))
    return written


# --- parameter sweeps --------------------------------------------------------

_PATH_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?")


def _set_path(data: dict, dotted: str, value) -> None:
    node = data
    parts = dotted.split(".")
    for i, part in enumerate(parts):
        m = _PATH_RE.fullmatch(part)
        if not m:
            raise ValueError(f"bad grid key segment {part!r} in {dotted!r}")
        key, idx = m.group(1), m.group(2)
        last = i == len(parts) - 1
        if key not in node:
            raise KeyError(f"grid key {dotted!r}: no such config field {key!r}")
        if idx is not None:
            seq = node[key]
            j = int(idx)
            if not isinstance(seq, list) or j >= len(seq):
                raise KeyError(f"grid key {dotted!r}: index {j} out of range for {key!r}")
            if last:
                seq[j] = value
            else:
                node = seq[j]
        elif last:
            node[key] = value
        else:
            node = node[key]


ANALYZE_GRID_KEYS = {"markout_ms", "filtered"}


def sweep(config, grid: dict[str, list], out_dir=None, base_options: AnalyzeOptions | None = None):
    """Simulate+analyze per grid point; returns (summary table, bundles).

    Grid keys are analyze options (markout_ms, filtered) or dotted scenario
    config paths (e.g. "seed", "arb.gas_fee_usd", "bidders[0].params.alpha").
    """
    from .scenario import ScenarioConfig, simulate

    if not grid:
        raise ValueError("parameter grid is empty")
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys)))
    base = config.to_dict()
    summary_rows = []
    bundles = []
    for i, combo in enumerate(combos):
        cfg_dict = copy.deepcopy(base)
        opts = copy.deepcopy(base_options) if base_options is not None else AnalyzeOptions()
        for k, v in zip(keys, combo):
            if k in ANALYZE_GRID_KEYS:
                setattr(opts, k, v)
                if k == "markout_ms":
                    cfg_dict["markout_ms"] = v
            else:
                _set_path(cfg_dict, k, v)
        cfg = ScenarioConfig.from_dict(cfg_dict)
        dataset, manifest = simulate(cfg)
        bundle = analyze(dataset, opts)
        bundles.append(bundle)
        point_dir = None
        if out_dir is not None:
            point_dir = Path(out_dir) / f"point_{i:03d}"
            write_report(bundle, point_dir)
            with open(point_dir / "manifest.json", "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
        info = {k: v for k, v in bundle.table("run_info").rows}
        block = bundle.table("block_correlations")
        best_block = _best_block_corr(block)
        summary_rows.append(
            tuple(combo)
            + (
                info["n_txs"],
                info["n_positive_markouts"],
                _total_filtered_markout(bundle),
                _minute_paid_pearson(bundle),
                best_block,
            )
        )
    summary = Table(
        "sweep_summary",
        keys + ["n_txs", "n_positive_markouts", "total_filtered_markout_usd",
                "minute_paid_pearson", "best_block_pearson"],
        summary_rows,
    )
    if out_dir is not None:
        with open(Path(out_dir) / "sweep_summary.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(summary.to_csv_text())
    return summary, bundles


def _total_filtered_markout(bundle: ReportBundle) -> float:
    table = bundle.table("activity")
    col = table.columns.index("markout_filtered_usd")
    return sum(row[col] for row in table.rows)


def _minute_paid_pearson(bundle: ReportBundle):
    for row in bundle.table("shift_correlations").rows:
        if row[0] == "current_period" and row[1] == 1 and row[2] == "paid":
            return row[3]
    return INSUFFICIENT


def _best_block_corr(block: Table):
    vals = [r[3] for r in block.rows if isinstance(r[3], float)]
    return max(vals) if vals else INSUFFICIENT
