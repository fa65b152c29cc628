"""Configuration, seed derivation, and the staged batch pipeline.

Stages communicate only through files under the output directory, are
skipped when a manifest entry proves config, inputs and outputs are all
unchanged, and echo the user's configuration verbatim into every JSON
sidecar. Randomness flows from one master seed; each task derives its own
stream from a stable hash of (seed, stage, task labels), so parallel and
re-ordered execution cannot change any result.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import classifier as clf
from . import corrnet, hypembed, marketdata, netmeasures, sigtest, svgreport
from .errors import DataError, UsageError
from .manifest import RunManifest, hash_config

STAGE_ORDER = ("ingest", "networks", "embed", "measures", "sigtest", "classify")

DEFAULTS = {
    "window_length": 60,
    "step": 1,
    "weighting": netmeasures.WEIGHTED,
    "measures": [netmeasures.COMM, netmeasures.SPL, netmeasures.EBC,
                 netmeasures.SHORT_COMM_PATH],
    "calendar": {"rule": "consecutive", "holidays": []},
    "embedding": {"adjustment": hypembed.CIRCULAR, "gamma_fallback": 3.0,
                  "gamma_mode": "per_window", "zeta_curv": 1.0},
    "sigtest": {"alpha": 0.001, "n_resamples": 1000, "adjust": None,
                "measures": [netmeasures.SHORT_COMM_PATH, netmeasures.SPL]},
    "classifier": {"splits": 5, "repeats": 10, "keep_features": 1, "c": 1.0,
                   "mask_threshold": 0.25, "drop_fraction": 0.1,
                   "measures": [netmeasures.COMM, netmeasures.SPL, netmeasures.EBC]},
    "surrogate": {"enabled": False},
    "seed": 0,
    "threads": 1,
}


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit stream seed from the master seed and task labels."""
    text = f"{int(master)}|" + "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def worker_map(fn, items, threads: int = 1) -> list:
    """Order-preserving map, optionally over a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _merge_defaults(raw: dict) -> dict:
    resolved = {}
    for key, default in DEFAULTS.items():
        value = raw.get(key, default)
        if isinstance(default, dict):
            merged = dict(default)
            merged.update(value or {})
            value = merged
        resolved[key] = value
    resolved["periods"] = raw.get("periods", [])
    resolved["out"] = raw.get("out", "out")
    return resolved


@dataclass
class PipelineConfig:
    """Validated configuration plus the verbatim input for sidecar echoes."""

    raw: dict
    resolved: dict = field(init=False)

    def __post_init__(self):
        self.resolved = _merge_defaults(self.raw)
        self.validate()

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(str(path), encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise UsageError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls(raw=raw)

    def validate(self) -> None:
        cfg = self.resolved
        periods = cfg["periods"]
        if len(periods) != 2:
            raise UsageError("config must declare exactly two periods")
        labels = sorted(p.get("label", "") for p in periods)
        if labels != [marketdata.STABLE, marketdata.VOLATILE]:
            raise UsageError("periods must carry one 'stable' and one 'volatile' label")
        for period in periods:
            if not period.get("name"):
                raise UsageError("every period needs a name")
            if ("csv" in period) == ("synthetic" in period):
                raise UsageError(
                    f"period {period.get('name')!r} must give exactly one of csv or synthetic"
                )
        if cfg["window_length"] < 2:
            raise UsageError("window_length must be at least 2")
        if cfg["weighting"] not in (netmeasures.WEIGHTED, netmeasures.UNWEIGHTED):
            raise UsageError(f"unknown weighting {cfg['weighting']!r}")
        for key in ("measures",):
            for kind in cfg[key]:
                if kind not in netmeasures.ALL_KINDS:
                    raise UsageError(f"unknown measure kind {kind!r}")
        for kind in cfg["sigtest"]["measures"] + cfg["classifier"]["measures"]:
            if kind not in netmeasures.ALL_KINDS:
                raise UsageError(f"unknown measure kind {kind!r}")
        if cfg["embedding"]["adjustment"] not in (hypembed.CIRCULAR, hypembed.EQUIDISTANT):
            raise UsageError("embedding adjustment must be 'CA' or 'EA'")
        if cfg["embedding"]["gamma_mode"] not in ("per_window", "per_period"):
            raise UsageError("gamma_mode must be 'per_window' or 'per_period'")

    # convenience accessors -------------------------------------------------
    @property
    def periods(self) -> list:
        return self.resolved["periods"]

    def period(self, label: str) -> dict:
        for period in self.periods:
            if period["label"] == label:
                return period
        raise UsageError(f"no period labeled {label!r}")

    @property
    def seed(self) -> int:
        return int(self.resolved["seed"])

    @property
    def threads(self) -> int:
        return int(self.resolved["threads"])

    def all_measure_kinds(self) -> list:
        ordered = []
        for kind in (list(self.resolved["measures"])
                     + list(self.resolved["sigtest"]["measures"])
                     + list(self.resolved["classifier"]["measures"])):
            if kind not in ordered:
                ordered.append(kind)
        return ordered

    def needs_embedding(self) -> bool:
        return any(kind in netmeasures.GEOMETRY_KINDS for kind in self.all_measure_kinds())

    def calendar(self) -> marketdata.TradingCalendar:
        cal = self.resolved["calendar"]
        holidays = frozenset(marketdata._parse_date(d) for d in cal.get("holidays", []))
        return marketdata.TradingCalendar(rule=cal.get("rule", "consecutive"),
                                          holidays=holidays)


@dataclass
class RunContext:
    config: PipelineConfig
    out: Path
    manifest: RunManifest

    @classmethod
    def create(cls, config: PipelineConfig, out) -> "RunContext":
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        return cls(config=config, out=out, manifest=RunManifest(out, __version__))

    def echo(self) -> dict:
        return {"config": self.config.raw}


# ---------------------------------------------------------------------------
# shared in-memory steps

def _panel_for_period(ctx: RunContext, period: dict) -> marketdata.ReturnPanel:
    cfg = ctx.config
    if "csv" in period:
        prices = marketdata.load_prices(period["csv"], schema=period.get("schema"),
                                        start=period.get("start"), end=period.get("end"))
    else:
        spec = dict(period["synthetic"])
        spec.setdefault("regime", period["label"])
        spec.setdefault("seed", derive_seed(cfg.seed, "ingest", period["name"]))
        prices = marketdata.generate_synthetic(**spec)
    panel = marketdata.compute_log_returns(prices, cfg.calendar())
    panel.meta["source"] = prices.meta
    return panel


def _windows_for_period(ctx: RunContext, period: dict,
                        panel: marketdata.ReturnPanel) -> list:
    cfg = ctx.config.resolved
    return marketdata.slice_windows(panel, window_length=cfg["window_length"],
                                    step=cfg["step"], label=period["label"],
                                    period=period["name"])


def _network_for_window(window: marketdata.WindowSlice) -> corrnet.PmfgNetwork:
    corr = corrnet.pearson(window)
    return corrnet.build_pmfg(corr, nodes=window.tickers, label=window.label,
                              period=window.period)


def _topology_measures(net: corrnet.PmfgNetwork, kinds, weighting: str) -> dict:
    """Topology measure matrices for one network under one weighting."""
    binary = net.binary_adjacency()
    out = {}
    need_zeta = any(k in kinds for k in (netmeasures.COMM_DIST,
                                         netmeasures.SHORT_COMM_PATH))
    comm = None
    if netmeasures.COMM in kinds or need_zeta:
        if weighting == netmeasures.WEIGHTED:
            comm = netmeasures.weighted_communicability(net.unsigned_adjacency(),
                                                        window_index=net.window_index)
        else:
            comm = netmeasures.communicability(binary, window_index=net.window_index)
    if netmeasures.COMM in kinds:
        out[netmeasures.COMM] = netmeasures.MeasureMatrix(
            kind=netmeasures.COMM, values=comm.values,
            window_index=net.window_index, weighting=weighting)
    if need_zeta:
        zeta = netmeasures.communicability_distance(comm, weighting=weighting)
        if netmeasures.COMM_DIST in kinds:
            out[netmeasures.COMM_DIST] = zeta
        if netmeasures.SHORT_COMM_PATH in kinds:
            masked = netmeasures.comm_weighted_adjacency(zeta, binary)
            out[netmeasures.SHORT_COMM_PATH] = netmeasures.shortest_communicability_path_lengths(
                masked, adjacency=binary, window_index=net.window_index,
                weighting=weighting)
    if netmeasures.SPL in kinds:
        lengths = net.distance_adjacency() if weighting == netmeasures.WEIGHTED else binary
        out[netmeasures.SPL] = netmeasures.shortest_path_lengths(
            lengths, adjacency=binary, window_index=net.window_index,
            weighting=weighting)
    if netmeasures.EBC in kinds:
        lengths = net.distance_adjacency() if weighting == netmeasures.WEIGHTED else None
        out[netmeasures.EBC] = netmeasures.edge_betweenness(
            binary, lengths=lengths, window_index=net.window_index)
    return out


def _embedding_for_network(ctx: RunContext, net: corrnet.PmfgNetwork,
                           gamma: float | None = None) -> hypembed.PolarEmbedding:
    emb_cfg = ctx.config.resolved["embedding"]
    return hypembed.embed_pmfg(net, adjustment=emb_cfg["adjustment"], gamma=gamma,
                               gamma_fallback=emb_cfg["gamma_fallback"],
                               zeta_curv=emb_cfg["zeta_curv"])


def _period_gamma(ctx: RunContext, networks: list) -> float | None:
    """Pooled-degree exponent when gamma_mode is per_period, else None."""
    if ctx.config.resolved["embedding"]["gamma_mode"] != "per_period":
        return None
    pooled = np.concatenate([net.degrees() for net in networks])
    try:
        return hypembed.fit_power_law_gamma(pooled)
    except (DataError, ValueError):
        return float(ctx.config.resolved["embedding"]["gamma_fallback"])


def _measures_for_network(ctx: RunContext, net: corrnet.PmfgNetwork, kinds,
                          embedding: hypembed.PolarEmbedding | None) -> dict:
    weighting = ctx.config.resolved["weighting"]
    topo_kinds = [k for k in kinds if k in netmeasures.TOPOLOGY_KINDS]
    out = _topology_measures(net, topo_kinds, weighting)
    geo_kinds = [k for k in kinds if k in netmeasures.GEOMETRY_KINDS]
    if geo_kinds:
        if embedding is None:
            raise DataError("geometric measures need the embed stage to run first")
        hnet = hypembed.hyperbolic_reweight(
            net, embedding, ctx.config.resolved["embedding"]["zeta_curv"])
        geo = hypembed.hyperbolic_measures(hnet)
        for kind in geo_kinds:
            out[kind] = geo[kind]
    return out


# ---------------------------------------------------------------------------
# file layout helpers

def _panel_path(ctx: RunContext, period: dict) -> Path:
    return ctx.out / "panels" / f"{period['name']}.csv"

def _network_dir(ctx: RunContext, period: dict) -> Path:
    return ctx.out / "networks" / period["name"]

def _embedding_dir(ctx: RunContext, period: dict) -> Path:
    return ctx.out / "embeddings" / period["name"]

def _measure_dir(ctx: RunContext, period: dict, kind: str) -> Path:
    weighting = ctx.config.resolved["weighting"]
    return ctx.out / "measures" / period["name"] / f"{kind}_{weighting}"

def _window_file(directory: Path, index: int) -> Path:
    return directory / f"window_{index:04d}.csv"

def _sorted_windows(directory: Path) -> list:
    return sorted(directory.glob("window_*.csv"))


def _read_networks(ctx: RunContext, period: dict) -> list:
    files = _sorted_windows(_network_dir(ctx, period))
    if not files:
        raise DataError(f"no networks found for period {period['name']!r}; "
                        "run the networks stage first")
    return [corrnet.read_network(p) for p in files]


def _read_measures(ctx: RunContext, period: dict, kind: str) -> list:
    files = _sorted_windows(_measure_dir(ctx, period, kind))
    if not files:
        raise DataError(f"no {kind} matrices for period {period['name']!r}; "
                        "run the measures stage first")
    return [netmeasures.read_measure(p) for p in files]


# ---------------------------------------------------------------------------
# stages

def _run_stage(ctx: RunContext, name: str, inputs, runner) -> dict:
    """Skip or execute one stage, recording hashes and timing."""
    config_hash = hash_config(ctx.config.raw)
    inputs = [str(p) for p in inputs]
    if ctx.manifest.stage_unchanged(name, config_hash, inputs):
        return {"stage": name, "skipped": True}
    start = time.perf_counter()
    outputs, seeds = runner()
    ctx.manifest.record_stage(name, config_hash, inputs,
                              [str(p) for p in outputs],
                              time.perf_counter() - start, seeds)
    return {"stage": name, "skipped": False, "outputs": len(outputs)}


def stage_ingest(ctx: RunContext) -> dict:
    def runner():
        outputs, seeds = [], {}
        (ctx.out / "panels").mkdir(parents=True, exist_ok=True)
        for period in ctx.config.periods:
            panel = _panel_for_period(ctx, period)
            path = _panel_path(ctx, period)
            marketdata.write_panel(panel, path, extra={
                **ctx.echo(),
                "period": period["name"],
                "label": period["label"],
            })
            outputs += [path, Path(str(path) + ".json")]
            if "synthetic" in period:
                seeds[period["name"]] = period["synthetic"].get(
                    "seed", derive_seed(ctx.config.seed, "ingest", period["name"]))
        return outputs, seeds

    inputs = [period["csv"] for period in ctx.config.periods if "csv" in period]
    return _run_stage(ctx, "ingest", inputs, runner)


def stage_networks(ctx: RunContext) -> dict:
    def runner():
        outputs = []
        by_label = {}
        for period in ctx.config.periods:
            panel_path = _panel_path(ctx, period)
            if not panel_path.exists():
                raise DataError(f"panel missing for {period['name']!r}; run ingest first")
            panel = marketdata.read_panel(panel_path)
            windows = _windows_for_period(ctx, period, panel)
            directory = _network_dir(ctx, period)
            directory.mkdir(parents=True, exist_ok=True)
            nets = worker_map(_network_for_window, windows, ctx.config.threads)
            summary_rows = []
            for window, net in zip(windows, nets):
                net.window_index = window.window_index
                path = _window_file(directory, window.window_index)
                corrnet.write_network(net, path, extra=ctx.echo())
                outputs += [path, Path(str(path) + ".json")]
                stats = corrnet.network_summary(net)
                weighted_acc = netmeasures.average_clustering(
                    net.unsigned_adjacency(), weighted=True)
                summary_rows.append((window.window_index, stats, weighted_acc))
            summary_path = directory / "summary.csv"
            with open(summary_path, "w", encoding="utf-8") as fh:
                fh.write("window_index,avg_weighted_degree,weighted_diameter,"
                         "clustering_coefficient,clustering_coefficient_weighted\n")
                for index, stats, weighted_acc in summary_rows:
                    fh.write(f"{index},{stats['avg_weighted_degree']!r},"
                             f"{stats['weighted_diameter']!r},"
                             f"{stats['clustering_coefficient']!r},{weighted_acc!r}\n")
            outputs.append(summary_path)
            by_label[period["label"]] = summary_rows
        # per-window diameter and clustering distributions, stable vs volatile
        stable_rows = by_label.get(marketdata.STABLE, [])
        volatile_rows = by_label.get(marketdata.VOLATILE, [])
        for key, name in (("weighted_diameter", "diameter"),
                          ("clustering_coefficient", "clustering")):
            svg_path = ctx.out / "networks" / f"{name}_hist.svg"
            svgreport.svg_histogram_pair(
                [row[1][key] for row in stable_rows],
                [row[1][key] for row in volatile_rows],
                svg_path, title=f"per-window {name}: stable vs volatile")
            outputs.append(svg_path)
        return outputs, {}

    inputs = [_panel_path(ctx, p) for p in ctx.config.periods]
    return _run_stage(ctx, "networks", inputs, runner)


def stage_embed(ctx: RunContext) -> dict:
    def runner():
        outputs = []
        for period in ctx.config.periods:
            nets = _read_networks(ctx, period)
            directory = _embedding_dir(ctx, period)
            directory.mkdir(parents=True, exist_ok=True)
            gamma = _period_gamma(ctx, nets)
            embeddings = worker_map(
                lambda net: _embedding_for_network(ctx, net, gamma),
                nets, ctx.config.threads)
            for net, embedding in zip(nets, embeddings):
                path = _window_file(directory, net.window_index)
                hypembed.write_embedding(embedding, path, nodes=net.nodes,
                                         extra=ctx.echo())
                outputs += [path, Path(str(path) + ".json")]
        return outputs, {}

    inputs = []
    for period in ctx.config.periods:
        inputs += _sorted_windows(_network_dir(ctx, period))
    return _run_stage(ctx, "embed", inputs, runner)


def stage_measures(ctx: RunContext) -> dict:
    kinds = ctx.config.all_measure_kinds()

    def runner():
        outputs = []
        for period in ctx.config.periods:
            nets = _read_networks(ctx, period)
            embeddings = [None] * len(nets)
            if any(kind in netmeasures.GEOMETRY_KINDS for kind in kinds):
                emb_dir = _embedding_dir(ctx, period)
                files = _sorted_windows(emb_dir)
                if len(files) != len(nets):
                    raise DataError("geometric measures need the embed stage to run first")
                embeddings = [hypembed.read_embedding(p) for p in files]
            results = worker_map(
                lambda pair: _measures_for_network(ctx, pair[0], kinds, pair[1]),
                list(zip(nets, embeddings)), ctx.config.threads)
            for kind in kinds:
                directory = _measure_dir(ctx, period, kind)
                directory.mkdir(parents=True, exist_ok=True)
                for net, measures in zip(nets, results):
                    path = _window_file(directory, net.window_index)
                    netmeasures.write_measure(measures[kind], path, extra={
                        **ctx.echo(), "period": period["name"], "label": period["label"],
                    })
                    outputs += [path, Path(str(path) + ".json")]
        return outputs, {}

    inputs = []
    for period in ctx.config.periods:
        inputs += _sorted_windows(_network_dir(ctx, period))
        if any(kind in netmeasures.GEOMETRY_KINDS for kind in kinds):
            inputs += _sorted_windows(_embedding_dir(ctx, period))
    return _run_stage(ctx, "measures", inputs, runner)


def stage_sigtest(ctx: RunContext) -> dict:
    cfg = ctx.config.resolved["sigtest"]
    stable = ctx.config.period(marketdata.STABLE)
    volatile = ctx.config.period(marketdata.VOLATILE)

    def runner():
        directory = ctx.out / "sigtest"
        directory.mkdir(parents=True, exist_ok=True)
        outputs = []
        seeds = {}
        scans = {}
        for kind in cfg["measures"]:
            stable_ms = _read_measures(ctx, stable, kind)
            volatile_ms = _read_measures(ctx, volatile, kind)
            seed = derive_seed(ctx.config.seed, "sigtest", kind)
            seeds[kind] = seed
            scans[kind] = sigtest.run_significance_scan(
                stable_ms, volatile_ms, alpha=cfg["alpha"],
                n_resamples=cfg["n_resamples"], seed=seed, kind=kind,
                adjust=cfg["adjust"])
        # one colour scale shared by every heatmap of the scan set
        shared_scale = max(float(np.abs(s.delta_matrix).max()) for s in scans.values())
        for kind, scan in scans.items():
            kind_dir = directory / kind
            kind_dir.mkdir(parents=True, exist_ok=True)
            results_csv = kind_dir / "results.csv"
            summary_json = kind_dir / "summary.json"
            sigtest.write_scan(scan, results_csv, summary_json, extra={
                **ctx.echo(), "heatmap_scale": shared_scale, "seed": seeds[kind],
            })
            diff_csv = kind_dir / "difference.csv"
            with open(diff_csv, "w", encoding="utf-8") as fh:
                for row in scan.delta_matrix:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            hist_csv = kind_dir / "histogram.csv"
            sig = [r.significant for r in scan.results]
            with open(hist_csv, "w", encoding="utf-8") as fh:
                fh.write("i,j,mean_stable,mean_volatile\n")
                for k, keep in enumerate(sig):
                    if keep:
                        fh.write(f"{scan.pairs[k, 0]},{scan.pairs[k, 1]},"
                                 f"{float(scan.mean_stable[k])!r},"
                                 f"{float(scan.mean_volatile[k])!r}\n")
            heatmap_svg = kind_dir / "heatmap.svg"
            svgreport.svg_heatmap(scan.delta_matrix, heatmap_svg,
                                  title=f"{kind}: stable minus volatile mean",
                                  vmax=shared_scale)
            hist_svg = kind_dir / "histogram.svg"
            mask = np.array(sig, dtype=bool)
            svgreport.svg_histogram_pair(
                scan.mean_stable[mask], scan.mean_volatile[mask], hist_svg,
                title=f"{kind}: per-pair means over significant pairs")
            outputs += [results_csv, summary_json, diff_csv, hist_csv,
                        heatmap_svg, hist_svg]
        return outputs, seeds

    inputs = []
    for kind in cfg["measures"]:
        for period in ctx.config.periods:
            inputs += _sorted_windows(_measure_dir(ctx, period, kind))
    return _run_stage(ctx, "sigtest", inputs, runner)


def _dataset_for_kind(ctx: RunContext, kind: str,
                      shuffled: bool = False) -> clf.FeatureDataset:
    """Assemble the windows x features dataset (stable first, then volatile)."""
    measures, adjacencies, labels = [], [], []
    for label in (marketdata.STABLE, marketdata.VOLATILE):
        period = ctx.config.period(label)
        nets = _read_networks(ctx, period)
        ms = _read_measures(ctx, period, kind)
        if len(nets) != len(ms):
            raise DataError(f"network/measure count mismatch for {period['name']!r}")
        measures += ms
        adjacencies += [net.binary_adjacency() for net in nets]
        labels += [clf.STABLE_LABEL if label == marketdata.STABLE
                   else clf.VOLATILE_LABEL] * len(ms)
    return clf.vectorize(measures, labels, adjacencies=adjacencies, kind=kind)


def _surrogate_dataset_for_kind(ctx: RunContext, kind: str) -> clf.FeatureDataset:
    """Same pipeline, but each window's per-stock returns are shuffled first."""
    measures, adjacencies, labels = [], [], []
    emb_needed = kind in netmeasures.GEOMETRY_KINDS
    for label in (marketdata.STABLE, marketdata.VOLATILE):
        period = ctx.config.period(label)
        panel = marketdata.read_panel(_panel_path(ctx, period))
        windows = _windows_for_period(ctx, period, panel)
        shuffled = [
            marketdata.surrogate_shuffle(
                w, derive_seed(ctx.config.seed, "surrogate", period["name"],
                               w.window_index))
            for w in windows
        ]
        nets = worker_map(_network_for_window, shuffled, ctx.config.threads)
        gamma = _period_gamma(ctx, nets) if emb_needed else None
        for window, net in zip(shuffled, nets):
            net.window_index = window.window_index
            embedding = _embedding_for_network(ctx, net, gamma) if emb_needed else None
            ms = _measures_for_network(ctx, net, [kind], embedding)
            measures.append(ms[kind])
            adjacencies.append(net.binary_adjacency())
            labels.append(clf.STABLE_LABEL if label == marketdata.STABLE
                          else clf.VOLATILE_LABEL)
    return clf.vectorize(measures, labels, adjacencies=adjacencies, kind=kind)


def _classify_kind(ctx: RunContext, dataset: clf.FeatureDataset, kind: str,
                   audit: bool = False) -> clf.CvReport:
    cv = ctx.config.resolved["classifier"]
    return clf.cross_validate(
        dataset,
        splits=cv["splits"], repeats=cv["repeats"],
        keep_features=cv["keep_features"], c=cv["c"],
        mask_threshold=cv["mask_threshold"], drop_fraction=cv["drop_fraction"],
        seed=derive_seed(ctx.config.seed, "classify", kind), audit=audit)


def _write_classification(ctx: RunContext, directory: Path, reports: dict) -> list:
    directory.mkdir(parents=True, exist_ok=True)
    outputs = []
    for kind, report in reports.items():
        kind_dir = directory / kind
        kind_dir.mkdir(parents=True, exist_ok=True)
        report_json = kind_dir / "cvreport.json"
        features_csv = kind_dir / "selected_features.csv"
        payload = {"kind": kind, **ctx.echo(), "report": report.to_dict()}
        with open(report_json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        clf.write_report(report, kind_dir / "cvreport_raw.json", features_csv)
        outputs += [report_json, kind_dir / "cvreport_raw.json", features_csv]
    bars_csv = directory / "barchart.csv"
    with open(bars_csv, "w", encoding="utf-8") as fh:
        fh.write("measure,metric,mean,stderr\n")
        for kind, report in reports.items():
            for metric in clf.METRICS:
                fh.write(f"{kind},{metric},{report.means[metric]!r},"
                         f"{report.stderrs[metric]!r}\n")
    bars_svg = directory / "barchart.svg"
    svgreport.svg_grouped_bars(
        list(reports), list(clf.METRICS),
        {k: r.means for k, r in reports.items()},
        {k: r.stderrs for k, r in reports.items()},
        bars_svg, title="classification performance by measure")
    return outputs + [bars_csv, bars_svg]


def stage_classify(ctx: RunContext) -> dict:
    kinds = ctx.config.resolved["classifier"]["measures"]

    def runner():
        reports = {}
        for kind in kinds:
            dataset = _dataset_for_kind(ctx, kind)
            reports[kind] = _classify_kind(ctx, dataset, kind)
        outputs = _write_classification(ctx, ctx.out / "classify", reports)
        seeds = {kind: derive_seed(ctx.config.seed, "classify", kind) for kind in kinds}
        return outputs, seeds

    inputs = []
    for kind in kinds:
        for period in ctx.config.periods:
            inputs += _sorted_windows(_measure_dir(ctx, period, kind))
            inputs += _sorted_windows(_network_dir(ctx, period))
    return _run_stage(ctx, "classify", inputs, runner)


def stage_surrogate(ctx: RunContext) -> dict:
    """Control run: per-window per-stock shuffling before correlation."""
    kinds = ctx.config.resolved["classifier"]["measures"]

    def runner():
        reports = {kind: _classify_kind(ctx, _surrogate_dataset_for_kind(ctx, kind), kind)
                   for kind in kinds}
        outputs = _write_classification(ctx, ctx.out / "surrogate", reports)
        contrast = {}
        for kind in kinds:
            original = ctx.out / "classify" / kind / "cvreport.json"
            entry = {"surrogate_accuracy": reports[kind].means["accuracy"],
                     "surrogate_auc": reports[kind].means["auc"]}
            if original.exists():
                with open(original, encoding="utf-8") as fh:
                    entry["original_accuracy"] = json.load(fh)["report"]["means"]["accuracy"]
            contrast[kind] = entry
        contrast_path = ctx.out / "surrogate" / "contrast.json"
        with open(contrast_path, "w", encoding="utf-8") as fh:
            json.dump({**ctx.echo(), "contrast": contrast}, fh, sort_keys=True, indent=2)
            fh.write("\n")
        outputs.append(contrast_path)
        seeds = {kind: derive_seed(ctx.config.seed, "classify", kind) for kind in kinds}
        return outputs, seeds

    inputs = [_panel_path(ctx, p) for p in ctx.config.periods]
    return _run_stage(ctx, "surrogate", inputs, runner)


def surrogate_control(config: PipelineConfig, out, kind: str | None = None) -> dict:
    """Run the surrogate-shuffled pipeline and return its CvReports."""
    ctx = RunContext.create(config, out)
    kinds = [kind] if kind else config.resolved["classifier"]["measures"]
    return {k: _classify_kind(ctx, _surrogate_dataset_for_kind(ctx, k), k)
            for k in kinds}


def stage_report(ctx: RunContext) -> dict:
    def runner():
        directory = ctx.out / "report"
        directory.mkdir(parents=True, exist_ok=True)
        problems = ctx.manifest.verify()
        index = {
            "tool_version": __version__,
            "artifacts": ctx.manifest.artifact_hashes(),
            "hash_problems": problems,
        }
        index_path = directory / "index.json"
        with open(index_path, "w", encoding="utf-8") as fh:
            json.dump({**ctx.echo(), **index}, fh, sort_keys=True, indent=2)
            fh.write("\n")
        lines = ["# Run report", ""]
        lines.append(f"- artifacts recorded: {len(index['artifacts'])}")
        lines.append(f"- hash problems: {len(problems)}")
        # timings stay in the manifest; artifacts must be reproducible
        for stage, entry in sorted(ctx.manifest.data["stages"].items()):
            lines.append(f"- stage `{stage}`: {len(entry.get('outputs', {}))} outputs")
        classify_bars = ctx.out / "classify" / "barchart.csv"
        if classify_bars.exists():
            lines += ["", "## Classification", "", "```",
                      classify_bars.read_text().strip(), "```"]
        report_path = directory / "report.md"
        report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return [index_path, report_path], {}

    return _run_stage(ctx, "report", [], runner)


def run_all(config: PipelineConfig, out) -> list:
    """Run every stage in dependency order; first failure aborts."""
    ctx = RunContext.create(config, out)
    results = [stage_ingest(ctx), stage_networks(ctx)]
    if config.needs_embedding():
        results.append(stage_embed(ctx))
    results.append(stage_measures(ctx))
    results.append(stage_sigtest(ctx))
    results.append(stage_classify(ctx))
    if config.resolved["surrogate"]["enabled"]:
        results.append(stage_surrogate(ctx))
    results.append(stage_report(ctx))
    return results
