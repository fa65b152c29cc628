import json

import numpy as np
import pytest

from commnet import cli, corrnet, pipeline
from commnet.errors import DataError, UsageError


def tiny_config(tmp_path, **overrides):
    config = {
        "periods": [
            {"name": "calm", "label": "stable",
             "synthetic": {"n_stocks": 8, "n_days": 35, "coupling": 0.2}},
            {"name": "crisis", "label": "volatile",
             "synthetic": {"n_stocks": 8, "n_days": 35, "coupling": 0.8}},
        ],
        "window_length": 30,
        "measures": ["COMM", "SPL"],
        "sigtest": {"n_resamples": 100, "alpha": 0.05,
                    "measures": ["COMM", "SPL"]},
        "classifier": {"splits": 3, "repeats": 1, "keep_features": 2,
                       "measures": ["COMM"]},
        "seed": 31,
        "threads": 1,
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path, config


class TestConfig:
    def test_validation_catches_bad_periods(self, tmp_path):
        path, config = tiny_config(tmp_path)
        config["periods"] = config["periods"][:1]
        path.write_text(json.dumps(config))
        with pytest.raises(UsageError, match="two periods"):
            pipeline.PipelineConfig.from_file(path)

    def test_validation_catches_unknown_measure(self, tmp_path):
        path, config = tiny_config(tmp_path, measures=["COMM", "BOGUS"])
        path.write_text(json.dumps(config))
        with pytest.raises(UsageError, match="BOGUS"):
            pipeline.PipelineConfig.from_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError, match="not found"):
            pipeline.PipelineConfig.from_file(tmp_path / "nope.json")

    def test_defaults_merged(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        assert config.resolved["sigtest"]["adjust"] is None
        assert config.resolved["classifier"]["mask_threshold"] == 0.25
        assert config.resolved["embedding"]["adjustment"] == "CA"

    def test_derive_seed_stable(self):
        assert pipeline.derive_seed(5, "a", 1) == pipeline.derive_seed(5, "a", 1)
        assert pipeline.derive_seed(5, "a", 1) != pipeline.derive_seed(5, "a", 2)
        assert pipeline.derive_seed(5, "a", 1) != pipeline.derive_seed(6, "a", 1)


class TestStages:
    def test_ingest_echoes_config(self, tmp_path):
        path, raw = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        sidecar = json.loads((tmp_path / "out/panels/calm.csv.json").read_text())
        assert sidecar["config"] == raw
        assert sidecar["label"] == "stable"

    def test_ingest_skipped_on_rerun(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        first = pipeline.stage_ingest(ctx)
        second = pipeline.stage_ingest(ctx)
        assert not first["skipped"] and second["skipped"]

    def test_networks_outputs_are_planar(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        pipeline.stage_networks(ctx)
        files = sorted((tmp_path / "out/networks/calm").glob("window_*.csv"))
        expected_windows = 34 - 30 + 1  # 35 days -> 34 returns
        assert len(files) == expected_windows
        for file in files:
            net = corrnet.read_network(file)
            assert net.edge_count == 3 * (net.n - 2)
            assert corrnet.is_planar(net.binary_adjacency())[0]
        summary = (tmp_path / "out/networks/calm/summary.csv").read_text().splitlines()
        assert len(summary) == 1 + expected_windows

    def test_geometry_requires_embed_stage(self, tmp_path):
        path, _ = tiny_config(tmp_path, measures=["COMM", "HCOMM"])
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        pipeline.stage_networks(ctx)
        with pytest.raises(DataError, match="embed"):
            pipeline.stage_measures(ctx)

    def test_measures_sidecar_metadata(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        pipeline.stage_networks(ctx)
        pipeline.stage_measures(ctx)
        sidecar = json.loads(
            (tmp_path / "out/measures/calm/COMM_weighted/window_0000.csv.json").read_text())
        assert sidecar["kind"] == "COMM"
        assert sidecar["weighting"] == "weighted"
        assert sidecar["period"] == "calm"


class TestCliCommands:
    def test_run_all_and_report(self, tmp_path, capsys):
        path, _ = tiny_config(tmp_path)
        out = tmp_path / "out"
        code = cli.main(["run-all", "--config", str(path), "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "ingest" in printed and "classify" in printed
        index = json.loads((out / "report/index.json").read_text())
        assert index["hash_problems"] == []
        assert len(index["artifacts"]) > 20
        heat = out / "sigtest/SPL/heatmap.svg"
        assert heat.exists() and heat.read_text().startswith("<svg")

    def test_second_run_all_skips_everything(self, tmp_path, capsys):
        path, _ = tiny_config(tmp_path)
        out = tmp_path / "out"
        assert cli.main(["run-all", "--config", str(path), "--out", str(out)]) == 0
        capsys.readouterr()
        assert cli.main(["run-all", "--config", str(path), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        lines = [l for l in printed.splitlines() if ":" in l]
        assert lines and all("skipped" in line for line in lines)

    def test_usage_errors_exit_1(self, tmp_path, capsys):
        assert cli.main(["ingest", "--config", str(tmp_path / "missing.json")]) == 1
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["ingest", "--config", str(bad)]) == 1
        assert cli.main(["bogus-command"]) == 1

    def test_malformed_csv_exits_2(self, tmp_path, capsys):
        csv_path = tmp_path / "prices.csv"
        csv_path.write_text("date,ticker,close\n2020-01-01,AAA,10\n2020-01-01,AAA,10\n")
        config = {
            "periods": [
                {"name": "calm", "label": "stable", "csv": str(csv_path)},
                {"name": "crisis", "label": "volatile",
                 "synthetic": {"n_stocks": 8, "n_days": 35, "coupling": 0.8}},
            ],
            "window_length": 30,
            "seed": 1,
        }
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(config))
        code = cli.main(["ingest", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "duplicate" in capsys.readouterr().err

    def test_env_var_default_out(self, tmp_path, monkeypatch, capsys):
        path, _ = tiny_config(tmp_path)
        target = tmp_path / "env_out"
        monkeypatch.setenv("COMMNET_OUT", str(target))
        assert cli.main(["ingest", "--config", str(path)]) == 0
        assert (target / "panels/calm.csv").exists()

    def test_seed_override_changes_outputs(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert cli.main(["ingest", "--config", str(path), "--out", str(out_a),
                         "--seed", "1"]) == 0
        assert cli.main(["ingest", "--config", str(path), "--out", str(out_b),
                         "--seed", "2"]) == 0
        a = (out_a / "panels/calm.csv").read_text()
        b = (out_b / "panels/calm.csv").read_text()
        assert a != b


class TestStageArtifacts:
    def test_sigtest_heatmaps_share_scale(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        pipeline.stage_networks(ctx)
        pipeline.stage_measures(ctx)
        pipeline.stage_sigtest(ctx)
        scales = set()
        for kind in ("COMM", "SPL"):
            summary = json.loads(
                (tmp_path / f"out/sigtest/{kind}/summary.json").read_text())
            scales.add(summary["heatmap_scale"])
        assert len(scales) == 1

    def test_network_histograms_written(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        pipeline.stage_networks(ctx)
        for name in ("diameter_hist.svg", "clustering_hist.svg"):
            assert (tmp_path / "out/networks" / name).exists()

    def test_threads_do_not_change_outputs(self, tmp_path):
        path, raw = tiny_config(tmp_path)
        outs = []
        for threads, out_name in ((1, "t1"), (3, "t3")):
            raw2 = dict(raw, threads=threads)
            cfg_path = tmp_path / f"c{threads}.json"
            cfg_path.write_text(json.dumps(raw2))
            config = pipeline.PipelineConfig.from_file(cfg_path)
            ctx = pipeline.RunContext.create(config, tmp_path / out_name)
            pipeline.stage_ingest(ctx)
            pipeline.stage_networks(ctx)
            pipeline.stage_measures(ctx)
            outs.append(tmp_path / out_name)
        from commnet.manifest import sha256_file
        for rel in sorted(p.relative_to(outs[0])
                          for p in outs[0].rglob("window_*.csv")):
            assert sha256_file(outs[0] / rel) == sha256_file(outs[1] / rel), rel

    def test_synthetic_seed_recorded_in_sidecar(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        sidecar = json.loads((tmp_path / "out/panels/calm.csv.json").read_text())
        assert sidecar["meta"]["source"]["synthetic"] is True
        assert "seed" in sidecar["meta"]["source"]


class TestSurrogatePipeline:
    def test_surrogate_preserves_marginals_and_kills_signal(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        ctx = pipeline.RunContext.create(config, tmp_path / "out")
        pipeline.stage_ingest(ctx)
        from commnet import marketdata as md
        panel = md.read_panel(tmp_path / "out/panels/crisis.csv")
        windows = md.slice_windows(panel, 30)
        shuffled = md.surrogate_shuffle(
            windows[0], pipeline.derive_seed(config.seed, "surrogate", "crisis", 0))
        for row_in, row_out in zip(windows[0].returns, shuffled.returns):
            assert sorted(row_in) == sorted(row_out)

    def test_surrogate_stage_writes_contrast(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        config = pipeline.PipelineConfig.from_file(path)
        out = tmp_path / "out"
        ctx = pipeline.RunContext.create(config, out)
        pipeline.stage_ingest(ctx)
        pipeline.stage_networks(ctx)
        pipeline.stage_measures(ctx)
        pipeline.stage_classify(ctx)
        pipeline.stage_surrogate(ctx)
        contrast = json.loads((out / "surrogate/contrast.json").read_text())
        assert "COMM" in contrast["contrast"]
        assert "original_accuracy" in contrast["contrast"]["COMM"]
