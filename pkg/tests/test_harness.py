import json

import numpy as np
import pytest

from transfermetrics.data import CheckpointEntry, CheckpointManifest, SubsampleSpec, load_tensor, save_tensor
from transfermetrics.exceptions import ValidationError
from transfermetrics.harness import (
    MetricConfig,
    SyntheticSpec,
    evaluate_ranking,
    format_evaluation_table,
    generate_synthetic_benchmark,
    pair_key,
    robust_std,
    run_metrics,
    select_hparams_via_linear_valid,
    std_ratio,
    std_ratio_csv,
)
from transfermetrics.numerics import kendall_tau

SMALL = dict(num_checkpoints=4, n_train=200, n_test=400, dim=8, num_classes=3, num_sources=4)


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    manifest, errors = generate_synthetic_benchmark(SyntheticSpec(seed=1, **SMALL), out)
    return out, manifest, errors


def tiny_manifest(tmp_path, with_probs=True, n=12):
    rng = np.random.default_rng(0)
    y = np.arange(n) % 2
    save_tensor(y.astype(np.int32), tmp_path / "y.ptrn")
    entries = []
    for c in range(2):
        save_tensor(rng.standard_normal((n, 3)) + y[:, None] * (c + 1), tmp_path / f"f{c}.ptrn")
        probs = None
        if with_probs:
            save_tensor(rng.dirichlet(np.ones(3), n), tmp_path / f"p{c}.ptrn")
            probs = f"p{c}.ptrn"
        entries.append(CheckpointEntry(f"c{c}", f"f{c}.ptrn", "y.ptrn", probs))
    m = CheckpointManifest(entries, task="tiny", root=str(tmp_path))
    m.save(tmp_path / "m.json")
    return m


class TestMetricConfig:
    def test_default_grids(self):
        cfg = MetricConfig()
        assert cfg.beta_factors == (0.1, 1.0, 10.0)
        assert cfg.sigma0_factors == (1.0, 10.0, 100.0, 1000.0)
        assert (cfg.fix_beta_factor, cfg.fix_sigma0_factor) == (10.0, 100.0)
        assert cfg.grid[:2] == [(0.1, 1.0), (0.1, 10.0)] and len(cfg.grid) == 12

    def test_validation(self):
        with pytest.raises(ValidationError):
            MetricConfig(metrics=["nope"])
        with pytest.raises(ValidationError):
            MetricConfig(beta_factors=())
        with pytest.raises(ValidationError):
            MetricConfig(sigma0_factors=(1.0, -1.0))

    def test_round_trip(self):
        cfg = MetricConfig(metrics=["leep"], seed=4)
        assert MetricConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_workers_env(self, monkeypatch):
        monkeypatch.setenv("TRANSFERMETRICS_WORKERS", "3")
        assert MetricConfig().resolved_workers() == 3
        assert MetricConfig(workers=2).resolved_workers() == 2


class TestSelection:
    def test_single_entry(self):
        sel = select_hparams_via_linear_valid({"a": [3, 1, 2]}, [0.1, 0.2, 0.3])
        assert sel.key == "a" and not sel.degenerate

    def test_exact_match_selected(self):
        errs = [0.3, 0.1, 0.2, 0.4]
        sel = select_hparams_via_linear_valid({"a": [4, 3, 2, 1], "b": errs, "c": [0, 0, 0, 1]}, errs)
        assert sel.key == "b" and sel.taus["b"] == 1.0

    def test_ties_go_to_first(self):
        errs = [0.1, 0.2, 0.3]
        sel = select_hparams_via_linear_valid({"x": [1, 2, 3], "y": [5, 6, 7]}, errs)
        assert sel.key == "x" and sel.degenerate

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            select_hparams_via_linear_valid({"a": [1, 2], "b": [1, 2, 3]}, [0.1, 0.2, 0.3])


class TestDiagnostics:
    def test_robust_std_normal(self):
        x = np.random.default_rng(0).standard_normal(100_000) * 2.0
        assert abs(robust_std(x) - 2.0) < 0.05

    def test_std_ratio(self):
        assert std_ratio([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(0.5)
        assert np.isinf(std_ratio([1, 2, 3], [1, 1, 1]))


class TestRunMetrics:
    def test_leep_only_no_tau(self, tmp_path):
        m = tiny_manifest(tmp_path)
        report = run_metrics(m, SubsampleSpec(3, min_total=6, num_splits=1), MetricConfig(metrics=["leep"]))
        scores = report["splits"][0]["scores"]["leep"]
        assert list(scores) == ["c0", "c1"] and all(v is not None for v in scores.values())
        assert "evaluation" not in report

    def test_deterministic(self, tmp_path):
        m = tiny_manifest(tmp_path)
        spec = SubsampleSpec(4, min_total=8, num_splits=2)
        cfg = MetricConfig(metrics=["leep", "nleep", "pt_gauss_fix", "linear"], workers=2)
        a = run_metrics(m, spec, cfg, timestamp=False)
        b = run_metrics(m, spec, cfg, timestamp=False)
        assert json.dumps(a) == json.dumps(b)

    def test_timestamp_field(self, tmp_path):
        m = tiny_manifest(tmp_path)
        r = run_metrics(m, SubsampleSpec(3, min_total=6, num_splits=1), MetricConfig(metrics=["leep"]))
        assert list(r)[:2] == ["task", "generated_at"]

    def test_missing_probs_flagged(self, tmp_path):
        m = tiny_manifest(tmp_path, with_probs=False)
        r = run_metrics(m, SubsampleSpec(3, min_total=6, num_splits=1), MetricConfig(metrics=["leep", "pt_gauss_fix"]))
        split = r["splits"][0]
        assert split["flags"]["leep"] == {"c0": "unavailable", "c1": "unavailable"}
        assert all(v is not None for v in split["scores"]["pt_gauss_fix"].values())
        assert r["failures"] == []

    def test_failure_isolation(self, bench, tmp_path):
        out, manifest, _ = bench
        cfg = MetricConfig(metrics=["leep", "hscore", "pt_gauss_fix"])
        spec = SubsampleSpec(5, num_splits=1)
        clean = run_metrics(manifest, spec, cfg, timestamp=False)
        broken_id = manifest.ids[1]
        entries = []
        for e in manifest.entries:
            path = str(out / e.features_path)
            if e.id == broken_id:
                path = str(tmp_path / "corrupt.ptrn")
                (tmp_path / "corrupt.ptrn").write_bytes(b"PTRN\x07\x00\x00\x00")
            entries.append(CheckpointEntry(e.id, path, str(out / e.labels_path), str(out / e.source_probs_path), e.test_error))
        broken = run_metrics(CheckpointManifest(entries, task=manifest.task, num_classes=3), spec, cfg, timestamp=False)
        for name in cfg.metrics:
            a, b = clean["splits"][0]["scores"][name], broken["splits"][0]["scores"][name]
            assert b[broken_id] is None
            assert {k: v for k, v in a.items() if k != broken_id} == {k: v for k, v in b.items() if k != broken_id}
        assert {f["checkpoint"] for f in broken["failures"]} == {broken_id}

    def test_orientation(self, bench):
        _, manifest, _ = bench
        r = run_metrics(manifest, SubsampleSpec(5, num_splits=1), MetricConfig(metrics=["pt_dir", "linear_valid", "leep"]))
        split = r["splits"][0]
        assert all(v <= 0 for v in split["scores"]["pt_dir"].values())
        assert all(0 <= v <= 1 for v in split["scores"]["linear_valid"].values())
        assert all(v <= 0 for v in split["scores"]["leep"].values())

    def test_protocol_grids_and_top_up(self, tmp_path):
        m = tiny_manifest(tmp_path, n=40)
        r = run_metrics(m, SubsampleSpec(5), MetricConfig(metrics=["pt_gauss_grid", "linear"]))
        for split in r["splits"]:
            assert split["n"] == 20
            assert split["grids"]["beta"] == [2.0, 20.0, 200.0]
            np.testing.assert_allclose(split["grids"]["sigma0_sq"], [0.25, 2.5, 25.0, 250.0])
            assert list(split["grid_scores"]["pt_gauss_grid"]) == [pair_key(a, b) for a, b in MetricConfig().grid]
            assert split["chosen"]["pt_gauss_grid"]["key"] in split["grid_scores"]["pt_gauss_grid"]
            assert set(split["std_ratio"]) == set(split["grid_scores"]["pt_gauss_grid"])
        assert "linear_shared_choice" in r

    def test_selection_uses_grid_scores(self, bench):
        _, manifest, _ = bench
        r = run_metrics(manifest, SubsampleSpec(5, num_splits=2), MetricConfig(metrics=["pt_gauss_grid"]))
        for split in r["splits"]:
            key = split["chosen"]["pt_gauss_grid"]["key"]
            assert split["scores"]["pt_gauss_grid"] == split["grid_scores"]["pt_gauss_grid"][key]

    def test_evaluation_embedded(self, bench):
        _, manifest, _ = bench
        r = run_metrics(manifest, SubsampleSpec(5, num_splits=2), MetricConfig(metrics=["hscore", "pt_gauss_fix"]))
        ev = r["evaluation"]["metrics"]
        assert set(ev) == {"hscore", "pt_gauss_fix"}
        assert all(-1 <= t <= 1 for m in ev.values() for t in m["tau_per_split"])

    def test_std_ratio_csv(self, bench):
        _, manifest, _ = bench
        r = run_metrics(manifest, SubsampleSpec(5, num_splits=1), MetricConfig(metrics=["pt_gauss_grid"]))
        lines = std_ratio_csv(r).strip().splitlines()
        assert lines[0] == "split,hparams,std_ratio" and len(lines) == 13


def fake_report(columns, ids):
    return {
        "checkpoints": ids,
        "config": {"metrics": list(columns[0])},
        "splits": [{"split": s, "scores": cols} for s, cols in enumerate(columns)],
    }


class TestEvaluateRanking:
    ids = ["a", "b", "c", "d"]
    errors = [0.1, 0.2, 0.3, 0.4]

    def manifest(self, errors=None):
        errs = self.errors if errors is None else errors
        return CheckpointManifest([CheckpointEntry(i, "f", "y", test_error=e) for i, e in zip(self.ids, errs)])

    def test_identical_to_negative_error(self):
        col = {i: -e for i, e in zip(self.ids, self.errors)}
        ev = evaluate_ranking(fake_report([{"m": col}], self.ids), self.manifest())
        assert ev["metrics"]["m"]["tau_per_split"] == [1.0]

    def test_constant_metric(self):
        ev = evaluate_ranking(fake_report([{"m": dict.fromkeys(self.ids, 1.0)}], self.ids), self.manifest())
        assert ev["metrics"]["m"]["mean"] == 0.0

    def test_average_over_splits(self):
        good = {i: -e for i, e in zip(self.ids, self.errors)}
        flat = dict.fromkeys(self.ids, 0.0)
        ev = evaluate_ranking(fake_report([{"m": c} for c in (good, flat, good, flat, good)], self.ids), self.manifest())
        assert ev["metrics"]["m"]["mean"] == pytest.approx(0.6)
        assert ev["metrics"]["m"]["se"] == pytest.approx(np.std([1, 0, 1, 0, 1], ddof=1) / np.sqrt(5))

    def test_missing_errors_listed(self):
        m = CheckpointManifest([CheckpointEntry(i, "f", "y") for i in self.ids])
        with pytest.raises(ValidationError, match="'a'"):
            evaluate_ranking(fake_report([{"m": dict.fromkeys(self.ids, 1.0)}], self.ids), m)

    def test_table_has_row_per_metric(self):
        col = {i: -e for i, e in zip(self.ids, self.errors)}
        ev = evaluate_ranking(fake_report([{"m": col, "other": col}], self.ids), self.manifest())
        lines = format_evaluation_table(ev).splitlines()
        assert lines[0].split()[0] == "metric" and len(lines) == 4
        assert len({len(line) for line in lines}) == 1


class TestSynthetic:
    def test_files_and_manifest(self, bench):
        out, manifest, errors = bench
        assert (out / "manifest.json").exists()
        loaded = CheckpointManifest.load(out / "manifest.json")
        assert loaded.test_errors() == errors
        X = load_tensor(out / manifest.entries[0].features_path)
        P = load_tensor(out / manifest.entries[0].source_probs_path)
        assert X.shape == (200, 8) and P.shape == (200, 4)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-5)

    def test_regeneration_identical(self, bench, tmp_path):
        out, manifest, _ = bench
        generate_synthetic_benchmark(SyntheticSpec(seed=1, **SMALL), tmp_path)
        for e in manifest.entries:
            assert (out / e.features_path).read_bytes() == (tmp_path / e.features_path).read_bytes()

    def test_zero_noise_near_perfect(self, tmp_path):
        spec = SyntheticSpec(num_checkpoints=2, noise_levels=[0.0, 0.5], n_train=500, n_test=2000, dim=64, num_classes=10)
        _, errors = generate_synthetic_benchmark(spec, tmp_path)
        assert errors["ckpt_0"] <= 0.02

    def test_errors_monotone_in_noise(self, tmp_path):
        monotone = 0
        for seed in range(10):
            spec = SyntheticSpec(num_checkpoints=4, noise_levels=[0.2, 0.35, 0.5, 0.65], n_train=300, n_test=2000, dim=16, num_classes=5, seed=seed)
            _, errors = generate_synthetic_benchmark(spec, tmp_path / str(seed))
            vals = list(errors.values())
            monotone += all(b >= a for a, b in zip(vals, vals[1:]))
        assert monotone >= 9

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(num_checkpoints=3, noise_levels=[0.1, 0.1, 0.2])
        with pytest.raises(ValidationError):
            SyntheticSpec(num_checkpoints=2, noise_levels=[0.1, 1.5])

    @pytest.mark.xfail(
        reason="LINEAR-VALID errors on 10 held-out examples are too coarse to pick the best grid pair",
        strict=False,
    )
    def test_selection_close_to_grid_oracle(self, tmp_path):
        manifest, errors = generate_synthetic_benchmark(SyntheticSpec(seed=0), tmp_path)
        neg = [-errors[c] for c in manifest.ids]
        r = run_metrics(manifest, SubsampleSpec(2), MetricConfig(metrics=["pt_gauss_grid"]))
        close = 0
        for split in r["splits"]:
            grid = split["grid_scores"]["pt_gauss_grid"]
            taus = {k: kendall_tau([v[c] for c in manifest.ids], neg) for k, v in grid.items()}
            close += taus[split["chosen"]["pt_gauss_grid"]["key"]] >= max(taus.values()) - 0.1
        assert close >= 4
