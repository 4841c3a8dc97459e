import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from helpers import tiny_train_config
from slidenet import datagen
from slidenet import trainer as T
from slidenet.neural.checkpoint import load_checkpoint


def split_records(manifest, mode="by_sim", seed=0):
    m = datagen.split(manifest, mode, (0.8, 0.2), seed=seed, val_fraction=0.2)
    return m.subset("train"), m.subset("val"), m.subset("test")


def boxes(manifest):
    return [r for r in manifest.records if r.family == "box"]


class TestConfig:
    def test_defaults(self):
        cfg = T.TrainConfig()
        assert (cfg.epochs, cfg.batch_size, cfg.val_every) == (200, 128, 5)

    @pytest.mark.parametrize("kw", [{"epochs": 0}, {"batch_size": 0}, {"val_every": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            T.TrainConfig(**kw)

    def test_round_trip(self):
        cfg = T.desk_config(epochs=3, model={"head_velocity": True})
        back = T.TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back == cfg and back.model.head_velocity


class TestTrain:
    def test_one_epoch_one_history_row(self, small_manifest, tmp_path):
        recs = boxes(small_manifest)
        res = T.train(recs[:10], recs[10:14], tiny_train_config(epochs=1, batch_size=4), tmp_path)
        assert len(res.history) == 1 and res.history[0]["epoch"] == 1
        assert (tmp_path / "best.ckpt").exists() and (tmp_path / "history.csv").exists()

    def test_seeded_runs_identical(self, small_manifest, tmp_path):
        tr, va, _ = split_records(small_manifest)
        cfg = tiny_train_config(epochs=2)
        a = T.train(tr[:64], va[:16], cfg, tmp_path / "a")
        b = T.train(tr[:64], va[:16], cfg, tmp_path / "b")
        assert a.history == b.history
        assert (tmp_path / "a/best.ckpt").read_bytes() == (tmp_path / "b/best.ckpt").read_bytes()
        assert (tmp_path / "a/history.csv").read_bytes() == (tmp_path / "b/history.csv").read_bytes()

    def test_learns_on_boxes(self, small_manifest):
        recs = boxes(small_manifest)
        assert len(recs) == 200
        res = T.train(recs[:160], recs[160:], tiny_train_config(epochs=15, val_every=5))
        assert res.history[-1]["train_total"] < res.history[0]["train_total"]

    def test_best_checkpoint_reproduces_best_val(self, small_manifest, tmp_path):
        tr, va, _ = split_records(small_manifest)
        res = T.train(tr, va, tiny_train_config(epochs=4, val_every=2), tmp_path)
        model, meta = load_checkpoint(tmp_path / "best.ckpt")
        assert meta["best_val"] == res.best_val
        assert T.mean_loss(model, T.build_arrays(va, model.cfg)) == res.best_val
        vals = [row["val_loss"] for row in res.history if "val_loss" in row]
        assert res.best_val == min(vals) and [row["epoch"] for row in res.history if "val_loss" in row] == [2, 4]

    def test_history_csv_columns(self, small_manifest, tmp_path):
        recs = boxes(small_manifest)
        T.train(recs[:20], recs[20:30], tiny_train_config(epochs=2), tmp_path)
        rows = list(csv.DictReader(open(tmp_path / "history.csv")))
        assert len(rows) == 2 and {"epoch", "lr", "train_total", "val_loss"} <= set(rows[0])

    def test_empty_sets_rejected(self, small_manifest):
        with pytest.raises(ValueError):
            T.train([], small_manifest.records[:3], tiny_train_config())

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning", "ignore:invalid value:RuntimeWarning")
    def test_divergence_reports_epoch(self, small_manifest):
        recs = boxes(small_manifest)
        with pytest.raises(T.TrainingError, match="epoch 1"):
            T.train(recs[:20], recs[20:30], tiny_train_config(epochs=1, lr_start=1e200, lr_end=1e200))

    def test_cloud_too_small(self, small_manifest):
        recs = boxes(small_manifest)
        cfg = tiny_train_config()
        cfg.model.n_points = 64
        with pytest.raises(ValueError, match="cloud has 32 points"):
            T.build_arrays(recs[:2], cfg.model)


class TestBinnedRotation:
    def test_examples(self):
        assert T.rel_rot_binned(70.0, 100.0) == 0.25
        assert T.rel_rot_binned(100.0, 100.0) == 0.0
        assert T.rel_rot_binned(15.0, 0.0) == 0.5

    def test_bad_bin(self):
        with pytest.raises(ValueError):
            T.rel_rot_binned(1.0, 2.0, b=0.0)

    @given(st.floats(0, 5000), st.floats(0, 5000))
    def test_denominator_floor(self, pred, true):
        e = T.rel_rot_binned(pred, true)
        assert e >= 0 and e <= abs(pred - true) / 30.0 + 1e-12


def fake_target(rng, n=40):
    return {"final_pos": rng.normal(size=(n, 2)) * 2, "total_rotation_deg": rng.uniform(0, 600, n),
            "index": np.arange(n)}


class TestMetrics:
    def test_perfect_predictor(self, tmp_path):
        t = fake_target(np.random.default_rng(0))
        rep = T.report_from_predictions({k: t[k] for k in ("final_pos", "total_rotation_deg")}, t)
        m = rep.means()
        assert m["mean_rel_pos"] == m["mean_rel_rot"] == m["mean_abs_rot_deg"] == 0.0
        assert rep.pos_curve[0] == rep.rot_curve[0] == 1.0
        T.curves_csv(rep, tmp_path / "c.csv")
        rows = list(csv.DictReader(open(tmp_path / "c.csv")))
        assert all(float(r["pos_fraction"]) == float(r["rot_fraction"]) == 1.0 for r in rows)

    def test_zero_predictor(self):
        t = fake_target(np.random.default_rng(1))
        pred = {"final_pos": np.zeros_like(t["final_pos"]), "total_rotation_deg": np.zeros(40)}
        assert T.report_from_predictions(pred, t).means()["mean_rel_pos"] == pytest.approx(1.0)

    def test_means_equal_brute_force(self):
        rng = np.random.default_rng(2)
        t = fake_target(rng)
        pred = {"final_pos": t["final_pos"] + rng.normal(size=(40, 2)) * 0.3,
                "total_rotation_deg": t["total_rotation_deg"] + rng.normal(size=40) * 40}
        rep = T.report_from_predictions(pred, t)
        pos, rot = [], []
        for i in range(40):
            p, q = pred["final_pos"][i], t["final_pos"][i]
            pos.append(math.hypot(*(p - q)) / math.hypot(*q))
            th, th_hat = t["total_rotation_deg"][i], pred["total_rotation_deg"][i]
            rot.append((abs(th_hat - th) / 30) / max(1, math.ceil(abs(th) / 30)))
        m = rep.means()
        assert m["mean_rel_pos"] == pytest.approx(sum(pos) / 40, rel=1e-12)
        assert m["mean_rel_rot"] == pytest.approx(sum(rot) / 40, rel=1e-12)

    @given(hnp.arrays(np.float64, st.integers(1, 50), elements=st.floats(0, 3)))
    def test_curve_monotone_and_ends_right(self, errors):
        thr = np.arange(101, dtype=float)
        c = T.cumulative_curve(errors, thr)
        assert np.all(np.diff(c) >= 0) and c[-1] == pytest.approx(np.mean(errors <= 1.0))

    def test_curves_csv_layout(self, tmp_path):
        rng = np.random.default_rng(3)
        t = fake_target(rng)
        pred = {"final_pos": t["final_pos"] * 1.3, "total_rotation_deg": t["total_rotation_deg"] * 0.5}
        rep = T.report_from_predictions(pred, t)
        T.curves_csv(rep, tmp_path / "c.csv")
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows[0] == ["threshold_pct", "pos_fraction", "rot_fraction"] and len(rows) == 102
        pos = [float(r[1]) for r in rows[1:]]
        assert pos == sorted(pos) and pos[-1] == np.mean(rep.rel_pos <= 1.0)

    def test_empty_report(self, tmp_path):
        with pytest.raises(ValueError):
            T.evaluate("unused.ckpt", [])


class TestProtocols:
    def test_split_mapping(self, small_manifest):
        m = T.prepare_split(small_manifest, "impulse_gen")
        assert m.config["split"]["mode"] == "by_sim"
        assert T.prepare_split(small_manifest, "obj_gen").config["split"]["mode"] == "by_object"

    def test_leave_one_out_needs_category(self, small_manifest):
        with pytest.raises(ValueError):
            T.prepare_split(small_manifest, "leave_one_out")

    def test_unknown_protocol_and_variant(self, small_manifest, tmp_path):
        with pytest.raises(ValueError):
            T.prepare_split(small_manifest, "transfer")
        with pytest.raises(ValueError):
            T.run_protocol("ablation", small_manifest, tiny_train_config(), tmp_path, variant="resnet")
        with pytest.raises(ValueError):
            T.run_protocol("ablation", small_manifest, tiny_train_config(), tmp_path)

    def test_variant_names_round_trip(self):
        cfg = tiny_train_config()
        for v in T.ABLATIONS:
            assert T.variant_name(T.variant_config(cfg, v).model) == v

    def test_leave_one_out_cylinder(self, small_manifest, tmp_path):
        out, metrics = T.run_protocol("leave_one_out", small_manifest, tiny_train_config(epochs=1), tmp_path,
                                      category="cylinder")
        snap = json.loads((out / "config.json").read_text())
        assert not [s for s in snap["train_shape_ids"] if s.startswith("cylinder")]
        assert all(s.startswith("cylinder") for s in snap["test_shape_ids"])
        assert metrics["protocol"] == "leave_one_out"

    def test_ablation_provenance(self, small_manifest, tmp_path):
        out, metrics = T.run_protocol("ablation", small_manifest, tiny_train_config(epochs=1), tmp_path,
                                      variant="plain_mlp")
        assert metrics["variant"] == "plain_mlp"
        assert json.loads((out / "config.json").read_text())["variant"] == "plain_mlp"
        assert json.loads((out / "metrics.json").read_text())["variant"] == "plain_mlp"
        assert {p.name for p in out.iterdir()} >= {"config.json", "history.csv", "best.ckpt", "metrics.json",
                                                    "curves.csv", "splits.json"}

    def test_obj_gen_no_leak(self, small_manifest, tmp_path):
        out, _ = T.run_protocol("obj_gen", small_manifest, tiny_train_config(epochs=1), tmp_path)
        snap = json.loads((out / "config.json").read_text())
        assert not set(snap["train_shape_ids"]) & set(snap["test_shape_ids"])
        splits = json.loads((out / "splits.json").read_text())
        assert set(splits) == {"train", "val", "test"}

    def test_evaluate_from_checkpoint_matches_run(self, small_manifest, tmp_path):
        out, metrics = T.run_protocol("impulse_gen", small_manifest, tiny_train_config(epochs=1), tmp_path)
        splits = json.loads((out / "splits.json").read_text())
        lookup = small_manifest.by_index()
        rep = T.evaluate(out / "best.ckpt", [lookup[i] for i in splits["test"]])
        assert rep.means()["mean_rel_pos"] == metrics["mean_rel_pos"]
