import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slidenet import datagen as D
from slidenet import geometry as G
from slidenet import simulator as S
from slidenet.geometry import MassProperties


def fake_record(index, final_pos=(1.0, 0.0), rot=90.0, shape_id="box-000", J=(3.0, 4.0), cloud=True):
    fam = G.family_of(shape_id)
    rng = np.random.default_rng(index)
    return D.SimRecord(
        index=index, shape_id=shape_id, family=fam, scale=(1.0, 1.0, 1.0),
        pointcloud_ref=f"shapes/{index:06d}.pc", J=J, r=(0.01, -0.02), mass=2.0, inertia_z=0.1,
        v0=np.array(J) / 2.0, omega0=0.3, final_pos=final_pos, total_rotation_deg=rot, seed=index,
        cloud=rng.normal(size=(8, 3)).astype("<f4").astype(float) if cloud else None,
    )


@pytest.fixture(scope="module")
def small_manifest():
    shapes = D.make_shapes("box:1,cylinder:3", seed=0)
    return D.generate(shapes, 6, D.GenConfig(n_points=64), seed=11)


@pytest.fixture(scope="module")
def body():
    mesh = G.box_mesh(0.3, 0.3, 0.3)
    return mesh, G.mass_properties(G.voxelize(mesh, 0.025))


@pytest.fixture(scope="module")
def mixed_manifest():
    ids = ["box-000"] + [f"cylinder-{i:03d}" for i in range(10)] + [f"tube-{i:03d}" for i in range(5)]
    return D.DatasetManifest([fake_record(i, shape_id=ids[i % len(ids)], cloud=False) for i in range(160)])


class TestSampleImpulse:
    def test_through_com_limit(self, body):
        mesh, mp = body
        rng = np.random.default_rng(0)
        for _ in range(50):
            imp = D.sample_impulse(mesh, mp, com_radius=0.0, rng=rng)
            _, om = S.apply_impulse(mp, imp)
            assert abs(om) < 1e-9

    def test_degenerate_speed_range(self):
        mesh = G.box_mesh(0.3, 0.3, 0.3)
        mp = MassProperties(100.0, 1.5, np.array([0, 0, 0.15]), 0.027)
        rng = np.random.default_rng(1)
        for _ in range(20):
            assert np.linalg.norm(D.sample_impulse(mesh, mp, (2, 2), rng=rng).J) == pytest.approx(200.0)

    def test_line_distance_within_radius(self, body):
        mesh, mp = body
        segs = D.silhouette_segments(mesh, mp.com[2])
        rng = np.random.default_rng(2)
        d = []
        for _ in range(10_000):
            imp = D.sample_impulse(mesh, mp, rng=rng, segments=segs)
            u = imp.J / np.linalg.norm(imp.J)
            d.append(abs(imp.r[0] * u[1] - imp.r[1] * u[0]))
        assert max(d) <= 0.1 + 1e-12

    def test_point_on_outline(self, body):
        mesh, mp = body
        imp = D.sample_impulse(mesh, mp, rng=3)
        assert np.max(np.abs(imp.r)) == pytest.approx(0.15, abs=1e-9)

    def test_bad_speed_range(self, body):
        with pytest.raises(ValueError):
            D.sample_impulse(*body, speed_range=(0, 1), rng=0)

    def test_no_intersection(self, body):
        mesh, mp = body
        with pytest.raises(D.DatasetError):
            D.sample_impulse(mesh, mp, com_radius=5.0, rng=0, max_tries=3,
                             segments=np.array([[[10.0, 10.0], [10.1, 10.0]]]))


class TestGenerate:
    def test_deterministic(self, small_manifest):
        again = D.generate(D.make_shapes("box:1,cylinder:3", seed=0), 6, D.GenConfig(n_points=64), seed=11)
        assert D.manifests_equal(small_manifest, again)

    def test_other_seed_differs(self, small_manifest):
        other = D.generate(D.make_shapes("box:1,cylinder:3", seed=0), 6, D.GenConfig(n_points=64), seed=12)
        assert not D.manifests_equal(small_manifest, other)

    def test_worker_pool_matches_serial(self):
        shapes = D.make_shapes("box:1,tube:1", seed=0)
        cfg = D.GenConfig(n_points=32)
        assert D.manifests_equal(D.generate(shapes, 3, cfg, seed=4), D.generate(shapes, 3, cfg, seed=4, jobs=2))

    def test_records_consistent_with_impulse(self, small_manifest):
        for rec in small_manifest.records:
            v, om = S.apply_impulse(MassProperties(rec.mass, rec.inertia_z), S.ImpulseSpec(rec.J, rec.r))
            assert np.array_equal(v, rec.v0) and om == rec.omega0
            assert all(np.isfinite(x) for x in [*rec.J, *rec.r, *rec.final_pos, rec.total_rotation_deg])

    def test_box_masses_within_scale_bounds(self, small_manifest):
        v0 = 0.3 ** 3 * 300
        for rec in small_manifest.records:
            if rec.family == "box":
                assert v0 * 0.5 ** 3 * 0.97 <= rec.mass <= v0 * 1.5 ** 3 * 1.03

    def test_per_shape_counts(self):
        shapes = D.make_shapes("box:1,cylinder:1", seed=0)
        m = D.generate(shapes, [3, 1], D.GenConfig(n_points=16), seed=0)
        assert [r.index for r in m.records] == [0, 1, 2, 3]
        assert [r.family for r in m.records] == ["box"] * 3 + ["cylinder"]
        with pytest.raises(ValueError):
            D.generate(shapes, [3], seed=0)

    def test_error_context(self):
        flat = G.box_mesh(0.3, 0.3, 0.3)
        cfg = D.GenConfig(n_points=16, speed_range=(0.0, 1.0))
        with pytest.raises(D.DatasetError, match="record 0"):
            D.generate([flat], 1, cfg)

    def test_make_shapes(self, tmp_path):
        shapes = D.make_shapes("cylinder:3,tube", seed=1)
        assert [s.shape_id for s in shapes] == ["cylinder-000", "cylinder-001", "cylinder-002", "tube-000"]
        G.save_mesh(G.box_mesh(0.2, 0.2, 0.2), tmp_path / "crate.obj")
        assert D.make_shapes(str(tmp_path / "crate.obj"))[0].shape_id == "mesh-crate"
        with pytest.raises(ValueError):
            D.make_shapes("pyramid:2")


class TestFilterOutliers:
    def test_boundaries(self):
        recs = [fake_record(0, (7.01, 0)), fake_record(1, (5, 0), 2999.0), fake_record(2, (0, 7.0), 3000.0),
                fake_record(3, (1, 1), 3001.0)]
        kept = D.filter_outliers(D.DatasetManifest(recs))
        assert [r.index for r in kept.records] == [1, 2]

    @given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 4000)), max_size=30))
    def test_matches_linear_scan(self, rows):
        recs = [fake_record(i, (d, 0.0), th, cloud=False) for i, (d, th) in enumerate(rows)]
        kept = D.filter_outliers(D.DatasetManifest(recs))
        removed = sum(1 for d, th in rows if d > 7.0 or th > 3000.0)
        assert len(recs) - len(kept.records) == removed

    def test_splits_follow(self):
        recs = [fake_record(0, (8, 0)), fake_record(1)]
        m = D.filter_outliers(D.DatasetManifest(recs, splits={"train": [0, 1], "val": [], "test": []}))
        assert m.splits["train"] == [1]


class TestImpulseCoords:
    def test_quarter_turn(self):
        rec = fake_record(0, final_pos=(0.0, 3.0), J=(0.0, 5.0))
        out = D.to_impulse_coords(rec)
        assert np.array_equal(out.J, [5.0, 0.0])
        assert np.allclose(out.final_pos, [3.0, 0.0], atol=1e-15)

    def test_identity_on_x_axis(self):
        rec = fake_record(0, J=(2.0, 0.0))
        out = D.to_impulse_coords(rec)
        assert out.same_as(dataclass_frame(rec, "impulse")) and np.array_equal(out.cloud, rec.cloud)

    def test_zero_impulse(self):
        with pytest.raises(D.DatasetError):
            D.to_impulse_coords(fake_record(0, J=(0.0, 0.0)))

    @given(st.floats(-np.pi, np.pi), st.floats(0.1, 20), st.floats(0, 6), st.floats(-np.pi, np.pi))
    def test_isometry(self, phi, jn, dist, psi):
        J = (jn * math.cos(phi), jn * math.sin(phi))
        rec = fake_record(0, final_pos=(dist * math.cos(psi), dist * math.sin(psi)), J=J)
        out = D.to_impulse_coords(rec)
        assert out.J[1] == 0.0 and out.J[0] > 0
        assert np.linalg.norm(out.final_pos) == pytest.approx(np.linalg.norm(rec.final_pos), abs=1e-12)
        assert out.total_rotation_deg == rec.total_rotation_deg
        assert np.allclose(np.linalg.norm(out.cloud[:, :2], axis=1), np.linalg.norm(rec.cloud[:, :2], axis=1))
        assert np.array_equal(out.cloud[:, 2], rec.cloud[:, 2])
        # relative geometry of impulse, lever arm and displacement is preserved
        def cross(a, b):
            return a[0] * b[1] - a[1] * b[0]
        assert cross(out.J, out.r) == pytest.approx(cross(rec.J, rec.r), rel=1e-9, abs=1e-12)


def dataclass_frame(rec, frame):
    return dataclasses.replace(rec, frame=frame)


class TestSplit:
    def test_by_sim_counts(self):
        m = D.DatasetManifest([fake_record(i, cloud=False) for i in range(100)])
        s = D.split(m, "by_sim", (0.8, 0.2), seed=0)
        assert (len(s.splits["train"]), len(s.splits["test"])) == (80, 20)

    def test_exhaustive_and_disjoint(self, mixed_manifest):
        for mode in ("by_sim", "by_object"):
            s = D.split(mixed_manifest, mode, (0.8, 0.2), seed=3, val_fraction=0.2)
            parts = [set(s.splits[k]) for k in ("train", "val", "test")]
            assert sum(map(len, parts)) == 160
            assert set.union(*parts) == set(range(160))

    def test_by_object_no_leak(self, mixed_manifest):
        s = D.split(mixed_manifest, "by_object", (0.8, 0.2), seed=5, val_fraction=0.2)
        D.assert_no_leak(s)
        assert not (s.shape_ids("train") & s.shape_ids("test"))
        assert "box-000" in s.shape_ids("train")
        assert s.shape_ids("val")

    def test_leave_category_out(self, mixed_manifest):
        s = D.split(mixed_manifest, "leave_category_out", (0.8, 0.2), seed=0, category="cylinder", val_fraction=0.2)
        assert {r.family for r in s.subset("test")} == {"cylinder"}
        assert not any(r.family == "cylinder" for r in s.subset("train") + s.subset("val"))
        D.assert_no_leak(s)

    def test_single_shape_remainder_validates_by_sim(self):
        ids = ["box-000"] + [f"cylinder-{i:03d}" for i in range(4)]
        m = D.DatasetManifest([fake_record(i, shape_id=ids[i % 5], cloud=False) for i in range(50)])
        s = D.split(m, "leave_category_out", (0.8, 0.2), seed=0, category="cylinder", val_fraction=0.2)
        assert s.config["split"]["val_by_sim"]
        assert s.shape_ids("train") == s.shape_ids("val") == {"box-000"}
        assert len(s.splits["val"]) == 2 and len(s.splits["train"]) == 8
        D.assert_no_leak(s)

    def test_errors(self, mixed_manifest):
        with pytest.raises(D.DatasetError):
            D.split(mixed_manifest, "leave_category_out", category="sphere")
        with pytest.raises(ValueError):
            D.split(mixed_manifest, "by_sim", (0.8, 0.3))
        with pytest.raises(ValueError):
            D.split(mixed_manifest, "random")

    def test_leak_detected(self):
        m = D.DatasetManifest([fake_record(0), fake_record(1)], splits={"train": [0], "val": [], "test": [1]})
        with pytest.raises(D.DatasetError):
            D.assert_no_leak(m)


class TestPersistence:
    def test_round_trip(self, small_manifest, tmp_path):
        m = D.split(small_manifest, "by_object", (0.8, 0.2), seed=0)
        D.save(m, tmp_path / "ds")
        back = D.load(tmp_path / "ds")
        assert D.manifests_equal(m, back)
        assert D.GenConfig.from_dict(back.config["generation"]) == D.GenConfig.from_dict(m.config["generation"])

    def test_jsonl_lines(self, tmp_path):
        D.save(D.DatasetManifest([fake_record(i) for i in range(10)]), tmp_path)
        lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
        assert len(lines) == 10
        assert json.loads(lines[3])["index"] == 3

    def test_missing_pointcloud(self, tmp_path):
        D.save(D.DatasetManifest([fake_record(i) for i in range(3)]), tmp_path)
        (tmp_path / "shapes" / "000001.pc").unlink()
        with pytest.raises(D.DatasetError, match="000001.pc"):
            D.load(tmp_path)

    def test_schema_mismatch(self, tmp_path):
        D.save(D.DatasetManifest([fake_record(0)]), tmp_path)
        cfg = json.loads((tmp_path / "config.json").read_text())
        cfg["schema_version"] = 99
        (tmp_path / "config.json").write_text(json.dumps(cfg))
        with pytest.raises(D.DatasetError, match="schema"):
            D.load(tmp_path)

    def test_floats_bit_exact(self, tmp_path):
        rec = fake_record(0, final_pos=(0.1 + 0.2, 1 / 3), rot=math.pi * 100)
        D.save(D.DatasetManifest([rec]), tmp_path)
        back = D.load(tmp_path).records[0]
        assert back.final_pos.tolist() == rec.final_pos.tolist()
        assert back.total_rotation_deg == rec.total_rotation_deg
