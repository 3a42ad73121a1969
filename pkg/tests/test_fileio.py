"""Weight archives, CSV formats, PPM heatmaps, and manifests."""

import json

import numpy as np
import pytest

from conftest import make_toy_net
from ticnn.fileio import (
    VIRIDIS_ANCHORS,
    WeightFormatError,
    assign_weights,
    config_digest,
    fmt_float,
    joint_bounds,
    load_weights,
    read_curve_csv,
    read_grid_csv,
    read_judgments_csv,
    read_ppm_size,
    save_weights,
    value_to_rgb,
    write_curve_csv,
    write_grid_csv,
    write_heatmap,
    write_judgments_csv,
    write_manifest,
)
from ticnn.nn import init_parameters
from ticnn.perceptual import ResponseCurve


class TestWeightArchive:
    def test_round_trip_at_float32_precision(self, tmp_path, rng):
        arrays = {
            "a.weight": rng.normal(size=(3, 2, 2, 2)),
            "a.bias": rng.normal(size=3),
        }
        path = tmp_path / "w.bin"
        save_weights(path, arrays)
        loaded = load_weights(path)
        assert set(loaded) == set(arrays)
        for name, value in arrays.items():
            np.testing.assert_array_equal(loaded[name], value.astype(np.float32))
            assert loaded[name].dtype == np.float64

    def test_store_round_trip_into_fresh_store(self, tmp_path):
        spec, _, store = make_toy_net(channels=(3,), input_size=8, seed=4)
        path = tmp_path / "w.bin"
        save_weights(path, store)
        _, _, fresh = make_toy_net(channels=(3,), input_size=8, seed=9)
        assign_weights(fresh, load_weights(path))
        for p in store:
            np.testing.assert_array_equal(
                fresh[p.name].value, p.value.astype(np.float32).astype(np.float64)
            )

    def test_empty_archive_is_valid(self, tmp_path):
        path = tmp_path / "w.bin"
        save_weights(path, {})
        assert load_weights(path) == {}

    def test_name_mismatch_lists_missing_and_extra(self, tmp_path):
        spec, _, store = make_toy_net(channels=(3,), input_size=8)
        path = tmp_path / "w.bin"
        save_weights(path, {"other.weight": np.zeros(2)})
        with pytest.raises(WeightFormatError, match="missing.*stage0.*extra.*other"):
            assign_weights(store, load_weights(path))

    def test_shape_mismatch_names_parameter(self, tmp_path):
        spec, _, store = make_toy_net(channels=(3,), input_size=8)
        wrong = {p.name: p.value for p in store}
        wrong["head.bias"] = np.zeros(99)
        path = tmp_path / "w.bin"
        save_weights(path, wrong)
        with pytest.raises(WeightFormatError, match="head.bias"):
            assign_weights(store, load_weights(path))

    def test_bad_magic_and_truncation(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"NOTME1" + b"\x00" * 8)
        with pytest.raises(WeightFormatError, match="magic"):
            load_weights(bad)
        spec, _, store = make_toy_net(channels=(3,), input_size=8)
        full = tmp_path / "w.bin"
        save_weights(full, store)
        cut = tmp_path / "cut.bin"
        cut.write_bytes(full.read_bytes()[:-7])
        with pytest.raises(WeightFormatError, match="truncated"):
            load_weights(cut)


class TestGridCsv:
    def test_round_trip_with_negative_shifts(self, tmp_path, rng):
        values = rng.normal(size=(3, 5))
        sx, sy = (-4, -2, 0, 2, 4), (-1, 0, 1)
        path = tmp_path / "grid.csv"
        write_grid_csv(path, values, sx, sy)
        back, rx, ry = read_grid_csv(path)
        assert (rx, ry) == (sx, sy)
        np.testing.assert_allclose(back, values, rtol=1e-11)

    def test_header_and_line_endings(self, tmp_path):
        path = tmp_path / "grid.csv"
        write_grid_csv(path, [[1.0, 0.25]], (0, 1), (0,))
        raw = path.read_bytes()
        assert raw == b"dy\\dx,0,1\n0,1,0.25\n"

    def test_shape_mismatch_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="match"):
            write_grid_csv(tmp_path / "g.csv", np.zeros((2, 2)), (0, 1, 2), (0, 1))

    def test_non_grid_file_rejected(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="displacement-grid"):
            read_grid_csv(path)


class TestCurveAndJudgmentCsv:
    def test_curve_round_trip(self, tmp_path):
        curve = ResponseCurve(
            np.array([0.0, 0.07, 0.14]), np.array([0.0, 1.5e-3, 0.25]), "origdist"
        )
        path = tmp_path / "curve.csv"
        write_curve_csv(path, curve)
        levels, values = read_curve_csv(path)
        np.testing.assert_allclose(levels, curve.levels, rtol=1e-11)
        np.testing.assert_allclose(values, curve.values, rtol=1e-11)
        assert path.read_text().startswith("level,value\n")

    def test_curve_header_required(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("lvl,val\n0,0\n")
        with pytest.raises(ValueError, match="response-curve"):
            read_curve_csv(path)

    def test_judgments_round_trip(self, tmp_path):
        rows = np.array([[0, 1, 2, 3, 1], [1, 2, 4, 5, 0]], dtype=np.int64)
        path = tmp_path / "j.csv"
        write_judgments_csv(path, rows)
        np.testing.assert_array_equal(read_judgments_csv(path), rows)
        assert path.read_text().splitlines()[0] == "i,j,k,l,choice"

    def test_judgments_header_required(self, tmp_path):
        path = tmp_path / "j.csv"
        path.write_text("i,j,k,l\n0,1,2,3\n")
        with pytest.raises(ValueError, match="judgments"):
            read_judgments_csv(path)


class TestHeatmap:
    def test_single_cell_renders_ramp_maximum(self, tmp_path):
        path = tmp_path / "one.ppm"
        write_heatmap(np.array([[0.37]]), path)
        data = path.read_bytes()
        assert data.startswith(b"P6\n1 1\n255\n")
        assert data[-3:] == bytes(VIRIDIS_ANCHORS[-1])

    def test_constant_grid_is_uniform_at_maximum(self, tmp_path):
        path = tmp_path / "flat.ppm"
        write_heatmap(np.full((2, 3), 0.5), path)
        body = path.read_bytes().split(b"255\n", 1)[1]
        assert body == bytes(VIRIDIS_ANCHORS[-1]) * 6

    def test_sidecar_reparses_to_raw_values(self, tmp_path, rng):
        values = rng.normal(size=(3, 4))
        path = tmp_path / "map.ppm"
        sidecar = write_heatmap(values, path, cell_size=3)
        assert sidecar == tmp_path / "map.values.csv"
        rows = [
            [float(v) for v in line.split(",")]
            for line in sidecar.read_text().splitlines()
        ]
        np.testing.assert_allclose(np.array(rows), values, rtol=1e-9)

    def test_cell_size_scales_canvas(self, tmp_path):
        path = tmp_path / "big.ppm"
        write_heatmap(np.zeros((2, 5)), path, cell_size=16)
        assert read_ppm_size(path) == (80, 32)

    def test_joint_scaling_requires_bounds(self, tmp_path):
        with pytest.raises(ValueError, match="bounds"):
            write_heatmap(np.zeros((2, 2)), tmp_path / "x.ppm", scaling="joint")

    def test_joint_bounds_span_the_family(self):
        lo, hi = joint_bounds([np.array([[0.2, 0.5]]), np.array([[-1.0, 0.3]])])
        assert (lo, hi) == (-1.0, 0.5)
        with pytest.raises(ValueError, match="at least one"):
            joint_bounds([])

    def test_joint_scaling_pins_colors_across_files(self, tmp_path):
        a, b = np.array([[0.0, 1.0]]), np.array([[0.0, 0.5]])
        bounds = joint_bounds([a, b])
        pa = tmp_path / "a.ppm"
        pb = tmp_path / "b.ppm"
        write_heatmap(a, pa, scaling="joint", bounds=bounds)
        write_heatmap(b, pb, scaling="joint", bounds=bounds)
        pix_a = pa.read_bytes().split(b"255\n", 1)[1]
        pix_b = pb.read_bytes().split(b"255\n", 1)[1]
        assert pix_a[:3] == pix_b[:3]
        assert pix_a[3:6] != pix_b[3:6]

    def test_unknown_scaling_and_bad_grid(self, tmp_path):
        with pytest.raises(ValueError, match="scaling"):
            write_heatmap(np.zeros((2, 2)), tmp_path / "x.ppm", scaling="global")
        with pytest.raises(ValueError, match="2-D"):
            write_heatmap(np.zeros(4), tmp_path / "x.ppm")

    def test_value_to_rgb_clips_and_hits_anchors(self):
        assert value_to_rgb(0.0) == VIRIDIS_ANCHORS[0]
        assert value_to_rgb(1.0) == VIRIDIS_ANCHORS[-1]
        assert value_to_rgb(-3.0) == VIRIDIS_ANCHORS[0]
        assert value_to_rgb(7.0) == VIRIDIS_ANCHORS[-1]

    def test_read_ppm_size_validates(self, tmp_path):
        path = tmp_path / "no.ppm"
        path.write_bytes(b"P5\n2 2\n255\n" + b"\x00" * 4)
        with pytest.raises(ValueError, match="PPM"):
            read_ppm_size(path)


class TestManifest:
    def test_digest_is_key_order_invariant(self):
        a = {"lr": 0.1, "seed": 3, "nested": {"x": 1, "y": 2}}
        b = {"nested": {"y": 2, "x": 1}, "seed": 3, "lr": 0.1}
        assert config_digest(a) == config_digest(b)
        assert config_digest(a) != config_digest({**a, "seed": 4})

    def test_manifest_is_deterministic_and_timestamp_free(self, tmp_path):
        config = {"seed": 5, "epochs": 2}
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        write_manifest(p1, "train", config)
        write_manifest(p2, "train", config)
        assert p1.read_bytes() == p2.read_bytes()
        body = json.loads(p1.read_text())
        assert body["experiment"] == "train"
        assert body["seed"] == 5
        assert body["config_sha256"] == config_digest(config)
        assert "time" not in p1.read_text().lower()


def test_fmt_float_is_locale_independent():
    assert fmt_float(0.25) == "0.25"
    assert fmt_float(1e-9) == "1e-09"
    assert fmt_float(2.0) == "2"
