import json

import numpy as np
import pytest
from PIL import Image

from ir2day import data


def write_manifest(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def make_png(path, shape, value=128):
    arr = np.full(shape, value, dtype=np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(path)


@pytest.fixture
def small_dataset(tmp_path):
    make_png(tmp_path / "a_ir.png", (8, 8))
    make_png(tmp_path / "a_rgb.png", (8, 8, 3))
    make_png(tmp_path / "b_ir.png", (8, 8))
    return tmp_path


class TestLoadManifest:
    def test_round_trip_preserves_order(self, small_dataset):
        path = small_dataset / "manifest.jsonl"
        write_manifest(path, [
            {"id": "a", "ir": "a_ir.png", "rgb": "a_rgb.png", "tod": "day", "split": "train"},
            {"id": "b", "ir": "b_ir.png", "rgb": None, "tod": "night", "split": "test"},
        ])
        m = data.load_manifest(path)
        assert [s.id for s in m.samples] == ["a", "b"]
        assert m.samples[0].paired and not m.samples[1].paired
        assert m.samples[1].time_of_day == "night"
        out = small_dataset / "copy.jsonl"
        data.save_manifest(m, out)
        m2 = data.load_manifest(out)
        assert [(s.id, s.ir_path, s.rgb_path) for s in m2.samples] == [
            (s.id, s.ir_path, s.rgb_path) for s in m.samples
        ]

    def test_duplicate_id_names_both_lines(self, small_dataset):
        path = small_dataset / "manifest.jsonl"
        write_manifest(path, [
            {"id": "a", "ir": "a_ir.png", "rgb": None, "tod": "day", "split": "train"},
            {"id": "b", "ir": "b_ir.png", "rgb": None, "tod": "day", "split": "train"},
            {"id": "a", "ir": "b_ir.png", "rgb": None, "tod": "day", "split": "train"},
        ])
        with pytest.raises(data.ManifestError, match=r"'a'.*lines 1 and 3"):
            data.load_manifest(path)

    def test_empty_file_is_valid(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert data.load_manifest(path).samples == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(data.ManifestError, match="not found"):
            data.load_manifest(tmp_path / "nope.jsonl")

    def test_malformed_record_reports_line(self, small_dataset):
        path = small_dataset / "manifest.jsonl"
        path.write_text('{"id": "a", "ir": "a_ir.png", "tod": "day", "split": "train"}\n{bad json\n')
        with pytest.raises(data.ManifestError, match="line 2"):
            data.load_manifest(path)

    def test_unresolvable_path_reports_line(self, small_dataset):
        path = small_dataset / "manifest.jsonl"
        write_manifest(path, [
            {"id": "a", "ir": "a_ir.png", "rgb": None, "tod": "day", "split": "train"},
            {"id": "b", "ir": "missing.png", "rgb": None, "tod": "day", "split": "train"},
        ])
        with pytest.raises(data.ManifestError, match=r"line 2.*missing.png"):
            data.load_manifest(path)

    def test_bad_enum_values(self, small_dataset):
        path = small_dataset / "manifest.jsonl"
        write_manifest(path, [{"id": "a", "ir": "a_ir.png", "rgb": None, "tod": "dusk", "split": "train"}])
        with pytest.raises(data.ManifestError, match="tod"):
            data.load_manifest(path)


class TestFilterSamples:
    @pytest.fixture
    def manifest(self, tmp_path):
        make_png(tmp_path / "x.png", (4, 4))
        make_png(tmp_path / "x_rgb.png", (4, 4, 3))
        samples = []
        for i in range(10):
            samples.append(data.SamplePair(
                id=f"s{i}",
                ir_path=tmp_path / "x.png",
                rgb_path=(tmp_path / "x_rgb.png") if i >= 3 else None,
                time_of_day="day" if i < 6 else "night",
                split="train" if i % 2 == 0 else "test",
            ))
        return data.DatasetManifest(samples=samples, root=tmp_path)

    def test_counts(self, manifest):
        assert len(data.filter_samples(manifest, time_of_day="day")) == 6
        assert len(data.filter_samples(manifest)) == 10
        assert len(data.filter_samples(manifest, paired_only=True)) == 7

    def test_combined_predicates(self, manifest):
        got = data.filter_samples(manifest, time_of_day="night", split="test")
        assert [s.id for s in got] == ["s7", "s9"]

    def test_results_are_subsequence(self, manifest):
        order = {s.id: i for i, s in enumerate(manifest.samples)}
        rng = np.random.default_rng(0)
        for _ in range(50):
            tod = rng.choice([None, "day", "night"])
            split = rng.choice([None, "train", "test"])
            got = data.filter_samples(manifest, tod, split, bool(rng.integers(0, 2)))
            positions = [order[s.id] for s in got]
            assert positions == sorted(positions)

    def test_bad_predicate_values(self, manifest):
        with pytest.raises(ValueError):
            data.filter_samples(manifest, time_of_day="dawn")
        with pytest.raises(ValueError):
            data.filter_samples(manifest, split="val")


class TestImageIO:
    def test_affine_endpoints(self, tmp_path):
        make_png(tmp_path / "zero.png", (2, 2), value=0)
        make_png(tmp_path / "full.png", (2, 2), value=255)
        make_png(tmp_path / "mid.png", (2, 2), value=128)
        assert data.load_image(tmp_path / "zero.png", 1).min() == -1.0
        assert data.load_image(tmp_path / "full.png", 1).max() == 1.0
        mid = data.load_image(tmp_path / "mid.png", 1)
        assert mid[0, 0, 0] == pytest.approx(128 / 127.5 - 1, abs=1e-7)

    def test_shape_and_channels(self, tmp_path):
        make_png(tmp_path / "rgb.png", (4, 6, 3))
        arr = data.load_image(tmp_path / "rgb.png", 3)
        assert arr.shape == (3, 4, 6)

    def test_wrong_channel_count(self, tmp_path):
        make_png(tmp_path / "gray.png", (4, 4))
        with pytest.raises(ValueError, match="expected 3-channel"):
            data.load_image(tmp_path / "gray.png", 3)

    def test_decode_failure(self, tmp_path):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"not a png at all")
        with pytest.raises(ValueError, match="cannot decode"):
            data.load_image(bad, 1)

    def test_round_trip_every_8bit_value(self, tmp_path):
        values = np.arange(256, dtype=np.uint8).reshape(16, 16)
        Image.fromarray(values, mode="L").save(tmp_path / "ramp.png")
        arr = data.load_image(tmp_path / "ramp.png", 1)
        data.save_image(tmp_path / "ramp2.png", arr)
        back = np.asarray(Image.open(tmp_path / "ramp2.png"))
        assert np.array_equal(back, values)

    def test_save_rejects_bad_shape(self, tmp_path):
        with pytest.raises(ValueError):
            data.save_image(tmp_path / "x.png", np.zeros((2, 4, 4)))


class TestToyDataset:
    def test_determinism_byte_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        data.synth_toy_dataset(a, 4, 64, 7)
        data.synth_toy_dataset(b, 4, 64, 7)
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_counts(self, toy_dir, toy_manifest):
        assert len(toy_manifest.samples) == 8
        assert len(data.filter_samples(toy_manifest, "day")) == 4
        assert len(data.filter_samples(toy_manifest, "night")) == 4
        night_ids = {s.id for s in data.filter_samples(toy_manifest, "night")}
        ann_ids = set()
        with open(toy_dir / "annotations.jsonl") as fh:
            for line in fh:
                ann_ids.add(json.loads(line)["image_id"])
        assert ann_ids <= night_ids

    def test_night_ir_contrast_lower_per_scene(self, toy_dir):
        for i in range(4):
            day = data.load_image(toy_dir / "images" / f"scene{i:04d}_day_ir.png", 1)
            night = data.load_image(toy_dir / "images" / f"scene{i:04d}_night_ir.png", 1)
            mad_day = np.abs(day - day.mean()).mean()
            mad_night = np.abs(night - night.mean()).mean()
            assert mad_night < mad_day

    def test_boxes_inside_bounds(self, toy_dir):
        size = json.loads((toy_dir / "meta.json").read_text())["image_size"]
        with open(toy_dir / "annotations.jsonl") as fh:
            boxes = [json.loads(line)["bbox"] for line in fh]
        assert boxes, "toy seed should place at least one vehicle"
        for x, y, w, h in boxes:
            assert 0 <= x and 0 <= y and x + w <= size and y + h <= size

    def test_registered_sizes_decode(self, toy_manifest):
        data.verify_manifest(toy_manifest)

    def test_argument_validation(self, tmp_path):
        with pytest.raises(ValueError):
            data.synth_toy_dataset(tmp_path / "x", 0, 64, 1)
        with pytest.raises(ValueError):
            data.synth_toy_dataset(tmp_path / "x", 1, 16, 1)
