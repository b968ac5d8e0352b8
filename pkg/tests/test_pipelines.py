import numpy as np
import pytest

from ir2day import data, pipelines
from ir2day.pipelines import (
    EXPECTED_SHAPE,
    PipelineError,
    default_pipeline_spec,
    default_stage_params,
    load_artifacts,
    pipeline_shape,
    run_approach1,
    run_approach2,
    run_approach3,
    run_baseline,
    run_pipeline,
    translate,
    verify_lineage,
)

SEED = 7


@pytest.fixture(scope="module")
def runs(toy_manifest, tmp_path_factory):
    """All four approaches trained once on the toy manifest (desk scale)."""
    out = {}
    for approach in pipelines.APPROACHES:
        work = tmp_path_factory.mktemp(f"work_{approach}")
        spec = default_pipeline_spec(approach, toy_manifest, work, seed=SEED)
        out[approach] = run_pipeline(spec)
    return out


@pytest.fixture(scope="module")
def night_ir_paths(toy_manifest):
    return [s.ir_path for s in data.filter_samples(toy_manifest, "night")]


def stage_entry(artifacts, name):
    return next(e for e in artifacts.lineage["stages"] if e["name"] == name)


class TestShapes:
    @pytest.mark.parametrize("approach", pipelines.APPROACHES)
    def test_stage_and_synth_counts(self, runs, approach):
        assert pipeline_shape(runs[approach]) == EXPECTED_SHAPE[approach]

    @pytest.mark.parametrize("approach", pipelines.APPROACHES)
    def test_lineage_files_hash_match(self, runs, approach):
        verify_lineage(runs[approach])

    def test_baseline_lineage_names_zero_synth(self, runs):
        art = runs["baseline"]
        assert art.lineage["synthesized"] == []
        assert art.lineage["inference"] == [{"stage": "colorizer", "net": "g"}]

    def test_approach1_translator_feeds_colorizer_at_inference_only(self, runs):
        art = runs["approach1"]
        assert [i["stage"] for i in art.lineage["inference"]] == ["translator", "colorizer"]
        assert art.lineage["synthesized"] == []

    def test_approach2_inference_touches_only_colorizer(self, runs):
        art = runs["approach2"]
        assert art.lineage["inference"] == [{"stage": "colorizer", "net": "g"}]

    def test_approach3_inference_touches_only_colorizer(self, runs):
        art = runs["approach3"]
        assert art.lineage["inference"] == [{"stage": "colorizer", "net": "g"}]


class TestSynthesizedDatasets:
    def test_approach2_pairs_and_provenance(self, runs, toy_manifest):
        art = runs["approach2"]
        synth = art.lineage["synthesized"][0]
        assert synth["source_stage"] == "translator"
        manifest = data.load_manifest(art.work_dir / synth["manifest"])
        night_pairs = data.filter_samples(toy_manifest, "night", "train", paired_only=True)
        assert len(manifest.samples) == len(night_pairs)
        synth_files = {art.work_dir / rec["path"] for rec in synth["files"]}
        for s in manifest.samples:
            # the RGB side is stage-A output; the IR side is the original frame
            assert s.rgb_path in synth_files
            assert s.ir_path in {p.ir_path for p in night_pairs}

    def test_approach3_synth_images_are_valid_ir(self, runs, toy_manifest):
        art = runs["approach3"]
        synth = art.lineage["synthesized"][0]
        manifest = data.load_manifest(art.work_dir / synth["manifest"])
        day_pairs = data.filter_samples(toy_manifest, "day", "train", paired_only=True)
        assert len(manifest.samples) == len(day_pairs)
        for s in manifest.samples:
            ir = data.load_image(s.ir_path, 1)
            assert ir.shape == (1, 64, 64)
            assert ir.min() >= -1.0 and ir.max() <= 1.0
            assert s.rgb_path in {p.rgb_path for p in day_pairs}


class TestForbiddenReads:
    """No pipeline may pair a night-IR with a ground-truth day-RGB (which does
    not exist for night scenes); audited from the per-stage input records."""

    def input_paths(self, artifacts, stage):
        work = artifacts.work_dir
        out = set()
        for rec in stage_entry(artifacts, stage)["inputs"]:
            p = rec["path"]
            out.add(str(work / p) if not p.startswith("/") else p)
        return out

    def test_approach2_colorizer_never_reads_day_rgb(self, runs, toy_manifest):
        art = runs["approach2"]
        day_rgb = {str(s.rgb_path) for s in data.filter_samples(toy_manifest, "day", paired_only=True)}
        assert self.input_paths(art, "colorizer") & day_rgb == set()

    def test_approach2_colorizer_rgb_inputs_are_synthesized(self, runs):
        art = runs["approach2"]
        rgb_inputs = {p for p in self.input_paths(art, "colorizer") if p.endswith("rgb.png")}
        synth_files = {
            str(art.work_dir / rec["path"]) for rec in art.lineage["synthesized"][0]["files"]
        }
        assert rgb_inputs and rgb_inputs <= synth_files

    def test_translator_stages_read_only_their_domains(self, runs, toy_manifest):
        night_rgb = {str(s.rgb_path) for s in data.filter_samples(toy_manifest, "night", paired_only=True)}
        all_ir = {str(s.ir_path) for s in toy_manifest.samples}
        # approach1/3 translators are IR-only
        for approach in ("approach1", "approach3"):
            inputs = self.input_paths(runs[approach], "translator")
            assert inputs <= all_ir
        # approach2's translator is RGB-only
        inputs = self.input_paths(runs["approach2"], "translator")
        assert inputs and all(p.endswith("rgb.png") for p in inputs)
        assert inputs & all_ir == set()
        assert night_rgb <= inputs

    def test_colorizer_pairs_share_scene_or_lineage(self, runs, toy_manifest):
        """baseline/approach1 colorizers read only day samples' files."""
        day_files = {str(p) for s in data.filter_samples(toy_manifest, "day", paired_only=True)
                     for p in (s.ir_path, s.rgb_path)}
        for approach in ("baseline", "approach1"):
            assert self.input_paths(runs[approach], "colorizer") == day_files


class TestIdentityHooks:
    def test_approach1_with_identity_equals_baseline(self, runs, toy_manifest, night_ir_paths, tmp_path):
        work = tmp_path / "hook1"
        spec = default_pipeline_spec("approach1", toy_manifest, work, seed=SEED)
        art = run_approach1(spec, translator_hook=lambda x: x)
        out_hook = translate(art, night_ir_paths, tmp_path / "out_hook")
        out_base = translate(runs["baseline"], night_ir_paths, tmp_path / "out_base")
        for a, b in zip(out_hook, out_base):
            assert a.read_bytes() == b.read_bytes()

    def test_approach3_with_identity_reproduces_baseline_training_set(self, runs, toy_manifest, tmp_path):
        work = tmp_path / "hook3"
        spec = default_pipeline_spec("approach3", toy_manifest, work, seed=SEED)
        art = run_approach3(spec, translator_hook=lambda x: x)
        synth = data.load_manifest(art.work_dir / art.lineage["synthesized"][0]["manifest"])
        day_pairs = data.filter_samples(toy_manifest, "day", "train", paired_only=True)
        assert len(synth.samples) == len(day_pairs)
        for fake, day in zip(synth.samples, day_pairs):
            assert np.array_equal(data.load_image(fake.ir_path, 1), data.load_image(day.ir_path, 1))
            assert fake.rgb_path == day.rgb_path


class TestTranslate:
    def test_batch_contract_and_names(self, runs, night_ir_paths, tmp_path):
        outs = translate(runs["baseline"], night_ir_paths[:3], tmp_path / "out")
        assert len(outs) == 3
        for src, out in zip(night_ir_paths[:3], outs):
            assert out.name == f"{src.stem}_fake_day_rgb.png"
            img = data.load_image(out, 3)
            assert img.shape == (3, 64, 64)

    def test_deterministic(self, runs, night_ir_paths, tmp_path):
        a = translate(runs["approach1"], night_ir_paths[:2], tmp_path / "a")
        b = translate(runs["approach1"], night_ir_paths[:2], tmp_path / "b")
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()

    def test_non_multiple_size_padded_and_cropped(self, runs, night_ir_paths, tmp_path):
        src = data.load_image(night_ir_paths[0], 1)[:, :50, :46]
        odd = tmp_path / "odd.png"
        data.save_image(odd, src)
        (out,) = translate(runs["baseline"], [odd], tmp_path / "out_odd")
        assert data.load_image(out, 3).shape == (3, 50, 46)

    def test_missing_checkpoint_names_stage(self, runs, night_ir_paths, tmp_path):
        art = load_artifacts(runs["approach1"].work_dir)
        missing = dict(art.checkpoints)
        missing["translator"] = art.work_dir / "stages" / "translator" / "gone.ckpt"
        art.checkpoints = missing
        with pytest.raises(PipelineError, match="translator"):
            translate(art, night_ir_paths[:1], tmp_path / "x")

    def test_hook_artifacts_cannot_be_reloaded(self, toy_manifest, night_ir_paths, tmp_path):
        spec = default_pipeline_spec("approach1", toy_manifest, tmp_path / "hookwork", seed=SEED)
        run_approach1(spec, translator_hook=lambda x: x)
        reloaded = load_artifacts(tmp_path / "hookwork")
        with pytest.raises(PipelineError, match="hook"):
            translate(reloaded, night_ir_paths[:1], tmp_path / "y")


class TestCachingAndReload:
    def test_rerun_uses_cache(self, runs, toy_manifest, caplog):
        art = runs["approach3"]
        spec = default_pipeline_spec("approach3", toy_manifest, art.work_dir, seed=SEED)
        import logging

        with caplog.at_level(logging.INFO, logger="ir2day.pipelines"):
            again = run_pipeline(spec)
        assert all(e["cached"] for e in again.lineage["stages"])
        assert all(e["cached"] for e in again.lineage["synthesized"])
        assert "cached" in caplog.text

    def test_config_change_invalidates_cache(self, runs, toy_manifest):
        art = runs["baseline"]
        spec = default_pipeline_spec("baseline", toy_manifest, art.work_dir, seed=SEED + 1)
        again = run_pipeline(spec)
        assert not any(e["cached"] for e in again.lineage["stages"])
        # restore the original cache for the other tests
        spec = default_pipeline_spec("baseline", toy_manifest, art.work_dir, seed=SEED)
        run_pipeline(spec)

    def test_load_artifacts_round_trip(self, runs, night_ir_paths, tmp_path):
        art = load_artifacts(runs["approach2"].work_dir)
        assert art.approach == "approach2"
        outs = translate(art, night_ir_paths[:1], tmp_path / "re")
        assert len(outs) == 1

    def test_load_artifacts_missing(self, tmp_path):
        with pytest.raises(PipelineError, match="lineage"):
            load_artifacts(tmp_path)


class TestSpecValidation:
    def test_unknown_approach(self, toy_manifest, tmp_path):
        with pytest.raises(PipelineError, match="unknown approach"):
            default_pipeline_spec("approach4", toy_manifest, tmp_path)

    def test_unknown_stage_override(self):
        with pytest.raises(PipelineError, match="unknown stage override"):
            default_stage_params("baseline", "colorizer", overrides={"warmup": 5})

    def test_override_applies(self):
        params = default_stage_params(
            "approach3", "translator", seed=3,
            overrides={"total_epochs": 9, "constant_epochs": 4, "lambda_cycle": 5.0, "base_width": 16},
        )
        assert params.schedule.total_epochs == 9
        assert params.weights.lambda_cycle == 5.0
        assert params.networks.generator.base_width == 16

    def test_missing_required_data(self, toy_manifest, tmp_path):
        night_only = data.DatasetManifest(
            samples=[s for s in toy_manifest.samples if s.time_of_day == "night"],
            root=toy_manifest.root,
        )
        spec = default_pipeline_spec("baseline", night_only, tmp_path / "w1")
        with pytest.raises(PipelineError, match="paired day-time"):
            run_baseline(spec)
        spec = default_pipeline_spec("approach2", night_only, tmp_path / "w2")
        with pytest.raises(PipelineError, match="day-time RGB"):
            run_approach2(spec)

    def test_approach2_requires_registered_night_rgb(self, toy_manifest, tmp_path):
        stripped = data.DatasetManifest(
            samples=[
                data.SamplePair(s.id, s.ir_path, None if s.time_of_day == "night" else s.rgb_path,
                                s.time_of_day, s.split)
                for s in toy_manifest.samples
            ],
            root=toy_manifest.root,
        )
        spec = default_pipeline_spec("approach2", stripped, tmp_path / "w3")
        with pytest.raises(PipelineError, match="registered RGB"):
            run_approach2(spec)

    def test_stage_failure_names_stage(self, toy_dir, toy_manifest, tmp_path):
        # a 32px day sample alongside the 64px ones breaks the colorizer's
        # uniform-size requirement mid-stage
        small_ir = tmp_path / "small_ir.png"
        small_rgb = tmp_path / "small_rgb.png"
        src = data.filter_samples(toy_manifest, "day", paired_only=True)[0]
        data.save_image(small_ir, data.load_image(src.ir_path, 1)[:, :32, :32])
        data.save_image(small_rgb, data.load_image(src.rgb_path, 3)[:, :32, :32])
        mixed = data.DatasetManifest(
            samples=list(toy_manifest.samples)
            + [data.SamplePair("tiny", small_ir, small_rgb, "day", "train")],
            root=toy_manifest.root,
        )
        spec = default_pipeline_spec("baseline", mixed, tmp_path / "w")
        with pytest.raises(PipelineError, match="stage 'colorizer' failed"):
            run_baseline(spec)

    def test_full_scale_defaults(self):
        params = default_stage_params("approach1", "translator", scale="full")
        assert params.schedule.total_epochs == 60
        assert params.networks.generator.n_resblocks == 9
        params = default_stage_params("approach2", "translator", scale="full")
        assert params.schedule.base_lr_discriminator == 1e-4
        assert params.schedule.total_epochs == 80
        params = default_stage_params("baseline", "colorizer", scale="full")
        assert params.schedule.total_epochs == 100
