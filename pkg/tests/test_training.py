import numpy as np
import pytest

from galleryscope.data import validate_manifest
from galleryscope.nn import vgg_nano
from galleryscope.augment import AugmentPolicy
from galleryscope.sim import DegradationConfig, VisitPlan, generate_gallery, simulate_visit
from galleryscope.training import (
    Checkpoint,
    CheckpointCorruptError,
    CheckpointHashError,
    CheckpointVersionError,
    HyperParams,
    TrainingDivergedError,
    finetune_cv,
    load_checkpoint,
    make_generic_set,
    pretrain,
    replace_head,
    save_checkpoint,
)

FAST_POLICY = AugmentPolicy(crop_fraction=1.0, crops=("center",), hflip=True,
                            rotation_degrees=(0.0,), contrast_factors=(1.0,))


def tiny_spec(classes=10):
    return vgg_nano(classes=classes, input_hw=(16, 16))


def tiny_generic(n=60, size=16, seed=0):
    return make_generic_set(n_images=n, image_size=size, seed=seed)


def test_generic_set_is_balanced_and_deterministic():
    data = tiny_generic(n=40)
    labels = [lab for _, lab in data]
    assert sorted(set(labels)) == list(range(10))
    again = tiny_generic(n=40)
    for (a, la), (b, lb) in zip(data, again):
        assert la == lb
        np.testing.assert_array_equal(a, b)


def test_pretrain_lr_zero_keeps_initial_params():
    spec = tiny_spec()
    data = tiny_generic(n=30)
    hyper = HyperParams(lr=0.0, epochs=1, batch_size=8)
    ckpt = pretrain(spec, data, hyper, seed=3)
    from galleryscope.nn import init_params
    init = init_params(spec, 3)
    for name, p in ckpt.params.items():
        np.testing.assert_array_equal(p, init[name])
    assert ckpt.provenance["stage"] == "pretrained"


def test_pretrain_deterministic():
    spec = tiny_spec()
    data = tiny_generic(n=40)
    hyper = HyperParams(lr=0.01, epochs=2, batch_size=8)
    c1 = pretrain(spec, data, hyper, seed=5)
    c2 = pretrain(spec, data, hyper, seed=5)
    assert c1 == c2


def test_pretrain_class_count_mismatch_rejected():
    spec = tiny_spec(classes=7)
    with pytest.raises(ValueError, match="classes"):
        pretrain(spec, tiny_generic(n=20), HyperParams(epochs=1), seed=0)


def test_pretrain_loss_decreases_with_default_style_hyper():
    spec = tiny_spec()
    data = tiny_generic(n=200)
    ckpt = pretrain(spec, data, HyperParams(lr=0.01, epochs=4, batch_size=16), seed=1)
    hist = ckpt.provenance["loss_history"]
    assert hist[-1] < hist[0]


def test_divergence_reported_with_lr_diagnostic():
    spec = tiny_spec()
    data = tiny_generic(n=30)
    with pytest.raises(TrainingDivergedError, match="learning rate"):
        pretrain(spec, data, HyperParams(lr=1e4, epochs=3, batch_size=8), seed=0)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        HyperParams(lr=-0.1)
    with pytest.raises(ValueError):
        HyperParams(batch_size=0)
    with pytest.raises(ValueError):
        HyperParams(epochs=0)
    with pytest.raises(ValueError):
        HyperParams(momentum=1.0)


# --- head replacement ----------------------------------------------------------

@pytest.fixture(scope="module")
def pretrained():
    spec = tiny_spec()
    return pretrain(spec, tiny_generic(n=40), HyperParams(lr=0.01, epochs=1, batch_size=8),
                    seed=11)


def test_replace_head_copies_conv_reinits_head(pretrained):
    new = replace_head(pretrained, 10)
    for name in pretrained.params:
        if name.startswith("dense14."):
            assert not np.array_equal(new.params[name], pretrained.params[name])
        else:
            np.testing.assert_array_equal(new.params[name], pretrained.params[name])


def test_replace_head_resizes_for_label_space(pretrained):
    new = replace_head(pretrained, 81)
    assert new.spec.classes == 81
    assert new.params["dense14.w"].shape[0] == 81


def test_replace_head_rejects_degenerate(pretrained):
    with pytest.raises(ValueError):
        replace_head(pretrained, 1)


def test_replace_head_requires_pretrained_stage(pretrained):
    done = Checkpoint(pretrained.spec, pretrained.params, {"stage": "finetuned"})
    with pytest.raises(ValueError, match="pretrained"):
        replace_head(done, 5)


# --- checkpoint io ---------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path, pretrained):
    p = tmp_path / "ck.gsck"
    save_checkpoint(pretrained, p)
    again = load_checkpoint(p)
    assert again == pretrained


def test_checkpoint_truncation_is_corruption_error(tmp_path, pretrained):
    p = tmp_path / "ck.gsck"
    save_checkpoint(pretrained, p)
    blob = p.read_bytes()
    p.write_bytes(blob[:len(blob) // 2])
    with pytest.raises(CheckpointCorruptError):
        load_checkpoint(p)


def test_checkpoint_version_bump_is_version_error(tmp_path, pretrained):
    p = tmp_path / "ck.gsck"
    save_checkpoint(pretrained, p)
    blob = bytearray(p.read_bytes())
    blob[4] = 99
    p.write_bytes(bytes(blob))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(p)


def test_checkpoint_payload_flip_is_hash_error(tmp_path, pretrained):
    p = tmp_path / "ck.gsck"
    save_checkpoint(pretrained, p)
    blob = bytearray(p.read_bytes())
    blob[-5] ^= 0xFF
    p.write_bytes(bytes(blob))
    with pytest.raises(CheckpointHashError):
        load_checkpoint(p)


def test_checkpoint_bad_magic_is_corruption(tmp_path):
    p = tmp_path / "ck.gsck"
    p.write_bytes(b"WHAT" + b"\x01" + b"\x00" * 16)
    with pytest.raises(CheckpointCorruptError, match="magic"):
        load_checkpoint(p)


# --- fine-tuning with leave-one-split-out ----------------------------------------

@pytest.fixture(scope="module")
def small_experiment(pretrained):
    build = generate_gallery(4, "planar", 32, seed=31, n_background=2,
                             views_per_instance=3)
    manifest = build.manifest
    images = dict(build.images)
    plan = VisitPlan(dwell_min=2, dwell_max=3)
    cfg = DegradationConfig(sp_noise_density=0.01)
    for i, name in enumerate(["sp1", "sp2"]):
        res = simulate_visit(manifest, plan, cfg, seed=100 + i, split_name=name,
                             frame_size=32, render_size=32)
        manifest.splits[name] = res.records
        for rec, frame in zip(res.records, res.frames):
            images[rec.path] = frame
    assert validate_manifest(manifest) == []
    return manifest, images


def finetune_small(pretrained, manifest, images, grid=None, seed=7):
    grid = grid or (HyperParams(lr=0.02, epochs=2, batch_size=16, augment=FAST_POLICY),)
    return finetune_cv(pretrained, manifest, splits=["sp1", "sp2"],
                       hyper_grid=grid, seed=seed, images=images)


def test_two_splits_two_checkpoints_opposite_validation(pretrained, small_experiment):
    manifest, images = small_experiment
    result = finetune_small(pretrained, manifest, images)
    assert sorted(result.checkpoints) == ["sp1", "sp2"]
    assert result.checkpoints["sp1"].provenance["validation_splits"] == ["sp2"]
    assert result.checkpoints["sp2"].provenance["validation_splits"] == ["sp1"]
    for ck in result.checkpoints.values():
        assert ck.provenance["stage"] == "finetuned"


def test_single_grid_point_selection_log(pretrained, small_experiment):
    manifest, images = small_experiment
    result = finetune_small(pretrained, manifest, images)
    assert len(result.selection_log) == 2
    for entry in result.selection_log:
        assert len(entry["grid"]) == 1
        assert entry["selected"] == 0


def test_held_out_isolation(pretrained, small_experiment):
    manifest, images = small_experiment
    result = finetune_small(pretrained, manifest, images)
    for held_out, used in result.consumed.items():
        held_paths = {r.path for r in manifest.splits[held_out]}
        touched = set(used["training"]) | set(used["validation"])
        assert not (held_paths & touched), f"{held_out} leaked into training/selection"


def test_finetune_deterministic(pretrained, small_experiment):
    manifest, images = small_experiment
    r1 = finetune_small(pretrained, manifest, images)
    r2 = finetune_small(pretrained, manifest, images)
    assert r1.selection_log == r2.selection_log
    for name in r1.checkpoints:
        assert r1.checkpoints[name] == r2.checkpoints[name]


def test_finetune_needs_two_splits(pretrained, small_experiment):
    manifest, images = small_experiment
    with pytest.raises(ValueError, match="2 splits"):
        finetune_cv(pretrained, manifest, splits=["sp1"], hyper_grid=None, seed=0,
                    images=images)


def test_finetune_rejects_empty_grid(pretrained, small_experiment):
    manifest, images = small_experiment
    with pytest.raises(ValueError, match="grid"):
        finetune_cv(pretrained, manifest, splits=["sp1", "sp2"], hyper_grid=[],
                    seed=0, images=images)
