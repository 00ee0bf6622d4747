"""Two-stage training: generic pre-training on a synthetic shape set, then
fine-tuning on gallery instances with leave-one-split-out validation.

Training is deterministic given (seed, hyperparameters, data): shuffling uses
a dedicated generator, minibatch gradients reduce inside single BLAS calls,
and nothing reads the clock. Fine-tuning never touches capture splits; every
image id a run consumes is logged so held-out isolation is checkable.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy, expand_training_set
from .data import GalleryManifest, build_label_space, manifest_hash
from .evaluate import classify_images, prediction_from_scores, topk_hit
from .imageio import load_png
from .nn import (
    NetworkSpec,
    Params,
    dense,
    init_params,
    network_backward,
    network_forward,
    sgd_momentum_step,
    softmax_cross_entropy_batch,
    zero_velocity,
)

CHECKPOINT_MAGIC = b"GSCK"
CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when the loss goes non-finite (learning rate too high)."""


class CheckpointError(ValueError):
    """Base class for checkpoint file problems."""


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointHashError(CheckpointError):
    pass


@dataclass(frozen=True)
class HyperParams:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 16
    epochs: int = 20
    lr_decay: float = 1.0          # multiplicative factor applied every interval
    lr_decay_interval: int = 0     # epochs between decays; 0 disables
    augment: AugmentPolicy | None = None

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0,1), got {self.momentum}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_decay <= 0:
            raise ValueError(f"lr_decay must be > 0, got {self.lr_decay}")

    def lr_at(self, epoch: int) -> float:
        if self.lr_decay_interval <= 0:
            return self.lr
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_interval)

    def to_json(self) -> dict:
        d = {"lr": self.lr, "momentum": self.momentum, "batch_size": self.batch_size,
             "epochs": self.epochs, "lr_decay": self.lr_decay,
             "lr_decay_interval": self.lr_decay_interval}
        if self.augment is not None:
            d["augment"] = self.augment.to_json()
        return d

    @staticmethod
    def from_json(d: dict) -> "HyperParams":
        d = dict(d)
        aug = d.pop("augment", None)
        return HyperParams(augment=AugmentPolicy.from_json(aug) if aug else None, **d)


# the library default grid for cross-validated selection
DEFAULT_HYPER_GRID = tuple(
    HyperParams(lr=lr, momentum=0.9, batch_size=16, epochs=e)
    for lr in (0.01, 0.003) for e in (20, 40)
)


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: Params
    provenance: dict = field(default_factory=dict)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        if self.spec != other.spec or self.provenance != other.provenance:
            return False
        if set(self.params) != set(other.params):
            return False
        return all(self.params[k].dtype == other.params[k].dtype
                   and np.array_equal(self.params[k], other.params[k])
                   for k in self.params)


# ---------------------------------------------------------------------------
# generic pre-training set: ten shape/texture classes
# ---------------------------------------------------------------------------

GENERIC_CLASSES = ("disk", "hbar", "vbar", "checker", "gradient", "ring",
                   "triangle", "dots", "stripes", "cross")


def _generic_image(cls: int, size: int, rng: np.random.Generator) -> np.ndarray:
    bg = rng.uniform(0, 255, 3).astype(np.float32)
    fg = rng.uniform(0, 255, 3).astype(np.float32)
    while np.abs(fg - bg).sum() < 120:          # keep figure and ground apart
        fg = rng.uniform(0, 255, 3).astype(np.float32)
    img = np.empty((size, size, 3), dtype=np.float32)
    img[:] = bg
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float32) / (size - 1)
    cx, cy = rng.uniform(0.35, 0.65, 2)
    s = rng.uniform(0.18, 0.4)
    name = GENERIC_CLASSES[cls]
    if name == "disk":
        mask = (xs - cx) ** 2 + (ys - cy) ** 2 < s ** 2
    elif name == "hbar":
        mask = np.abs(ys - cy) < s * 0.35
    elif name == "vbar":
        mask = np.abs(xs - cx) < s * 0.35
    elif name == "checker":
        n = int(rng.integers(3, 6))
        mask = ((xs * n).astype(int) + (ys * n).astype(int)) % 2 == 0
    elif name == "gradient":
        ang = rng.uniform(0, 2 * np.pi)
        t = (xs * np.cos(ang) + ys * np.sin(ang))
        t = (t - t.min()) / (t.max() - t.min() + 1e-9)
        img = bg[None, None] * (1 - t[..., None]) + fg[None, None] * t[..., None]
        mask = np.zeros_like(xs, dtype=bool)
    elif name == "ring":
        r = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2)
        mask = (r > s * 0.6) & (r < s)
    elif name == "triangle":
        mask = (np.abs(xs - cx) < (ys - (cy - s)) * 0.5) & (ys > cy - s) & (ys < cy + s * 0.7)
    elif name == "dots":
        n = int(rng.integers(4, 7))
        fx, fy = (xs * n) % 1.0, (ys * n) % 1.0
        mask = (fx - 0.5) ** 2 + (fy - 0.5) ** 2 < 0.06
    elif name == "stripes":
        n = int(rng.integers(3, 7))
        mask = ((xs + ys) * n).astype(int) % 2 == 0
    else:  # cross
        mask = (np.abs(xs - cx) < s * 0.22) | (np.abs(ys - cy) < s * 0.22)
    img[mask] = fg
    img += rng.normal(0, 6.0, img.shape).astype(np.float32)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_generic_set(n_images: int = 5000, image_size: int = 64, seed: int = 0
                     ) -> list[tuple[np.ndarray, int]]:
    """Balanced 10-class shape/texture classification set."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_images):
        cls = i % len(GENERIC_CLASSES)
        out.append((_generic_image(cls, image_size, rng), cls))
    return out


# ---------------------------------------------------------------------------
# the training loop
# ---------------------------------------------------------------------------

def _to_input_batch(images: np.ndarray) -> np.ndarray:
    return images.astype(np.float32) / 255.0 - 0.5


def _stack_dataset(samples, input_hw: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """[(uint8 HxWx3, class index)] -> (uint8 [N,3,h,w], int64 [N])."""
    from .sim.warp import resize_bilinear
    xs, ys = [], []
    for img, label in samples:
        if img.shape[:2] != input_hw:
            img = resize_bilinear(img, input_hw)
        xs.append(img.transpose(2, 0, 1))
        ys.append(label)
    return np.stack(xs), np.asarray(ys, dtype=np.int64)


def train_classifier(spec: NetworkSpec, params: Params, x: np.ndarray, y: np.ndarray,
                     hyper: HyperParams, seed: int,
                     epoch_hook=None) -> tuple[Params, list[dict]]:
    """SGD-with-momentum loop over (x uint8 [N,3,h,w], y [N]).

    Returns (trained params, per-epoch history). epoch_hook(epoch, params) may
    return extra metrics to record (used for epochs-to-target measurements).
    """
    rng = np.random.default_rng(seed)
    velocity = zero_velocity(params)
    n = x.shape[0]
    history: list[dict] = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        lr = hyper.lr_at(epoch)
        total_loss, total_hits = 0.0, 0
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            xb = _to_input_batch(x[idx])
            yb = y[idx]
            # divergence is detected via the isfinite check, not FP warnings
            with np.errstate(over="ignore", invalid="ignore"):
                scores, cache = network_forward(spec, params, xb)
                loss, grad_logits = softmax_cross_entropy_batch(cache.logits, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}: learning rate {lr} too high?")
            grads = network_backward(spec, params, cache, grad_logits)
            params, velocity = sgd_momentum_step(params, grads, velocity, lr, hyper.momentum)
            total_loss += loss * len(idx)
            total_hits += int((scores.argmax(axis=1) == yb).sum())
        entry = {"epoch": epoch, "lr": lr, "loss": total_loss / n, "accuracy": total_hits / n}
        if epoch_hook is not None:
            extra = epoch_hook(epoch, params)
            if extra:
                entry.update(extra)
        history.append(entry)
    return params, history


def pretrain(spec: NetworkSpec, generic_dataset: list[tuple[np.ndarray, int]],
             hyper: HyperParams, seed: int) -> Checkpoint:
    """Stage one: train from random init on the generic shape set."""
    n_classes = max(label for _, label in generic_dataset) + 1
    if n_classes != spec.classes:
        raise ValueError(
            f"generic dataset has {n_classes} classes but the network head is "
            f"{spec.classes} wide")
    x, y = _stack_dataset(generic_dataset, spec.input_hw)
    params = init_params(spec, seed)
    params, history = train_classifier(spec, params, x, y, hyper, seed)
    provenance = {
        "stage": "pretrained",
        "seed": seed,
        "epochs": hyper.epochs,
        "hyperparameters": hyper.to_json(),
        "dataset": {"kind": "generic-shapes", "images": len(generic_dataset),
                    "classes": n_classes},
        "loss_history": [round(h["loss"], 6) for h in history],
        "final_train_accuracy": history[-1]["accuracy"],
    }
    return Checkpoint(spec=spec, params=params, provenance=provenance)


def replace_head(checkpoint: Checkpoint, new_c: int, head_seed: int | None = None
                 ) -> Checkpoint:
    """Swap the final dense layer for a fresh new_c-way head; copy the rest."""
    if checkpoint.provenance.get("stage") != "pretrained":
        raise ValueError("replace_head expects a checkpoint with stage=pretrained")
    if new_c < 2:
        raise ValueError(f"new class count must be >= 2, got {new_c}")
    spec = checkpoint.spec
    head_idx = max(i for i, l in enumerate(spec.layers) if l.kind == "dense")
    layers = tuple(dense(new_c) if i == head_idx else l for i, l in enumerate(spec.layers))
    new_spec = NetworkSpec(layers=layers, input_hw=spec.input_hw,
                           in_channels=spec.in_channels, classes=new_c)
    if head_seed is None:
        head_seed = int(checkpoint.provenance.get("seed", 0)) + 7919
    fresh = init_params(new_spec, head_seed)
    params: Params = {}
    for name, shape in new_spec.param_shapes().items():
        if name.startswith(f"dense{head_idx}."):
            params[name] = fresh[name]
        else:
            params[name] = checkpoint.params[name].copy()
    provenance = dict(checkpoint.provenance)
    provenance.update({"stage": "pretrained", "head_replaced_for": new_c,
                       "head_seed": head_seed})
    return Checkpoint(spec=new_spec, params=params, provenance=provenance)


# ---------------------------------------------------------------------------
# checkpoint file format
# ---------------------------------------------------------------------------

def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    """GSCK | version byte | u32 header length | JSON header | f32-LE payload."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(checkpoint.params)
    payload = b"".join(
        np.ascontiguousarray(checkpoint.params[n], dtype="<f4").tobytes() for n in names)
    header = {
        "spec": checkpoint.spec.to_json(),
        "provenance": checkpoint.provenance,
        "tensors": [{"name": n, "shape": list(checkpoint.params[n].shape)} for n in names],
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = (CHECKPOINT_MAGIC + struct.pack("B", CHECKPOINT_VERSION)
            + struct.pack("<I", len(header_bytes)) + header_bytes + payload)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 9 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError(f"{path}: not a checkpoint file (bad magic)")
    version = blob[4]
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version} unsupported (expected "
            f"{CHECKPOINT_VERSION})")
    (header_len,) = struct.unpack("<I", blob[5:9])
    if 9 + header_len > len(blob):
        raise CheckpointCorruptError(
            f"{path}: corrupted header length {header_len} exceeds file size {len(blob)}")
    try:
        header = json.loads(blob[9:9 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointCorruptError(f"{path}: corrupted header: {e}") from e
    payload = blob[9 + header_len:]
    expected = sum(int(np.prod(t["shape"])) for t in header["tensors"]) * 4
    if len(payload) != expected:
        raise CheckpointCorruptError(
            f"{path}: corrupted payload length {len(payload)}, expected {expected}")
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointHashError(
            f"{path}: payload hash mismatch ({digest[:12]}... != "
            f"{header['payload_sha256'][:12]}...)")
    spec = NetworkSpec.from_json(header["spec"])
    params: Params = {}
    offset = 0
    for t in header["tensors"]:
        size = int(np.prod(t["shape"]))
        arr = np.frombuffer(payload, dtype="<f4", count=size, offset=offset)
        params[t["name"]] = arr.reshape(t["shape"]).copy()
        offset += size * 4
    return Checkpoint(spec=spec, params=params, provenance=header["provenance"])


# ---------------------------------------------------------------------------
# leave-one-split-out fine-tuning
# ---------------------------------------------------------------------------

@dataclass
class FinetuneResult:
    checkpoints: dict[str, Checkpoint]         # held-out split -> best model
    selection_log: list[dict]
    consumed: dict[str, dict[str, list[str]]]  # held-out split -> image ids used


def _load_split_frames(manifest: GalleryManifest, name: str,
                       images: dict[str, np.ndarray] | None) -> list[np.ndarray]:
    frames = []
    root = manifest.root or Path(".")
    for rec in manifest.splits[name]:
        if images is not None and rec.path in images:
            frames.append(images[rec.path])
        else:
            frames.append(load_png(root / rec.path))
    return frames


def finetune_cv(checkpoint: Checkpoint, manifest: GalleryManifest,
                splits: list[str] | None = None,
                hyper_grid: tuple[HyperParams, ...] | list[HyperParams] | None = None,
                seed: int = 0, images: dict[str, np.ndarray] | None = None,
                ) -> FinetuneResult:
    """For each held-out split: train on the augmented training set per grid
    point, pick the hyperparameters with the best top-1 on the other splits,
    and emit that model. The held-out split is never read during training or
    selection; `consumed` records every image id each run touched.

    Training depends only on (training set, hyper, seed), so each grid point
    is trained once and shared across held-out splits (bit-identical to
    retraining).
    """
    names = list(splits) if splits is not None else sorted(manifest.splits)
    if len(names) < 2:
        raise ValueError(f"need >= 2 splits for leave-one-split-out, got {names}")
    for n in names:
        if n not in manifest.splits:
            raise ValueError(f"split {n!r} not in manifest (has {sorted(manifest.splits)})")
    grid = DEFAULT_HYPER_GRID if hyper_grid is None else tuple(hyper_grid)
    if not grid:
        raise ValueError("hyper grid must not be empty")

    label_space = build_label_space(manifest)
    base = replace_head(checkpoint, len(label_space))
    m_hash = manifest_hash(manifest)

    # one trained model per grid point, shared by every held-out split
    trained: list[tuple[Params, list[dict]]] = []
    train_sources: list[list[str]] = []
    sample_cache: dict[tuple, tuple[np.ndarray, np.ndarray, list[str]]] = {}
    for gi, hyper in enumerate(grid):
        policy = hyper.augment or AugmentPolicy()
        key = json.dumps(policy.to_json(), sort_keys=True)
        if key not in sample_cache:
            samples = expand_training_set(manifest, policy, seed=seed,
                                          out_hw=base.spec.input_hw, images=images)
            idx_samples = [(s.image, label_space.index(s.label)) for s in samples]
            x, y = _stack_dataset(idx_samples, base.spec.input_hw)
            sample_cache[key] = (x, y, sorted({s.source_path for s in samples}))
        x, y, sources = sample_cache[key]
        params = {k: v.copy() for k, v in base.params.items()}
        params, history = train_classifier(base.spec, params, x, y, hyper, seed)
        trained.append((params, history))
        train_sources.append(sources)

    # validation scores for every (grid point, split)
    split_frames = {n: _load_split_frames(manifest, n, images) for n in names}
    split_preds: dict[tuple[int, str], list] = {}
    for gi, (params, _) in enumerate(trained):
        for n in names:
            scores = classify_images(base.spec, params, split_frames[n])
            preds = [prediction_from_scores(rec.path, s, label_space)
                     for rec, s in zip(manifest.splits[n], scores)]
            split_preds[(gi, n)] = preds

    checkpoints: dict[str, Checkpoint] = {}
    selection_log: list[dict] = []
    consumed: dict[str, dict[str, list[str]]] = {}
    for held_out in names:
        others = [n for n in names if n != held_out]
        entry = {"held_out": held_out, "grid": []}
        best_gi, best_score = 0, -1.0
        for gi, hyper in enumerate(grid):
            hits, total = 0, 0
            for n in others:
                for pred, rec in zip(split_preds[(gi, n)], manifest.splits[n]):
                    hits += topk_hit(pred.label, rec.ordered_gt, 1)
                    total += 1
            score = hits / total if total else 0.0
            entry["grid"].append({"hyper": hyper.to_json(), "val_top1": round(score, 6)})
            if score > best_score:
                best_gi, best_score = gi, score
        entry["selected"] = best_gi
        selection_log.append(entry)

        params, history = trained[best_gi]
        provenance = {
            "stage": "finetuned",
            "seed": seed,
            "epochs": grid[best_gi].epochs,
            "hyperparameters": grid[best_gi].to_json(),
            "source_manifest_sha256": m_hash,
            "held_out_split": held_out,
            "validation_splits": others,
            "validation_top1": round(best_score, 6),
            "loss_history": [round(h["loss"], 6) for h in history],
            "pretrained_from": checkpoint.provenance.get("dataset", {}),
        }
        checkpoints[held_out] = Checkpoint(
            spec=base.spec,
            params={k: v.copy() for k, v in params.items()},
            provenance=provenance)
        consumed[held_out] = {
            "training": train_sources[best_gi],
            "validation": sorted(r.path for n in others for r in manifest.splits[n]),
        }
    return FinetuneResult(checkpoints=checkpoints, selection_log=selection_log,
                          consumed=consumed)
