"""Command-line pipeline: gen-gallery, gen-visit, pretrain, finetune, predict,
evaluate, report, and full-run chaining them all.

One JSON config file is the source of truth; flags override config fields.
Outputs live under --out with the fixed layout manifests/, images/,
checkpoints/, reports/. Every artifact is re-readable by its loader, report
files are written atomically (temp file + rename), and full-run is a pure
function of (config, seed) down to the bytes. GSCOPE_THREADS caps worker
count.
"""

from __future__ import annotations

import argparse
import json
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy
from .data import (
    GalleryManifest,
    ManifestError,
    build_label_space,
    load_manifest,
    save_manifest,
    serialize_manifest,
)
from .evaluate import (
    EvalReport,
    Prediction,
    VisitRecord,
    build_eval_report,
    classify_images,
    prediction_from_scores,
    report_to_csv,
    report_to_svg,
)
from .imageio import ImageLoadError, load_png, save_png
from .nn import vgg_nano
from .sim import DegradationConfig, VisitPlan, generate_gallery, get_preset, simulate_visit
from .training import (
    CheckpointError,
    HyperParams,
    TrainingDivergedError,
    finetune_cv,
    load_checkpoint,
    make_generic_set,
    pretrain,
    save_checkpoint,
)

DEFAULT_PRETRAIN = {"images": 5000, "image_size": 64, "epochs": 5, "lr": 0.01,
                    "momentum": 0.9, "batch_size": 16, "seed": 1}


@dataclass
class ExperimentConfig:
    """Resolved experiment description: preset defaults, config file, then flags."""

    preset: str | None = None
    seed: int = 7
    out: Path = Path("runs/exp")
    gallery: dict = field(default_factory=dict)
    visit: dict = field(default_factory=dict)
    degradations: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    augment: dict = field(default_factory=dict)
    hyper_grid: list[dict] = field(default_factory=list)
    pretrain: dict = field(default_factory=lambda: dict(DEFAULT_PRETRAIN))
    k_max: int = 10

    def resolved(self) -> dict:
        return {
            "preset": self.preset, "seed": self.seed, "out": str(self.out),
            "gallery": self.gallery, "visit": self.visit,
            "degradations": self.degradations, "network": self.network,
            "augment": self.augment, "hyper_grid": self.hyper_grid,
            "pretrain": self.pretrain, "k_max": self.k_max,
        }

    # -- derived pieces -------------------------------------------------------

    def input_hw(self) -> tuple[int, int]:
        return tuple(self.network.get("input_hw", (64, 64)))

    def visit_plan(self) -> VisitPlan:
        plan_fields = {k: v for k, v in self.visit.items()
                       if k not in ("n_splits", "frame_size")}
        return VisitPlan(**plan_fields)

    def degradation_config(self) -> DegradationConfig:
        return DegradationConfig(**self.degradations)

    def augment_policy(self) -> AugmentPolicy:
        return AugmentPolicy.from_json(self.augment) if self.augment else AugmentPolicy()

    def grid(self) -> tuple[HyperParams, ...] | None:
        if not self.hyper_grid:
            return None
        policy = self.augment_policy()
        return tuple(HyperParams.from_json({**h, "augment": policy.to_json()})
                     for h in self.hyper_grid)


def _apply_preset(cfg: ExperimentConfig) -> None:
    if not cfg.preset:
        return
    p = get_preset(cfg.preset)
    g = {"kind_mix": p.kind_mix, "walls": p.walls, "n_background": p.n_background,
         "n_distractor": p.n_distractor, "n_descriptions": p.n_descriptions,
         "view_jitter": p.gallery_view_jitter, "instances": 20, "image_size": 96,
         "views_per_instance": 3}
    g.update(cfg.gallery)
    cfg.gallery = g
    v = {**p.plan.to_json(), "n_splits": 2, "frame_size": 96}
    v.update(cfg.visit)
    cfg.visit = v
    d = p.degradations.to_json()
    d.update(cfg.degradations)
    cfg.degradations = d
    if not cfg.hyper_grid:
        cfg.hyper_grid = [dict(p.hyper)]


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        raw = json.loads(path.read_text(encoding="utf-8"))
        for key, value in raw.items():
            if key == "out":
                cfg.out = Path(value)
            elif hasattr(cfg, key):
                setattr(cfg, key, value)
            else:
                raise ValueError(f"unknown config key {key!r}")
    # flags override config fields
    for flag, attr in (("preset", "preset"), ("seed", "seed"), ("k_max", "k_max")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "out", None):
        cfg.out = Path(args.out)
    if getattr(args, "instances", None) is not None:
        cfg.gallery["instances"] = args.instances
    if getattr(args, "views", None) is not None:
        cfg.gallery["views_per_instance"] = args.views
    if getattr(args, "image_size", None) is not None:
        cfg.gallery["image_size"] = args.image_size
    _apply_preset(cfg)
    return cfg


# ---------------------------------------------------------------------------
# file layout + atomic writes
# ---------------------------------------------------------------------------

def _paths(out: Path) -> dict[str, Path]:
    return {"manifests": out / "manifests", "images": out / "images",
            "checkpoints": out / "checkpoints", "reports": out / "reports"}


def write_atomic(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, str):
        tmp.write_text(data, encoding="utf-8")
    else:
        tmp.write_bytes(data)
    tmp.replace(path)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _stage_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1, np.uint64)[0])


def _rel_images(path: str) -> str:
    # manifests live in manifests/, images in a sibling images/ directory
    return "../" + path


def manifest_path(out: Path) -> Path:
    return _paths(out)["manifests"] / "manifest.json"


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_gen_gallery(cfg: ExperimentConfig) -> GalleryManifest:
    g = cfg.gallery
    build = generate_gallery(
        n_instances=int(g.get("instances", 20)),
        kind_mix=g.get("kind_mix", "planar"),
        image_size=int(g.get("image_size", 96)),
        seed=_stage_seed(cfg.seed, 1),
        views_per_instance=g.get("views_per_instance"),
        n_background=int(g.get("n_background", 8)),
        n_distractor=int(g.get("n_distractor", 0)),
        n_descriptions=int(g.get("n_descriptions", 0)),
        walls=int(g.get("walls", 1)),
        view_jitter=float(g.get("view_jitter", 0.08)),
    )
    for path, img in sorted(build.images.items()):
        save_png(img, cfg.out / path)   # generator paths already start "images/"
    manifest = build.manifest
    manifest.training_images = [
        type(t)(_rel_images(t.path), t.label, t.view) for t in manifest.training_images]
    write_atomic(manifest_path(cfg.out), serialize_manifest(manifest) + "\n")
    return load_manifest(manifest_path(cfg.out))


def stage_gen_visit(cfg: ExperimentConfig, split_name: str, visit_seed: int
                    ) -> GalleryManifest:
    manifest = load_manifest(manifest_path(cfg.out))
    plan = cfg.visit_plan()
    res = simulate_visit(manifest, plan, cfg.degradation_config(), seed=visit_seed,
                         split_name=split_name,
                         frame_size=int(cfg.visit.get("frame_size", 96)),
                         render_size=int(cfg.gallery.get("image_size", 96)))
    for rec, frame in zip(res.records, res.frames):
        save_png(frame, cfg.out / rec.path)
    manifest.splits[split_name] = [
        type(r)(_rel_images(r.path), r.t, r.ordered_gt) for r in res.records]
    totals = manifest.declared_totals
    parts = {name: len(records) for name, records in manifest.splits.items()}
    totals["testing"] = {"total": sum(parts.values()), "parts": parts}
    write_atomic(manifest_path(cfg.out), serialize_manifest(manifest) + "\n")
    lines = "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in res.effects_log)
    write_atomic(_paths(cfg.out)["reports"] / f"effects_{split_name}.jsonl", lines)
    return load_manifest(manifest_path(cfg.out))


def stage_pretrain(cfg: ExperimentConfig) -> Path:
    p = cfg.pretrain
    spec = vgg_nano(classes=10, input_hw=cfg.input_hw())
    data = make_generic_set(n_images=int(p.get("images", 5000)),
                            image_size=cfg.input_hw()[0],
                            seed=int(p.get("seed", 1)))
    hyper = HyperParams(lr=float(p.get("lr", 0.01)), momentum=float(p.get("momentum", 0.9)),
                        batch_size=int(p.get("batch_size", 16)),
                        epochs=int(p.get("epochs", 5)))
    ckpt = pretrain(spec, data, hyper, seed=int(p.get("seed", 1)))
    path = _paths(cfg.out)["checkpoints"] / "pretrained.gsck"
    save_checkpoint(ckpt, path)
    return path


def stage_finetune(cfg: ExperimentConfig, pretrained_path: Path | None = None
                   ) -> dict[str, Path]:
    manifest = load_manifest(manifest_path(cfg.out))
    source = pretrained_path or _paths(cfg.out)["checkpoints"] / "pretrained.gsck"
    if not Path(source).is_file():
        raise FileNotFoundError(f"pretrained checkpoint not found: {source}")
    ckpt = load_checkpoint(source)
    grid = cfg.grid()
    if grid is None:
        policy = cfg.augment_policy()
        grid = tuple(HyperParams.from_json({**h.to_json(), "augment": policy.to_json()})
                     for h in
                     (HyperParams(lr=0.01, epochs=12), HyperParams(lr=0.003, epochs=12)))
    result = finetune_cv(ckpt, manifest, splits=None, hyper_grid=grid,
                         seed=_stage_seed(cfg.seed, 3))
    outputs: dict[str, Path] = {}
    for split, fine in result.checkpoints.items():
        path = _paths(cfg.out)["checkpoints"] / f"finetuned_{split}.gsck"
        save_checkpoint(fine, path)
        outputs[split] = path
    write_atomic(_paths(cfg.out)["reports"] / "selection_log.json",
                 _dump_json(result.selection_log))
    write_atomic(_paths(cfg.out)["reports"] / "consumed_images.json",
                 _dump_json(result.consumed))
    return outputs


def stage_predict(cfg: ExperimentConfig, split: str,
                  checkpoint_path: Path | None = None) -> Path:
    manifest = load_manifest(manifest_path(cfg.out))
    if split not in manifest.splits:
        raise ManifestError(f"split {split!r} not in manifest "
                            f"(has {sorted(manifest.splits)})")
    source = checkpoint_path or _paths(cfg.out)["checkpoints"] / f"finetuned_{split}.gsck"
    if not Path(source).is_file():
        raise FileNotFoundError(f"checkpoint not found: {source}")
    ckpt = load_checkpoint(source)
    label_space = build_label_space(manifest)
    if len(label_space) != ckpt.spec.classes:
        raise ValueError(f"label space has {len(label_space)} classes but checkpoint head "
                         f"is {ckpt.spec.classes} wide")
    frames = [load_png(manifest.root / r.path) for r in manifest.splits[split]]
    scores = classify_images(ckpt.spec, ckpt.params, frames)
    preds = [prediction_from_scores(r.path, s, label_space)
             for r, s in zip(manifest.splits[split], scores)]
    payload = {
        "split": split,
        "checkpoint": str(source),
        "predictions": [{"capture": p.capture, "label": p.label,
                         "scores": [round(float(v), 8) for v in p.scores]}
                        for p in preds],
    }
    path = _paths(cfg.out)["reports"] / f"predictions_{split}.json"
    write_atomic(path, _dump_json(payload))
    return path


def _load_predictions(path: Path) -> tuple[str, list[Prediction]]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    preds = [Prediction(p["capture"], p["label"], tuple(p.get("scores", ())))
             for p in raw["predictions"]]
    return raw["split"], preds


def stage_evaluate(cfg: ExperimentConfig, splits: list[str] | None = None) -> Path:
    manifest = load_manifest(manifest_path(cfg.out))
    names = splits or sorted(manifest.splits)
    split_preds: dict[str, list[Prediction]] = {}
    split_records = {}
    for name in names:
        pred_path = _paths(cfg.out)["reports"] / f"predictions_{name}.json"
        if not pred_path.is_file():
            raise FileNotFoundError(f"predictions not found: {pred_path}")
        _, preds = _load_predictions(pred_path)
        split_preds[name] = preds
        split_records[name] = manifest.splits[name]
    report = build_eval_report(split_preds, split_records, manifest, k_max=cfg.k_max,
                               config=cfg.resolved())
    path = _paths(cfg.out)["reports"] / "eval_report.json"
    write_atomic(path, _dump_json(report.to_json()))
    return path


def _report_from_json(raw: dict) -> EvalReport:
    visits = {}
    for name, vr in raw.get("visit_records", {}).items():
        rec = VisitRecord()
        for aid, info in vr.get("artworks", {}).items():
            rec.counts[aid] = info["count"]
            rec.first_step[aid] = info["first"]
            rec.last_step[aid] = info["last"]
        rec.sequence = [(t, aid) for t, aid in vr.get("sequence", [])]
        visits[name] = rec
    return EvalReport(split_curves=dict(raw["splits"]), mean_curve=raw["mean"],
                      std_curve=raw["std"], coverage=raw["coverage"],
                      visit_records=visits, config=raw.get("config", {}))


def emit_report(report: EvalReport, out_dir: Path) -> list[Path]:
    """Write eval_report.json/.csv/.svg atomically; returns the paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, data in (("eval_report.json", _dump_json(report.to_json())),
                       ("eval_report.csv", report_to_csv(report)),
                       ("eval_report.svg", report_to_svg(report))):
        path = out_dir / name
        write_atomic(path, data)
        written.append(path)
    return written


def stage_report(cfg: ExperimentConfig) -> list[Path]:
    path = _paths(cfg.out)["reports"] / "eval_report.json"
    if not path.is_file():
        raise FileNotFoundError(f"evaluation report not found: {path}")
    report = _report_from_json(json.loads(path.read_text(encoding="utf-8")))
    return emit_report(report, _paths(cfg.out)["reports"])


def stage_full_run(cfg: ExperimentConfig, pretrained_path: Path | None = None) -> Path:
    write_atomic(_paths(cfg.out)["reports"] / "config.json", _dump_json(cfg.resolved()))
    stage_gen_gallery(cfg)
    n_splits = int(cfg.visit.get("n_splits", 2))
    for i in range(n_splits):
        stage_gen_visit(cfg, f"sp{i + 1}", _stage_seed(cfg.seed, 2, i))
    if pretrained_path is None:
        pretrained_path = stage_pretrain(cfg)
    stage_finetune(cfg, pretrained_path)
    manifest = load_manifest(manifest_path(cfg.out))
    for split in sorted(manifest.splits):
        stage_predict(cfg, split)
    stage_evaluate(cfg)
    stage_report(cfg)
    return _paths(cfg.out)["reports"] / "eval_report.json"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="galleryscope",
        description="Synthetic gallery experiments: generate, train, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--preset", choices=["paintings-like", "clocks-like",
                                            "sculptures-like"])
        p.add_argument("--seed", type=int)

    p = sub.add_parser("gen-gallery", help="generate a synthetic gallery")
    common(p)
    p.add_argument("--instances", type=int)
    p.add_argument("--views", type=int)
    p.add_argument("--image-size", type=int, dest="image_size")

    p = sub.add_parser("gen-visit", help="simulate a wearable-camera visit split")
    common(p)
    p.add_argument("--split", required=True, help="split name to create")
    p.add_argument("--visit-seed", type=int, dest="visit_seed")

    p = sub.add_parser("pretrain", help="pre-train on the generic shape set")
    common(p)

    p = sub.add_parser("finetune", help="fine-tune with leave-one-split-out CV")
    common(p)
    p.add_argument("--pretrained", help="path to the pretrained checkpoint")

    p = sub.add_parser("predict", help="classify one split's frames")
    common(p)
    p.add_argument("--split", required=True)
    p.add_argument("--checkpoint", help="checkpoint path override")

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    common(p)
    p.add_argument("--splits", nargs="*", help="subset of splits to evaluate")
    p.add_argument("--k-max", type=int, dest="k_max")

    p = sub.add_parser("report", help="emit CSV and SVG from the evaluation report")
    common(p)

    p = sub.add_parser("full-run", help="run the whole pipeline")
    common(p)
    p.add_argument("--instances", type=int)
    p.add_argument("--views", type=int)
    p.add_argument("--image-size", type=int, dest="image_size")
    p.add_argument("--pretrained", help="reuse an existing pretrained checkpoint")
    return parser


def run_subcommand(argv: list[str]) -> int:
    """Execute one subcommand; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args)
        if args.command == "gen-gallery":
            manifest = stage_gen_gallery(cfg)
            print(f"gallery: {len(manifest.instances)} instances, "
                  f"{len(manifest.training_images)} training images -> {cfg.out}")
        elif args.command == "gen-visit":
            seed = args.visit_seed if args.visit_seed is not None \
                else _stage_seed(cfg.seed, 2, zlib.crc32(args.split.encode()))
            manifest = stage_gen_visit(cfg, args.split, seed)
            print(f"visit {args.split}: {len(manifest.splits[args.split])} captures")
        elif args.command == "pretrain":
            path = stage_pretrain(cfg)
            print(f"pretrained checkpoint -> {path}")
        elif args.command == "finetune":
            outputs = stage_finetune(
                cfg, Path(args.pretrained) if args.pretrained else None)
            for split, path in sorted(outputs.items()):
                print(f"finetuned (held-out {split}) -> {path}")
        elif args.command == "predict":
            path = stage_predict(
                cfg, args.split, Path(args.checkpoint) if args.checkpoint else None)
            print(f"predictions -> {path}")
        elif args.command == "evaluate":
            path = stage_evaluate(cfg, args.splits or None)
            print(f"evaluation report -> {path}")
        elif args.command == "report":
            for path in stage_report(cfg):
                print(f"report -> {path}")
        elif args.command == "full-run":
            path = stage_full_run(
                cfg, Path(args.pretrained) if args.pretrained else None)
            report = json.loads(path.read_text(encoding="utf-8"))
            print(f"full run complete: top-1 mean {report['top1_mean']}, "
                  f"coverage {report['coverage_percent']} -> {path}")
        return 0
    except (ManifestError, CheckpointError, ImageLoadError, TrainingDivergedError,
            FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
