"""Gallery manifests: the label universe, image inventories, splits, and the
ordered per-frame ground truth.

Manifest file format (UTF-8 JSON, paths relative to the manifest's directory,
images 8-bit RGB PNG):

    {
      "instances":            [{"id", "kind", "display_zone", "texture_seed"}, ...],
      "auxiliary_categories": ["background", "distractor", ...],
      "training_images":      [{"path", "label", "view"}, ...],
      "splits":               {"sp1": [{"path", "t", "ordered_gt"}, ...], ...},
      "declared_totals":      {"training": {"total": N, "parts": {...}}, ...}
    }

Each declared total must equal the sum of its parts; part keys that name a
known inventory ("instances", an auxiliary category, or a split name) must
also match the actual count. Manifests are immutable after load and safe to
share across threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

AUX_ORDER = ("background", "distractor", "descriptions")
KINDS = ("planar", "nonplanar")
MIN_VIEWS, MAX_VIEWS = 2, 6


class ManifestError(ValueError):
    """Raised when a manifest fails to parse or validate."""


@dataclass(frozen=True)
class DisplayZone:
    """Placement in the gallery floorplan: wall index, fraction along it, size."""

    wall: int = 0
    position: float = 0.5
    size: float = 1.0

    def to_json(self) -> dict:
        return {"wall": self.wall, "position": self.position, "size": self.size}

    @staticmethod
    def from_json(d: dict) -> "DisplayZone":
        return DisplayZone(int(d["wall"]), float(d["position"]), float(d["size"]))


@dataclass(frozen=True)
class ArtworkInstance:
    id: str
    kind: str                      # planar | nonplanar
    display_zone: DisplayZone = DisplayZone()
    texture_seed: int = 0

    def to_json(self) -> dict:
        return {"id": self.id, "kind": self.kind, "display_zone": self.display_zone.to_json(),
                "texture_seed": self.texture_seed}

    @staticmethod
    def from_json(d: dict) -> "ArtworkInstance":
        return ArtworkInstance(str(d["id"]), str(d["kind"]),
                               DisplayZone.from_json(d.get("display_zone", {})),
                               int(d.get("texture_seed", 0)))


@dataclass(frozen=True)
class TrainingImage:
    path: str
    label: str
    view: int = 0

    def to_json(self) -> dict:
        return {"path": self.path, "label": self.label, "view": self.view}

    @staticmethod
    def from_json(d: dict) -> "TrainingImage":
        return TrainingImage(str(d["path"]), str(d["label"]), int(d.get("view", 0)))


@dataclass(frozen=True)
class CaptureRecord:
    """One wearable-camera frame: path, capture step, most-to-least-visible labels."""

    path: str
    t: int
    ordered_gt: tuple[str, ...]

    def to_json(self) -> dict:
        return {"path": self.path, "t": self.t, "ordered_gt": list(self.ordered_gt)}

    @staticmethod
    def from_json(d: dict) -> "CaptureRecord":
        return CaptureRecord(str(d["path"]), int(d["t"]), tuple(d["ordered_gt"]))


@dataclass
class GalleryManifest:
    instances: list[ArtworkInstance]
    auxiliary_categories: list[str]
    training_images: list[TrainingImage]
    splits: dict[str, list[CaptureRecord]]
    declared_totals: dict = field(default_factory=dict)
    root: Path | None = None       # directory paths are relative to; not serialized

    def instance_ids(self) -> list[str]:
        return [a.id for a in self.instances]

    def to_json(self) -> dict:
        return {
            "instances": [a.to_json() for a in self.instances],
            "auxiliary_categories": list(self.auxiliary_categories),
            "training_images": [t.to_json() for t in self.training_images],
            "splits": {name: [r.to_json() for r in recs] for name, recs in self.splits.items()},
            "declared_totals": self.declared_totals,
        }

    @staticmethod
    def from_json(d: dict) -> "GalleryManifest":
        return GalleryManifest(
            instances=[ArtworkInstance.from_json(a) for a in d.get("instances", [])],
            auxiliary_categories=list(d.get("auxiliary_categories", [])),
            training_images=[TrainingImage.from_json(t) for t in d.get("training_images", [])],
            splits={name: [CaptureRecord.from_json(r) for r in recs]
                    for name, recs in d.get("splits", {}).items()},
            declared_totals=dict(d.get("declared_totals", {})),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, GalleryManifest):
            return NotImplemented
        return self.to_json() == other.to_json()


def serialize_manifest(manifest: GalleryManifest) -> str:
    return json.dumps(manifest.to_json(), indent=1, sort_keys=True)


def manifest_hash(manifest: GalleryManifest) -> str:
    return hashlib.sha256(serialize_manifest(manifest).encode()).hexdigest()


def save_manifest(manifest: GalleryManifest, path: str | Path) -> None:
    Path(path).write_text(serialize_manifest(manifest) + "\n", encoding="utf-8")


def validate_manifest(manifest: GalleryManifest) -> list[str]:
    """Check every manifest invariant; returns violations (empty list = valid)."""
    v: list[str] = []
    ids = manifest.instance_ids()
    if not ids:
        v.append("instances: must not be empty")
    seen: set[str] = set()
    for a in manifest.instances:
        if a.id in seen:
            v.append(f"instances: duplicate id {a.id!r}")
        seen.add(a.id)
        if a.kind not in KINDS:
            v.append(f"instances[{a.id}].kind: {a.kind!r} not one of {KINDS}")

    for cat in manifest.auxiliary_categories:
        if cat not in AUX_ORDER:
            v.append(f"auxiliary_categories: unknown category {cat!r}")

    valid_labels = set(ids) | set(manifest.auxiliary_categories)
    views_per_instance: dict[str, int] = {}
    for i, t in enumerate(manifest.training_images):
        if t.label not in valid_labels:
            v.append(f"training_images[{i}].label: {t.label!r} is neither an instance id "
                     f"nor a declared auxiliary category")
        if t.label in seen:
            views_per_instance[t.label] = views_per_instance.get(t.label, 0) + 1
    for inst_id, n in sorted(views_per_instance.items()):
        if not MIN_VIEWS <= n <= MAX_VIEWS:
            v.append(f"training_images: instance {inst_id!r} has {n} views, "
                     f"expected {MIN_VIEWS}..{MAX_VIEWS}")
    for inst_id in ids:
        if manifest.training_images and inst_id not in views_per_instance:
            v.append(f"training_images: instance {inst_id!r} has no training views")

    for name, records in manifest.splits.items():
        for j, rec in enumerate(records):
            where = f"splits[{name}][{j}]"
            if not rec.ordered_gt:
                v.append(f"{where}.ordered_gt: must not be empty")
            if len(set(rec.ordered_gt)) != len(rec.ordered_gt):
                v.append(f"{where}.ordered_gt: duplicate labels {list(rec.ordered_gt)}")
            for label in rec.ordered_gt:
                if label not in valid_labels:
                    v.append(f"{where}.ordered_gt: unknown label {label!r}")
            if rec.t < 0:
                v.append(f"{where}.t: negative capture step {rec.t}")

    v.extend(_validate_totals(manifest, valid_labels))
    return v


def _validate_totals(manifest: GalleryManifest, valid_labels: set[str]) -> list[str]:
    v: list[str] = []
    label_counts: dict[str, int] = {}
    n_instance_images = 0
    for t in manifest.training_images:
        label_counts[t.label] = label_counts.get(t.label, 0) + 1
        if t.label not in manifest.auxiliary_categories:
            n_instance_images += 1

    for name, entry in manifest.declared_totals.items():
        if not isinstance(entry, dict) or "total" not in entry:
            v.append(f"declared_totals[{name}]: must be an object with 'total'")
            continue
        total = int(entry["total"])
        parts = {k: int(n) for k, n in entry.get("parts", {}).items()}
        if parts and sum(parts.values()) != total:
            v.append(f"declared_totals[{name}]: total {total} != sum of parts "
                     f"{sum(parts.values())} ({parts})")
        for key, n in parts.items():
            actual: int | None = None
            if key == "instances":
                actual = n_instance_images
            elif key in manifest.auxiliary_categories:
                actual = label_counts.get(key, 0)
            elif key in manifest.splits:
                actual = len(manifest.splits[key])
            if actual is not None and actual != n:
                v.append(f"declared_totals[{name}].parts[{key}]: declared {n} "
                         f"but inventory holds {actual}")
        if not parts:
            # a bare total must match a same-named inventory, if one exists
            if name == "training" and len(manifest.training_images) != total:
                v.append(f"declared_totals[training]: declared {total} but inventory holds "
                         f"{len(manifest.training_images)}")
            elif name == "testing":
                actual = sum(len(r) for r in manifest.splits.values())
                if actual != total:
                    v.append(f"declared_totals[testing]: declared {total} but inventory holds "
                             f"{actual}")
    return v


def load_manifest(path: str | Path) -> GalleryManifest:
    """Parse and fully validate a manifest file."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {path} is not valid JSON: {e}") from e
    try:
        manifest = GalleryManifest.from_json(raw)
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"manifest {path} has a malformed field: {e}") from e
    manifest.root = path.parent
    violations = validate_manifest(manifest)
    if violations:
        raise ManifestError(
            f"manifest {path} failed validation:\n  " + "\n  ".join(violations))
    return manifest


@dataclass(frozen=True)
class LabelSpace:
    """Bijection between class labels and indices 0..C-1: instance ids in
    lexicographic order, then auxiliary categories in fixed order."""

    labels: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._lookup[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in label space") from None

    @property
    def _lookup(self) -> dict[str, int]:
        d = self.__dict__.get("_lookup_cache")
        if d is None:
            d = {label: i for i, label in enumerate(self.labels)}
            self.__dict__["_lookup_cache"] = d
        return d

    def label(self, index: int) -> str:
        return self.labels[index]


def build_label_space(manifest: GalleryManifest) -> LabelSpace:
    aux = [c for c in AUX_ORDER if c in manifest.auxiliary_categories]
    return LabelSpace(tuple(sorted(manifest.instance_ids())) + tuple(aux))
