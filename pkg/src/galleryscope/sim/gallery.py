"""Synthetic gallery generation: procedural artworks placed on walls, training
views photographed from jittered viewpoints, background/distractor inventories,
and the manifest tying it all together.

Everything is a pure function of (arguments, seed); per-instance texture seeds
are spawned from the master seed and stored in the manifest so later stages
can re-render artworks deterministically without carrying pixel data around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import (
    ArtworkInstance,
    DisplayZone,
    GalleryManifest,
    TrainingImage,
)
from .texture import (
    N_CANONICAL_VIEWS,
    render_artwork_texture,
    render_background,
    render_canonical_view,
    render_description_plaque,
)
from .warp import homography_from_points, resize_bilinear, warp_homography

MAX_INSTANCES = 10_000          # texture-seed distinctness budget
WALL_GAP = 0.6                  # world units between artworks on a wall
MIN_VIEWS, MAX_VIEWS = 2, 6
FRONTAL_ORDER = (0, 1, 7, 2, 6, 3)   # canonical views sorted by closeness to frontal


@dataclass
class SyntheticArtwork:
    """One generated piece: identity plus its canonical renders."""

    instance: ArtworkInstance
    base_renders: list[np.ndarray] = field(default_factory=list)

    @property
    def id(self) -> str:
        return self.instance.id

    @property
    def kind(self) -> str:
        return self.instance.kind

    @property
    def texture_seed(self) -> int:
        return self.instance.texture_seed


def render_artwork(instance: ArtworkInstance, image_size: int) -> SyntheticArtwork:
    """Re-render an artwork's canonical views from its stored texture seed."""
    base = render_artwork_texture(image_size, instance.texture_seed)
    if instance.kind == "planar":
        renders = [base]
    else:
        renders = [render_canonical_view(base, v) for v in range(N_CANONICAL_VIEWS)]
    return SyntheticArtwork(instance=instance, base_renders=renders)


def render_training_views(artwork: SyntheticArtwork, n_views: int, seed: int,
                          image_size: int | None = None,
                          jitter: float = 0.08) -> list[np.ndarray]:
    """Photograph an artwork from n_views viewpoints and distances.

    Planar pieces get random small homographies, non-planar pieces a choice of
    canonical views; both get scale variation over a room backdrop. With
    jitter=0 every view is exactly the frontal base render (the identity warp).
    """
    if not MIN_VIEWS <= n_views <= MAX_VIEWS:
        raise ValueError(f"n_views must be {MIN_VIEWS}..{MAX_VIEWS}, got {n_views}")
    base = artwork.base_renders[0]
    size = image_size if image_size is not None else base.shape[0]
    rng = np.random.default_rng(seed)
    views: list[np.ndarray] = []
    for v in range(n_views):
        if jitter == 0.0:
            views.append(resize_bilinear(base, (size, size)))
            continue
        corners = np.array([[0, 0], [size - 1, 0], [size - 1, size - 1], [0, size - 1]],
                           dtype=np.float64)
        if artwork.kind == "planar":
            render = base
            disp = rng.uniform(-jitter, jitter, (4, 2)) * size
        else:
            # walk outward from the frontal view so view 0 is always frontal
            render = artwork.base_renders[FRONTAL_ORDER[v % len(FRONTAL_ORDER)]]
            disp = rng.uniform(-jitter / 2, jitter / 2, (4, 2)) * size
        scale = float(rng.uniform(0.65, 0.97))
        backdrop = render_background(size, int(rng.integers(0, 2 ** 31)))
        render = resize_bilinear(render, (size, size))
        warped, valid = warp_homography(render, homography_from_points(corners, corners + disp))
        side = max(2, int(round(scale * size)))
        small = resize_bilinear(warped, (side, side))
        small_valid = resize_bilinear((valid * 255).astype(np.uint8), (side, side)) > 127
        x0 = (size - side) // 2 + int(rng.integers(-max(1, (size - side) // 3 + 1),
                                                   max(1, (size - side) // 3 + 1)))
        y0 = (size - side) // 2
        x0 = max(0, min(x0, size - side))
        canvas = backdrop
        region = canvas[y0:y0 + side, x0:x0 + side]
        np.copyto(region, small, where=small_valid[..., None])
        views.append(canvas)
    return views


def _spread_over_walls(n: int, walls: int) -> list[int]:
    # 2 walls means the FACING pair (0 and 2) so zigzag routes cross the room
    ids = {1: (0,), 2: (0, 2), 3: (0, 1, 2), 4: (0, 1, 2, 3)}.get(walls)
    if ids is None:
        raise ValueError(f"walls must be 1..4, got {walls}")
    return [ids[i % len(ids)] for i in range(n)]


@dataclass
class GalleryBuild:
    """generate_gallery output: the manifest plus every rendered pixel."""

    manifest: GalleryManifest
    artworks: list[SyntheticArtwork]
    images: dict[str, np.ndarray]            # path -> uint8 [H,W,3], training inventory

    @property
    def base_renders(self) -> dict[str, list[np.ndarray]]:
        return {a.id: a.base_renders for a in self.artworks}


def generate_gallery(n_instances: int, kind_mix: str | float, image_size: int, seed: int,
                     views_per_instance: int | None = None,
                     n_background: int = 8, n_distractor: int = 0,
                     n_descriptions: int = 0, walls: int = 1,
                     view_jitter: float = 0.08) -> GalleryBuild:
    """Generate a gallery: distinct procedural artworks, training views, and
    background (plus optional distractor/description) images.

    kind_mix: "planar", "nonplanar", or the fraction of planar pieces (0..1).
    views_per_instance: fixed view count, or None to sample 2..6 per instance.
    """
    if n_instances < 1:
        raise ValueError(f"n_instances must be >= 1, got {n_instances}")
    if n_instances > MAX_INSTANCES:
        raise ValueError(
            f"n_instances {n_instances} exceeds the distinctness budget {MAX_INSTANCES}")
    if isinstance(kind_mix, str):
        if kind_mix not in ("planar", "nonplanar"):
            raise ValueError(f"kind_mix must be planar|nonplanar|fraction, got {kind_mix!r}")
        planar_frac = 1.0 if kind_mix == "planar" else 0.0
    else:
        planar_frac = float(kind_mix)
        if not 0.0 <= planar_frac <= 1.0:
            raise ValueError(f"kind_mix fraction must be in [0,1], got {planar_frac}")

    master = np.random.SeedSequence(seed)
    texture_seeds = master.generate_state(n_instances + 1, np.uint64)
    rng = np.random.default_rng(master.spawn(1)[0])

    n_planar = int(round(planar_frac * n_instances))
    wall_of = _spread_over_walls(n_instances, walls)
    sizes = rng.uniform(0.75, 1.25, n_instances)

    # positions: pack artworks along each wall with fixed gaps
    per_wall: dict[int, list[int]] = {}
    for i, wll in enumerate(wall_of):
        per_wall.setdefault(wll, []).append(i)
    positions = np.zeros(n_instances)
    wall_lengths: dict[int, float] = {}
    for wll, idxs in per_wall.items():
        length = sum(sizes[i] for i in idxs) + WALL_GAP * (len(idxs) + 1)
        wall_lengths[wll] = length
        cursor = WALL_GAP
        for i in idxs:
            positions[i] = (cursor + sizes[i] / 2) / length
            cursor += sizes[i] + WALL_GAP

    instances = []
    for i in range(n_instances):
        kind = "planar" if i < n_planar else "nonplanar"
        zone = DisplayZone(wall=wall_of[i], position=float(positions[i]), size=float(sizes[i]))
        instances.append(ArtworkInstance(
            id=f"art_{i:04d}", kind=kind, display_zone=zone,
            texture_seed=int(texture_seeds[i])))

    artworks = [render_artwork(inst, image_size) for inst in instances]

    # pairwise distinctness is audited in tests; seeds alone guarantee it here
    training_images: list[TrainingImage] = []
    images: dict[str, np.ndarray] = {}
    view_seed_root = np.random.SeedSequence(int(texture_seeds[-1]))
    view_seeds = view_seed_root.generate_state(n_instances + 3, np.uint64)
    for i, art in enumerate(artworks):
        n_views = views_per_instance if views_per_instance is not None \
            else int(rng.integers(MIN_VIEWS, MAX_VIEWS + 1))
        views = render_training_views(art, n_views, int(view_seeds[i]),
                                      image_size=image_size, jitter=view_jitter)
        for v, img in enumerate(views):
            path = f"images/train/{art.id}_v{v}.png"
            training_images.append(TrainingImage(path, art.id, v))
            images[path] = img

    aux = ["background"]
    bg_rng = np.random.default_rng(int(view_seeds[-3]))
    for j in range(n_background):
        path = f"images/train/background_{j:03d}.png"
        training_images.append(TrainingImage(path, "background", j))
        images[path] = render_background(image_size, int(bg_rng.integers(0, 2 ** 31)))

    if n_distractor > 0:
        aux.append("distractor")
        d_rng = np.random.default_rng(int(view_seeds[-2]))
        for j in range(n_distractor):
            path = f"images/train/distractor_{j:03d}.png"
            training_images.append(TrainingImage(path, "distractor", j))
            images[path] = render_artwork_texture(image_size, int(d_rng.integers(0, 2 ** 31)))

    if n_descriptions > 0:
        aux.append("descriptions")
        p_rng = np.random.default_rng(int(view_seeds[-1]))
        for j in range(n_descriptions):
            path = f"images/train/descriptions_{j:03d}.png"
            training_images.append(TrainingImage(path, "descriptions", j))
            images[path] = render_description_plaque(image_size, int(p_rng.integers(0, 2 ** 31)))

    n_instance_images = sum(1 for t in training_images if t.label not in aux)
    parts = {"instances": n_instance_images, "background": n_background}
    if n_distractor > 0:
        parts["distractor"] = n_distractor
    if n_descriptions > 0:
        parts["descriptions"] = n_descriptions
    manifest = GalleryManifest(
        instances=instances,
        auxiliary_categories=aux,
        training_images=training_images,
        splits={},
        declared_totals={"training": {"total": sum(parts.values()), "parts": parts}},
    )
    return GalleryBuild(manifest=manifest, artworks=artworks, images=images)


def wall_length(manifest: GalleryManifest, wall: int) -> float:
    """Wall extent implied by the packing rule; shared with the visit simulator."""
    sizes = [a.display_zone.size for a in manifest.instances if a.display_zone.wall == wall]
    if not sizes:
        return 4.0
    return sum(sizes) + WALL_GAP * (len(sizes) + 1)
