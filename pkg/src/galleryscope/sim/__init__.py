from .degrade import EFFECT_ORDER, DegradationConfig, apply_degradations
from .gallery import (
    FRONTAL_ORDER,
    MAX_INSTANCES,
    GalleryBuild,
    SyntheticArtwork,
    generate_gallery,
    render_artwork,
    render_training_views,
    wall_length,
)
from .presets import PRESET_NAMES, ScenarioPreset, get_preset
from .texture import (
    N_CANONICAL_VIEWS,
    render_artwork_texture,
    render_background,
    render_canonical_view,
    render_description_plaque,
)
from .visit import VisitPlan, VisitResult, simulate_visit
from .warp import homography_from_points, resize_bilinear, rotate_image, warp_homography

__all__ = [
    "DegradationConfig", "apply_degradations", "EFFECT_ORDER",
    "GalleryBuild", "SyntheticArtwork", "generate_gallery", "render_artwork",
    "render_training_views", "wall_length", "MAX_INSTANCES", "FRONTAL_ORDER",
    "ScenarioPreset", "get_preset", "PRESET_NAMES",
    "render_artwork_texture", "render_background", "render_canonical_view",
    "render_description_plaque", "N_CANONICAL_VIEWS",
    "VisitPlan", "VisitResult", "simulate_visit",
    "homography_from_points", "resize_bilinear", "rotate_image", "warp_homography",
]
