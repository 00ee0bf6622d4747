"""Scenario presets mapping the three exhibition-space case studies.

paintings-like:  planar pieces, a clear linear route, mild capture artifacts.
clocks-like:     non-planar pieces behind glass seen frontally up close, heavy
                 glare, dim interior (low-light gain + sensor noise).
sculptures-like: non-planar pieces approached on a zigzag between facing
                 walls, cluttered frames, frequent occlusion, farther dwell.
The degradation magnitudes are artifact calibration, chosen so measured
difficulty orders paintings >= clocks >= sculptures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .degrade import DegradationConfig
from .visit import VisitPlan

PRESET_NAMES = ("paintings-like", "clocks-like", "sculptures-like")


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    kind_mix: str
    plan: VisitPlan
    degradations: DegradationConfig
    walls: int = 1
    n_background: int = 6
    n_distractor: int = 0
    n_descriptions: int = 0
    gallery_view_jitter: float = 0.08
    hyper: dict = field(default_factory=dict)   # desk-scale fine-tuning grid


def get_preset(name: str) -> ScenarioPreset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}") from None


_PRESETS = {
    "paintings-like": ScenarioPreset(
        name="paintings-like",
        kind_mix="planar",
        walls=1,
        n_distractor=10,
        plan=VisitPlan(pattern="linear-route", dwell_min=2, dwell_max=5,
                       capture_interval_steps=2, walk_depth=2.2, approach_depth=1.15),
        degradations=DegradationConfig(
            perspective_jitter=0.04,
            truncation_prob=0.1,
            occluder_prob=0.1, occluder_max_area=0.2,
            glare_prob=0.05, glare_intensity=140.0,
            motionblur_len=3,
            sp_noise_density=0.01,
            lowlight_gain=1.0,
        ),
        hyper={"lr": 0.01, "momentum": 0.9, "batch_size": 16, "epochs": 14},
    ),
    "clocks-like": ScenarioPreset(
        name="clocks-like",
        kind_mix="nonplanar",
        walls=1,
        plan=VisitPlan(pattern="linear-route", dwell_min=2, dwell_max=5,
                       capture_interval_steps=2, walk_depth=2.0, approach_depth=1.1),
        degradations=DegradationConfig(
            perspective_jitter=0.05,
            truncation_prob=0.15,
            occluder_prob=0.2, occluder_max_area=0.25,
            glare_prob=0.55, glare_intensity=220.0,
            motionblur_len=5,
            sp_noise_density=0.03,
            lowlight_gain=0.8,
        ),
        hyper={"lr": 0.01, "momentum": 0.9, "batch_size": 16, "epochs": 14},
    ),
    "sculptures-like": ScenarioPreset(
        name="sculptures-like",
        kind_mix="nonplanar",
        walls=2,
        n_descriptions=6,
        gallery_view_jitter=0.1,
        plan=VisitPlan(pattern="zigzag", dwell_min=2, dwell_max=4,
                       capture_interval_steps=2, walk_depth=2.6, approach_depth=1.5),
        degradations=DegradationConfig(
            perspective_jitter=0.07,
            truncation_prob=0.2,
            occluder_prob=0.35, occluder_max_area=0.35,
            glare_prob=0.15, glare_intensity=160.0,
            motionblur_len=5,
            sp_noise_density=0.02,
            lowlight_gain=0.85,
            clutter=2,
        ),
        hyper={"lr": 0.01, "momentum": 0.9, "batch_size": 16, "epochs": 14},
    ),
}
