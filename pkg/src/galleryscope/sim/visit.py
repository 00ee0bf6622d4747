"""Wearable-camera visit simulation.

The gallery is a rectangular room; artworks hang on walls at the positions the
manifest declares. The visitor follows a walk pattern (linear route along one
wall, a perimeter loop, or a zigzag between facing walls), pausing in front of
pieces, and the camera grabs a frame every `capture_interval_steps` steps.

Each frame is composited with a pinhole model: at depth d, one world unit
spans f/d pixels (f = frame width), artworks project onto the faced wall's
backdrop, and the most-to-least-visible ground truth comes from the
compositor's own clipped projected areas. Degradations then apply per frame
with an RNG spawned from the master seed by frame index, so rendering is
bit-identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._parallel import parallel_map
from ..data import CaptureRecord, GalleryManifest
from .degrade import DegradationConfig, apply_degradations
from .gallery import render_artwork, wall_length
from .texture import N_CANONICAL_VIEWS, render_wall_backdrop
from .warp import _sample_bilinear, _to_uint8, resize_bilinear

ROOM_DEPTH = 5.0            # distance between facing walls 0 and 2
BACKDROP_RES = 48           # backdrop pixels per world unit
BACKDROP_HEIGHT = 3.0       # world units of wall the backdrop strip covers
MIN_VISIBLE_FRAC = 0.005    # clipped area below this fraction of the frame is "not visible"

PATTERNS = ("linear-route", "perimeter-loop", "zigzag")


@dataclass(frozen=True)
class VisitPlan:
    pattern: str = "linear-route"
    dwell_min: int = 2
    dwell_max: int = 5
    capture_interval_steps: int = 2
    walk_depth: float = 2.2
    approach_depth: float = 1.15
    step_len: float = 0.35
    direction: str = "cw"        # perimeter loops only

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if self.capture_interval_steps < 1:
            raise ValueError(
                f"capture_interval_steps must be >= 1, got {self.capture_interval_steps}")
        if not 1 <= self.dwell_min <= self.dwell_max:
            raise ValueError(f"bad dwell range [{self.dwell_min}, {self.dwell_max}]")
        if self.approach_depth <= 0 or self.walk_depth <= 0 or self.step_len <= 0:
            raise ValueError("depths and step length must be positive")
        if self.direction not in ("cw", "ccw"):
            raise ValueError(f"direction must be cw|ccw, got {self.direction!r}")

    def to_json(self) -> dict:
        return {
            "pattern": self.pattern, "dwell_min": self.dwell_min, "dwell_max": self.dwell_max,
            "capture_interval_steps": self.capture_interval_steps,
            "walk_depth": self.walk_depth, "approach_depth": self.approach_depth,
            "step_len": self.step_len, "direction": self.direction,
        }

    @staticmethod
    def from_json(d: dict) -> "VisitPlan":
        return VisitPlan(**d)


@dataclass(frozen=True)
class _State:
    wall: int
    along: float
    depth: float


@dataclass
class VisitResult:
    records: list[CaptureRecord]
    frames: list[np.ndarray]
    effects_log: list[dict]
    split_name: str


def _route_walls(manifest: GalleryManifest, plan: VisitPlan) -> list[int]:
    walls = sorted({a.display_zone.wall for a in manifest.instances})
    if plan.pattern == "linear-route":
        return walls[:1]
    if plan.pattern == "perimeter-loop":
        return walls if plan.direction == "cw" else list(reversed(walls))
    return walls  # zigzag alternates over them per artwork


def _waypoints(manifest: GalleryManifest, plan: VisitPlan,
               rng: np.random.Generator) -> list[tuple[_State, int]]:
    """(state, dwell_steps) stops, including artwork approaches and wall margins."""
    lengths = {w: wall_length(manifest, w) for w in
               {a.display_zone.wall for a in manifest.instances}}
    by_wall: dict[int, list] = {}
    for art in manifest.instances:
        z = art.display_zone
        by_wall.setdefault(z.wall, []).append((z.position * lengths[z.wall], art))
    for stops in by_wall.values():
        stops.sort(key=lambda s: s[0])

    points: list[tuple[_State, int]] = []
    if plan.pattern == "zigzag":
        walls = sorted(by_wall)
        queues = {w: list(by_wall[w]) for w in walls}
        first = walls[0]
        points.append((_State(first, -1.0, plan.walk_depth), 1))
        side = 0
        while any(queues.values()):
            wall = walls[side % len(walls)]
            side += 1
            if not queues[wall]:
                continue
            along, art = queues[wall].pop(0)
            dwell = int(rng.integers(plan.dwell_min, plan.dwell_max + 1))
            points.append((_State(wall, along, plan.walk_depth), 1))
            points.append((_State(wall, along, plan.approach_depth), dwell))
        last_wall = points[-1][0].wall
        points.append((_State(last_wall, lengths[last_wall] + 1.0, plan.walk_depth), 1))
        return points

    for wall in _route_walls(manifest, plan):
        stops = by_wall.get(wall, [])
        if plan.pattern == "perimeter-loop" and plan.direction == "ccw":
            stops = list(reversed(stops))
        entry = -1.0 if not (plan.pattern == "perimeter-loop" and plan.direction == "ccw") \
            else lengths[wall] + 1.0
        exit_ = lengths[wall] + 1.0 if entry == -1.0 else -1.0
        points.append((_State(wall, entry, plan.walk_depth), 1))
        for along, art in stops:
            dwell = int(rng.integers(plan.dwell_min, plan.dwell_max + 1))
            points.append((_State(wall, along, plan.walk_depth), 1))
            points.append((_State(wall, along, plan.approach_depth), dwell))
            points.append((_State(wall, along, plan.walk_depth), 1))
        points.append((_State(wall, exit_, plan.walk_depth), 1))
    return points


def _trajectory(points: list[tuple[_State, int]], plan: VisitPlan) -> list[_State]:
    steps: list[_State] = []
    prev: _State | None = None
    for state, dwell in points:
        if prev is not None:
            if state.wall == prev.wall:
                dist = np.hypot(state.along - prev.along, state.depth - prev.depth)
                n = max(1, int(np.ceil(dist / plan.step_len)))
                for i in range(1, n):
                    t = i / n
                    steps.append(_State(state.wall,
                                        prev.along + t * (state.along - prev.along),
                                        prev.depth + t * (state.depth - prev.depth)))
            else:
                # crossing: face the target wall from across the room, then close in
                start_depth = min(ROOM_DEPTH - prev.depth, ROOM_DEPTH - 0.5)
                dist = abs(start_depth - state.depth) + abs(state.along - prev.along)
                n = max(1, int(np.ceil(dist / plan.step_len)))
                for i in range(1, n):
                    t = i / n
                    steps.append(_State(state.wall,
                                        prev.along + t * (state.along - prev.along),
                                        start_depth + t * (state.depth - start_depth)))
        steps.extend([state] * max(1, dwell))
        prev = state
    return steps


def _project(state: _State, manifest: GalleryManifest, lengths: dict[int, float],
             frame_hw: tuple[int, int]) -> list[dict]:
    """Visible artworks for one camera state, clipped to the frame."""
    fh, fw = frame_hw
    f = float(fw)  # focal length in pixels: 1 world unit spans fw px at depth 1
    visible = []
    for art in manifest.instances:
        z = art.display_zone
        if z.wall != state.wall:
            continue
        along = z.position * lengths[z.wall]
        cx = fw / 2.0 + f * (along - state.along) / state.depth
        side = f * z.size / state.depth
        phi = np.arctan2(along - state.along, state.depth)
        if art.kind == "planar":
            w_px = side * float(np.cos(phi))
        else:
            w_px = side
        h_px = side
        x0, x1 = cx - w_px / 2, cx + w_px / 2
        y0, y1 = fh / 2.0 - h_px / 2, fh / 2.0 + h_px / 2
        cw = min(x1, fw) - max(x0, 0.0)
        ch = min(y1, fh) - max(y0, 0.0)
        if cw <= 1.0 or ch <= 1.0:
            continue
        area = cw * ch
        if area < MIN_VISIBLE_FRAC * fw * fh:
            continue
        view = int(np.rint(np.rad2deg(phi) / 45.0)) % N_CANONICAL_VIEWS
        visible.append({"id": art.id, "kind": art.kind, "x0": x0, "y0": y0,
                        "w": w_px, "h": h_px, "area": float(area), "view": view})
    visible.sort(key=lambda v: (-v["area"], v["id"]))
    return visible


def _render_frame(state: _State, visible: list[dict], renders: dict[str, list[np.ndarray]],
                  backdrops: dict[int, np.ndarray], lengths: dict[int, float],
                  frame_hw: tuple[int, int]) -> np.ndarray:
    fh, fw = frame_hw
    f = float(fw)
    backdrop = backdrops[state.wall]
    bh, bw = backdrop.shape[:2]
    # world window seen by the camera
    win_w = state.depth * fw / f
    win_h = state.depth * fh / f
    xs_world = state.along - win_w / 2 + (np.arange(fw) + 0.5) * (win_w / fw)
    ys_world = -win_h / 2 + (np.arange(fh) + 0.5) * (win_h / fh)
    xs_px = xs_world * BACKDROP_RES
    ys_px = (ys_world + BACKDROP_HEIGHT / 2) * BACKDROP_RES
    gx, gy = np.meshgrid(xs_px, ys_px)
    frame = _to_uint8(_sample_bilinear(backdrop, gx, gy))

    for item in reversed(visible):  # draw the most visible piece last (on top)
        art_renders = renders[item["id"]]
        render = art_renders[item["view"] if len(art_renders) > 1 else 0]
        w_i = max(2, int(round(item["w"])))
        h_i = max(2, int(round(item["h"])))
        scaled = resize_bilinear(render, (h_i, w_i))
        x0 = int(round(item["x0"]))
        y0 = int(round(item["y0"]))
        sx0, sy0 = max(0, -x0), max(0, -y0)
        dx0, dy0 = max(0, x0), max(0, y0)
        wv = min(w_i - sx0, fw - dx0)
        hv = min(h_i - sy0, fh - dy0)
        if wv <= 0 or hv <= 0:
            continue
        frame[dy0:dy0 + hv, dx0:dx0 + wv] = scaled[sy0:sy0 + hv, sx0:sx0 + wv]
    return frame


def simulate_visit(manifest: GalleryManifest, plan: VisitPlan, config: DegradationConfig,
                   seed: int, split_name: str = "visit", frame_size: int = 96,
                   render_size: int = 96) -> VisitResult:
    """Walk the gallery and capture frames. Returns records, frames, and the
    per-frame effects log (visible geometry + degradations applied)."""
    if not manifest.instances:
        raise ValueError("cannot simulate a visit through an empty gallery")

    master = np.random.SeedSequence(seed)
    plan_rng = np.random.default_rng(master.spawn(1)[0])
    lengths = {w: wall_length(manifest, w) for w in
               {a.display_zone.wall for a in manifest.instances}}

    steps = _trajectory(_waypoints(manifest, plan, plan_rng), plan)
    capture_steps = [t for t in range(len(steps)) if t % plan.capture_interval_steps == 0]

    renders = {a.id: render_artwork(a, render_size).base_renders for a in manifest.instances}
    backdrop_seed = np.random.SeedSequence([seed, 0xB4C]).generate_state(4)
    backdrops = {w: render_wall_backdrop(int(lengths[w] * BACKDROP_RES),
                                         int(BACKDROP_HEIGHT * BACKDROP_RES),
                                         int(backdrop_seed[w % 4]))
                 for w in lengths}

    frame_hw = (frame_size, frame_size)
    frame_seeds = master.spawn(len(capture_steps))

    def build(idx: int) -> tuple[CaptureRecord, np.ndarray, dict]:
        t = capture_steps[idx]
        state = steps[t]
        visible = _project(state, manifest, lengths, frame_hw)
        frame = _render_frame(state, visible, renders, backdrops, lengths, frame_hw)
        rng = np.random.default_rng(frame_seeds[idx])
        frame, effects = apply_degradations(frame, config, rng)
        gt = tuple(v["id"] for v in visible) or ("background",)
        path = f"images/visits/{split_name}/frame_{t:05d}.png"
        log = {"frame": path, "t": t,
               "state": {"wall": state.wall, "along": round(state.along, 4),
                         "depth": round(state.depth, 4)},
               "visible": [{"id": v["id"], "area_px": round(v["area"], 2), "view": v["view"]}
                           for v in visible],
               "effects": effects}
        return CaptureRecord(path, t, gt), frame, log

    results = parallel_map(build, range(len(capture_steps)))
    records = [r[0] for r in results]
    frames = [r[1] for r in results]
    logs = [r[2] for r in results]
    return VisitResult(records=records, frames=frames, effects_log=logs,
                       split_name=split_name)
