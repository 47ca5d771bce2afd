"""Synthetic street scene: base stations, a user grid, and box blockers.

The scene is a straight road segment along the x axis. Macro (sub-6GHz)
and small-cell (mmWave) base stations sit on the road sides, users are
laid out on a regular grid on the road surface, and axis-aligned
rectangular buildings act as binary line-of-sight occluders. Everything
is a deterministic function of :class:`SceneConfig`; the only randomness
is an optional seeded jitter on user positions.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

SUB6 = "sub6"
MMW = "mmw"

# Lateral offset from the road edge for auto-placed stations (meters).
BS_SETBACK = 2.0

_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by min/max corners in meters."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self) -> None:
        for lo, hi in zip(self.min_corner, self.max_corner):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ConfigurationError(f"building corners must be finite, got {self}")
            if lo >= hi:
                raise ConfigurationError(f"degenerate building box {self}")

    def contains_interior(self, point) -> bool:
        """True if ``point`` lies strictly inside the box (faces excluded)."""
        return all(
            lo < c < hi
            for lo, c, hi in zip(self.min_corner, point, self.max_corner)
        )

    @staticmethod
    def from_bounds(xmin, ymin, zmin, xmax, ymax, zmax) -> "Box":
        return Box((float(xmin), float(ymin), float(zmin)),
                   (float(xmax), float(ymax), float(zmax)))


@dataclass(frozen=True)
class BaseStation:
    """One base station with its local antenna frame.

    The local frame is right-handed with z up: ``boresight`` is the
    horizontal look direction (toward the road) and the array axis is
    ``boresight x z``, i.e. horizontal and perpendicular to boresight.
    """

    tier: str
    index: int
    position: tuple[float, float, float]
    boresight: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.tier not in (SUB6, MMW):
            raise ConfigurationError(f"unknown base station tier {self.tier!r}")
        b = np.asarray(self.boresight, dtype=float)
        if abs(np.linalg.norm(b) - 1.0) > 1e-9 or abs(b[2]) > 1e-12:
            raise ConfigurationError(
                f"boresight must be a horizontal unit vector, got {self.boresight}"
            )

    def local_direction(self, point) -> tuple[float, float, float]:
        """Unit direction from the station to ``point`` in the local frame.

        Returns (along-array, along-boresight, up) components. Raises
        ``ValueError`` for a point coincident with the station.
        """
        v = np.asarray(point, dtype=float) - np.asarray(self.position, dtype=float)
        d = float(np.linalg.norm(v))
        if d == 0.0:
            raise ValueError(f"point coincides with {self.tier} BS {self.index}")
        u = v / d
        y_l = np.asarray(self.boresight, dtype=float)
        x_l = np.cross(y_l, _UP)
        return float(u @ x_l), float(u @ y_l), float(u[2])


@dataclass(frozen=True)
class SceneConfig:
    """Geometry of the road, the base stations, and the user grid.

    ``sub6_positions`` / ``mmw_positions`` override the automatic
    placement; heights are only used for auto-placed stations. Users sit
    on ``user_rows`` lines parallel to the road axis, spaced
    ``user_grid_spacing`` meters apart along it.
    """

    road_length: float = 200.0
    road_width: float = 20.0
    n_sub6_bs: int = 2
    n_mmw_bs: int = 4
    sub6_positions: tuple[tuple[float, float, float], ...] | None = None
    mmw_positions: tuple[tuple[float, float, float], ...] | None = None
    sub6_bs_height: float = 15.0
    mmw_bs_height: float = 6.0
    user_grid_spacing: float = 1.0
    user_rows: int = 2
    user_height: float = 1.5
    buildings: tuple[Box, ...] = field(default_factory=tuple)
    user_jitter: float = 0.0
    rng_seed: int = 0


@dataclass(frozen=True)
class Scene:
    """Resolved scene: stations, user positions, and blockers."""

    config: SceneConfig
    sub6: tuple[BaseStation, ...]
    mmw: tuple[BaseStation, ...]
    users: np.ndarray  # (n_users, 3) float64
    buildings: tuple[Box, ...]

    @property
    def n_users(self) -> int:
        return self.users.shape[0]


def _boresight_for(position, road_width: float) -> tuple[float, float, float]:
    # Stations look across the road, toward its centerline.
    return (0.0, 1.0, 0.0) if position[1] <= 0.0 else (0.0, -1.0, 0.0)


def _auto_positions(n: int, length: float, width: float, height: float,
                    at_ends: bool) -> list[tuple[float, float, float]]:
    """Evenly spaced stations alternating road sides, south side first."""
    if at_ends and n >= 2:
        xs = [i * length / (n - 1) for i in range(n)]
    else:
        xs = [(i + 0.5) * length / n for i in range(n)]
    out = []
    for i, x in enumerate(xs):
        side = -1.0 if i % 2 == 0 else 1.0
        out.append((x, side * (width / 2.0 + BS_SETBACK), height))
    return out


def _user_grid(cfg: SceneConfig) -> np.ndarray:
    n_cols = int(math.floor(cfg.road_length / cfg.user_grid_spacing + 1e-9))
    if n_cols < 1:
        raise ConfigurationError(
            f"user grid is empty: spacing {cfg.user_grid_spacing} exceeds "
            f"road length {cfg.road_length}"
        )
    xs = (np.arange(n_cols) + 0.5) * cfg.user_grid_spacing
    row_pitch = cfg.road_width / cfg.user_rows
    ys = -cfg.road_width / 2.0 + (np.arange(cfg.user_rows) + 0.5) * row_pitch
    # Row-major along the road axis: first user at min-x, min-y.
    xx, yy = np.meshgrid(xs, ys)
    users = np.column_stack(
        [xx.ravel(), yy.ravel(), np.full(xx.size, cfg.user_height)]
    )
    return users


def build_scene(cfg: SceneConfig) -> Scene:
    """Resolve a :class:`SceneConfig` into concrete geometry.

    Pure function of the config: identical configs hash identically
    (see :func:`scene_hash`). Raises :class:`ConfigurationError` for
    impossible geometry, naming the offending element.
    """
    if cfg.road_length <= 0 or cfg.road_width <= 0:
        raise ConfigurationError("road dimensions must be positive")
    if cfg.n_sub6_bs < 1:
        raise ConfigurationError("at least one sub-6GHz BS is required")
    if cfg.n_mmw_bs < 1:
        raise ConfigurationError("at least one mmWave BS is required")
    if cfg.user_rows < 1:
        raise ConfigurationError("user_rows must be >= 1")
    if cfg.user_grid_spacing <= 0:
        raise ConfigurationError("user_grid_spacing must be positive")
    if cfg.user_jitter < 0:
        raise ConfigurationError("user_jitter must be >= 0")

    sub6_pos = (list(cfg.sub6_positions) if cfg.sub6_positions is not None
                else _auto_positions(cfg.n_sub6_bs, cfg.road_length,
                                     cfg.road_width, cfg.sub6_bs_height,
                                     at_ends=True))
    mmw_pos = (list(cfg.mmw_positions) if cfg.mmw_positions is not None
               else _auto_positions(cfg.n_mmw_bs, cfg.road_length,
                                    cfg.road_width, cfg.mmw_bs_height,
                                    at_ends=False))
    if len(sub6_pos) != cfg.n_sub6_bs:
        raise ConfigurationError(
            f"expected {cfg.n_sub6_bs} sub-6GHz positions, got {len(sub6_pos)}"
        )
    if len(mmw_pos) != cfg.n_mmw_bs:
        raise ConfigurationError(
            f"expected {cfg.n_mmw_bs} mmWave positions, got {len(mmw_pos)}"
        )

    stations: dict[str, tuple[BaseStation, ...]] = {}
    for tier, positions in ((SUB6, sub6_pos), (MMW, mmw_pos)):
        entries = []
        for i, pos in enumerate(positions):
            pos = tuple(float(c) for c in pos)
            if not all(math.isfinite(c) for c in pos):
                raise ConfigurationError(f"{tier} BS {i} has non-finite position {pos}")
            for j, box in enumerate(cfg.buildings):
                if box.contains_interior(pos):
                    raise ConfigurationError(
                        f"{tier} BS {i} at {pos} lies inside building {j}"
                    )
            entries.append(BaseStation(tier, i, pos,
                                       _boresight_for(pos, cfg.road_width)))
        stations[tier] = tuple(entries)

    users = _user_grid(cfg)
    if cfg.user_jitter > 0:
        rng = np.random.default_rng(cfg.rng_seed)
        users = users.copy()
        users[:, :2] += rng.uniform(-cfg.user_jitter, cfg.user_jitter,
                                    size=(users.shape[0], 2))
        users[:, 0] = np.clip(users[:, 0], 0.0, cfg.road_length)
        users[:, 1] = np.clip(users[:, 1], -cfg.road_width / 2, cfg.road_width / 2)

    seen = {tuple(u) for u in users}
    if len(seen) != users.shape[0]:
        raise ConfigurationError("user positions are not unique after jitter")

    users.setflags(write=False)
    return Scene(cfg, stations[SUB6], stations[MMW], users, tuple(cfg.buildings))


def place_users(scene: Scene) -> np.ndarray:
    """User positions, stable order (row-major along the road axis)."""
    return scene.users


def is_blocked(scene: Scene, a, b) -> bool:
    """True if the open segment between ``a`` and ``b`` crosses a building.

    Only intersection with a box *interior* counts: a segment grazing a
    face, edge, or corner is not blocked. Endpoints are excluded, and the
    test is symmetric in its arguments.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    if not np.any(d):
        raise ValueError("blockage test requires two distinct points")
    for box in scene.buildings:
        t0, t1 = 0.0, 1.0
        hit = True
        for i in range(3):
            lo, hi = box.min_corner[i], box.max_corner[i]
            if d[i] == 0.0:
                if not (lo < a[i] < hi):
                    hit = False
                    break
            else:
                ta = (lo - a[i]) / d[i]
                tb = (hi - a[i]) / d[i]
                if ta > tb:
                    ta, tb = tb, ta
                t0 = max(t0, ta)
                t1 = min(t1, tb)
                if t0 >= t1:
                    hit = False
                    break
        if hit and t0 < t1:
            return True
    return False


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def scene_lines(scene: Scene) -> list[str]:
    """Line records: one entity per line (kind, id, coordinates)."""
    lines = [f"# beamsel-scene v1 n_sub6={len(scene.sub6)} "
             f"n_mmw={len(scene.mmw)} n_users={scene.n_users} "
             f"n_buildings={len(scene.buildings)}"]
    for bs in scene.sub6 + scene.mmw:
        x, y, z = bs.position
        lines.append(f"{bs.tier} {bs.index} {x!r} {y!r} {z!r}")
    for j, box in enumerate(scene.buildings):
        lo, hi = box.min_corner, box.max_corner
        lines.append(f"building {j} {lo[0]!r} {lo[1]!r} {lo[2]!r} "
                     f"{hi[0]!r} {hi[1]!r} {hi[2]!r}")
    for i, u in enumerate(scene.users):
        lines.append(f"user {i} {u[0]!r} {u[1]!r} {u[2]!r}")
    return lines


def export_scene(scene: Scene, path) -> None:
    """Write the scene as a line-record text file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(scene_lines(scene)))
        fh.write("\n")


def scene_hash(scene: Scene) -> str:
    """Stable hex digest of the resolved geometry."""
    text = "\n".join(scene_lines(scene))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
