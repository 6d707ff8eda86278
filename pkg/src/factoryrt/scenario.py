"""Parametric indoor-factory scene and terminal layout.

The building is a concrete shell split along ``x`` into zones A, B and C.
Zone B holds rows of metal storage racks; each rack has horizontal shelf
plates, vertical uprights between bays and hollow wooden boxes on the
shelves.  The simplified variant replaces every rack by one envelope cuboid
of the same footprint and height.  Zones A and C only contain a few coarse
metal blocks.

Rack counts, spacing and terminal coordinates are not published for the real
site; the defaults here are chosen to keep the four-model study tractable on
one CPU core while keeping the racks between every base station and user
terminal.
"""

from __future__ import annotations

import enum
import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .geometry import Facet, Scene, box_facets, build_scene, quad

__all__ = [
    "FactoryConfig",
    "SceneVariant",
    "TerminalLayout",
    "ScenarioError",
    "RackSpec",
    "build_factory",
    "paper_layout",
    "rack_specs",
    "box_slots",
    "load_config",
    "save_config",
]

BS_HEIGHT = 4.0
UT_HEIGHT = 1.5
N_BS = 5
N_UT = 40
NEAREST_UTS = 24
SUBSET_BS = 4

# clearance between the floor and the rack frame, and between shelf and box
RACK_BASE = 0.05
BOX_LIFT = 0.01


class ScenarioError(ValueError):
    pass


class SceneVariant(str, enum.Enum):
    DETAILED = "detailed"
    SIMPLIFIED = "simplified"


@dataclass(frozen=True)
class FactoryConfig:
    """Factory dimensions and rack layout (metres)."""

    floor_length: float = 210.0
    floor_width: float = 97.0
    height: float = 5.0
    zone_a_length: float = 79.5
    zone_b_length: float = 78.6
    zone_c_length: float = 51.6
    rack_height: float = 4.4
    box_size: tuple[float, float, float] = (1.2, 0.8, 0.5)
    box_wall: float = 0.2
    fill_ratio: float = 0.70
    rack_rows: int = 2
    racks_per_row: int = 2
    bays_per_rack: int = 2
    shelf_levels: int = 5
    slots_per_bay: int = 2
    bay_length: float = 2.7
    rack_depth: float = 1.0
    aisle_width: float = 4.0
    cross_aisle: float = 4.0
    clutter_blocks_a: int = 3
    clutter_blocks_c: int = 2
    rng_seed: int = 2024

    def __post_init__(self):
        object.__setattr__(self, "box_size", tuple(float(v) for v in self.box_size))
        positive = ["floor_length", "floor_width", "height", "zone_a_length", "zone_b_length",
                    "zone_c_length", "rack_height", "box_wall", "bay_length", "rack_depth",
                    "aisle_width", "cross_aisle"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        if any(v <= 0 for v in self.box_size):
            raise ScenarioError("box dimensions must be positive")
        if self.zone_a_length + self.zone_b_length + self.zone_c_length > self.floor_length + 1e-9:
            raise ScenarioError("zone lengths exceed the floor length")
        if not 0.0 <= self.fill_ratio <= 1.0:
            raise ScenarioError("fill_ratio must lie in [0, 1]")
        for name in ("rack_rows", "racks_per_row", "bays_per_rack", "shelf_levels", "slots_per_bay",
                     "clutter_blocks_a", "clutter_blocks_c"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be non-negative")
        if self.rack_height >= self.height:
            raise ScenarioError("racks must be lower than the ceiling")

    @property
    def zone_b_range(self) -> tuple[float, float]:
        return self.zone_a_length, self.zone_a_length + self.zone_b_length

    @property
    def rack_length(self) -> float:
        return self.bays_per_rack * self.bay_length

    @property
    def rack_capacity(self) -> int:
        return self.bays_per_rack * self.shelf_levels * self.slots_per_bay

    def to_json(self) -> dict:
        d = asdict(self)
        d["box_size"] = list(self.box_size)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "FactoryConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def load_config(path: str | Path) -> FactoryConfig:
    return FactoryConfig.from_json(json.loads(Path(path).read_text()))


def save_config(config: FactoryConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_json(), indent=2))


@dataclass(frozen=True)
class RackSpec:
    index: int
    lo: np.ndarray  # (3,) lower corner of the rack envelope
    hi: np.ndarray


def rack_specs(config: FactoryConfig) -> list[RackSpec]:
    """Rack envelopes, rows along ``x``, centred in zone B and in the hall width."""
    rows, per_row = config.rack_rows, config.racks_per_row
    if rows == 0 or per_row == 0:
        return []
    length = config.rack_length
    span_x = per_row * length + (per_row - 1) * config.cross_aisle
    span_y = rows * config.rack_depth + (rows - 1) * config.aisle_width
    zb0, zb1 = config.zone_b_range
    if span_x > zb1 - zb0 - 2 * config.cross_aisle or span_y > config.floor_width - 2 * config.aisle_width:
        raise ScenarioError("racks do not fit in the zone B footprint")
    x0 = 0.5 * (zb0 + zb1) - 0.5 * span_x
    y0 = 0.5 * config.floor_width - 0.5 * span_y
    out = []
    for r in range(rows):
        for c in range(per_row):
            lo = np.array([x0 + c * (length + config.cross_aisle),
                           y0 + r * (config.rack_depth + config.aisle_width), RACK_BASE])
            hi = lo + np.array([length, config.rack_depth, config.rack_height - RACK_BASE])
            out.append(RackSpec(r * per_row + c, lo, hi))
    return out


def _slot_key(seed: int, rack: int, bay: int, level: int, slot: int) -> bytes:
    return hashlib.blake2b(struct.pack("<Qqqqq", seed & (2**64 - 1), rack, bay, level, slot),
                           digest_size=8).digest()


def box_slots(config: FactoryConfig, rack: int) -> list[tuple[int, int, int]]:
    """Occupied ``(bay, level, slot)`` positions of one rack.

    The ``round(fill_ratio * capacity)`` slots with the smallest keyed hash are
    filled, so a rack's occupancy depends only on the seed and its own index.
    """
    cells = [(b, lv, s) for b in range(config.bays_per_rack) for lv in range(config.shelf_levels)
             for s in range(config.slots_per_bay)]
    n = int(round(config.fill_ratio * len(cells)))
    ranked = sorted(cells, key=lambda c: (_slot_key(config.rng_seed, rack, *c), c))
    return sorted(ranked[:n])


def _shelf_heights(config: FactoryConfig) -> np.ndarray:
    lowest = RACK_BASE + 0.1
    return np.linspace(lowest, config.rack_height, config.shelf_levels + 1)


def _rack_facets(config: FactoryConfig, spec: RackSpec) -> list[Facet]:
    lo, hi = spec.lo, spec.hi
    out: list[Facet] = []
    for z in _shelf_heights(config):
        out.append(quad((lo[0], lo[1], z), (hi[0], lo[1], z), (hi[0], hi[1], z), (lo[0], hi[1], z),
                        "metal", thickness=0.0))
    for j in range(config.bays_per_rack + 1):
        x = lo[0] + j * config.bay_length
        out.append(quad((x, lo[1], lo[2]), (x, hi[1], lo[2]), (x, hi[1], hi[2]), (x, lo[1], hi[2]),
                        "metal", thickness=0.0))
    bx, by, bz = config.box_size
    gap = (config.bay_length - config.slots_per_bay * bx) / (config.slots_per_bay + 1)
    if gap <= 0 or by > config.rack_depth:
        raise ScenarioError("boxes do not fit in a bay")
    heights = _shelf_heights(config)
    if config.shelf_levels and bz + BOX_LIFT >= heights[1] - heights[0]:
        raise ScenarioError("boxes do not fit between shelves")
    y0 = lo[1] + 0.5 * (config.rack_depth - by)
    for bay, level, slot in box_slots(config, spec.index):
        x0 = lo[0] + bay * config.bay_length + gap + slot * (bx + gap)
        z0 = heights[level] + BOX_LIFT
        out.extend(box_facets((x0, y0, z0), (x0 + bx, y0 + by, z0 + bz), "wood",
                              thickness=config.box_wall))
    return out


def _clutter(config: FactoryConfig) -> list[Facet]:
    """Coarse metal blocks in zones A and C, on a fixed grid."""
    out: list[Facet] = []
    zb0, zb1 = config.zone_b_range
    zones = [(0.0, zb0, config.clutter_blocks_a), (zb1, zb1 + config.zone_c_length, config.clutter_blocks_c)]
    for x_lo, x_hi, count in zones:
        for i in range(count):
            cx = x_lo + (i + 0.5) * (x_hi - x_lo) / count
            cy = config.floor_width * (0.3 if i % 2 == 0 else 0.7)
            half = np.array([min(4.0, 0.2 * (x_hi - x_lo) / max(count, 1)), 3.0])
            out.extend(box_facets((cx - half[0], cy - half[1], 0.0 + RACK_BASE),
                                  (cx + half[0], cy + half[1], 0.6 * config.height), "metal"))
    return out


def shell_facets(config: FactoryConfig) -> list[Facet]:
    return box_facets((0.0, 0.0, 0.0), (config.floor_length, config.floor_width, config.height),
                      "concrete", inward=True)


def factory_facets(config: FactoryConfig, variant: SceneVariant | str) -> list[Facet]:
    variant = SceneVariant(variant)
    facets = shell_facets(config) + _clutter(config)
    for spec in rack_specs(config):
        if variant is SceneVariant.DETAILED:
            facets.extend(_rack_facets(config, spec))
        else:
            facets.extend(box_facets(spec.lo, spec.hi, "envelope"))
    return facets


def build_factory(config: FactoryConfig, variant: SceneVariant | str, materials=None) -> Scene:
    """Build the detailed or simplified factory scene.

    Rack envelopes use the material id ``"envelope"``; the harness maps it to
    the default or tuned envelope material.  When ``materials`` is given,
    every referenced id is checked against it.
    """
    facets = factory_facets(config, variant)
    if materials is not None:
        for mid in sorted({f.material_id for f in facets}):
            materials.resolve(mid)
    return build_scene(facets)


@dataclass(frozen=True)
class TerminalLayout:
    """Base-station and user-terminal positions.

    Ids are 1-based.  ``subset_uts`` lists the user terminals nearest to base
    station :data:`SUBSET_BS`, used for the 28 GHz study.
    """

    bs_positions: np.ndarray
    ut_positions: np.ndarray
    subset_uts: tuple[int, ...] = field(default=())

    def links(self, mask: str = "all") -> list[tuple[int, int]]:
        if mask == "all":
            return [(b + 1, u + 1) for b in range(len(self.bs_positions)) for u in range(len(self.ut_positions))]
        if mask == "subset":
            return [(SUBSET_BS, u) for u in self.subset_uts]
        raise ScenarioError(f"unknown link mask {mask!r}")

    def bs(self, bs_id: int) -> np.ndarray:
        return self.bs_positions[bs_id - 1]

    def ut(self, ut_id: int) -> np.ndarray:
        return self.ut_positions[ut_id - 1]

    def to_json(self) -> dict:
        return {"bs_positions": self.bs_positions.tolist(), "ut_positions": self.ut_positions.tolist(),
                "subset_uts": list(self.subset_uts)}


def nearest_uts(bs: np.ndarray, uts: np.ndarray, count: int) -> tuple[int, ...]:
    d = np.linalg.norm(uts - bs, axis=1)
    order = np.lexsort((np.arange(len(uts)), d))
    return tuple(int(i) + 1 for i in sorted(order[:count]))


def terminal_layout(config: FactoryConfig, seed: int | None = None) -> TerminalLayout:
    """Seeded placement of 5 base stations and 40 user terminals in zone B.

    User terminals sit on the aisle centre lines at 1.5 m with a small
    seeded jitter along the aisle; base stations hang at 4 m over aisles.
    """
    seed = config.rng_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    racks = rack_specs(config)
    zb0, zb1 = config.zone_b_range
    if racks:
        x_lo = min(r.lo[0] for r in racks) - 0.5 * config.cross_aisle
        x_hi = max(r.hi[0] for r in racks) + 0.5 * config.cross_aisle
        row_y = sorted({float(r.lo[1]) for r in racks})
        aisles = [row_y[0] - 0.5 * config.aisle_width]
        aisles += [y + config.rack_depth + 0.5 * config.aisle_width for y in row_y]
    else:
        x_lo, x_hi = zb0 + 5.0, zb1 - 5.0
        aisles = [0.5 * config.floor_width - 6.0, 0.5 * config.floor_width, 0.5 * config.floor_width + 6.0]
    per_aisle = [N_UT // len(aisles) + (1 if i < N_UT % len(aisles) else 0) for i in range(len(aisles))]
    uts = []
    for y, n in zip(aisles, per_aisle):
        xs = np.linspace(x_lo, x_hi, n + 2)[1:-1]
        jitter = rng.uniform(-0.3, 0.3, size=n) * (x_hi - x_lo) / (n + 1)
        for x in xs + jitter:
            uts.append((float(x), float(y), UT_HEIGHT))
    ut = np.array(uts)
    bs_x = np.linspace(x_lo, x_hi, N_BS + 2)[1:-1]
    bs = np.array([(float(x), float(aisles[(i + 1) % len(aisles)]), BS_HEIGHT) for i, x in enumerate(bs_x)])
    return TerminalLayout(bs, ut, nearest_uts(bs[SUBSET_BS - 1], ut, NEAREST_UTS))


def paper_layout(seed: int | None = None) -> tuple[FactoryConfig, TerminalLayout]:
    config = FactoryConfig() if seed is None else FactoryConfig(rng_seed=seed)
    return config, terminal_layout(config)
