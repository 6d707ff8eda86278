"""Path data types: interaction budget, interactions, propagation paths."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

SPEED_OF_LIGHT = 299792458.0

_BUDGET_RE = re.compile(r"^\s*(\d+)\s*r\s*(\d+)\s*d\s*$", re.IGNORECASE)


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class InteractionBudget:
    """Maximum reflections ``R`` and diffractions ``D`` per path.

    Transmissions are never limited.
    """

    max_reflections: int
    max_diffractions: int = 0

    def __post_init__(self):
        if self.max_reflections < 0 or self.max_diffractions < 0:
            raise BudgetError("budget counts must be non-negative")

    def check_supported(self) -> None:
        if self.max_diffractions > 1:
            raise BudgetError("at most one diffraction per path is supported")

    @classmethod
    def parse(cls, text: str) -> "InteractionBudget":
        """Parse ``"3R1D"`` style strings (case-insensitive)."""
        m = _BUDGET_RE.match(text)
        if not m:
            raise BudgetError(f"cannot parse budget {text!r}; expected e.g. 3R1D")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.max_reflections}R{self.max_diffractions}D"


@dataclass(frozen=True, eq=False)
class Reflection:
    facet_id: int
    point: np.ndarray


@dataclass(frozen=True, eq=False)
class Diffraction:
    wedge_id: int
    point: np.ndarray


@dataclass(frozen=True, eq=False)
class Transmission:
    """Crossing of a penetrable object.

    ``point`` is where the ray enters, ``exit_point`` where it leaves and
    ``chord_length`` the distance travelled inside the material.  A thin
    sheet has ``exit_facet_id == facet_id``.
    """

    facet_id: int
    point: np.ndarray
    chord_length: float
    exit_facet_id: int
    exit_point: np.ndarray


Interaction = Union[Reflection, Diffraction, Transmission]


def interaction_key(interactions) -> tuple:
    """Sequence signature used for de-duplication (transmissions excluded)."""
    out = []
    for it in interactions:
        if isinstance(it, Reflection):
            out.append(("R", it.facet_id))
        elif isinstance(it, Diffraction):
            out.append(("D", it.wedge_id))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class PropagationPath:
    """One ray from tx to rx.

    ``vertices`` holds tx, the reflection/diffraction points in order, and
    rx; transmissions sit on the straight segments between them.  Angles are
    radians; azimuth from +x toward +y, elevation above the horizontal plane.
    ``gain`` is the complex amplitude relative to a 1 m reference and stays
    ``nan`` until the path is evaluated.
    """

    interactions: tuple
    vertices: np.ndarray
    total_length: float
    delay: float
    aod_az: float
    aod_el: float
    aoa_az: float
    aoa_el: float
    gain: complex = complex(math.nan, math.nan)
    key: tuple = field(default=(), compare=False)

    @property
    def n_reflections(self) -> int:
        return sum(isinstance(i, Reflection) for i in self.interactions)

    @property
    def n_diffractions(self) -> int:
        return sum(isinstance(i, Diffraction) for i in self.interactions)

    @property
    def n_transmissions(self) -> int:
        return sum(isinstance(i, Transmission) for i in self.interactions)

    @property
    def power_db(self) -> float:
        g = abs(self.gain)
        return 20.0 * math.log10(g) if g > 0 else -math.inf

    def with_gain(self, gain: complex) -> "PropagationPath":
        return replace(self, gain=complex(gain))

    def to_json(self, tx_power_dbm: float = 0.0) -> dict:
        its = []
        for it in self.interactions:
            if isinstance(it, Reflection):
                its.append({"type": "reflection", "facet": it.facet_id, "point": it.point.tolist()})
            elif isinstance(it, Diffraction):
                its.append({"type": "diffraction", "wedge": it.wedge_id, "point": it.point.tolist()})
            else:
                its.append({"type": "transmission", "facet": it.facet_id, "point": it.point.tolist(),
                            "exit_facet": it.exit_facet_id, "exit_point": it.exit_point.tolist(),
                            "chord_length": it.chord_length})
        p = self.power_db
        return {
            "interactions": its,
            "vertices": self.vertices.tolist(),
            "delay_ns": self.delay * 1e9,
            "power_db": (p + tx_power_dbm) if math.isfinite(p) else None,
            "aod_deg": [math.degrees(self.aod_az), math.degrees(self.aod_el)],
            "aoa_deg": [math.degrees(self.aoa_az), math.degrees(self.aoa_el)],
        }


def dump_paths_jsonl(paths, fh, tx_power_dbm: float = 0.0, **extra) -> None:
    """Write one JSON object per path to the open text file ``fh``."""
    for p in paths:
        rec = dict(extra)
        rec.update(p.to_json(tx_power_dbm))
        fh.write(json.dumps(rec) + "\n")


def direction_angles(v: np.ndarray) -> tuple[float, float]:
    """Azimuth and elevation (radians) of vector ``v``."""
    h = math.hypot(v[0], v[1])
    return math.atan2(v[1], v[0]), math.atan2(v[2], h)


@dataclass
class PathBatch:
    """Column-wise storage of validated paths sharing one interaction pattern.

    ``kinds[j]`` is ``"R"`` or ``"D"`` for the ``j``-th vertex after tx and
    ``ids[:, j]`` the facet or wedge id.  Transmissions are flattened: entry
    ``t`` belongs to path ``t_path[t]``, lies on segment ``t_seg[t]`` and is
    the ``t_rank[t]``-th crossing along that segment.
    """

    kinds: tuple
    verts: np.ndarray  # (K, m+2, 3)
    ids: np.ndarray  # (K, m)
    t_path: np.ndarray
    t_seg: np.ndarray
    t_rank: np.ndarray
    t_facet: np.ndarray
    t_exit_facet: np.ndarray
    t_point: np.ndarray
    t_exit_point: np.ndarray
    t_chord: np.ndarray

    def __len__(self) -> int:
        return self.verts.shape[0]

    @property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.verts, axis=1), axis=2).sum(axis=1)

    def keys(self) -> list[tuple]:
        labels = [(k,) for k in self.kinds]
        return [tuple(lab + (int(i),) for lab, i in zip(labels, row)) for row in self.ids]

    def subset(self, rows: np.ndarray) -> "PathBatch":
        rows = np.asarray(rows, dtype=int)
        remap = np.full(len(self), -1)
        remap[rows] = np.arange(rows.size)
        keep = remap[self.t_path] >= 0
        return PathBatch(self.kinds, self.verts[rows], self.ids[rows], remap[self.t_path[keep]],
                         self.t_seg[keep], self.t_rank[keep], self.t_facet[keep],
                         self.t_exit_facet[keep], self.t_point[keep], self.t_exit_point[keep],
                         self.t_chord[keep])

    @classmethod
    def concat(cls, batches: Sequence["PathBatch"]) -> "PathBatch":
        """Stack batches of one interaction pattern (rows keep their order)."""
        kinds = batches[0].kinds
        if any(b.kinds != kinds for b in batches):
            raise ValueError("batches differ in interaction pattern")
        offsets = np.cumsum([0] + [len(b) for b in batches[:-1]])

        def cat(name):
            return np.concatenate([getattr(b, name) for b in batches])

        return cls(kinds, cat("verts"), cat("ids"),
                   np.concatenate([b.t_path + o for b, o in zip(batches, offsets)]),
                   cat("t_seg"), cat("t_rank"), cat("t_facet"), cat("t_exit_facet"), cat("t_point"),
                   cat("t_exit_point"), cat("t_chord"))

    def to_paths(self, gains: np.ndarray | None = None) -> list[PropagationPath]:
        out = []
        order = np.lexsort((self.t_rank, self.t_seg, self.t_path))
        starts = np.searchsorted(self.t_path[order], np.arange(len(self) + 1))
        lengths = self.lengths
        for p in range(len(self)):
            v = self.verts[p].copy()
            v.setflags(write=False)
            trans = order[starts[p]:starts[p + 1]]
            inter = []
            ti = 0
            for s in range(v.shape[0] - 1):
                while ti < trans.size and self.t_seg[trans[ti]] == s:
                    t = trans[ti]
                    inter.append(Transmission(int(self.t_facet[t]), self.t_point[t].copy(),
                                              float(self.t_chord[t]), int(self.t_exit_facet[t]),
                                              self.t_exit_point[t].copy()))
                    ti += 1
                if s < len(self.kinds):
                    cls = Reflection if self.kinds[s] == "R" else Diffraction
                    inter.append(cls(int(self.ids[p, s]), v[s + 1].copy()))
            inter = tuple(inter)
            total = float(lengths[p])
            aod = direction_angles(v[1] - v[0])
            aoa = direction_angles(v[-2] - v[-1])
            gain = complex(math.nan, math.nan) if gains is None else complex(gains[p])
            out.append(PropagationPath(inter, v, total, total / SPEED_OF_LIGHT, aod[0], aod[1],
                                       aoa[0], aoa[1], gain, key=interaction_key(inter)))
        return out

    @classmethod
    def from_path(cls, path: PropagationPath) -> "PathBatch":
        kinds, ids, tr = [], [], []
        for it in path.interactions:
            if isinstance(it, Transmission):
                tr.append((len(kinds), it))
            else:
                kinds.append("R" if isinstance(it, Reflection) else "D")
                ids.append(it.facet_id if isinstance(it, Reflection) else it.wedge_id)
        rank: dict[int, int] = {}
        rows = []
        for seg, it in tr:
            r = rank.get(seg, 0)
            rank[seg] = r + 1
            rows.append((seg, r, it))
        T = len(rows)
        return cls(tuple(kinds), np.asarray(path.vertices, float)[None], np.array([ids], dtype=int).reshape(1, -1),
                   np.zeros(T, dtype=int), np.array([r[0] for r in rows], dtype=int),
                   np.array([r[1] for r in rows], dtype=int),
                   np.array([r[2].facet_id for r in rows], dtype=int),
                   np.array([r[2].exit_facet_id for r in rows], dtype=int),
                   np.array([r[2].point for r in rows], dtype=float).reshape(T, 3),
                   np.array([r[2].exit_point for r in rows], dtype=float).reshape(T, 3),
                   np.array([r[2].chord_length for r in rows], dtype=float))


@dataclass
class PathSet:
    """All validated paths of one link, grouped into :class:`PathBatch` es."""

    tx: np.ndarray
    rx: np.ndarray
    batches: list

    def __len__(self) -> int:
        return sum(len(b) for b in self.batches)

    def to_paths(self) -> list[PropagationPath]:
        out: list[PropagationPath] = []
        for b in self.batches:
            out.extend(b.to_paths())
        out.sort(key=lambda p: (p.delay, p.key))
        return out
