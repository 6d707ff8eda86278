"""Large-scale link parameters computed from a set of evaluated paths.

Every function accepts either a sequence of :class:`PropagationPath` or a
:class:`PathArrays` bundle (the column form used by the batch runner).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .geometry import Scene, segment_hits
from .materials import MaterialLibrary
from .paths.model import SPEED_OF_LIGHT, PathSet, PropagationPath

__all__ = [
    "AngleSelector",
    "LinkMetrics",
    "MetricsError",
    "PathArrays",
    "Visibility",
    "circular_angle_spread",
    "classify_visibility",
    "link_metrics",
    "received_power",
    "rms_delay_spread",
]

MAX_ANGLE_SPREAD_DEG = 180.0


class MetricsError(ValueError):
    pass


class Visibility(str, enum.Enum):
    LOS = "LoS"
    OLOS = "OLoS"
    NLOS = "NLoS"


class AngleSelector(str, enum.Enum):
    DEPARTURE_AZIMUTH = "departure_azimuth"
    ARRIVAL_AZIMUTH = "arrival_azimuth"


@dataclass(frozen=True)
class PathArrays:
    """Per-path columns: complex gain, delay (s) and azimuths (rad)."""

    gain: np.ndarray
    delay: np.ndarray
    aod_az: np.ndarray
    aoa_az: np.ndarray

    def __len__(self) -> int:
        return self.gain.size

    @classmethod
    def from_paths(cls, paths: Sequence[PropagationPath]) -> "PathArrays":
        return cls(np.array([p.gain for p in paths], dtype=complex),
                   np.array([p.delay for p in paths], dtype=float),
                   np.array([p.aod_az for p in paths], dtype=float),
                   np.array([p.aoa_az for p in paths], dtype=float))

    @classmethod
    def from_pathset(cls, pathset: PathSet, gains: Sequence[np.ndarray]) -> "PathArrays":
        """Columns of a :class:`PathSet` with one gain array per batch."""
        g, d, dep, arr = [], [], [], []
        for batch, gb in zip(pathset.batches, gains):
            v = batch.verts
            first = v[:, 1] - v[:, 0]
            last = v[:, -2] - v[:, -1]
            g.append(np.asarray(gb, dtype=complex))
            d.append(batch.lengths / SPEED_OF_LIGHT)
            dep.append(np.arctan2(first[:, 1], first[:, 0]))
            arr.append(np.arctan2(last[:, 1], last[:, 0]))
        if not g:
            e = np.empty(0)
            return cls(e.astype(complex), e, e, e)
        return cls(*(np.concatenate(x) for x in (g, d, dep, arr)))

    def above_floor(self, floor_db: float) -> "PathArrays":
        """Paths with ``20 log10 |gain| >= floor_db``."""
        keep = np.abs(self.gain) >= 10 ** (floor_db / 20)
        return PathArrays(self.gain[keep], self.delay[keep], self.aod_az[keep], self.aoa_az[keep])


PathsLike = Union[PathArrays, Sequence[PropagationPath]]


def _columns(paths: PathsLike) -> PathArrays:
    return paths if isinstance(paths, PathArrays) else PathArrays.from_paths(list(paths))


def received_power(paths: PathsLike, tx_power_dbm: float = 0.0, coherent: bool = False,
                   freq: float | None = None) -> float:
    """Received power in dBm.

    The default is the non-coherent sum of path powers.  With
    ``coherent=True`` the complex gains are summed with their propagation
    phase ``exp(-j 2 pi f tau)``, which needs ``freq``.
    """
    cols = _columns(paths)
    if len(cols) == 0:
        return -math.inf
    if coherent:
        if freq is None:
            raise MetricsError("coherent power needs the carrier frequency")
        total = abs(np.sum(cols.gain * np.exp(-2j * math.pi * freq * cols.delay))) ** 2
    else:
        total = float(np.sum(np.abs(cols.gain) ** 2))
    return tx_power_dbm + 10 * math.log10(total) if total > 0 else -math.inf


def _weights(cols: PathArrays) -> np.ndarray:
    if len(cols) == 0:
        raise MetricsError("metric undefined for an empty path list")
    p = np.abs(cols.gain) ** 2
    if not p.sum() > 0:
        raise MetricsError("metric undefined when every path has zero power")
    return p / p.sum()


def rms_delay_spread(paths: PathsLike) -> float:
    """Power-weighted RMS delay spread in ns."""
    cols = _columns(paths)
    w = _weights(cols)
    tau = cols.delay * 1e9
    mean = float(w @ tau)
    # central moment computed on shifted delays for numerical stability
    var = float(w @ (tau - mean) ** 2)
    return math.sqrt(max(var, 0.0))


def circular_angle_spread(paths: PathsLike,
                          selector: AngleSelector | str = AngleSelector.ARRIVAL_AZIMUTH) -> float:
    """Power-weighted circular azimuth spread in degrees, capped at 180."""
    cols = _columns(paths)
    selector = AngleSelector(selector)
    phi = cols.aoa_az if selector is AngleSelector.ARRIVAL_AZIMUTH else cols.aod_az
    w = _weights(cols)
    r = abs(complex(np.sum(w * np.exp(1j * phi))))
    if r <= 0:
        return MAX_ANGLE_SPREAD_DEG
    sigma = math.degrees(math.sqrt(max(-2.0 * math.log(min(r, 1.0)), 0.0)))
    return min(sigma, MAX_ANGLE_SPREAD_DEG)


def classify_visibility(scene: Scene, materials: MaterialLibrary, tx, rx) -> Visibility:
    """LoS if the direct segment is clear, OLoS if it crosses only penetrable
    facets, NLoS if it touches a conductor."""
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if np.linalg.norm(tx - rx) == 0:
        raise MetricsError("tx and rx coincide")
    if len(scene) == 0:
        return Visibility.LOS
    fac = segment_hits(scene, tx[None], rx[None])[1]
    if fac.size == 0:
        return Visibility.LOS
    if any(materials.resolve(scene.material_ids[f]).is_pec for f in np.unique(fac)):
        return Visibility.NLOS
    return Visibility.OLOS


@dataclass(frozen=True)
class LinkMetrics:
    received_power_dbm: float
    delay_spread_ns: float
    hads_deg: float
    haas_deg: float
    visibility: Visibility
    path_count: int

    def to_json(self) -> dict:
        return {
            "received_power_dbm": self.received_power_dbm if math.isfinite(self.received_power_dbm) else None,
            "delay_spread_ns": self.delay_spread_ns,
            "hads_deg": self.hads_deg,
            "haas_deg": self.haas_deg,
            "visibility": self.visibility.value,
            "path_count": self.path_count,
        }


def link_metrics(paths: PathsLike, visibility: Visibility, tx_power_dbm: float = 0.0,
                 coherent: bool = False, freq: float | None = None) -> LinkMetrics:
    """All four large-scale parameters of one link.

    Paths with zero gain are ignored.  A link without paths reports
    ``-inf`` power and ``nan`` spreads.
    """
    cols = _columns(paths)
    cols = PathArrays(*(x[np.abs(cols.gain) > 0] for x in (cols.gain, cols.delay, cols.aod_az, cols.aoa_az)))
    n = len(cols)
    if n == 0:
        return LinkMetrics(-math.inf, math.nan, math.nan, math.nan, Visibility(visibility), 0)
    return LinkMetrics(received_power(cols, tx_power_dbm, coherent, freq), rms_delay_spread(cols),
                       circular_angle_spread(cols, AngleSelector.DEPARTURE_AZIMUTH),
                       circular_angle_spread(cols, AngleSelector.ARRIVAL_AZIMUTH),
                       Visibility(visibility), n)
