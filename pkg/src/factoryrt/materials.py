"""Electromagnetic material models and interface coefficients.

Permittivities follow the engineering convention ``eps = eps_re - 1j*eps_im``
(time dependence ``exp(+j*omega*t)``), so passive media have ``eps_im >= 0``.

Reflection sign convention (fixed by the PEC limit):

* TE (E perpendicular to the plane of incidence): ``-1`` for a perfect conductor.
* TM (E in the plane of incidence): ``+1`` for a perfect conductor, with the
  parallel unit vectors built as ``e_par = e_perp x k`` on both the incident
  and the reflected side.  At normal incidence both polarizations then flip the
  tangential field by the same factor.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.constants import speed_of_light

__all__ = [
    "MaterialKind",
    "Polarization",
    "Material",
    "MaterialLibrary",
    "MaterialError",
    "complex_permittivity",
    "fresnel_reflection",
    "fresnel_transmission",
    "interface_power_fractions",
    "slab_interface_factor",
    "transmission_gain",
    "default_library",
    "load_library",
    "save_library",
    "CONCRETE_EPS",
]


class MaterialError(ValueError):
    """Raised for invalid material definitions or out-of-domain queries."""


class MaterialKind(str, enum.Enum):
    PEC = "pec"
    DIELECTRIC = "dielectric"
    ENVELOPE = "envelope"


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class Material:
    """One material variant.

    ``eps_by_freq`` maps frequency in Hz to ``(eps_re, eps_im)``;
    ``loss_db_per_m`` (envelopes only) maps frequency to a linear bulk loss.
    """

    name: str
    kind: MaterialKind
    eps_by_freq: Mapping[float, tuple[float, float]] = field(default_factory=dict)
    loss_db_per_m: Mapping[float, float] = field(default_factory=dict)

    def __post_init__(self):
        kind = MaterialKind(self.kind)
        object.__setattr__(self, "kind", kind)
        eps = {float(f): (float(v[0]), float(v[1])) for f, v in dict(self.eps_by_freq).items()}
        loss = {float(f): float(v) for f, v in dict(self.loss_db_per_m).items()}
        object.__setattr__(self, "eps_by_freq", dict(sorted(eps.items())))
        object.__setattr__(self, "loss_db_per_m", dict(sorted(loss.items())))
        if kind is MaterialKind.PEC:
            return
        if not eps:
            raise MaterialError(f"material {self.name!r}: permittivity table is empty")
        for f, (re, im) in eps.items():
            if f <= 0:
                raise MaterialError(f"material {self.name!r}: frequency {f} must be positive")
            if not re > 0:
                raise MaterialError(f"material {self.name!r}: eps_re must be > 0 (got {re} at {f:g} Hz)")
            if im < 0:
                raise MaterialError(f"material {self.name!r}: eps_im must be >= 0 (got {im} at {f:g} Hz)")
        if kind is MaterialKind.ENVELOPE:
            if not loss:
                raise MaterialError(f"material {self.name!r}: envelope needs loss_db_per_m")
            for f, v in loss.items():
                if v < 0:
                    raise MaterialError(f"material {self.name!r}: linear loss must be >= 0")
        elif loss:
            raise MaterialError(f"material {self.name!r}: only envelopes carry a linear loss")

    @property
    def is_pec(self) -> bool:
        return self.kind is MaterialKind.PEC

    def linear_loss(self, freq: float) -> float:
        """Bulk loss in dB/m at ``freq`` (log-frequency interpolation)."""
        if self.kind is not MaterialKind.ENVELOPE:
            raise MaterialError(f"material {self.name!r} has no linear loss")
        return _interp_log_freq(self.loss_db_per_m, freq, self.name)

    def with_values(self, freq: float, *, eps: tuple[float, float] | None = None,
                    loss_db_per_m: float | None = None, name: str | None = None) -> "Material":
        """Copy with the table entry at ``freq`` replaced."""
        eps_tab = dict(self.eps_by_freq)
        loss_tab = dict(self.loss_db_per_m)
        if eps is not None:
            eps_tab[float(freq)] = eps
        if loss_db_per_m is not None:
            loss_tab[float(freq)] = loss_db_per_m
        return Material(name or self.name, self.kind, eps_tab, loss_tab)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.eps_by_freq:
            out["eps"] = {f"{f:g}": list(v) for f, v in self.eps_by_freq.items()}
        if self.loss_db_per_m:
            out["loss_db_per_m"] = {f"{f:g}": v for f, v in self.loss_db_per_m.items()}
        return out

    @classmethod
    def from_json(cls, name: str, data: Mapping) -> "Material":
        try:
            kind = MaterialKind(data["kind"])
        except (KeyError, ValueError) as err:
            raise MaterialError(f"material {name!r}: bad or missing 'kind'") from err
        eps = {float(f): tuple(v) for f, v in data.get("eps", {}).items()}
        loss = {float(f): float(v) for f, v in data.get("loss_db_per_m", {}).items()}
        return cls(name, kind, eps, loss)


def _interp_log_freq(table: Mapping[float, float | tuple], freq: float, name: str):
    freqs = list(table)
    if freq in table:
        return table[freq]
    for f in freqs:
        if math.isclose(f, freq, rel_tol=1e-12):
            return table[f]
    if not freqs or freq < freqs[0] or freq > freqs[-1]:
        raise MaterialError(
            f"material {name!r}: frequency {freq:g} Hz outside tabulated range "
            f"[{freqs[0]:g}, {freqs[-1]:g}] Hz" if freqs else f"material {name!r}: empty table")
    hi = next(i for i, f in enumerate(freqs) if f > freq)
    f0, f1 = freqs[hi - 1], freqs[hi]
    w = (math.log(freq) - math.log(f0)) / (math.log(f1) - math.log(f0))
    v0, v1 = np.asarray(table[f0], dtype=float), np.asarray(table[f1], dtype=float)
    v = (1 - w) * v0 + w * v1
    return tuple(float(x) for x in v) if v.ndim else float(v)


def complex_permittivity(m: Material, freq: float) -> complex:
    """Complex relative permittivity ``eps_re - 1j*eps_im`` of ``m`` at ``freq``.

    Values between tabulated frequencies are interpolated linearly in
    log-frequency.  Perfect conductors have no permittivity.
    """
    if m.is_pec:
        raise MaterialError(f"material {m.name!r} is a perfect conductor; permittivity undefined")
    re, im = _interp_log_freq(m.eps_by_freq, freq, m.name)
    return complex(re, -im)


def _check_angle(theta_i):
    theta = np.asarray(theta_i, dtype=float)
    if np.any(theta < 0) or np.any(theta >= np.pi / 2):
        raise MaterialError("incidence angle must lie in [0, pi/2)")
    return theta


def _fresnel(eps, theta, pol):
    cos_i = np.cos(theta)
    root = np.sqrt(eps - np.sin(theta) ** 2 + 0j)
    if pol is Polarization.TE:
        return (cos_i - root) / (cos_i + root)
    return (eps * cos_i - root) / (eps * cos_i + root)


def fresnel_reflection(m: Material, theta_i, pol: Polarization | str, freq: float):
    """Air-to-medium amplitude reflection coefficient.

    Args:
        m: material of the reflecting half-space.
        theta_i: incidence angle from the surface normal, in [0, pi/2).
            Scalars and arrays are accepted.
        pol: ``"TE"`` or ``"TM"``.
        freq: frequency in Hz.

    Returns:
        Complex coefficient (array if ``theta_i`` is an array).
    """
    pol = Polarization(pol)
    theta = _check_angle(theta_i)
    if m.is_pec:
        value = -1.0 + 0j if pol is Polarization.TE else 1.0 + 0j
        out = np.full(theta.shape, value)
    else:
        out = _fresnel(complex_permittivity(m, freq), theta, pol)
    return complex(out) if out.ndim == 0 else out


def fresnel_transmission(m: Material, theta_i, pol: Polarization | str, freq: float):
    """Air-to-medium amplitude (E-field) transmission coefficient of one interface."""
    pol = Polarization(pol)
    theta = _check_angle(theta_i)
    if m.is_pec:
        out = np.zeros(theta.shape, dtype=complex)
    else:
        eps = complex_permittivity(m, freq)
        cos_i = np.cos(theta)
        root = np.sqrt(eps - np.sin(theta) ** 2 + 0j)
        if pol is Polarization.TE:
            out = 2 * cos_i / (cos_i + root)
        else:
            out = 2 * np.sqrt(eps) * cos_i / (eps * cos_i + root)
    return complex(out) if out.ndim == 0 else out


def interface_power_fractions(m: Material, theta_i, pol: Polarization | str, freq: float):
    """Reflected and transmitted power fractions at an air/medium interface.

    The transmitted fraction carries the wave-impedance and beam-projection
    factor ``Re(n cos(theta_t)) / cos(theta_i)``.  For lossless media the two
    fractions sum to one.
    """
    pol = Polarization(pol)
    theta = _check_angle(theta_i)
    r = fresnel_reflection(m, theta, pol, freq)
    if m.is_pec:
        return np.abs(r) ** 2, np.zeros_like(theta)
    eps = complex_permittivity(m, freq)
    root = np.sqrt(eps - np.sin(theta) ** 2 + 0j)
    t = fresnel_transmission(m, theta, pol, freq)
    return np.abs(r) ** 2, np.real(root) / np.cos(theta) * np.abs(t) ** 2


def slab_interface_factor(m: Material, theta_i, pol: Polarization | str, freq: float):
    """Combined amplitude factor of entering and leaving a medium (no bulk loss).

    For lossless media this equals the Fresnel product ``t * t'`` (Stokes:
    ``1 - r**2``).  For lossy media ``|1 - r**2|`` can exceed one, so the
    magnitude is taken as the transmitted power fraction ``1 - |r|**2`` and
    only the phase of ``1 - r**2`` is kept.
    """
    r = np.asarray(fresnel_reflection(m, theta_i, pol, freq))
    raw = 1 - r**2
    mag = 1 - np.abs(r) ** 2
    out = mag * np.exp(1j * np.angle(raw))
    return complex(out) if out.ndim == 0 else out


def bulk_attenuation(m: Material, chord_length, freq: float):
    """Field amplitude factor for travelling ``chord_length`` metres inside ``m``."""
    chord = np.asarray(chord_length, dtype=float)
    if m.kind is MaterialKind.ENVELOPE:
        out = 10 ** (-m.linear_loss(freq) * chord / 20)
    else:
        n = np.sqrt(complex_permittivity(m, freq))
        k0 = 2 * np.pi * freq / speed_of_light
        out = np.exp(-k0 * abs(n.imag) * chord)
    return float(out) if out.ndim == 0 else out


def transmission_gain(m: Material, chord_length: float, theta_i, pol: Polarization | str,
                      freq: float):
    """Amplitude coefficient for crossing an object made of ``m``.

    The result is the two-interface factor (see :func:`slab_interface_factor`)
    times the bulk attenuation over ``chord_length``.  Envelopes use their
    declared dB/m loss; plain dielectrics use the plane-wave attenuation
    constant ``k0 * Im(sqrt(eps))``.  A zero-length crossing is lossless and
    perfect conductors are opaque.
    """
    if chord_length < 0:
        raise MaterialError(f"chord length must be >= 0 (got {chord_length})")
    pol = Polarization(pol)
    theta = _check_angle(theta_i)
    if m.is_pec:
        out = np.zeros(theta.shape, dtype=complex)
    elif chord_length == 0:
        out = np.ones(theta.shape, dtype=complex)
    else:
        out = np.asarray(slab_interface_factor(m, theta, pol, freq)) * bulk_attenuation(m, chord_length, freq)
    return complex(out) if np.ndim(out) == 0 else out


# ITU-R P.2040 concrete: eps_re = 5.31, sigma = 0.0326 * f_GHz**0.8095 S/m,
# eps_im = 17.98 * sigma / f_GHz.
def _itu_concrete(f_ghz: float) -> tuple[float, float]:
    sigma = 0.0326 * f_ghz**0.8095
    return 5.31, 17.98 * sigma / f_ghz


CONCRETE_EPS = {2e9: _itu_concrete(2.0), 28e9: _itu_concrete(28.0)}


class MaterialLibrary(dict):
    """Mapping ``material_id -> Material``."""

    def resolve(self, material_id: str) -> Material:
        try:
            return self[material_id]
        except KeyError as err:
            raise MaterialError(f"unknown material id {material_id!r}") from err

    def with_override(self, material_id: str, material: Material) -> "MaterialLibrary":
        lib = MaterialLibrary(self)
        lib[material_id] = material
        return lib

    def to_json(self) -> dict:
        return {k: v.to_json() for k, v in self.items()}


def default_library() -> MaterialLibrary:
    """Built-in materials.

    ``wood``, ``envelope_default`` and ``envelope_tuned`` carry the published
    2 GHz / 28 GHz values; ``concrete`` is the building shell.
    """
    wood_eps = {2e9: (1.99, 0.090), 28e9: (1.99, 0.11)}
    lib = MaterialLibrary({
        "metal": Material("metal", MaterialKind.PEC),
        "wood": Material("wood", MaterialKind.DIELECTRIC, wood_eps),
        "concrete": Material("concrete", MaterialKind.DIELECTRIC, CONCRETE_EPS),
        "envelope_default": Material("envelope_default", MaterialKind.ENVELOPE, wood_eps,
                                     {2e9: 0.4, 28e9: 2.5}),
        "envelope_tuned": Material("envelope_tuned", MaterialKind.ENVELOPE,
                                   {2e9: (1.2, 0.09), 28e9: (2.5, 0.11)},
                                   {2e9: 0.2, 28e9: 1.5}),
    })
    # generic id used by generated scenes; the harness swaps in the tuned values
    lib["envelope"] = lib["envelope_default"]
    return lib


def load_library(path: str | Path, base: MaterialLibrary | None = None) -> MaterialLibrary:
    """Read a material library JSON file, layered over ``base`` if given."""
    data = json.loads(Path(path).read_text())
    lib = MaterialLibrary(base or {})
    for name, entry in data.items():
        lib[name] = Material.from_json(name, entry)
    return lib


def save_library(lib: MaterialLibrary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(lib.to_json(), indent=2))
