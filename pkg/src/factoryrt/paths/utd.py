"""Edge diffraction: Fermat point on an edge and the UTD wedge coefficient."""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy.special import modfresnelm

from ..geometry import GeometryError, Wedge
from .model import SPEED_OF_LIGHT

BOUNDARY_EPS = 1e-9
_SINGULAR = 1e-12


class EdgePolarization(enum.Enum):
    SOFT = "soft"  # E parallel to the edge-fixed plane of incidence (Dirichlet)
    HARD = "hard"  # Neumann


def transition_function(x):
    """UTD transition function ``F(x) = 2j sqrt(x) e^{jx} int_{sqrt x}^inf e^{-j t^2} dt``.

    Defined for ``x >= 0``; ``F(0) = 0`` and ``F -> 1`` as ``x -> inf``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("transition function argument must be non-negative")
    sx = np.sqrt(x)
    fm = modfresnelm(sx)[0]
    out = 2j * sx * np.exp(1j * x) * fm
    return out if out.ndim else complex(out)


def fermat_diffraction_point(wedge: Wedge, a, b, tol: float = 1e-12) -> tuple[np.ndarray, bool]:
    """Point on the edge minimising ``|a-p| + |p-b|``.

    Returns ``(p, valid)``.  When the unconstrained minimiser falls outside
    the edge segment, ``p`` is the nearer endpoint and ``valid`` is False.
    """
    p0, p1 = (np.asarray(v, float) for v in wedge.edge)
    length = float(np.linalg.norm(p1 - p0))
    if length < 1e-12:
        raise GeometryError("degenerate wedge with zero-length edge")
    e = (p1 - p0) / length
    t, ok = fermat_parameters(p0[None], e[None], np.asarray(a, float)[None], np.asarray(b, float)[None])
    t = float(t[0])
    if not ok[0]:
        raise GeometryError("point lies on the edge line")
    if t < -tol or t > length + tol:
        return (p0 if t < 0 else p1).copy(), False
    return p0 + min(max(t, 0.0), length) * e, True


def fermat_parameters(p0: np.ndarray, e: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Vectorised unconstrained Fermat parameter along lines ``p0 + t e``.

    Unfolding the two points about the edge line makes the optimum satisfy
    ``(t - ta)/ra = (tb - t)/rb``.  Returns ``(t, ok)``; ``ok`` is False when
    a point sits on the line.
    """
    ra_v = a - p0
    rb_v = b - p0
    ta = np.einsum("ij,ij->i", ra_v, e)
    tb = np.einsum("ij,ij->i", rb_v, e)
    ra = np.linalg.norm(ra_v - ta[:, None] * e, axis=1)
    rb = np.linalg.norm(rb_v - tb[:, None] * e, axis=1)
    den = ra + rb
    ok = (ra > 1e-12) & (rb > 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ok, (ta * rb + tb * ra) / np.where(ok, den, 1.0), 0.0)
    return t, ok


def _terms(n, phi, phi_i, beta0, L, k):
    """Common factor and the four ``cot * F`` terms (material independent).

    Arguments are 1-D arrays of equal length; the terms come back as
    ``(4, N)`` in the order incidence+, incidence-, face n, face 0.
    """
    coef = -np.exp(-1j * math.pi / 4) / (2 * n * np.sqrt(2 * math.pi * k) * np.sin(beta0))
    parts = np.empty((4, phi.size), dtype=complex)
    for i, (beta, sign) in enumerate(((phi - phi_i, +1), (phi - phi_i, -1), (phi + phi_i, +1), (phi + phi_i, -1))):
        big_n = np.round((beta + sign * math.pi) / (2 * math.pi * n))
        # angular distance to the boundary; cot and a(beta) both derive from it so
        # their rounding errors cancel near the singularity
        eps = math.pi + sign * (beta - 2 * math.pi * n * big_n)
        a = 2 * np.sin(eps / 2) ** 2
        parts[i] = transition_function(k * L * a) / np.tan(eps / (2 * n))
    return coef, parts


def _boundary_shift(n, phi, phi_i):
    """Direction in which to nudge ``phi`` off a shadow or reflection boundary.

    The path finder treats an observer exactly on the incidence shadow
    boundary as shadowed (the direct ray grazes the edge and is blocked) and
    one exactly on a reflection boundary as lit (the specular point lies on
    the face edge).  Moving ``phi`` to the matching side keeps GO + UTD
    continuous.  Returns +1/-1, 0 off boundaries and nan where two
    boundaries with opposite requirements coincide.
    """
    bm, bp = phi - phi_i, phi + phi_i
    isb = (np.abs(np.sin((math.pi + bm) / (2 * n))) < _SINGULAR) | (np.abs(np.sin((math.pi - bm) / (2 * n))) < _SINGULAR)
    rsb0 = np.abs(np.sin((math.pi - bp) / (2 * n))) < _SINGULAR
    rsbn = np.abs(np.sin((math.pi + bp) / (2 * n))) < _SINGULAR
    up = (isb & (bm > 0)) | rsbn
    down = (isb & (bm < 0)) | rsb0
    return np.where(up & down, np.nan, np.where(up, 1.0, np.where(down, -1.0, 0.0)))


def _regular_terms(n, phi, phi_i, beta0, s, s_i, freq):
    """:func:`_terms` with boundary observers nudged as in :func:`_boundary_shift`."""
    n, phi, phi_i, beta0, s, s_i = (a.ravel() for a in np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (n, phi, phi_i, beta0, s, s_i))))
    if np.any(n <= 0) or np.any(n > 2):
        raise ValueError("wedge parameter n must lie in (0, 2]")
    k = 2 * math.pi * freq / SPEED_OF_LIGHT
    L = s * s_i * np.sin(beta0) ** 2 / (s + s_i)
    shift = _boundary_shift(n, phi, phi_i)
    on = np.nonzero(shift != 0)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        coef, parts = _terms(n, phi, phi_i, beta0, L, k)
    if on.size:
        args = (phi_i[on], beta0[on], L[on], k)
        plus = _terms(n[on], phi[on] + BOUNDARY_EPS, *args)[1]
        minus = _terms(n[on], phi[on] - BOUNDARY_EPS, *args)[1]
        sh = shift[on]
        parts[:, on] = np.where(np.isnan(sh), 0.5 * (plus + minus), np.where(sh > 0, plus, minus))
    return coef, parts


def _weights(pol: EdgePolarization, r0, rn):
    pec = -1.0 if pol is EdgePolarization.SOFT else 1.0
    r0 = pec if r0 is None else np.where(np.isnan(r0), pec, r0)
    rn = pec if rn is None else np.where(np.isnan(rn), pec, rn)
    return r0, rn


def utd_coefficients(n, phi, phi_i, beta0, s, s_i, freq: float, pol: EdgePolarization,
                     r0=None, rn=None) -> np.ndarray:
    """Vectorised form of :func:`utd_coefficient` (arrays broadcast together)."""
    shape = np.broadcast(*(np.asarray(v) for v in (n, phi, phi_i, beta0, s, s_i))).shape
    coef, parts = _regular_terms(n, phi, phi_i, beta0, s, s_i, freq)
    r0, rn = _weights(pol, r0, rn)
    out = coef * (parts[0] + parts[1] + rn * parts[2] + r0 * parts[3])
    return out.reshape(shape)


def utd_soft_hard(n, phi, phi_i, beta0, s, s_i, freq: float, r0=None, rn=None):
    """Soft and hard coefficients sharing one evaluation of the transition terms.

    ``r0``/``rn`` are ``(soft, hard)`` pairs of face reflection coefficients
    (``nan`` entries select the conductor values).
    """
    coef, parts = _regular_terms(n, phi, phi_i, beta0, s, s_i, freq)
    out = []
    for i, pol in enumerate((EdgePolarization.SOFT, EdgePolarization.HARD)):
        w0, wn = _weights(pol, None if r0 is None else r0[i], None if rn is None else rn[i])
        out.append(coef * (parts[0] + parts[1] + wn * parts[2] + w0 * parts[3]))
    return out[0], out[1]


def utd_coefficient(wedge, phi: float, phi_i: float, beta0: float, s: float, s_i: float,
                    freq: float, pol: EdgePolarization, r0: complex | None = None,
                    rn: complex | None = None) -> complex:
    """Kouyoumjian-Pathak diffraction coefficient for spherical incidence.

    Args:
        wedge: a :class:`Wedge` or its ``n_param`` (exterior angle / pi).
        phi, phi_i: diffraction and incidence angles measured from face 0
            into free space, in ``[0, n*pi]``.
        beta0: angle between the incident ray and the edge.
        s, s_i: distances edge->observer and source->edge (unfolded).
        r0, rn: reflection coefficients of face 0 / face n for this
            polarization.  ``None`` selects the perfect conductor values
            (-1 soft, +1 hard).  Finite values implement the Luebbers
            weighting of the two reflection-boundary terms.

    Observation points exactly on a shadow boundary are evaluated 1e-9 rad
    into the shadow, and points on a reflection boundary 1e-9 rad into the
    lit side, matching how the path finder resolves those grazing cases.
    Where both coincide (grazing incidence) the two sides are averaged.
    """
    n = float(wedge.n_param if isinstance(wedge, Wedge) else wedge)
    out = utd_coefficients(n, phi, phi_i, beta0, s, s_i, freq, pol,
                           None if r0 is None else complex(r0), None if rn is None else complex(rn))
    return complex(out)
