"""Independent reference implementations used by the tests.

Nothing here reuses the package's path search, intersection or diffraction
code: mirroring, segment/polygon tests, the edge-point search (bisection)
and the UTD closed form are written out again from scratch.
"""

from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np

from factoryrt.geometry import Facet, build_scene, box_facets, quad
from factoryrt.paths.model import Diffraction, PropagationPath, Reflection, Transmission, direction_angles

C0 = 299792458.0
TOL = 1e-9


# -- geometry ----------------------------------------------------------------

def mirror(p, n, d):
    return p - 2.0 * (float(np.dot(n, p)) - d) * n


def inside_polygon(p, verts, n, tol=TOL):
    k = len(verts)
    for i in range(k):
        a, b = verts[i], verts[(i + 1) % k]
        edge = b - a
        inward = np.cross(n, edge)
        inward /= np.linalg.norm(inward)
        if float(np.dot(p - a, inward)) < -tol:
            return False
    return True


def segment_crossings(a, b, facets):
    """``(distance, facet index, point)`` of every facet crossed by the open segment."""
    out = []
    d = b - a
    L = float(np.linalg.norm(d))
    for i, f in enumerate(facets):
        n = f.normal
        off = float(np.dot(n, f.vertices[0]))
        den = float(np.dot(d, n))
        if abs(den) <= 1e-12 * L:
            continue
        t = (off - float(np.dot(a, n))) / den
        dist = t * L
        if not (TOL < dist < L - TOL):
            continue
        p = a + t * d
        if inside_polygon(p, f.vertices, n):
            out.append((dist, i, p))
    out.sort(key=lambda h: (h[0], h[1]))
    return out


def fermat_point_search(p0, p1, a, b):
    """Edge parameter minimising ``|a-p| + |p-b|``.

    The path length is convex along the line, so its derivative is bisected
    to machine precision on a wide bracket.
    """
    e = p1 - p0
    L = float(np.linalg.norm(e))
    e = e / L
    ox, oy, oz = map(float, p0)
    ex, ey, ez = map(float, e)
    ax, ay, az = map(float, a)
    bx, by, bz = map(float, b)

    def slope(s):
        px, py, pz = ox + s * ex, oy + s * ey, oz + s * ez
        da = math.hypot(px - ax, py - ay, pz - az)
        db = math.hypot(px - bx, py - by, pz - bz)
        return ((px - ax) * ex + (py - ay) * ey + (pz - az) * ez) / da + \
            ((px - bx) * ex + (py - by) * ey + (pz - bz) * ez) / db

    lo, hi = -10 * L - 100, 11 * L + 100
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if slope(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), L, e


def _plane(f):
    return f.normal, float(np.dot(f.normal, f.vertices[0]))


def _reflection_ok(prev, cur, nxt, f):
    n, off = _plane(f)
    dp = float(np.dot(n, prev)) - off
    dn = float(np.dot(n, nxt)) - off
    if abs(dp) <= TOL or abs(dn) <= TOL or dp * dn <= 0:
        return False
    if f.thickness is None and dp <= 0:
        return False
    return inside_polygon(cur, f.vertices, n)


def _exterior(w, foot, p):
    d = p - foot
    d = d - float(np.dot(d, w.e)) * w.e
    r = float(np.linalg.norm(d))
    if r <= TOL:
        return False
    phi = math.atan2(float(np.dot(d, w.n0)), float(np.dot(d, w.t0))) % (2 * math.pi)
    return TOL / r < phi < w.exterior_angle - TOL / r


def _backtrack(start_images, facets, seq, end):
    """Reflection points for ``source -> seq -> end`` given successive images."""
    pts = []
    target = end
    for j in range(len(seq) - 1, -1, -1):
        n, off = _plane(facets[seq[j]])
        img = start_images[j + 1]
        dt = float(np.dot(n, target)) - off
        di = float(np.dot(n, img)) - off
        if dt == di:
            return None
        t = dt / (dt - di)
        p = target + t * (img - target)
        pts.append(p)
        target = p
    return pts[::-1]


def _images(src, facets, seq):
    imgs = [src]
    for f in seq:
        n, off = _plane(facets[f])
        imgs.append(mirror(imgs[-1], n, off))
    return imgs


def brute_force_paths(scene, materials, tx, rx, R, D):
    """All valid paths by exhaustive sequence enumeration.

    Returns a dict ``key -> (vertices, transmissions)`` where ``key`` uses the
    same ``(("R", facet), ("D", wedge), ...)`` convention as the package.
    """
    facets = scene.facets
    wedges = scene.wedges
    F = len(facets)
    pec = [materials.resolve(f.material_id).is_pec for f in facets]
    found = {}

    def accept(key, verts, kinds, ids):
        for i in range(len(verts) - 1):
            if np.linalg.norm(verts[i + 1] - verts[i]) <= TOL:
                return
        for j, (kind, ident) in enumerate(zip(kinds, ids)):
            prev, cur, nxt = verts[j], verts[j + 1], verts[j + 2]
            if kind == "R":
                if not _reflection_ok(prev, cur, nxt, facets[ident]):
                    return
            elif not (_exterior(wedges[ident], cur, prev) and _exterior(wedges[ident], cur, nxt)):
                return
        trans = []
        for i in range(len(verts) - 1):
            for dist, fi, p in segment_crossings(verts[i], verts[i + 1], facets):
                if pec[fi]:
                    return
                trans.append((i, fi, p))
        found[key] = (np.array(verts), trans)

    for r in range(R + 1):
        for seq in itertools.product(range(F), repeat=r):
            imgs = _images(tx, facets, seq)
            pts = _backtrack(imgs, facets, seq, rx) if r else []
            if pts is None:
                continue
            accept(tuple(("R", f) for f in seq), [tx, *pts, rx], ["R"] * r, list(seq))
    if D >= 1:
        for w_id, w in enumerate(wedges):
            p0, p1 = w.edge
            for r in range(R + 1):
                for a in range(r + 1):
                    for seq in itertools.product(range(F), repeat=r):
                        pre, post = seq[:a], seq[a:]
                        I = _images(tx, facets, pre)[-1]
                        J = _images(rx, facets, post[::-1])[-1]
                        t, L, e = fermat_point_search(p0, p1, I, J)
                        if not (1e-7 < t < L - 1e-7):
                            continue
                        P = p0 + t * e
                        pre_pts = _backtrack(_images(tx, facets, pre), facets, pre, P) if pre else []
                        rev = post[::-1]
                        post_pts = _backtrack(_images(rx, facets, rev), facets, rev, P) if post else []
                        if pre_pts is None or post_pts is None:
                            continue
                        verts = [tx, *pre_pts, P, *post_pts[::-1], rx]
                        kinds = ["R"] * a + ["D"] + ["R"] * (r - a)
                        ids = list(pre) + [w_id] + list(post)
                        key = tuple(("R", f) for f in pre) + (("D", w_id),) + tuple(("R", f) for f in post)
                        accept(key, verts, kinds, ids)
    return found


def oracle_path(verts, kinds_ids, trans, chord=0.0):
    """Build a :class:`PropagationPath` from oracle output (thin sheets only)."""
    inter = []
    ti = 0
    for s in range(len(verts) - 1):
        while ti < len(trans) and trans[ti][0] == s:
            _, fi, p = trans[ti]
            inter.append(Transmission(fi, p, chord, fi, p))
            ti += 1
        if s < len(kinds_ids):
            kind, ident = kinds_ids[s]
            inter.append(Reflection(ident, verts[s + 1]) if kind == "R" else Diffraction(ident, verts[s + 1]))
    total = float(np.sum(np.linalg.norm(np.diff(verts, axis=0), axis=1)))
    aod = direction_angles(verts[1] - verts[0])
    aoa = direction_angles(verts[-2] - verts[-1])
    return PropagationPath(tuple(inter), verts, total, total / C0, aod[0], aod[1], aoa[0], aoa[1],
                           key=tuple(kinds_ids))


def random_oracle_scene(seed: int):
    """Seeded scene of at most six facets.

    Every third seed is a closed metal box (one-sided faces, 90-degree
    wedges); the others mix metal, wood and concrete sheets.
    """
    rng = np.random.default_rng(seed)
    if seed % 3 == 0:
        lo = rng.uniform(-1.5, -0.5, 3)
        hi = rng.uniform(0.5, 1.5, 3)
        facets = box_facets(lo, hi, "metal")
        while True:
            tx = rng.uniform(-4, 4, 3)
            rx = rng.uniform(-4, 4, 3)
            if np.any((tx < lo - 0.2) | (tx > hi + 0.2)) and np.any((rx < lo - 0.2) | (rx > hi + 0.2)):
                break
        return build_scene(facets), tx, rx
    n = int(rng.integers(3, 7))
    facets = [quad((-6, -6, 0), (6, -6, 0), (6, 6, 0), (-6, 6, 0), "concrete", thickness=0.2)]
    mats = [("metal", 0.0), ("wood", 0.1), ("concrete", 0.2)]
    for _ in range(n - 1):
        c = rng.uniform(-3, 3, 3)
        c[2] = rng.uniform(0.8, 3.0)
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        v = np.cross(u, rng.normal(size=3))
        v /= np.linalg.norm(v)
        a, b = rng.uniform(0.5, 2.0, 2)
        mat, th = mats[int(rng.integers(0, 3))]
        facets.append(quad(c - a * u - b * v, c + a * u - b * v, c + a * u + b * v, c - a * u + b * v,
                           mat, thickness=th))
    tx = np.array([*rng.uniform(-4, 4, 2), rng.uniform(0.5, 3.5)])
    rx = np.array([*rng.uniform(-4, 4, 2), rng.uniform(0.5, 3.5)])
    return build_scene(facets), tx, rx


# -- electromagnetics ----------------------------------------------------------

def fresnel_oracle(eps_re, eps_im, theta, pol):
    """Air-to-medium reflection coefficient via Snell's law (mpmath, 40 digits)."""
    with mp.workdps(40):
        eps = mp.mpc(eps_re, -eps_im)
        n = mp.sqrt(eps)
        st = mp.sin(theta) / n
        ct = mp.sqrt(1 - st * st)
        ci = mp.cos(theta)
        if pol == "TE":
            r = (ci - n * ct) / (ci + n * ct)
        else:
            r = (n * ci - ct) / (n * ci + ct)
        return complex(r)


def transition_oracle(x):
    """``2j sqrt(x) e^{jx} int_{sqrt x}^inf e^{-j t^2} dt`` via mpmath Fresnel integrals."""
    with mp.workdps(40):
        x = mp.mpf(x)
        u = mp.sqrt(x)
        s = u * mp.sqrt(2 / mp.pi)
        tail = mp.sqrt(mp.pi / 2) * ((mp.mpf(1) / 2 - mp.fresnelc(s)) - 1j * (mp.mpf(1) / 2 - mp.fresnels(s)))
        return complex(2j * u * mp.exp(1j * x) * tail)


def utd_oracle(n, phi, phi_i, beta0, s, s_i, freq, soft=True, eps=1e-9):
    """Kouyoumjian-Pathak wedge coefficient for a perfectly conducting wedge.

    On a boundary one cotangent is singular.  There the observer is moved
    ``eps`` into the shadow (incidence boundary) or into the lit region
    (reflection boundary), the sides on which the direct ray is blocked and
    the reflected ray still exists.
    """
    with mp.workdps(40):
        k = 2 * mp.pi * freq / C0
        L = s * s_i * mp.sin(beta0) ** 2 / (s + s_i)

        def term(beta, sign):
            N = mp.nint((beta + sign * mp.pi) / (2 * mp.pi * n))
            a = 2 * mp.cos((2 * mp.pi * n * N - beta) / 2) ** 2
            return mp.cot((mp.pi + sign * beta) / (2 * n)) * transition_oracle(k * L * a)

        def total(ph):
            bm, bp = ph - phi_i, ph + phi_i
            first = term(bm, +1) + term(bm, -1)
            second = term(bp, +1) + term(bp, -1)
            pre = -mp.exp(-1j * mp.pi / 4) / (2 * n * mp.sqrt(2 * mp.pi * k) * mp.sin(beta0))
            return pre * (first - second if soft else first + second)

        phi = mp.mpf(phi)
        if abs(abs(phi - phi_i) - mp.pi) < 1e-12:
            return complex(total(phi + eps if phi > phi_i else phi - eps))
        if abs(phi + phi_i - mp.pi) < 1e-12:
            return complex(total(phi - eps))
        if abs(phi + phi_i - (2 * n - 1) * mp.pi) < 1e-12:
            return complex(total(phi + eps))
        return complex(total(phi))


def dipole_oracle(theta):
    if math.sin(theta) == 0:
        return 0.0
    return 1.643 * (math.cos(math.pi / 2 * math.cos(theta)) / math.sin(theta)) ** 2


def plate_scene(horizontal: bool):
    """Large perfectly conducting plate with one straight edge through the origin.

    Vertical plate: occupies ``x >= 0`` in the plane ``y = 0`` with the edge
    along ``z``.  Horizontal plate: occupies ``x >= 0`` in ``z = 0`` with the
    edge along ``y``.
    """
    if horizontal:
        f = Facet(np.array([(0, -200, 0), (400, -200, 0), (400, 200, 0), (0, 200, 0)], float), "metal",
                  thickness=0.0)
    else:
        f = Facet(np.array([(0, 0, -200), (400, 0, -200), (400, 0, 200), (0, 0, 200)], float), "metal",
                  thickness=0.0)
    return build_scene([f])
