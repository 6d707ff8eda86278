"""Image trees with conservative beam culling.

A tree is rooted at one terminal.  A node at depth ``k`` stands for a
sequence of ``k`` specular reflections; it stores the image of the root
through that sequence and a *beam*: the convex region reachable by straight
rays leaving the last reflecting facet.  The beam is the cone from the image
through the window polygon (the facet clipped by the parent beam), cut by the
facet plane.  Occlusion is ignored, so beams are supersets of the truly lit
region and culling never drops a geometrically valid path.

Half-spaces are stored as ``a . x >= b``; unused slots hold ``a = 0, b = -1``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from ..geometry import Clusters, Scene, mirror_points

BEAM_TOL = 1e-9
_SIDE_TOL = 1e-9
_MIN_WINDOW_AREA = 1e-12


@dataclass
class Level:
    """All tree nodes of one depth, stored column-wise."""

    depth: int
    fid: np.ndarray  # (M,) facet of the last reflection, -1 at the root
    parent: np.ndarray  # (M,) index into the previous level
    image: np.ndarray  # (M, 3)
    chain_f: np.ndarray  # (M, depth) facet sequence from the root outwards
    chain_img: np.ndarray  # (M, depth, 3) image after each reflection
    plane_a: np.ndarray  # (M, P, 3)
    plane_b: np.ndarray  # (M, P)

    def __len__(self) -> int:
        return self.fid.shape[0]

    def contains(self, x: np.ndarray, idx: np.ndarray | None = None, tol: float = BEAM_TOL) -> np.ndarray:
        a = self.plane_a if idx is None else self.plane_a[idx]
        b = self.plane_b if idx is None else self.plane_b[idx]
        return np.all(a @ x - b >= -tol, axis=1)


def _root(source: np.ndarray) -> Level:
    return Level(0, np.array([-1]), np.array([-1]), source[None].copy(),
                 np.zeros((1, 0), dtype=int), np.zeros((1, 0, 3)),
                 np.zeros((1, 1, 3)), np.full((1, 1), -1.0))


def clip_polygons(poly: np.ndarray, cnt: np.ndarray, a: np.ndarray, b: np.ndarray,
                  tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Clip each convex polygon ``poly[i]`` (``cnt[i]`` vertices) to ``a[i].x >= b[i]``.

    Vectorised Sutherland-Hodgman step.  Returns the new padded polygons and
    counts; polygons fully outside get count 0.
    """
    K, V, _ = poly.shape
    if K == 0:
        return poly, cnt
    j = np.arange(V)
    valid = j[None, :] < cnt[:, None]
    d = np.einsum("kvj,kj->kv", poly, a) - b[:, None]
    inside = d >= -tol
    nxt = np.where(j[None, :] + 1 < cnt[:, None], j[None, :] + 1, 0)
    pn = np.take_along_axis(poly, nxt[:, :, None], axis=1)
    dn = np.take_along_axis(d, nxt, axis=1)
    inside_n = np.take_along_axis(inside, nxt, axis=1)
    cross = valid & (inside != inside_n)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, d / (d - dn), 0.0)
    ipt = poly + t[:, :, None] * (pn - poly)
    out = np.empty((K, 2 * V, 3))
    out[:, 0::2] = poly
    out[:, 1::2] = ipt
    mask = np.empty((K, 2 * V), dtype=bool)
    mask[:, 0::2] = valid & inside
    mask[:, 1::2] = cross
    new_cnt = mask.sum(axis=1)
    width = max(int(new_cnt.max()), 1)
    order = np.argsort(~mask, axis=1, kind="stable")[:, :width]
    res = np.take_along_axis(out, order[:, :, None], axis=1)
    # pad by repeating the last real vertex
    last = np.clip(new_cnt - 1, 0, None)
    pad = np.arange(width)[None, :] >= new_cnt[:, None]
    res = np.where(pad[:, :, None], res[np.arange(K), last][:, None, :], res)
    return res, new_cnt


def polygon_area(poly: np.ndarray, cnt: np.ndarray) -> np.ndarray:
    K, V, _ = poly.shape
    j = np.arange(V)
    nxt = np.where(j[None, :] + 1 < cnt[:, None], j[None, :] + 1, 0)
    pn = np.take_along_axis(poly, nxt[:, :, None], axis=1)
    valid = (j[None, :] < cnt[:, None])[:, :, None]
    cr = np.where(valid, np.cross(poly, pn), 0.0).sum(axis=1)
    return 0.5 * np.linalg.norm(cr, axis=1)


def beam_planes(apex: np.ndarray, win: np.ndarray, cnt: np.ndarray,
                fn: np.ndarray, fd: np.ndarray, src: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Half-spaces of the beam from ``apex`` through window ``win``.

    ``src`` is the pre-reflection (real-side) point; the beam lies on its
    side of the facet plane ``(fn, fd)``.
    """
    K, V, _ = win.shape
    j = np.arange(V)
    nxt = np.where(j[None, :] + 1 < cnt[:, None], j[None, :] + 1, 0)
    wn = np.take_along_axis(win, nxt[:, :, None], axis=1)
    m = np.cross(win - apex[:, None], wn - apex[:, None])
    norm = np.linalg.norm(m, axis=2)
    cen = np.where((j[None, :] < cnt[:, None])[:, :, None], win, 0).sum(axis=1) / np.maximum(cnt, 1)[:, None]
    sgn = np.sign(np.einsum("kvj,kj->kv", m, cen - apex))
    ok = (j[None, :] < cnt[:, None]) & (norm > 1e-14)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(ok[:, :, None], m * (sgn / norm)[:, :, None], 0.0)
    bb = np.where(ok, np.einsum("kvj,kj->kv", m, apex), -1.0)
    side = np.sign(np.einsum("kj,kj->k", src, fn) - fd)
    pa = np.concatenate([m, (side[:, None] * fn)[:, None, :]], axis=1)
    pb = np.concatenate([bb, (side * fd)[:, None]], axis=1)
    return pa, pb


def _box_in_beam(A: np.ndarray, B: np.ndarray, center: np.ndarray, half: np.ndarray) -> np.ndarray:
    """``(m, C)`` mask: box ``C`` may intersect the beam of node ``m``."""
    m, p, _ = A.shape
    val = (A.reshape(-1, 3) @ center.T + np.abs(A).reshape(-1, 3) @ half.T).reshape(m, p, -1)
    return np.all(val - B[:, :, None] >= -BEAM_TOL, axis=1)


def _expand_pairs(mask: np.ndarray, members: np.ndarray):
    """(row, item) pairs from a (row, cluster) mask and padded cluster members."""
    ri, ci = np.nonzero(mask)
    rows = np.repeat(ri, members.shape[1])
    items = members[ci].reshape(-1)
    keep = items >= 0
    return rows[keep], items[keep]


def _candidates(scene: Scene, level: Level, chunk: int = 512):
    """(node, facet) pairs passing the side and separating-plane tests."""
    cl = scene.clusters
    out_i, out_g = [], []
    for s in range(0, len(level), chunk):
        A = level.plane_a[s:s + chunk]
        B = level.plane_b[s:s + chunk]
        i, g = _expand_pairs(_box_in_beam(A, B, cl.center, cl.half), cl.members)
        if i.size == 0:
            continue
        S = level.image[s + i]
        sd = np.einsum("kj,kj->k", S, scene.normals[g]) - scene.offsets[g]
        ok = (np.abs(sd) > _SIDE_TOL) & (~scene.one_sided[g] | (sd > _SIDE_TOL))
        if level.depth > 0:
            ok &= level.fid[s + i] != g
        i, g = i[ok], g[ok]
        proj = np.einsum("kpj,kvj->kpv", A[i], scene.verts[g]).max(axis=2)
        ok = np.all(proj - B[i] >= -BEAM_TOL, axis=1)
        out_i.append(i[ok] + s)
        out_g.append(g[ok])
    if not out_i:
        return np.empty(0, int), np.empty(0, int)
    i = np.concatenate(out_i)
    g = np.concatenate(out_g)
    order = np.lexsort((g, i))
    return i[order], g[order]


def expand(scene: Scene, level: Level, chunk: int = 20000) -> Level:
    """Children of every node of ``level`` (one more reflection)."""
    ii, gg = _candidates(scene, level)
    parts = []
    for s in range(0, ii.size, chunk):
        i, g = ii[s:s + chunk], gg[s:s + chunk]
        poly = scene.verts[g]
        cnt = scene.nverts[g].copy()
        A, B = level.plane_a[i], level.plane_b[i]
        for p in range(A.shape[1]):
            if not np.any(A[:, p] != 0):
                continue
            poly, cnt = clip_polygons(poly, cnt, A[:, p], B[:, p])
        keep = (cnt >= 3)
        keep[keep] = polygon_area(poly[keep], cnt[keep]) > _MIN_WINDOW_AREA
        i, g, poly, cnt = i[keep], g[keep], poly[keep], cnt[keep]
        if i.size == 0:
            continue
        src = level.image[i]
        img = mirror_points(src, scene.normals[g], scene.offsets[g])
        pa, pb = beam_planes(img, poly, cnt, scene.normals[g], scene.offsets[g], src)
        parts.append((i, g, img, pa, pb))
    k = level.depth + 1
    if not parts:
        return Level(k, np.empty(0, int), np.empty(0, int), np.empty((0, 3)),
                     np.empty((0, k), int), np.empty((0, k, 3)), np.zeros((0, 1, 3)), np.zeros((0, 1)))
    P = max(p[3].shape[1] for p in parts)

    def padp(pa, pb):
        extra = P - pa.shape[1]
        if extra:
            pa = np.concatenate([pa, np.zeros((pa.shape[0], extra, 3))], axis=1)
            pb = np.concatenate([pb, np.full((pb.shape[0], extra), -1.0)], axis=1)
        return pa, pb

    i = np.concatenate([p[0] for p in parts])
    g = np.concatenate([p[1] for p in parts])
    img = np.concatenate([p[2] for p in parts])
    padded = [padp(p[3], p[4]) for p in parts]
    pa = np.concatenate([x[0] for x in padded])
    pb = np.concatenate([x[1] for x in padded])
    chain_f = np.concatenate([level.chain_f[i], g[:, None]], axis=1)
    chain_img = np.concatenate([level.chain_img[i], img[:, None, :]], axis=1)
    return Level(k, g, i, img, chain_f, chain_img, pa, pb)


class ImageTree:
    """Reflection image tree of ``source`` up to ``depth`` reflections."""

    def __init__(self, scene: Scene, source, depth: int):
        self.scene = scene
        self.source = np.asarray(source, dtype=float)
        self.levels: list[Level] = [_root(self.source)]
        for _ in range(depth):
            self.levels.append(expand(scene, self.levels[-1]))
        self._incidence: dict[int, tuple] = {}

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def size(self) -> int:
        return sum(len(lv) for lv in self.levels)

    def incidence(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Wedges whose edge intersects the beam of each depth-``k`` node.

        Returns ``(node, wedge, t_lo, t_hi)`` with the edge parameter interval
        in ``[0, 1]`` that lies inside the beam.
        """
        if k not in self._incidence:
            self._incidence[k] = edge_incidence(self.scene, self.levels[k])
        return self._incidence[k]


_WEDGE_CACHE: "weakref.WeakKeyDictionary[Scene, dict]" = weakref.WeakKeyDictionary()


def wedge_data(scene: Scene) -> dict:
    """Per-scene packed wedge arrays and wedge clusters (cached)."""
    data = _WEDGE_CACHE.get(scene)
    if data is None:
        ws = scene.wedges
        p0, p1 = scene.wedge_p0, scene.wedge_p1
        data = {
            "n0": np.array([w.n0 for w in ws]).reshape(-1, 3),
            "n1": np.array([w.n1 for w in ws]).reshape(-1, 3),
            "half": np.array([w.face_0 == w.face_1 for w in ws], dtype=bool),
            "clusters": Clusters(np.minimum(p0, p1), np.maximum(p0, p1), group=4),
        }
        _WEDGE_CACHE[scene] = data
    return data


def wedge_front(scene: Scene, w: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Mask: ``pts[i]`` lies outside the solid angle of wedge ``w[i]`` (can see it)."""
    wd = wedge_data(scene)
    rel = pts - scene.wedge_p0[w]
    d0 = np.einsum("ij,ij->i", rel, wd["n0"][w])
    d1 = np.einsum("ij,ij->i", rel, wd["n1"][w])
    return np.where(wd["half"][w], np.abs(d0) > _SIDE_TOL, (d0 > _SIDE_TOL) | (d1 > _SIDE_TOL))


def edge_incidence(scene: Scene, level: Level, chunk: int = 1024):
    W = len(scene.wedges)
    if W == 0 or len(level) == 0:
        e = np.empty(0, int)
        return e, e, np.empty(0), np.empty(0)
    cl = wedge_data(scene)["clusters"]
    p0, p1 = scene.wedge_p0, scene.wedge_p1
    out = []
    for s in range(0, len(level), chunk):
        A = level.plane_a[s:s + chunk]
        B = level.plane_b[s:s + chunk]
        i, w = _expand_pairs(_box_in_beam(A, B, cl.center, cl.half), cl.members)
        ok = wedge_front(scene, w, level.image[s + i])
        i, w = i[ok], w[ok]
        q0, q1 = p0[w], p1[w]
        lo = np.zeros(i.size)
        hi = np.ones(i.size)
        keep = np.arange(i.size)
        # clip the edge plane by plane, compacting the survivors as we go
        for p in range(A.shape[1]):
            ap, bp = A[i[keep], p], B[i[keep], p]
            v0 = np.einsum("kj,kj->k", ap, q0[keep]) - bp
            v1 = np.einsum("kj,kj->k", ap, q1[keep]) - bp
            in0 = v0 >= -BEAM_TOL
            in1 = v1 >= -BEAM_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                tc = v0 / (v0 - v1)
            l = np.where(~in0 & in1, np.maximum(lo[keep], tc), lo[keep])
            h = np.where(in0 & ~in1, np.minimum(hi[keep], tc), hi[keep])
            ok = (in0 | in1) & (h - l >= -1e-12)
            keep = keep[ok]
            lo[keep] = l[ok]
            hi[keep] = h[ok]
        alive = keep
        out.append((i[alive] + s, w[alive], lo[alive], hi[alive]))
    return tuple(np.concatenate([o[j] for o in out]) for j in range(4))
