"""Scene geometry: planar convex facets, wedges, and segment queries.

All lengths are metres in a right-handed frame with ``z`` up.  A facet either
bounds a closed solid (``thickness is None``; the normal points out of the
solid and only the front side reflects) or is a thin two-sided sheet of the
given thickness.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "GeometryError",
    "Facet",
    "Wedge",
    "Hit",
    "Scene",
    "BVH",
    "Clusters",
    "segment_box_mask",
    "build_scene",
    "extract_wedges",
    "intersect_segment",
    "intersect_segment_linear",
    "segment_hits",
    "mirror_point",
    "mirror_points",
    "box_facets",
    "quad",
    "load_scene",
    "save_scene",
    "scene_to_json",
    "ENDPOINT_TOL",
    "WELD_TOL",
]

ENDPOINT_TOL = 1e-9
WELD_TOL = 1e-6
_MIN_WEDGE_EXCESS = 1e-3


class GeometryError(ValueError):
    pass


def _newell_normal(verts: np.ndarray) -> np.ndarray:
    nxt = np.roll(verts, -1, axis=0)
    return np.array([
        np.sum((verts[:, 1] - nxt[:, 1]) * (verts[:, 2] + nxt[:, 2])),
        np.sum((verts[:, 2] - nxt[:, 2]) * (verts[:, 0] + nxt[:, 0])),
        np.sum((verts[:, 0] - nxt[:, 0]) * (verts[:, 1] + nxt[:, 1])),
    ])


@dataclass(frozen=True, eq=False)
class Facet:
    """Planar convex polygon with a material reference.

    The normal follows the vertex winding (right-hand rule) unless ``normal``
    is given, in which case the winding is reversed if needed to match it.
    """

    vertices: np.ndarray
    material_id: str
    normal: np.ndarray | None = None
    thickness: float | None = None

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float).reshape(-1, 3)
        if verts.shape[0] < 3:
            raise GeometryError("facet needs at least 3 vertices")
        if not np.all(np.isfinite(verts)):
            raise GeometryError("facet vertices must be finite")
        raw = _newell_normal(verts)
        norm = np.linalg.norm(raw)
        scale = max(1.0, float(np.ptp(verts, axis=0).max()))
        if norm < 1e-12 * scale * scale:
            raise GeometryError("degenerate facet (collinear vertices)")
        n = raw / norm
        if self.normal is not None:
            given = np.asarray(self.normal, dtype=float)
            given = given / np.linalg.norm(given)
            if abs(abs(given @ n) - 1) > 1e-6:
                raise GeometryError("given normal is not perpendicular to the facet")
            if given @ n < 0:
                verts = verts[::-1].copy()
                n = -n
        if self.thickness is not None and self.thickness < 0:
            raise GeometryError("thickness must be >= 0")
        verts.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "normal", n)

    @property
    def offset(self) -> float:
        return float(self.normal @ self.vertices.mean(axis=0))

    @property
    def one_sided(self) -> bool:
        return self.thickness is None

    def validate(self) -> None:
        verts = self.vertices
        dist = verts @ self.normal - self.offset
        if np.max(np.abs(dist)) > WELD_TOL:
            raise GeometryError("facet vertices are not coplanar")
        nxt = np.roll(verts, -1, axis=0)
        nxt2 = np.roll(verts, -2, axis=0)
        turns = np.cross(nxt - verts, nxt2 - nxt) @ self.normal
        if np.any(turns < -1e-12):
            raise GeometryError("facet polygon is not convex")
        if np.any(np.linalg.norm(nxt - verts, axis=1) < WELD_TOL):
            raise GeometryError("facet has repeated vertices")

    def to_json(self) -> dict:
        out = {"vertices": self.vertices.tolist(), "material": self.material_id}
        if self.thickness is not None:
            out["thickness"] = self.thickness
        return out


@dataclass(frozen=True, eq=False)
class Wedge:
    """Diffracting edge between ``face_0`` and ``face_1``.

    ``exterior_angle`` is the angle of free space around the edge and
    ``n_param = exterior_angle / pi``.  Local frame: ``e`` is the unit edge
    direction, ``t0`` lies in face 0 pointing away from the edge, ``n0`` is
    the face-0 normal pointing into free space.  Angles about the edge are
    measured from ``t0`` toward ``n0`` and cover ``[0, n_param*pi]``.
    Boundary edges of a single facet are half-planes (``face_0 == face_1``).
    """

    edge: tuple[np.ndarray, np.ndarray]
    face_0: int
    face_1: int
    exterior_angle: float
    n_param: float = field(init=False)
    e: np.ndarray = field(init=False, repr=False)
    t0: np.ndarray = field(init=False, repr=False)
    n0: np.ndarray = field(init=False, repr=False)
    n1: np.ndarray = field(init=False, repr=False)

    @classmethod
    def make(cls, p0, p1, face_0: int, face_1: int, exterior_angle: float,
             t0: np.ndarray, n0: np.ndarray, n1: np.ndarray) -> "Wedge":
        w = cls((np.asarray(p0, float), np.asarray(p1, float)), face_0, face_1, exterior_angle)
        e = w.edge[1] - w.edge[0]
        length = np.linalg.norm(e)
        if length < WELD_TOL:
            raise GeometryError("wedge edge endpoints coincide")
        object.__setattr__(w, "n_param", exterior_angle / math.pi)
        object.__setattr__(w, "e", e / length)
        object.__setattr__(w, "t0", np.asarray(t0, float))
        object.__setattr__(w, "n0", np.asarray(n0, float))
        object.__setattr__(w, "n1", np.asarray(n1, float))
        return w

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.edge[1] - self.edge[0]))

    def angle_of(self, direction: np.ndarray) -> float:
        """Angle about the edge of ``direction`` (a vector leaving the edge)."""
        return float(np.mod(np.arctan2(direction @ self.n0, direction @ self.t0), 2 * math.pi))

    def in_exterior(self, point: np.ndarray, foot: np.ndarray, tol: float = 1e-9) -> bool:
        """True if ``point`` lies in the free-space sector seen from ``foot`` on the edge."""
        d = point - foot
        d = d - (d @ self.e) * self.e
        r = np.linalg.norm(d)
        if r < tol:
            return False
        phi = self.angle_of(d)
        return tol / r < phi < self.exterior_angle - tol / r


@dataclass(frozen=True)
class Hit:
    facet_id: int
    point: np.ndarray
    distance: float
    entering: bool


class BVH:
    """Binary bounding-volume hierarchy over facet bounding boxes."""

    def __init__(self, lo: np.ndarray, hi: np.ndarray, leaf_size: int = 4):
        self.leaf_size = leaf_size
        n = lo.shape[0]
        order = np.arange(n)
        node_lo, node_hi, left, right, start, count = [], [], [], [], [], []
        cent = 0.5 * (lo + hi)

        def build(idx: np.ndarray) -> int:
            node = len(node_lo)
            node_lo.append(lo[idx].min(axis=0))
            node_hi.append(hi[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(-1)
            count.append(0)
            if idx.size <= leaf_size:
                start[node] = len(leaves)
                count[node] = idx.size
                leaves.extend(idx.tolist())
                return node
            c = cent[idx]
            axis = int(np.argmax(np.ptp(c, axis=0)))
            sorted_idx = idx[np.argsort(c[:, axis], kind="stable")]
            half = sorted_idx.size // 2
            left[node] = build(sorted_idx[:half])
            right[node] = build(sorted_idx[half:])
            return node

        leaves: list[int] = []
        if n:
            build(order)
        self.lo = np.array(node_lo).reshape(-1, 3)
        self.hi = np.array(node_hi).reshape(-1, 3)
        self.left = np.array(left, dtype=int)
        self.right = np.array(right, dtype=int)
        self.start = np.array(start, dtype=int)
        self.count = np.array(count, dtype=int)
        self.leaves = np.array(leaves, dtype=int)

    def candidates(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Facet ids whose boxes the segment ``a -> b`` touches."""
        if self.lo.shape[0] == 0:
            return np.empty(0, dtype=int)
        d = b - a
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(d != 0, 1.0 / d, np.inf)
        out: list[int] = []
        stack = [0]
        pad = 1e-9
        while stack:
            node = stack.pop()
            t1 = (self.lo[node] - pad - a) * inv
            t2 = (self.hi[node] + pad - a) * inv
            # zero components: inside slab iff a is within it
            flat = d == 0
            if np.any(flat):
                inside = (a >= self.lo[node] - pad) & (a <= self.hi[node] + pad)
                if np.any(flat & ~inside):
                    continue
                t1 = np.where(flat, -np.inf, t1)
                t2 = np.where(flat, np.inf, t2)
            tmin = np.max(np.minimum(t1, t2))
            tmax = np.min(np.maximum(t1, t2))
            if tmax < max(tmin, 0.0) or tmin > 1.0:
                continue
            if self.count[node]:
                s = self.start[node]
                out.extend(self.leaves[s:s + self.count[node]].tolist())
            else:
                stack.append(self.right[node])
                stack.append(self.left[node])
        return np.array(sorted(out), dtype=int)


class Clusters:
    """Groups of spatially close items with a bounding box per group.

    Items are taken in BVH leaf order and chunked, which keeps each group
    compact.  ``members`` is padded with ``-1``.  With ``ids`` only those
    items are grouped and ``members`` holds their original indices.
    """

    def __init__(self, lo: np.ndarray, hi: np.ndarray, group: int = 16, pad: float = 1e-9,
                 isolate: float = 40.0, ids: np.ndarray | None = None):
        if ids is not None:
            ids = np.asarray(ids, dtype=int)
            lo, hi = lo[ids], hi[ids]
        n = lo.shape[0]
        size = np.linalg.norm(hi - lo, axis=1)
        # items much larger than typical ones get their own group
        big = size > isolate * np.median(size) if n else np.zeros(0, dtype=bool)
        rest = np.nonzero(~big)[0]
        order = rest[BVH(lo[rest], hi[rest]).leaves] if rest.size else np.empty(0, dtype=int)
        c_small = -(-rest.size // group)
        c = c_small + int(big.sum())
        local = np.full((c, group), -1, dtype=int)
        local[:c_small].reshape(-1)[:rest.size] = order
        local[c_small:, 0] = np.nonzero(big)[0]
        self.valid = local >= 0
        safe = np.maximum(local, 0)
        self.members = np.where(self.valid, safe if ids is None else ids[safe], -1)
        big = np.where(self.valid[:, :, None], lo[safe], np.inf)
        small = np.where(self.valid[:, :, None], hi[safe], -np.inf)
        self.lo = (big.min(axis=1) if c else np.zeros((0, 3))) - pad
        self.hi = (small.max(axis=1) if c else np.zeros((0, 3))) + pad
        self.center = 0.5 * (self.lo + self.hi)
        self.half = 0.5 * (self.hi - self.lo)

    def __len__(self) -> int:
        return self.members.shape[0]


def segment_box_mask(a: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """``(M, C)`` mask of segments ``a[i] -> b[i]`` touching boxes ``[lo[j], hi[j]]`` (slab test)."""
    d = b - a
    # a zero direction component becomes a tiny one: the slab then either
    # contains the whole segment or rejects it, as in the exact limit
    d = np.where(d == 0, 1e-300, d)
    inv = 1.0 / d
    t1 = (lo[None] - a[:, None]) * inv[:, None]
    t2 = (hi[None] - a[:, None]) * inv[:, None]
    t0 = np.minimum(t1, t2).max(axis=2)
    t1 = np.maximum(t1, t2).min(axis=2)
    return (t0 <= t1) & (t0 <= 1.0) & (t1 >= 0.0)


class Scene:
    """Immutable facet set with extracted wedges and a BVH.

    Packed numpy views (``verts``, ``normals``, ``offsets``, ``edge_m`` ...) are
    read-only and shared by the path finder.
    """

    def __init__(self, facets: Sequence[Facet], wedges: Sequence[Wedge]):
        self.facets: tuple[Facet, ...] = tuple(facets)
        self.wedges: tuple[Wedge, ...] = tuple(wedges)
        n = len(self.facets)
        vmax = max((f.vertices.shape[0] for f in self.facets), default=3)
        self.vmax = vmax
        verts = np.zeros((n, vmax, 3))
        nverts = np.zeros(n, dtype=int)
        for i, f in enumerate(self.facets):
            k = f.vertices.shape[0]
            verts[i, :k] = f.vertices
            verts[i, k:] = f.vertices[-1]
            nverts[i] = k
        self.verts = verts
        self.nverts = nverts
        self.normals = np.array([f.normal for f in self.facets]).reshape(n, 3)
        self.offsets = np.array([f.offset for f in self.facets], dtype=float).reshape(n)
        # inward edge normals: p inside iff edge_m . p >= edge_c for all edges
        edge_m = np.zeros((n, vmax, 3))
        edge_c = np.full((n, vmax), -1.0)
        for i, f in enumerate(self.facets):
            v = f.vertices
            d = np.roll(v, -1, axis=0) - v
            m = np.cross(f.normal, d)
            m /= np.linalg.norm(m, axis=1)[:, None]
            k = v.shape[0]
            edge_m[i, :k] = m
            edge_c[i, :k] = np.einsum("ij,ij->i", m, v)
        self.edge_m = edge_m
        self.edge_c = edge_c
        self.material_ids = tuple(f.material_id for f in self.facets)
        self.thickness = np.array([np.nan if f.thickness is None else f.thickness for f in self.facets])
        self.one_sided = np.array([f.thickness is None for f in self.facets], dtype=bool)
        self.lo = verts.min(axis=1) if n else np.zeros((0, 3))
        self.hi = verts.max(axis=1) if n else np.zeros((0, 3))
        if n:
            self.bounds = (self.lo.min(axis=0), self.hi.max(axis=0))
        else:
            self.bounds = (np.zeros(3), np.zeros(3))
        self.accel = BVH(self.lo, self.hi)
        self.clusters = Clusters(self.lo, self.hi, group=4)
        wedge_of_facet: list[list[int]] = [[] for _ in range(n)]
        for wi, w in enumerate(self.wedges):
            wedge_of_facet[w.face_0].append(wi)
            if w.face_1 != w.face_0:
                wedge_of_facet[w.face_1].append(wi)
        self.wedges_of_facet = tuple(tuple(x) for x in wedge_of_facet)
        if self.wedges:
            self.wedge_p0 = np.array([w.edge[0] for w in self.wedges])
            self.wedge_p1 = np.array([w.edge[1] for w in self.wedges])
        else:
            self.wedge_p0 = np.zeros((0, 3))
            self.wedge_p1 = np.zeros((0, 3))
        for arr in (self.verts, self.nverts, self.normals, self.offsets, self.edge_m, self.edge_c,
                    self.thickness, self.one_sided, self.lo, self.hi, self.wedge_p0, self.wedge_p1):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.facets)

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False):
            raise AttributeError("Scene is immutable")
        super().__setattr__(name, value)

    def _freeze(self) -> "Scene":
        object.__setattr__(self, "_frozen", True)
        return self

    def contains(self, p, tol: float = 1e-9) -> bool:
        lo, hi = self.bounds
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))

    def point_in_facet(self, fid: int, p: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(self.edge_m[fid] @ p - self.edge_c[fid] >= -tol))


def mirror_point(p, facet: Facet) -> np.ndarray:
    """Reflect ``p`` across the supporting plane of ``facet``."""
    p = np.asarray(p, dtype=float)
    n = facet.normal
    return p - 2.0 * (p @ n - facet.offset) * n


def mirror_points(points: np.ndarray, normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Vectorised mirror of ``points[i]`` across plane ``(normals[i], offsets[i])``."""
    dist = np.einsum("ij,ij->i", points, normals) - offsets
    return points - 2.0 * dist[:, None] * normals


def _weld(facets: Sequence[Facet]) -> list[np.ndarray]:
    pts = np.concatenate([f.vertices for f in facets])
    tree = cKDTree(pts)
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(tree.query_pairs(WELD_TOL)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    ids = np.array([find(i) for i in range(len(pts))])
    out, k = [], 0
    for f in facets:
        m = f.vertices.shape[0]
        out.append(ids[k:k + m])
        k += m
    return out


def extract_wedges(facets: Sequence[Facet]) -> list[Wedge]:
    """Find diffracting edges.

    Edges shared by two facets become wedges when the free-space angle
    exceeds ``pi`` (convex edges); flat joins and concave corners produce
    none.  Unshared boundary edges become half-planes.  An edge shared by
    more than two facets is rejected as non-manifold.
    """
    if not facets:
        return []
    ids = _weld(facets)
    owners: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for fi, vid in enumerate(ids):
        k = len(vid)
        for j in range(k):
            a, b = int(vid[j]), int(vid[(j + 1) % k])
            if a == b:
                continue
            owners.setdefault((min(a, b), max(a, b)), []).append((fi, j))
    wedges: list[Wedge] = []
    # deterministic order: by first owning facet, then edge index
    ordered = sorted(owners.items(), key=lambda kv: min(kv[1]))
    for key, own in ordered:
        if len(own) > 2:
            fi, j = own[0]
            p0 = facets[fi].vertices[j]
            raise GeometryError(
                f"non-manifold edge at {p0.tolist()} shared by facets {[o[0] for o in own]}")
        fi, j = min(own)
        f0 = facets[fi]
        k0 = f0.vertices.shape[0]
        p0, p1 = f0.vertices[j], f0.vertices[(j + 1) % k0]
        e = (p1 - p0) / np.linalg.norm(p1 - p0)
        t0 = np.cross(f0.normal, e)  # inward in-plane direction for CCW winding
        if t0 @ (f0.vertices.mean(axis=0) - p0) < 0:
            t0 = -t0
        n0 = f0.normal
        if len(own) == 1:
            wedges.append(Wedge.make(p0, p1, fi, fi, 2 * math.pi, t0, n0, -n0))
            continue
        fj, jj = max(own)
        f1 = facets[fj]
        t1 = np.cross(f1.normal, e)
        if t1 @ (f1.vertices.mean(axis=0) - p0) < 0:
            t1 = -t1
        alpha = math.acos(float(np.clip(t0 @ t1, -1.0, 1.0)))
        exterior = 2 * math.pi - alpha if n0 @ t1 < 0 else alpha
        if exterior > math.pi + _MIN_WEDGE_EXCESS:
            n1 = f1.normal
            wedges.append(Wedge.make(p0, p1, fi, fj, exterior, t0, n0, n1))
    return wedges


def build_scene(facets: Iterable[Facet]) -> Scene:
    """Validate facets, extract wedges and build the acceleration index."""
    facets = list(facets)
    if not facets:
        raise GeometryError("scene needs at least one facet")
    for i, f in enumerate(facets):
        try:
            f.validate()
        except GeometryError as err:
            raise GeometryError(f"facet {i}: {err}") from None
    return Scene(facets, extract_wedges(facets))._freeze()


def empty_scene() -> Scene:
    return Scene([], [])._freeze()


def segment_hits(scene: Scene, a: np.ndarray, b: np.ndarray, facet_ids: np.ndarray | None = None,
                 chunk: int = 1024, clusters: Clusters | None = None):
    """Batched segment/facet intersection kernel.

    Args:
        a, b: ``(M, 3)`` segment endpoints.
        facet_ids: restrict the test to these facets (default: all, using the
            scene's facet clusters as a broad phase).

    Returns:
        ``(seg, facet, dist, entering, point)`` arrays sorted by segment then
        distance.  Hits within :data:`ENDPOINT_TOL` of either endpoint and
        segments parallel to a facet plane are excluded.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    out_s, out_f, out_d, out_e, out_p = [], [], [], [], []
    if len(scene) and a.shape[0]:
        cl = scene.clusters if clusters is None else clusters
        for s0 in range(0, a.shape[0], chunk):
            A = a[s0:s0 + chunk]
            B = b[s0:s0 + chunk]
            if facet_ids is None:
                ci, cj = np.nonzero(segment_box_mask(A, B, cl.lo, cl.hi))
                si = np.repeat(ci, cl.members.shape[1])
                fj = cl.members[cj].reshape(-1)
                keep = fj >= 0
                si, fj = si[keep], fj[keep]
            else:
                fids = np.asarray(facet_ids, dtype=int)
                si = np.repeat(np.arange(A.shape[0]), fids.size)
                fj = np.tile(fids, A.shape[0])
            if si.size == 0:
                continue
            seg_lo = np.minimum(A[si], B[si])
            seg_hi = np.maximum(A[si], B[si])
            box = np.all((seg_lo <= scene.hi[fj] + ENDPOINT_TOL) & (seg_hi >= scene.lo[fj] - ENDPOINT_TOL), axis=1)
            si, fj = si[box], fj[box]
            D = B[si] - A[si]
            L = np.linalg.norm(D, axis=1)
            n = scene.normals[fj]
            denom = np.einsum("ij,ij->i", D, n)
            par = np.abs(denom) <= 1e-12 * L
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (scene.offsets[fj] - np.einsum("ij,ij->i", A[si], n)) / denom
            dist = t * L
            ok = ~par & (dist > ENDPOINT_TOL) & (dist < L - ENDPOINT_TOL)
            si, fj, t, dist, denom = si[ok], fj[ok], t[ok], dist[ok], denom[ok]
            pts = A[si] + t[:, None] * (B[si] - A[si])
            inside = np.all(np.einsum("ikj,ij->ik", scene.edge_m[fj], pts) - scene.edge_c[fj]
                            >= -ENDPOINT_TOL, axis=1)
            out_s.append(si[inside] + s0)
            out_f.append(fj[inside])
            out_d.append(dist[inside])
            out_e.append(denom[inside] < 0)
            out_p.append(pts[inside])
    if not out_s:
        return (np.empty(0, int), np.empty(0, int), np.empty(0), np.empty(0, bool), np.empty((0, 3)))
    seg = np.concatenate(out_s)
    fac = np.concatenate(out_f)
    dist = np.concatenate(out_d)
    ent = np.concatenate(out_e)
    pts = np.concatenate(out_p)
    order = np.lexsort((fac, dist, seg))
    return seg[order], fac[order], dist[order], ent[order], pts[order]


def _hits_to_list(seg, fac, dist, ent, pts) -> list[Hit]:
    return [Hit(int(f), p, float(d), bool(e)) for f, d, e, p in zip(fac, dist, ent, pts)]


def intersect_segment(scene: Scene, a, b) -> list[Hit]:
    """All facets whose interior the open segment ``a -> b`` crosses, nearest first."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(b - a) == 0:
        raise GeometryError("segment endpoints coincide")
    cand = scene.accel.candidates(a, b)
    if cand.size == 0:
        return []
    return _hits_to_list(*segment_hits(scene, a[None], b[None], cand))


def intersect_segment_linear(scene: Scene, a, b) -> list[Hit]:
    """Reference linear scan over every facet (no acceleration index)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.linalg.norm(b - a) == 0:
        raise GeometryError("segment endpoints coincide")
    return _hits_to_list(*segment_hits(scene, a[None], b[None], np.arange(len(scene))))


def quad(p0, p1, p2, p3, material: str, thickness: float | None = None) -> Facet:
    return Facet(np.array([p0, p1, p2, p3], dtype=float), material, thickness=thickness)


def box_facets(lo, hi, material: str, thickness: float | None = None,
               inward: bool = False) -> list[Facet]:
    """Six axis-aligned quads of the box ``[lo, hi]`` with outward normals.

    ``inward=True`` flips the normals (a room shell seen from inside).
    """
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    faces = [
        ([x0, y0, z0], [x0, y1, z0], [x1, y1, z0], [x1, y0, z0]),  # -z
        ([x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]),  # +z
        ([x0, y0, z0], [x1, y0, z0], [x1, y0, z1], [x0, y0, z1]),  # -y
        ([x0, y1, z0], [x0, y1, z1], [x1, y1, z1], [x1, y1, z0]),  # +y
        ([x0, y0, z0], [x0, y0, z1], [x0, y1, z1], [x0, y1, z0]),  # -x
        ([x1, y0, z0], [x1, y1, z0], [x1, y1, z1], [x1, y0, z1]),  # +x
    ]
    if inward:
        faces = [f[::-1] for f in faces]
    return [Facet(np.array(f, dtype=float), material, thickness=thickness) for f in faces]


def scene_to_json(scene: Scene) -> dict:
    return {"facets": [f.to_json() for f in scene.facets]}


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_json(scene)))


def load_scene(path: str | Path) -> Scene:
    """Load ``{"facets": [{"vertices": [...], "material": id, "thickness"?: m}]}``."""
    data = json.loads(Path(path).read_text())
    facets = [Facet(np.asarray(f["vertices"], float), f["material"], thickness=f.get("thickness"))
              for f in data["facets"]]
    return build_scene(facets)
