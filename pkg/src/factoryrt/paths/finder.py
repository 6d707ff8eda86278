"""Exact path search: image method for reflections, Fermat point for diffraction.

A path with ``a`` reflections before the diffraction and ``b`` after it is
found by joining node ``a`` of the transmitter image tree with node ``b`` of
the receiver image tree on a common wedge: the diffraction point is the
Fermat point between the two images, and must lie on the part of the edge
that both beams cover.  Candidates are then re-traced segment by segment;
conductor hits reject a path and every other crossing becomes a
:class:`Transmission`.
"""

from __future__ import annotations

import math
import warnings
from collections import OrderedDict

import numpy as np

from ..geometry import Clusters, Scene, segment_hits
from ..materials import MaterialLibrary, complex_permittivity
from .model import InteractionBudget, PathBatch, PathSet, PropagationPath
from .tree import ImageTree, Level
from .utd import fermat_parameters

VERTEX_TOL = 1e-9
_EDGE_TOL = 1e-9


class WedgeArrays:
    """Packed per-wedge frames for vectorised checks."""

    def __init__(self, scene: Scene):
        ws = scene.wedges
        self.p0 = scene.wedge_p0
        self.p1 = scene.wedge_p1
        self.e = np.array([w.e for w in ws]).reshape(-1, 3)
        self.t0 = np.array([w.t0 for w in ws]).reshape(-1, 3)
        self.n0 = np.array([w.n0 for w in ws]).reshape(-1, 3)
        self.ext = np.array([w.exterior_angle for w in ws])
        self.length = np.linalg.norm(self.p1 - self.p0, axis=1)

    def in_exterior(self, w: np.ndarray, foot: np.ndarray, pts: np.ndarray) -> np.ndarray:
        d = pts - foot
        e = self.e[w]
        d = d - np.einsum("ij,ij->i", d, e)[:, None] * e
        r = np.linalg.norm(d, axis=1)
        phi = np.mod(np.arctan2(np.einsum("ij,ij->i", d, self.n0[w]),
                                np.einsum("ij,ij->i", d, self.t0[w])), 2 * math.pi)
        with np.errstate(divide="ignore", invalid="ignore"):
            tol = VERTEX_TOL / r
        return (r > VERTEX_TOL) & (phi > tol) & (phi < self.ext[w] - tol)


def backtrack(scene: Scene, chain_f: np.ndarray, chain_img: np.ndarray, end: np.ndarray):
    """Reflection points of image chains ending at ``end``.

    ``chain_f[:, j]`` is the ``j``-th facet counted from the source and
    ``chain_img[:, j]`` the image after that reflection.  Returns the points
    ``(K, k, 3)`` in source-to-end order and a validity mask.
    """
    K, k = chain_f.shape
    pts = np.empty((K, k, 3))
    ok = np.ones(K, dtype=bool)
    target = end
    for j in range(k - 1, -1, -1):
        f = chain_f[:, j]
        img = chain_img[:, j]
        n = scene.normals[f]
        off = scene.offsets[f]
        dt = np.einsum("ij,ij->i", n, target) - off
        di = np.einsum("ij,ij->i", n, img) - off
        ok &= (dt * di < 0) & (np.abs(dt) > VERTEX_TOL)
        ok &= ~scene.one_sided[f] | (dt > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = dt / (dt - di)
        p = target + t[:, None] * (img - target)
        ok &= np.all(np.einsum("ikj,ij->ik", scene.edge_m[f], p) - scene.edge_c[f] >= -_EDGE_TOL, axis=1)
        pts[:, j] = p
        target = p
    return pts, ok


class _Batch:
    """Candidate paths sharing one interaction pattern."""

    def __init__(self, verts: np.ndarray, kinds: tuple, ids: np.ndarray):
        self.verts = verts  # (K, m+2, 3)
        self.kinds = kinds  # length m, "R" or "D"
        self.ids = ids  # (K, m) facet or wedge ids


class PathFinder:
    """Path search bound to one scene, material library and budget.

    Image trees are cached per terminal position (``cache_size`` most recent),
    so running many links that share a terminal reuses its tree.  Finders
    of one scene with different budgets may share ``tree_cache``: a tree
    built for more reflections also serves smaller budgets.
    """

    def __init__(self, scene: Scene, materials: MaterialLibrary, budget: InteractionBudget,
                 cache_size: int = 8, tree_cache: OrderedDict | None = None):
        budget.check_supported()
        self.scene = scene
        self.materials = materials
        self.budget = budget
        self.cache_size = cache_size
        self._trees: OrderedDict = OrderedDict() if tree_cache is None else tree_cache
        self.wedges = WedgeArrays(scene)
        mats = [materials.resolve(m) for m in scene.material_ids]
        self.facet_material = mats
        self.pec = np.array([m.is_pec for m in mats], dtype=bool).reshape(-1)
        # separate broad phases: conductors are tested first to reject paths early
        self.pec_clusters = Clusters(scene.lo, scene.hi, ids=np.nonzero(self.pec)[0], group=8)
        self.open_clusters = Clusters(scene.lo, scene.hi, ids=np.nonzero(~self.pec)[0], group=8)
        # refractive index used for the stored thin-sheet chord (lowest tabulated frequency)
        self.sheet_nre = np.array([1.0 if m.is_pec else
                                   max(complex(np.sqrt(complex_permittivity(m, min(m.eps_by_freq)))).real, 1e-12)
                                   for m in mats]).reshape(-1)

    def tree(self, point: np.ndarray) -> ImageTree:
        key = tuple(np.asarray(point, float).tolist())
        tree = self._trees.get(key)
        if tree is None or tree.scene is not self.scene or tree.depth < self.budget.max_reflections:
            tree = ImageTree(self.scene, np.asarray(point, float), self.budget.max_reflections)
            self._trees[key] = tree
            while len(self._trees) > self.cache_size:
                self._trees.popitem(last=False)
        else:
            self._trees.move_to_end(key)
        return tree

    def find(self, tx, rx) -> list[PropagationPath]:
        """Validated paths as objects, sorted by delay."""
        return self.find_set(tx, rx).to_paths()

    def find_set(self, tx, rx) -> PathSet:
        """Validated paths in column-wise form."""
        tx = np.asarray(tx, dtype=float)
        rx = np.asarray(rx, dtype=float)
        if np.linalg.norm(tx - rx) <= VERTEX_TOL:
            raise ValueError("tx and rx coincide")
        if len(self.scene) and not (self.scene.contains(tx) and self.scene.contains(rx)):
            warnings.warn("terminal outside scene bounds", RuntimeWarning, stacklevel=2)
        batches = [_Batch(np.stack([tx, rx])[None], (), np.zeros((1, 0), dtype=int))]
        R = self.budget.max_reflections
        if len(self.scene) == 0:
            return self._finish(tx, rx, batches)
        ttree = self.tree(tx)
        for k in range(1, R + 1):
            batches.append(self._reflection_batch(ttree.levels[k], tx, rx))
        if self.budget.max_diffractions >= 1 and len(self.scene.wedges):
            rtree = self.tree(rx)
            for a in range(R + 1):
                for b in range(R + 1 - a):
                    batches.append(self._diffraction_batch(ttree, rtree, a, b, tx, rx))
        return self._finish(tx, rx, batches)

    def _finish(self, tx, rx, batches) -> PathSet:
        out = [self._validate(b) for b in batches]
        return PathSet(tx, rx, [b for b in out if b is not None and len(b)])

    # -- candidate generation -------------------------------------------------

    def _reflection_batch(self, level: Level, tx, rx) -> _Batch:
        k = level.depth
        idx = np.nonzero(level.contains(rx))[0] if len(level) else np.empty(0, int)
        K = idx.size
        end = np.broadcast_to(rx, (K, 3))
        pts, ok = backtrack(self.scene, level.chain_f[idx], level.chain_img[idx], end)
        idx, pts = idx[ok], pts[ok]
        K = idx.size
        verts = np.concatenate([np.broadcast_to(tx, (K, 1, 3)), pts,
                                np.broadcast_to(rx, (K, 1, 3))], axis=1)
        return _Batch(verts, ("R",) * k, level.chain_f[idx])

    def _join(self, ttree: ImageTree, rtree: ImageTree, a: int, b: int):
        """(tx node, rx node, wedge, t_lo, t_hi) with overlapping edge intervals."""
        tn, tw, tlo, thi = ttree.incidence(a)
        rn, rw, rlo, rhi = rtree.incidence(b)
        if tn.size == 0 or rn.size == 0:
            e = np.empty(0, int)
            return e, e, e, np.empty(0), np.empty(0)
        order = np.argsort(rw, kind="stable")
        rn, rw, rlo, rhi = rn[order], rw[order], rlo[order], rhi[order]
        start = np.searchsorted(rw, tw, side="left")
        stop = np.searchsorted(rw, tw, side="right")
        cnt = stop - start
        has = cnt > 0
        if not has.any():
            e = np.empty(0, int)
            return e, e, e, np.empty(0), np.empty(0)
        ti = np.repeat(np.nonzero(has)[0], cnt[has])
        offs = np.arange(ti.size) - np.repeat(np.cumsum(cnt[has]) - cnt[has], cnt[has])
        ri = start[ti] + offs
        lo = np.maximum(tlo[ti], rlo[ri])
        hi = np.minimum(thi[ti], rhi[ri])
        keep = hi - lo >= -1e-12
        ti, ri, lo, hi = ti[keep], ri[keep], lo[keep], hi[keep]
        return tn[ti], rn[ri], tw[ti], lo, hi

    def _diffraction_batch(self, ttree: ImageTree, rtree: ImageTree, a: int, b: int, tx, rx) -> _Batch:
        W = self.wedges
        tnode, rnode, w, lo, hi = self._join(ttree, rtree, a, b)
        tl, rl = ttree.levels[a], rtree.levels[b]
        I = tl.image[tnode]
        J = rl.image[rnode]
        t, ok = fermat_parameters(W.p0[w], W.e[w], I, J)
        L = W.length[w]
        ok &= (t > _EDGE_TOL) & (t < L - _EDGE_TOL)
        ok &= (t >= lo * L - _EDGE_TOL) & (t <= hi * L + _EDGE_TOL)
        tnode, rnode, w, t = tnode[ok], rnode[ok], w[ok], t[ok]
        P = W.p0[w] + t[:, None] * W.e[w]
        pre, ok1 = backtrack(self.scene, tl.chain_f[tnode], tl.chain_img[tnode], P)
        post, ok2 = backtrack(self.scene, rl.chain_f[rnode], rl.chain_img[rnode], P)
        ok = ok1 & ok2
        pre, post, P, w, tnode, rnode = pre[ok], post[ok], P[ok], w[ok], tnode[ok], rnode[ok]
        K = P.shape[0]
        verts = np.concatenate([np.broadcast_to(tx, (K, 1, 3)), pre, P[:, None, :],
                                post[:, ::-1], np.broadcast_to(rx, (K, 1, 3))], axis=1)
        ids = np.concatenate([tl.chain_f[tnode], w[:, None], rl.chain_f[rnode][:, ::-1]], axis=1)
        return _Batch(verts, ("R",) * a + ("D",) + ("R",) * b, ids)

    # -- validation -----------------------------------------------------------

    def _geometry_ok(self, bt: _Batch) -> np.ndarray:
        v = bt.verts
        K = v.shape[0]
        ok = np.all(np.linalg.norm(np.diff(v, axis=1), axis=2) > VERTEX_TOL, axis=1)
        for j, kind in enumerate(bt.kinds):
            ids = bt.ids[:, j]
            prev, cur, nxt = v[:, j], v[:, j + 1], v[:, j + 2]
            if kind == "R":
                n = self.scene.normals[ids]
                off = self.scene.offsets[ids]
                dp = np.einsum("ij,ij->i", n, prev) - off
                dn = np.einsum("ij,ij->i", n, nxt) - off
                ok &= (dp * dn > 0) & (np.abs(dp) > VERTEX_TOL) & (np.abs(dn) > VERTEX_TOL)
            else:
                ok &= self.wedges.in_exterior(ids, cur, prev) & self.wedges.in_exterior(ids, cur, nxt)
        return ok if K else np.zeros(0, dtype=bool)

    def _validate(self, bt: _Batch) -> PathBatch | None:
        if bt.verts.shape[0] == 0:
            return None
        ok = self._geometry_ok(bt)
        if not ok.any():
            return None
        verts, ids = bt.verts[ok], bt.ids[ok]
        # segment by segment, drop paths that run into a conductor
        alive = np.ones(verts.shape[0], dtype=bool)
        for j in range(verts.shape[1] - 1):
            rows = np.nonzero(alive)[0]
            if rows.size == 0:
                return None
            hit_seg = segment_hits(self.scene, verts[rows, j], verts[rows, j + 1],
                                   clusters=self.pec_clusters)[0]
            alive[rows[hit_seg]] = False
        if not alive.any():
            return None
        verts, ids = verts[alive], ids[alive]
        K, nv, _ = verts.shape
        ns = nv - 1
        A = verts[:, :-1].reshape(-1, 3)
        B = verts[:, 1:].reshape(-1, 3)
        seg, fac, dist, ent, hp = segment_hits(self.scene, A, B, clusters=self.open_clusters)
        trans = self._transmissions(A, B, seg, fac, dist, ent, hp)
        t_seg_global, t_facet, t_exit, t_point, t_exit_point, t_chord, t_entry = trans
        order = np.lexsort((t_entry, t_seg_global))
        t_seg_global, t_facet, t_exit, t_point, t_exit_point, t_chord = (
            x[order] for x in (t_seg_global, t_facet, t_exit, t_point, t_exit_point, t_chord))
        first = np.searchsorted(t_seg_global, t_seg_global, side="left")
        t_rank = np.arange(t_seg_global.size) - first
        return PathBatch(bt.kinds, verts, ids, t_seg_global // ns,
                         t_seg_global % ns, t_rank, t_facet, t_exit, t_point, t_exit_point, t_chord)

    def _transmissions(self, A, B, seg, fac, dist, ent, hp):
        """Vectorised pairing of hits into crossings.

        Thin sheets give one crossing per hit.  Closed solids pair each
        entering hit with the next solid hit on the same segment (or the
        segment end); an exit with no preceding entry starts at the previous
        solid hit or the segment start.  Solids are assumed not to overlap.
        """
        sheet = ~np.isnan(self.scene.thickness[fac])
        # thin sheets
        sf = fac[sheet]
        d = B[seg[sheet]] - A[seg[sheet]]
        d /= np.linalg.norm(d, axis=1)[:, None]
        cos_i = np.abs(np.einsum("ij,ij->i", d, self.scene.normals[sf]))
        sin_t = np.sqrt(np.clip(1 - cos_i**2, 0, None)) / self.sheet_nre[sf]
        chord = self.scene.thickness[sf] / np.sqrt(np.clip(1 - sin_t**2, 1e-12, None))
        chord = np.where(self.scene.thickness[sf] == 0, 0.0, chord)
        parts = [(seg[sheet], sf, sf, hp[sheet], hp[sheet], chord, dist[sheet])]
        # closed solids
        solid = ~sheet
        s_seg, s_fac, s_dist, s_ent, s_pt = seg[solid], fac[solid], dist[solid], ent[solid], hp[solid]
        n = s_seg.size
        if n:
            nxt_same = np.zeros(n, dtype=bool)
            nxt_same[:-1] = s_seg[1:] == s_seg[:-1]
            prv_same = np.zeros(n, dtype=bool)
            prv_same[1:] = s_seg[1:] == s_seg[:-1]
            seg_len = np.linalg.norm(B[s_seg] - A[s_seg], axis=1)
            nxt = np.minimum(np.arange(n) + 1, n - 1)
            prv = np.maximum(np.arange(n) - 1, 0)
            # entering hits
            e = s_ent
            ex_dist = np.where(nxt_same, s_dist[nxt], seg_len)
            ex_fac = np.where(nxt_same, s_fac[nxt], s_fac)
            ex_pt = np.where(nxt_same[:, None], s_pt[nxt], B[s_seg])
            parts.append((s_seg[e], s_fac[e], ex_fac[e], s_pt[e], ex_pt[e], (ex_dist - s_dist)[e], s_dist[e]))
            # exits not preceded by an entry
            x = ~s_ent & ~(prv_same & s_ent[prv])
            en_dist = np.where(prv_same, s_dist[prv], 0.0)
            en_pt = np.where(prv_same[:, None], s_pt[prv], A[s_seg])
            parts.append((s_seg[x], s_fac[x], s_fac[x], en_pt[x], s_pt[x], (s_dist - en_dist)[x], en_dist[x]))
        return tuple(np.concatenate([p[j] for p in parts]) for j in range(7))


def find_paths(scene: Scene, materials: MaterialLibrary, tx, rx,
               budget: InteractionBudget) -> list[PropagationPath]:
    """All geometrically valid paths from ``tx`` to ``rx`` within ``budget``.

    Paths are sorted by delay; gains are left unevaluated (see
    :func:`evaluate_path`).
    """
    return PathFinder(scene, materials, budget, cache_size=2).find(tx, rx)
