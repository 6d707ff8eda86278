import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factoryrt.geometry import (Facet, GeometryError, box_facets, build_scene, empty_scene, extract_wedges,
                                intersect_segment, intersect_segment_linear, load_scene, mirror_point, quad,
                                save_scene)

from oracles import mirror, segment_crossings

coord = st.floats(-50, 50, allow_nan=False)
point = st.tuples(coord, coord, coord).map(np.array)


def unit_box():
    return build_scene(box_facets((0, 0, 0), (1, 1, 1), "metal"))


def random_scene(seed, n=60):
    rng = np.random.default_rng(seed)
    facets = []
    for _ in range(n):
        c = rng.uniform(-10, 10, 3)
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        v = np.cross(u, rng.normal(size=3))
        v /= np.linalg.norm(v)
        a, b = rng.uniform(0.3, 3, 2)
        facets.append(quad(c - a * u - b * v, c + a * u - b * v, c + a * u + b * v, c - a * u + b * v, "wood", 0.1))
    return build_scene(facets)


class TestFacet:
    def test_collinear_rejected(self):
        with pytest.raises(GeometryError):
            Facet(np.array([(0, 0, 0), (1, 0, 0), (2, 0, 0)], float), "metal")

    def test_normal_unit(self):
        f = quad((0, 0, 0), (3, 0, 0), (3, 2, 0), (0, 2, 0), "metal")
        assert abs(np.linalg.norm(f.normal) - 1) < 1e-12
        np.testing.assert_allclose(f.normal, (0, 0, 1))

    def test_given_normal_flips_winding(self):
        f = Facet(np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0)], float), "metal", normal=(0, 0, -1))
        np.testing.assert_allclose(f.normal, (0, 0, -1))

    def test_nonplanar_rejected_by_build(self):
        f = Facet(np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0.1), (0, 1, 0)], float), "metal")
        with pytest.raises(GeometryError, match="facet 0"):
            build_scene([f])

    def test_nonconvex_rejected_by_build(self):
        f = Facet(np.array([(0, 0, 0), (2, 0, 0), (1, 0.2, 0), (2, 2, 0), (0, 2, 0)], float), "metal")
        with pytest.raises(GeometryError):
            build_scene([f])


class TestBuildScene:
    def test_unit_box(self):
        sc = unit_box()
        assert len(sc) == 6
        assert len(sc.wedges) == 12
        for w in sc.wedges:
            assert w.exterior_angle == pytest.approx(1.5 * math.pi)
            assert w.n_param == pytest.approx(1.5)

    def test_single_triangle(self):
        sc = build_scene([Facet(np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0)], float), "wood")])
        assert len(sc) == 1
        assert len(sc.wedges) == 3

    def test_facet_order_preserved(self):
        facets = box_facets((0, 0, 0), (1, 2, 3), "wood")
        sc = build_scene(facets)
        for f, g in zip(facets, sc.facets):
            np.testing.assert_array_equal(f.vertices, g.vertices)

    def test_immutable(self):
        sc = unit_box()
        with pytest.raises(AttributeError):
            sc.facets = ()
        with pytest.raises(ValueError):
            sc.normals[0, 0] = 2.0

    def test_bounds(self):
        sc = build_scene(box_facets((-1, 2, 0), (4, 5, 3), "wood"))
        np.testing.assert_allclose(sc.bounds[0], (-1, 2, 0))
        np.testing.assert_allclose(sc.bounds[1], (4, 5, 3))

    def test_json_round_trip(self, tmp_path):
        sc = build_scene(box_facets((0, 0, 0), (1, 1, 1), "wood", thickness=0.2))
        save_scene(sc, tmp_path / "s.json")
        back = load_scene(tmp_path / "s.json")
        assert len(back) == 6 and len(back.wedges) == 12
        data = json.loads((tmp_path / "s.json").read_text())
        assert set(data["facets"][0]) >= {"vertices", "material"}


class TestWedges:
    def test_coplanar_rectangles_share_no_wedge(self):
        a = quad((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), "metal")
        b = quad((1, 0, 0), (2, 0, 0), (2, 1, 0), (1, 1, 0), "metal")
        ws = extract_wedges([a, b])
        shared = [w for w in ws if w.face_0 != w.face_1]
        assert shared == []
        # only the six outer boundary edges remain, each a half-plane
        assert len(ws) == 6

    def test_isolated_rectangle(self):
        ws = extract_wedges([quad((0, 0, 0), (2, 0, 0), (2, 1, 0), (0, 1, 0), "metal")])
        assert len(ws) == 4
        assert all(w.n_param == pytest.approx(2.0) for w in ws)

    def test_concave_corner_gives_none(self):
        # L-shaped inside corner: two faces whose normals point toward each other
        floor = quad((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), "metal")
        wall = Facet(np.array([(0, 0, 0), (0, 1, 0), (0, 1, 1), (0, 0, 1)], float), "metal", normal=(1, 0, 0))
        ws = extract_wedges([floor, wall])
        assert all(w.face_0 == w.face_1 for w in ws)

    def test_non_manifold_rejected(self):
        a = quad((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), "metal")
        b = quad((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1), "metal")
        c = quad((0, 0, 0), (1, 0, 0), (1, -1, 0.5), (0, -1, 0.5), "metal")
        with pytest.raises(GeometryError, match="non-manifold"):
            extract_wedges([a, b, c])

    @pytest.mark.parametrize("lo,hi", [((0, 0, 0), (1, 2, 3)), ((-5, 1, 0), (-4.2, 9, 0.3))])
    def test_box_wedge_count_equals_edge_count(self, lo, hi):
        assert len(extract_wedges(box_facets(lo, hi, "wood"))) == 12


class TestMirror:
    def test_examples(self):
        ground = quad((-1, -1, 0), (1, -1, 0), (1, 1, 0), (-1, 1, 0), "metal")
        np.testing.assert_allclose(mirror_point((1, 2, 3), ground), (1, 2, -3))
        np.testing.assert_allclose(mirror_point((0.3, 0.2, 0), ground), (0.3, 0.2, 0))
        tilted = Facet(np.array([(1, 0, 0), (0, 1, 1), (0, -1, 1)], float), "metal")  # x + z = 1
        np.testing.assert_allclose(mirror_point((0, 0, 1), tilted), (0, 0, 1), atol=1e-12)
        np.testing.assert_allclose(mirror_point((0, 0, 0), tilted), (1, 0, 1), atol=1e-12)
        diagonal = Facet(np.array([(0, 0, 0), (1, 0, 1), (0, 1, 0)], float), "metal")  # x = z
        np.testing.assert_allclose(mirror_point((0, 0, 1), diagonal), (1, 0, 0), atol=1e-12)

    @given(point, point, point, point)
    def test_involution(self, p, a, b, c):
        try:
            f = Facet(np.stack([a, b, c]), "metal")
        except GeometryError:
            return
        q = mirror_point(mirror_point(p, f), f)
        assert np.linalg.norm(q - p) < 1e-9 * max(1.0, np.abs(p).max(), np.abs(a).max())

    @given(point, point, point, point)
    def test_matches_oracle(self, p, a, b, c):
        try:
            f = Facet(np.stack([a, b, c]), "metal")
        except GeometryError:
            return
        ref = mirror(p, f.normal, float(f.normal @ a))
        np.testing.assert_allclose(mirror_point(p, f), ref, atol=1e-9 * max(1.0, np.abs(p).max(), 50))


class TestIntersect:
    def test_empty_scene(self):
        assert intersect_segment(empty_scene(), (0, 0, 0), (1, 1, 1)) == []

    def test_through_cube(self):
        hits = intersect_segment(unit_box(), (-1, 0.5, 0.5), (2, 0.5, 0.5))
        assert len(hits) == 2
        assert [h.point[0] for h in hits] == pytest.approx([0.0, 1.0])
        assert [h.distance for h in hits] == pytest.approx([1.0, 2.0])
        assert hits[0].entering and not hits[1].entering

    def test_in_plane_segment(self):
        sc = build_scene([quad((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), "wood")])
        assert intersect_segment(sc, (-1, 0.5, 0), (2, 0.5, 0)) == []

    def test_endpoint_on_facet_excluded(self):
        sc = build_scene([quad((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), "wood")])
        assert intersect_segment(sc, (0.5, 0.5, 0), (0.5, 0.5, 2)) == []
        assert len(intersect_segment(sc, (0.5, 0.5, -1), (0.5, 0.5, 2))) == 1

    def test_coincident_endpoints(self):
        with pytest.raises(GeometryError):
            intersect_segment(unit_box(), (0, 0, 0), (0, 0, 0))

    def test_index_equals_linear_scan(self):
        sc = random_scene(7)
        rng = np.random.default_rng(11)
        for _ in range(1000):
            a, b = rng.uniform(-12, 12, (2, 3))
            fast = intersect_segment(sc, a, b)
            slow = intersect_segment_linear(sc, a, b)
            assert [h.facet_id for h in fast] == [h.facet_id for h in slow]
            assert [h.distance for h in fast] == [h.distance for h in slow]

    def test_matches_oracle(self):
        sc = random_scene(3)
        rng = np.random.default_rng(5)
        for _ in range(200):
            a, b = rng.uniform(-12, 12, (2, 3))
            got = [(h.facet_id, h.distance) for h in intersect_segment(sc, a, b)]
            ref = [(f, d) for d, f, _ in segment_crossings(a, b, sc.facets)]
            assert [g[0] for g in got] == [r[0] for r in ref]
            np.testing.assert_allclose([g[1] for g in got], [r[1] for r in ref], atol=1e-9)

    @settings(max_examples=200)
    @given(st.integers(0, 2**31), st.integers(0, 5))
    def test_reversal(self, seed, scene_seed):
        sc = random_scene(scene_seed, n=20)
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(-12, 12, (2, 3))
        fwd = intersect_segment(sc, a, b)
        back = intersect_segment(sc, b, a)
        assert sorted(h.facet_id for h in fwd) == sorted(h.facet_id for h in back)
        L = float(np.linalg.norm(b - a))
        rev = {h.facet_id: h.distance for h in back}
        for h in fwd:
            assert abs(h.distance + rev[h.facet_id] - L) < 1e-9
