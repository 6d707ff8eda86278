import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from factoryrt.geometry import box_facets, build_scene, empty_scene, quad
from factoryrt.materials import default_library
from factoryrt.metrics import (AngleSelector, MetricsError, PathArrays, Visibility, circular_angle_spread,
                               classify_visibility, link_metrics, received_power, rms_delay_spread)

LIB = default_library()
ARR = AngleSelector.ARRIVAL_AZIMUTH
DEP = AngleSelector.DEPARTURE_AZIMUTH


def cols(power_db, delay_ns=None, aoa_deg=None, aod_deg=None, phase=None):
    p = np.asarray(power_db, dtype=float)
    n = p.size
    g = 10 ** (p / 20) * (np.exp(1j * np.asarray(phase)) if phase is not None else 1)
    d = np.zeros(n) if delay_ns is None else np.asarray(delay_ns, float) * 1e-9
    a = np.zeros(n) if aoa_deg is None else np.radians(aoa_deg)
    b = np.zeros(n) if aod_deg is None else np.radians(aod_deg)
    return PathArrays(np.asarray(g, dtype=complex), d, np.asarray(b, float), np.asarray(a, float))


link = st.lists(st.tuples(st.floats(-200, -20), st.floats(0, 2000), st.floats(-180, 180), st.floats(-180, 180)),
                min_size=1, max_size=25)


def from_tuples(rows):
    p, d, a, b = map(np.array, zip(*rows))
    return cols(p, d, a, b)


class TestReceivedPower:
    def test_single(self):
        assert received_power(cols([-100.0])) == pytest.approx(-100.0)

    def test_two_equal(self):
        assert received_power(cols([-90.0, -90.0])) == pytest.approx(-86.99, abs=0.01)
        assert received_power(cols([-90.0, -90.0])) == pytest.approx(10 * math.log10(2e-9), abs=1e-12)

    def test_empty(self):
        assert received_power(cols([])) == -math.inf

    def test_tx_power(self):
        assert received_power(cols([-100.0]), tx_power_dbm=23) == pytest.approx(-77.0)

    def test_coherent(self):
        c = cols([-90.0, -90.0], delay_ns=[0.0, 0.25], phase=[0.0, 0.0])
        # half a period at 2 GHz: the two paths cancel
        assert received_power(c, coherent=True, freq=2e9) < -250
        with pytest.raises(MetricsError):
            received_power(c, coherent=True)

    @given(link, st.randoms())
    def test_permutation_invariant(self, rows, rnd):
        shuffled = list(rows)
        rnd.shuffle(shuffled)
        assert received_power(from_tuples(rows)) == pytest.approx(received_power(from_tuples(shuffled)),
                                                                 abs=1e-9)

    @given(link, st.floats(-250, -20))
    def test_monotone_in_added_path(self, rows, extra):
        before = received_power(from_tuples(rows))
        after = received_power(from_tuples(rows + [(extra, 0.0, 0.0, 0.0)]))
        assert after >= before


class TestDelaySpread:
    def test_examples(self):
        assert rms_delay_spread(cols([-80.0])) == 0
        assert rms_delay_spread(cols([-80.0, -80.0], [0, 100])) == pytest.approx(50.0)
        three_to_one = cols(10 * np.log10([3.0, 1.0]), [0, 100])
        assert rms_delay_spread(three_to_one) == pytest.approx(43.30, abs=0.01)
        assert rms_delay_spread(three_to_one) == pytest.approx(math.sqrt(3) / 4 * 100, rel=1e-12)

    def test_empty(self):
        with pytest.raises(MetricsError):
            rms_delay_spread(cols([]))

    @given(link, st.floats(0, 1e4))
    def test_shift_invariant(self, rows, shift):
        base = from_tuples(rows)
        moved = PathArrays(base.gain, base.delay + shift * 1e-9, base.aod_az, base.aoa_az)
        assert rms_delay_spread(moved) == pytest.approx(rms_delay_spread(base), abs=1e-9)

    @given(link)
    def test_nonnegative(self, rows):
        assert rms_delay_spread(from_tuples(rows)) >= 0


class TestAngleSpread:
    def test_examples(self):
        assert circular_angle_spread(cols([-80, -90], aoa_deg=[30, 30]), ARR) == pytest.approx(0.0, abs=1e-6)
        s = circular_angle_spread(cols([-80, -80], aoa_deg=[0, 90]), ARR)
        assert s == pytest.approx(47.7, abs=0.01)
        assert s == pytest.approx(math.degrees(math.sqrt(-2 * math.log(math.sqrt(2) / 2))), rel=1e-12)
        assert circular_angle_spread(cols([-80, -80], aoa_deg=[0, 180]), ARR) == 180.0

    def test_selector(self):
        c = cols([-80, -80], aoa_deg=[0, 90], aod_deg=[10, 10])
        assert circular_angle_spread(c, DEP) == pytest.approx(0.0, abs=1e-6)
        assert circular_angle_spread(c, "arrival_azimuth") > 40

    def test_empty(self):
        with pytest.raises(MetricsError):
            circular_angle_spread(cols([]), ARR)

    @given(link, st.floats(-720, 720), st.floats(-60, 60))
    def test_rotation_and_scale_invariant(self, rows, rot, scale_db):
        base = from_tuples(rows)
        turned = PathArrays(base.gain * 10 ** (scale_db / 20), base.delay, base.aod_az + np.radians(rot),
                            base.aoa_az + np.radians(rot))
        for sel in (ARR, DEP):
            a, b = circular_angle_spread(base, sel), circular_angle_spread(turned, sel)
            assume(a < 179)
            assert b == pytest.approx(a, abs=1e-6)
            assert 0 <= a <= 180


class TestFloor:
    @given(link)
    def test_floor_changes_little(self, rows):
        strong = max(r[0] for r in rows)
        weak = [(strong - 260.0, 5000.0, 170.0, -170.0)] * 3
        a = link_metrics(from_tuples(rows), Visibility.LOS)
        b = link_metrics(from_tuples(rows + weak), Visibility.LOS)
        for name in ("received_power_dbm", "delay_spread_ns", "hads_deg", "haas_deg"):
            x, y = getattr(a, name), getattr(b, name)
            assert abs(x - y) <= 1e-6 * max(abs(x), 1.0)


class TestLinkMetrics:
    def test_empty_link(self):
        m = link_metrics(cols([]), Visibility.NLOS)
        assert m.received_power_dbm == -math.inf and m.path_count == 0
        assert math.isnan(m.delay_spread_ns)
        assert m.to_json()["received_power_dbm"] is None

    def test_zero_gain_paths_dropped(self):
        c = PathArrays(np.array([1e-4, 0.0], complex), np.array([0.0, 1e-7]), np.zeros(2), np.zeros(2))
        m = link_metrics(c, "LoS")
        assert m.path_count == 1 and m.delay_spread_ns == 0

    def test_fields(self):
        m = link_metrics(cols([-80, -80], [0, 100], [0, 90], [0, 0]), Visibility.OLOS)
        assert m.received_power_dbm == pytest.approx(-76.99, abs=0.01)
        assert m.delay_spread_ns == pytest.approx(50.0)
        assert m.haas_deg == pytest.approx(47.7, abs=0.01) and m.hads_deg == pytest.approx(0.0, abs=1e-6)
        assert m.to_json()["visibility"] == "OLoS"


class TestVisibility:
    def test_empty(self):
        assert classify_visibility(empty_scene(), LIB, (0, 0, 0), (5, 0, 0)) is Visibility.LOS

    def test_wood_box(self):
        sc = build_scene(box_facets((2, -1, -1), (3, 1, 1), "wood", thickness=0.2))
        assert classify_visibility(sc, LIB, (0, 0, 0), (5, 0, 0)) is Visibility.OLOS
        assert classify_visibility(sc, LIB, (0, 0, 3), (5, 0, 3)) is Visibility.LOS

    def test_metal(self):
        facets = box_facets((2, -1, -1), (3, 1, 1), "metal") + \
            [quad((4, -5, -5), (4, 5, -5), (4, 5, 5), (4, -5, 5), "wood", 0.1)]
        assert classify_visibility(build_scene(facets), LIB, (0, 0, 0), (5, 0, 0)) is Visibility.NLOS

    def test_coincident(self):
        with pytest.raises(MetricsError):
            classify_visibility(empty_scene(), LIB, (1, 1, 1), (1, 1, 1))
