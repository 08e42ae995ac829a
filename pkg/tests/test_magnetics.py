import math

import numpy as np
import pytest
from scipy import integrate

from iclink.errors import GeometryError, SingularityError, ValidationError
from iclink.magnetics import (MU0, CoilGeometry, CoilPlacement, SegmentPath, build_network, coaxial_loop_mutual,
                              mutual_inductance, polygon_loop, self_inductance, spiral_path, square_loop,
                              square_loop_inductance)


def neumann_circles(r1, r2, d):
    """Direct quadrature of the Neumann integral for coaxial circles (um -> H)."""
    f = lambda phi: math.cos(phi) / math.sqrt(r1 ** 2 + r2 ** 2 + d ** 2 - 2 * r1 * r2 * math.cos(phi))
    val, _ = integrate.quad(f, 0, 2 * math.pi, epsabs=0, epsrel=1e-12, limit=200)
    return MU0 / 2 * r1 * r2 * val * 1e-6


class TestGeometry:
    def test_reference_spiral(self):
        g = CoilGeometry()
        p = spiral_path(g)
        assert p.n_segments == 20
        assert not p.closed
        sides = g.side_lengths()
        # bookkeeping oracle: outer side less one pitch per half turn after the first three sides
        assert sides[-1] == 250 - 2 * 5 * (1 + 1) + 2 == 232
        assert np.allclose(p.segment_lengths(), sides)
        assert p.length() == pytest.approx(sum(sides))
        assert g.trace_radius == 0.5

    def test_one_turn_is_square(self):
        p = spiral_path(CoilGeometry(100, 1, 1, 1))
        assert p.n_segments == 4
        # the last side stops one pitch short so the path stays open
        assert np.allclose(p.segment_lengths(), [100, 100, 100, 98])
        assert not p.closed

    @pytest.mark.parametrize("turns", [1, 2, 3, 7])
    def test_segment_count(self, turns):
        assert spiral_path(CoilGeometry(100, turns)).n_segments == 4 * turns

    def test_placement_offsets_path(self):
        p = spiral_path(CoilGeometry(), CoilPlacement(3, -4, 106))
        assert np.all(p.points[:, 2] == 106)
        assert p.points[0, 0] == -125 + 3 and p.points[0, 1] == -125 - 4

    @pytest.mark.parametrize("kwargs", [dict(turns=70), dict(trace_width=0), dict(turns=0),
                                        dict(outer_side=-1), dict(turns=2.5)])
    def test_bad_geometry(self, kwargs):
        with pytest.raises(GeometryError):
            CoilGeometry(**kwargs)

    def test_negative_dz(self):
        with pytest.raises(ValidationError):
            CoilPlacement(0, 0, -1)


class TestMutual:
    def test_coaxial_720gon_against_elliptic(self):
        m = mutual_inductance(polygon_loop(125, 720, 0), polygon_loop(125, 720, 106))
        oracle = neumann_circles(125, 125, 106)
        assert coaxial_loop_mutual(125, 125, 106) == pytest.approx(oracle, rel=1e-9)
        assert abs(m / oracle - 1) < 0.01

    def test_dipole_limit(self):
        r = 10.0
        d = 20 * r
        dipole = MU0 * math.pi * r ** 4 / (2 * d ** 3) * 1e-6
        assert coaxial_loop_mutual(r, r, d) == pytest.approx(dipole, rel=0.01)

    def test_coaxial_oracle_properties(self):
        assert coaxial_loop_mutual(50, 120, 30) == coaxial_loop_mutual(120, 50, 30)
        ds = [5, 10, 50, 106, 300]
        vals = [coaxial_loop_mutual(125, 125, d) for d in ds]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        with pytest.raises(GeometryError):
            coaxial_loop_mutual(1, 1, 0)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(3):
            a = spiral_path(CoilGeometry(80, 2), CoilPlacement(*rng.uniform(-20, 20, 2), 0))
            b = spiral_path(CoilGeometry(60, 3), CoilPlacement(*rng.uniform(-20, 20, 2), rng.uniform(20, 60)))
            assert mutual_inductance(a, b) == mutual_inductance(b, a)

    def test_lateral_decay(self):
        g = CoilGeometry()
        a = spiral_path(g)
        ms = [mutual_inductance(a, spiral_path(g, CoilPlacement(dx, 0, 106))) for dx in (0, 10, 20, 40, 60)]
        assert all(m > 0 for m in ms)
        assert all(x > y for x, y in zip(ms, ms[1:]))

    def test_convergence_under_refinement(self):
        a = spiral_path(CoilGeometry())
        b = spiral_path(CoilGeometry(), CoilPlacement(0, 0, 106))
        coarse = mutual_inductance(a, b)
        fine = mutual_inductance(a, b, max_element=2.5)
        assert abs(fine / coarse - 1) < 1e-3

    def test_touching_paths_raise(self):
        a = SegmentPath([[0, 0, 0], [10, 0, 0]], 0.5)
        b = SegmentPath([[5, -5, 0.1], [5, 5, 0.1]], 0.5)
        c = SegmentPath([[0, 0.2, 0], [10, 0.2, 0]], 0.5)
        # perpendicular filaments carry no Neumann term; parallel ones do
        mutual_inductance(a, b)
        with pytest.raises(SingularityError):
            mutual_inductance(a, c)


class TestSelf:
    def test_square_loop_closed_form(self):
        closed = square_loop_inductance(100, 1)
        # the closed form uses the high-frequency (no internal inductance) constant
        assert abs(self_inductance(square_loop(100, 0, 1), internal=False) / closed - 1) < 0.05
        low_freq = self_inductance(square_loop(100, 0, 1))
        assert low_freq > closed

    def test_scaling(self):
        small = self_inductance(square_loop(50, 0, 0.5))
        big = self_inductance(square_loop(100, 0, 1.0))
        assert big == pytest.approx(2 * small, rel=1e-9)

    def test_turns_trend(self):
        one = self_inductance(spiral_path(CoilGeometry(250, 1)))
        five = self_inductance(spiral_path(CoilGeometry(250, 5)))
        assert 0 < one < five

    def test_translation_invariant(self):
        g = CoilGeometry(100, 2)
        assert self_inductance(spiral_path(g)) == self_inductance(spiral_path(g, CoilPlacement(7, 9, 40)))

    def test_bad_radius(self):
        with pytest.raises(GeometryError):
            self_inductance(square_loop(10), trace_radius=0)


class TestNetwork:
    def test_single_coil(self):
        net = build_network([(CoilGeometry(100, 2), CoilPlacement())])
        assert net.n == 1 and net.M.shape == (1, 1) and net.M[0, 0] == 0
        assert net.R[0] == pytest.approx(CoilGeometry(100, 2).trace_length() * 0.02)

    def test_stacked_pair(self, pair_network):
        k = pair_network.coupling(0, 1)
        assert 0 < k < 1
        assert pair_network.R[0] == pytest.approx(4838 * 0.02)

    def test_two_by_two(self, default_network, default_scenario):
        net = default_network
        assert net.n == 4
        L = net.inductance_matrix()
        assert np.array_equal(L, L.T)
        upper = net.M[np.triu_indices(4, 1)]
        assert upper.size == 6 and np.all(upper != 0)
        assert np.all(np.linalg.eigvalsh(L) > 0)

    def test_explicit_R_and_C(self):
        g = CoilGeometry(100, 2)
        net = build_network([(g, CoilPlacement()), (g, CoilPlacement(0, 0, 50))], R_per_coil=3.0, C_shunt=[1e-15, 0])
        assert list(net.R) == [3.0, 3.0]
        assert list(net.C_shunt) == [1e-15, 0]

    def test_parallel_matches_sequential(self):
        g = CoilGeometry(80, 2)
        coils = [(g, CoilPlacement()), (g, CoilPlacement(0, 0, 30)), (g, CoilPlacement(100, 0, 0))]
        a = build_network(coils)
        b = build_network(coils, workers=3)
        assert a.fingerprint() == b.fingerprint()

    def test_layout_rejections(self):
        g = CoilGeometry()
        with pytest.raises(GeometryError):
            build_network([(g, CoilPlacement()), (g, CoilPlacement())])
        with pytest.raises(GeometryError):
            build_network([(g, CoilPlacement()), (g, CoilPlacement(100, 0, 0))])
        with pytest.raises(GeometryError):
            build_network([])
