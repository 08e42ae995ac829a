import numpy as np
import pytest

from iclink.errors import ModelError, OrderError, ParseError, PassivityError, SingularityError
from iclink.netlist import (CouplingNetwork, TouchstoneData, check_reciprocity_passivity, default_extraction_frequency,
                            extract_network, format_diagnostics, parse_touchstone, s_to_z, synthesize_touchstone,
                            write_touchstone, z_to_s)


def forward_s(R, Lmat, f, z0=50.0):
    """Textbook forward model computed here, independent of the package."""
    z = np.diag(R) + 2j * np.pi * f * Lmat
    eye = np.eye(len(R))
    return np.linalg.solve((z + z0 * eye).T, (z - z0 * eye).T).T


def rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(b), 1e-300))


class TestParse:
    def test_zero_two_port(self):
        d = parse_touchstone("# GHz S RI R 50\n1.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0\n")
        assert d.port_count == 2
        assert d.frequencies.tolist() == [1e9]
        assert np.all(d.s_matrices == 0)

    def test_ma_identity(self):
        text = "! comment\n# MHZ S MA R 50\n100 1 0 0 0 0 0 1 0\n200 1 0 0 0 0 0 1 0 ! trailing\n"
        d = parse_touchstone(text)
        assert d.frequencies.tolist() == [1e8, 2e8]
        assert np.allclose(d.s_matrices, np.eye(2))

    def test_two_port_column_order(self):
        d = parse_touchstone("# HZ S RI R 50\n1 11 0 21 0 12 0 22 0\n")
        assert d.s_matrices[0].real.tolist() == [[11, 12], [21, 22]]

    def test_db_and_angles(self):
        d = parse_touchstone("# HZ S DB R 75\n5 -20 90\n")
        assert d.port_count == 1 and d.reference_impedance == 75
        assert d.s_matrices[0, 0, 0] == pytest.approx(0.1j, abs=1e-15)

    def test_option_defaults(self):
        with pytest.raises(ParseError):
            parse_touchstone("2 0.5 180\n")
        d = parse_touchstone("#\n2 0.5 180\n")
        assert d.frequencies[0] == 2e9
        assert d.s_matrices[0, 0, 0] == pytest.approx(-0.5)

    def test_four_port_row_major(self):
        s = np.arange(16).reshape(4, 4) + 0j
        lines = ["# HZ S RI R 50"]
        for i, row in enumerate(s):
            vals = " ".join(f"{v.real:g} 0" for v in row)
            lines.append((("1e9 " if i == 0 else "") + vals))
        d = parse_touchstone("\n".join(lines) + "\n")
        assert np.array_equal(d.s_matrices[0], s)

    @pytest.mark.parametrize("text,exc", [
        ("# HZ S RI R 50\n1 0 0 0\n", ParseError),
        ("# HZ S XX R 50\n1 0 0\n", ParseError),
        ("# HZ Z RI R 50\n1 0 0\n", ParseError),
        ("# HZ S RI R\n1 0 0\n", ParseError),
        ("# HZ S RI R 50\n1 0 abc\n", ParseError),
        ("[Version] 2.0\n# HZ S RI R 50\n1 0 0\n", ParseError),
        ("# HZ S RI R 50\n2 0 0\n1 0 0\n", OrderError),
        ("# HZ S RI R 50\n1 0 0\n1 0 0\n", OrderError),
        ("# HZ S RI R 50\n", ParseError),
    ])
    def test_errors(self, text, exc):
        with pytest.raises(exc):
            parse_touchstone(text)

    def test_order_error_is_parse_error(self):
        assert issubclass(OrderError, ParseError)


class TestWrite:
    def test_zero_two_port_two_lines(self):
        d = TouchstoneData([1e9], np.zeros((1, 2, 2)))
        text = write_touchstone(d)
        assert text.count("\n") == 2
        assert text.splitlines()[0] == "# HZ S RI R 50"

    def test_four_port_layout(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
        text = write_touchstone(TouchstoneData([1e9, 2e9], s))
        rows = text.splitlines()[1:]
        assert len(rows) == 8
        assert [len(r.split()) for r in rows[:4]] == [9, 8, 8, 8]

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_roundtrip(self, n):
        rng = np.random.default_rng(n)
        s = 0.3 * (rng.normal(size=(3, n, n)) + 1j * rng.normal(size=(3, n, n)))
        d = TouchstoneData([1e8, 1.5e8, 7e9], s, 42.5)
        text = write_touchstone(d)
        back = parse_touchstone(text)
        assert np.array_equal(back.s_matrices, d.s_matrices)
        assert np.array_equal(back.frequencies, d.frequencies)
        assert back.reference_impedance == 42.5
        assert write_touchstone(back) == text


class TestExtract:
    def test_reference_values(self):
        R, L, M = 5.0, 10e-9, 2e-9
        Lmat = np.array([[L, M], [M, L]])
        freqs = np.array([1e8, 1e9, 1e10])
        s = np.array([forward_s([R, R], Lmat, f) for f in freqs])
        net = extract_network(TouchstoneData(freqs, s), 1e9)
        assert rel(net.R, [R, R]) < 1e-9
        assert rel(net.L, [L, L]) < 1e-9
        assert rel(net.M[0, 1], M) < 1e-9
        assert net.M[0, 1] == net.M[1, 0]

    def test_synthesizer_matches_independent_forward_model(self):
        Lmat = np.array([[10e-9, 2e-9], [2e-9, 10e-9]])
        d = synthesize_touchstone([5, 5], [10e-9, 10e-9], [[0, 2e-9], [2e-9, 0]], [1e9])
        assert np.allclose(d.s_matrices[0], forward_s([5, 5], Lmat, 1e9), rtol=1e-13, atol=1e-15)

    def test_randomized_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            R = rng.uniform(0.1, 100, n)
            L = rng.uniform(0.1, 100, n) * 1e-9
            M = np.zeros((n, n))
            for i in range(n):
                for j in range(i + 1, n):
                    M[i, j] = M[j, i] = rng.uniform(-0.9, 0.9) / max(n - 1, 1) * np.sqrt(L[i] * L[j])
            f = rng.uniform(1e8, 5e9)
            d = synthesize_touchstone(R, L, M, [f / 2, f, 2 * f])
            net = extract_network(d, f)
            assert rel(net.R, R) < 1e-9
            assert rel(net.L, L) < 1e-9
            off = M != 0
            if off.any():
                assert rel(net.M[off], M[off]) < 1e-9

    def test_frequency_flat_model(self):
        d = synthesize_touchstone([5, 5], [10e-9, 10e-9], [[0, 2e-9], [2e-9, 0]], [1e9, 1.1e9, 2e9])
        a = extract_network(d, 1e9)
        b = extract_network(d, 1.1e9)
        assert np.allclose(a.inductance_matrix(), b.inductance_matrix(), rtol=1e-12, atol=0)
        assert np.allclose(a.R, b.R, rtol=1e-12)

    def test_interpolated_and_default_frequency(self):
        d = synthesize_touchstone([1], [1e-9], [[0]], [1e8, 1e10])
        assert default_extraction_frequency(d) == pytest.approx(1e9)
        # linear interpolation of S between distant points is not exact, but stays inductive
        net = extract_network(d)
        assert net.L[0] > 0
        with pytest.raises(ParseError):
            extract_network(d, 5e10)

    def test_port_map(self):
        L = np.array([1e-9, 2e-9, 3e-9])
        M = np.array([[0, 1e-10, 0], [1e-10, 0, 2e-10], [0, 2e-10, 0]])
        d = synthesize_touchstone([1, 2, 3], L, M, [1e9])
        net = extract_network(d, 1e9, port_map=[2, 0, 1])
        assert rel(net.L, L[[2, 0, 1]]) < 1e-9
        assert rel(net.M[1, 2], 1e-10) < 1e-9
        with pytest.raises(ParseError):
            extract_network(d, 1e9, port_map=[0, 0, 1])

    def test_matched_termination(self):
        with pytest.raises(PassivityError):
            extract_network(TouchstoneData([1e9], np.zeros((1, 2, 2))))

    def test_singular(self):
        with pytest.raises(SingularityError):
            s_to_z(np.eye(2), 50)

    def test_s_z_inverse(self):
        z = np.array([[10 + 5j, 2j], [2j, 7 + 3j]])
        assert np.allclose(s_to_z(z_to_s(z, 50), 50), z)


class TestDiagnostics:
    def test_clean(self):
        rows = check_reciprocity_passivity(TouchstoneData([1e9], [[[0.1, 0.2], [0.2, 0.3]]]))
        assert not rows[0].reciprocity_flag and not rows[0].passivity_flag

    def test_reciprocity_flag(self):
        s = np.array([[[0.1, 0.2], [0.2, 0.1]], [[0.1, 0.3], [0.2, 0.1]]])
        rows = check_reciprocity_passivity(TouchstoneData([1e9, 2e9], s))
        assert [r.reciprocity_flag for r in rows] == [False, True]
        assert "FAIL" in format_diagnostics(rows).splitlines()[2]

    def test_passivity_flag(self):
        rows = check_reciprocity_passivity(TouchstoneData([1e9], [[[1.5, 0], [0, 0.2]]]))
        assert rows[0].passivity_flag and rows[0].max_singular == pytest.approx(1.5)


class TestCouplingNetwork:
    def test_validation(self):
        with pytest.raises(PassivityError):
            CouplingNetwork(R=[1, 1], L=[1e-9, 1e-9], M=[[0, 2e-9], [2e-9, 0]])
        with pytest.raises(ModelError):
            CouplingNetwork(R=[1, 1], L=[1e-9, 1e-9], M=[[0, 1e-10], [2e-10, 0]])
        with pytest.raises(ModelError):
            CouplingNetwork(R=[-1, 1], L=[1e-9, 1e-9], M=np.zeros((2, 2)))
        with pytest.raises(PassivityError):
            CouplingNetwork(R=[1], L=[0], M=[[0]])

    def test_table_and_fingerprint(self):
        net = CouplingNetwork(R=[1, 2], L=[1e-9, 2e-9], M=[[0, 5e-10], [5e-10, 0]])
        table = net.to_table().splitlines()
        assert table[1].split()[:3] == ["0", "1", "1.0000000000000001e-09"]
        assert table[-1].startswith("M 0 1 5.0000000000000003e-10")
        assert net.fingerprint() == CouplingNetwork(R=[1, 2], L=[1e-9, 2e-9], M=[[0, 5e-10], [5e-10, 0]]).fingerprint()
        assert net.coupling(0, 1) == pytest.approx(5e-10 / np.sqrt(2e-18))
