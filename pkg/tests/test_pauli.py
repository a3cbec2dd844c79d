import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbslearn.errors import DenseLimitExceeded, DimensionMismatch
from gibbslearn.pauli import (
    PauliOperator,
    PauliString,
    all_strings,
    commutator,
    dense_matrix,
    enumerate_geometric_k_local,
    multiply,
    string_dense,
)

from oracles import kron_operator, kron_string


@st.composite
def pauli_strings(draw, n=None, max_n=4):
    sites = n if n is not None else draw(st.integers(1, max_n))
    x = draw(st.integers(0, 2**sites - 1))
    z = draw(st.integers(0, 2**sites - 1))
    return PauliString(sites, x, z)


def random_operator(n, rng, terms=4):
    strings = all_strings(n, include_identity=False)
    picks = rng.choice(len(strings), size=min(terms, len(strings)), replace=False)
    coeffs = rng.normal(size=len(picks)) + 1j * rng.normal(size=len(picks))
    return PauliOperator(n, {strings[i]: c for i, c in zip(picks, coeffs)})


class TestMultiply:
    def test_involution(self):
        x = PauliString.from_text("X0", 1)
        r, phase = multiply(x, x)
        assert r.is_identity and phase == 1

    def test_xy_is_iz(self):
        x = PauliString.from_text("X0", 1)
        y = PauliString.from_text("Y0", 1)
        r, phase = multiply(x, y)
        assert r == PauliString.from_text("Z0", 1) and phase == 1j

    def test_disjoint_supports(self):
        p = PauliString.from_text("X0", 2)
        q = PauliString.from_text("Z1", 2)
        r, phase = multiply(p, q)
        assert r == PauliString.from_text("X0 Z1", 2) and phase == 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            multiply(PauliString.from_text("X0", 1), PauliString.from_text("X0", 2))

    @given(pauli_strings(n=3), pauli_strings(n=3))
    def test_against_dense(self, p, q):
        r, phase = multiply(p, q)
        assert np.abs(kron_string(p) @ kron_string(q) - phase * kron_string(r)).max() < 1e-12

    @given(pauli_strings(n=3), pauli_strings(n=3), pauli_strings(n=3))
    def test_associative(self, p, q, r):
        ab, ph_ab = multiply(p, q)
        left, ph_left = multiply(ab, r)
        bc, ph_bc = multiply(q, r)
        right, ph_right = multiply(p, bc)
        assert left == right
        assert ph_ab * ph_left == ph_bc * ph_right

    @given(pauli_strings(n=4), pauli_strings(n=4))
    def test_phase_pairing(self, p, q):
        # reversing the product conjugates the phase, so the phase squared
        # is +1 when the strings commute (even overlap of clashing letters)
        # and -1 when they anticommute (odd overlap)
        _, ph_pq = multiply(p, q)
        _, ph_qp = multiply(q, p)
        assert ph_qp == ph_pq.conjugate()
        overlap_even = p.commutes_with(q)
        assert ph_pq**2 == (1 if overlap_even else -1)


class TestCommutator:
    def test_su2(self):
        x = PauliOperator.from_terms(1, [(1.0, "X0")])
        y = PauliOperator.from_terms(1, [(1.0, "Y0")])
        assert commutator(x, y) == PauliOperator.from_terms(1, [(2j, "Z0")])

    def test_self_commutator_is_exact_zero(self):
        x = PauliOperator.from_terms(1, [(1.0, "X0")])
        assert commutator(x, x).terms == {}

    def test_two_site_example(self):
        # [X0 X1, Z1] expanded through dense matrices
        a = PauliOperator.from_terms(2, [(1.0, "X0 X1")])
        b = PauliOperator.from_terms(2, [(1.0, "Z1")])
        got = commutator(a, b)
        dense = kron_operator(a) @ kron_operator(b) - kron_operator(b) @ kron_operator(a)
        assert np.abs(kron_operator(got) - dense).max() < 1e-12
        assert got == PauliOperator.from_terms(2, [(-2j, "X0 Y1")])

    def test_antisymmetry_and_jacobi(self, rng):
        for _ in range(20):
            a = random_operator(3, rng)
            b = random_operator(3, rng)
            c = random_operator(3, rng)
            assert commutator(a, b) == (-1.0) * commutator(b, a)
            jacobi = (
                commutator(a, commutator(b, c))
                + commutator(b, commutator(c, a))
                + commutator(c, commutator(a, b))
            )
            assert all(abs(v) < 1e-9 for v in jacobi.terms.values()) or jacobi.terms == {}


class TestEnumeration:
    def test_small_counts(self):
        assert len(enumerate_geometric_k_local(2, 2)) == 15
        assert len(enumerate_geometric_k_local(1, 1)) == 3
        assert [s.to_text() for s in enumerate_geometric_k_local(1, 1)] == ["X0", "Y0", "Z0"]

    def test_chain_counts(self):
        assert len(enumerate_geometric_k_local(100, 2)) == 1191
        assert len(enumerate_geometric_k_local(100, 2, include_identity=True)) == 1192

    @pytest.mark.parametrize("n,k", [(2, 2), (3, 2), (4, 3), (6, 3), (5, 1)])
    def test_against_brute_force(self, n, k):
        def window_ok(s):
            if s.is_identity:
                return False
            sites = s.support
            return sites[-1] - sites[0] + 1 <= k

        brute = {s for s in all_strings(n, include_identity=False) if window_ok(s)}
        got = enumerate_geometric_k_local(n, k)
        assert len(got) == len(set(got)) == len(brute)
        assert set(got) == brute

    def test_deterministic_order(self):
        a = enumerate_geometric_k_local(5, 2)
        b = enumerate_geometric_k_local(5, 2)
        assert a == b
        keys = [s.sort_key() for s in a]
        assert keys == sorted(keys)


class TestDense:
    def test_identity(self):
        op = PauliOperator.from_string(PauliString.identity(1))
        assert np.abs(dense_matrix(op) - np.eye(2)).max() == 0

    def test_z_diagonal(self):
        op = PauliOperator.from_terms(1, [(1.0, "Z0")])
        assert np.allclose(np.diag(dense_matrix(op)), [1, -1])

    def test_xx_antidiagonal(self):
        s = PauliString.from_text("X0 X1", 2)
        assert np.abs(string_dense(s) - np.fliplr(np.eye(4))).max() == 0

    def test_limit(self, monkeypatch):
        monkeypatch.setenv("GIBBSLEARN_DENSE_LIMIT", "3")
        with pytest.raises(DenseLimitExceeded):
            string_dense(PauliString.identity(4))

    @settings(max_examples=30)
    @given(pauli_strings(max_n=4))
    def test_matches_kron(self, p):
        assert np.abs(string_dense(p) - kron_string(p)).max() < 1e-12

    def test_homomorphism(self, rng):
        for _ in range(10):
            a = random_operator(4, rng)
            b = random_operator(4, rng)
            left = dense_matrix(a @ b)
            right = dense_matrix(a) @ dense_matrix(b)
            assert np.abs(left - right).max() < 1e-12

    def test_selfadjoint_gives_hermitian(self, rng):
        strings = all_strings(3, include_identity=False)
        coeffs = rng.normal(size=len(strings))
        op = PauliOperator(3, dict(zip(strings, coeffs)))
        mat = dense_matrix(op)
        assert np.abs(mat - mat.conj().T).max() < 1e-12


class TestOperator:
    def test_canonical_form_drops_zeros(self):
        x = PauliString.from_text("X0", 1)
        op = PauliOperator(1, {x: 1.0}) + PauliOperator(1, {x: -1.0})
        assert op.terms == {}

    def test_adjoint_conjugates(self):
        op = PauliOperator.from_terms(1, [(1 + 2j, "X0")])
        assert op.adjoint().coefficient(PauliString.from_text("X0", 1)) == 1 - 2j
        assert not op.is_selfadjoint()

    def test_text_roundtrip(self):
        cases = ["X0 X1", "Z4", "I"]
        for text in cases:
            assert PauliString.from_text(text, 5).to_text() == text

    def test_bad_text(self):
        with pytest.raises(ValueError):
            PauliString.from_text("Q1", 2)
        with pytest.raises(ValueError):
            PauliString.from_text("X0 X0", 2)
        with pytest.raises(ValueError):
            PauliString.from_text("X7", 2)
