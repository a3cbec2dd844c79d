import numpy as np
import pytest
import scipy.linalg

from gibbslearn.errors import IncompleteData
from gibbslearn.models import xxz_chain
from gibbslearn.pauli import PauliOperator, PauliString, all_strings, dense_matrix
from gibbslearn.states import (
    ExpectationTable,
    add_noise,
    build_table,
    expectation,
    gibbs_density,
    required_strings,
)

from oracles import kron_operator


class TestGibbsDensity:
    def test_zero_hamiltonian_is_maximally_mixed(self):
        rho = gibbs_density(PauliOperator.zero(2), 3.0)
        assert np.abs(rho.matrix - np.eye(4) / 4).max() < 1e-14

    def test_two_level_tanh(self):
        h = PauliOperator.from_terms(1, [(-1.0, "Z0")])
        rho = gibbs_density(h, 1.0)
        assert abs(expectation(rho, PauliString.from_text("Z0", 1)) - np.tanh(1.0)) < 1e-12

    def test_against_expm_oracle(self):
        # independent route: scaling-and-squaring matrix exponential
        h = xxz_chain(4)
        t = 2.0
        rho = gibbs_density(h, t)
        dense = kron_operator(h)
        ref = scipy.linalg.expm(-dense / t)
        ref /= np.trace(ref)
        assert np.abs(rho.matrix - ref).max() < 1e-12

    def test_commutes_with_hamiltonian(self):
        h = xxz_chain(3)
        rho = gibbs_density(h, 0.7)
        hd = dense_matrix(h)
        assert np.abs(rho.matrix @ hd - hd @ rho.matrix).max() < 1e-10

    def test_rejects_bad_input(self):
        h = PauliOperator.from_terms(1, [(1j, "X0")])
        with pytest.raises(ValueError):
            gibbs_density(h, 1.0)
        with pytest.raises(ValueError):
            gibbs_density(xxz_chain(2), -1.0)

    def test_scaling_gauge(self, rng):
        # (c*h, c*T) prepares the same state
        h = xxz_chain(3)
        rho1 = gibbs_density(h, 1.3)
        rho2 = gibbs_density(2.5 * h, 2.5 * 1.3)
        assert np.abs(rho1.matrix - rho2.matrix).max() < 1e-12

    def test_free_energy_minimality(self, rng):
        # the thermal state minimizes -T S + <h> against random perturbations
        for n in (2, 3):
            strings = all_strings(n, include_identity=False)
            coeffs = rng.normal(size=len(strings))
            coeffs /= 2.0 * np.linalg.norm(coeffs)
            h = PauliOperator(n, dict(zip(strings, coeffs)))
            t = 1.1
            rho = gibbs_density(h, t)
            hd = dense_matrix(h)

            def free_energy(mat):
                evals = scipy.linalg.eigvalsh(mat)
                evals = evals[evals > 1e-300]
                return t * float(np.sum(evals * np.log(evals))) + float(
                    np.trace(mat @ hd).real
                )

            base = free_energy(rho.matrix)
            dim = 1 << n
            for _ in range(100):
                shift = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
                shift = shift + shift.conj().T
                cand = rho.matrix + 1e-3 * shift / np.abs(shift).max()
                evals = scipy.linalg.eigvalsh(cand)
                if evals.min() <= 1e-12:
                    continue
                cand /= np.trace(cand).real
                assert free_energy(cand) >= base - 1e-12


class TestExpectation:
    def test_maximally_mixed_kills_traceless(self):
        rho = gibbs_density(PauliOperator.zero(2), 1.0)
        for s in all_strings(2, include_identity=False):
            assert abs(expectation(rho, s)) < 1e-14

    def test_diagonal_state_offdiagonal_string(self):
        h = PauliOperator.from_terms(1, [(-1.0, "Z0")])
        rho = gibbs_density(h, 1.0)
        assert abs(expectation(rho, PauliString.from_text("X0", 1))) < 1e-14

    def test_ferromagnetic_correlation_positive(self):
        rho = gibbs_density(xxz_chain(4), 2.0)
        value = expectation(rho, PauliString.from_text("X0 X1", 4))
        dense = kron_operator(PauliOperator.from_terms(4, [(1.0, "X0 X1")]))
        assert value > 0
        assert abs(value - np.trace(rho.matrix @ dense).real) < 1e-12

    def test_bounded_by_one(self, rng):
        rho = gibbs_density(xxz_chain(3), 0.8)
        for s in all_strings(3):
            assert expectation(rho, s) ** 2 <= 1 + 1e-12


class TestRequiredStrings:
    def test_single_qubit_closure(self):
        b = [PauliString.from_text("X0", 1)]
        h = [PauliOperator.from_terms(1, [(1.0, "Z0")])]
        got = required_strings(b, h)
        expect = {PauliString.from_text(t, 1) for t in ("I", "Z0")}
        assert expect <= got <= {PauliString.from_text(t, 1) for t in ("I", "X0", "Y0", "Z0")}

    def test_identity_only(self):
        b = [PauliString.identity(2)]
        assert required_strings(b, []) == {PauliString.identity(2)}

    def test_locality_of_products(self):
        from gibbslearn.pauli import enumerate_geometric_k_local

        # every required string is a product of three window-local strings,
        # so its support splits into at most three contiguous runs; from
        # seven sites on that is a strict subset of all strings
        for n, strict in ((4, False), (7, True)):
            b = enumerate_geometric_k_local(n, 2)
            h = [PauliOperator.from_string(s) for s in b]
            got = required_strings(b, h)
            if strict:
                assert len(got) < 4**n
            for s in got:
                if s.is_identity:
                    continue
                sites = s.support
                runs = 1 + sum(1 for a, b2 in zip(sites, sites[1:]) if b2 > a + 1)
                assert runs <= 3


class TestTable:
    def test_build_and_lookup(self):
        rho = gibbs_density(xxz_chain(3), 1.0)
        strings = set(all_strings(3))
        table = build_table(rho, strings)
        assert table.value(PauliString.identity(3)) == 1.0
        with pytest.raises(IncompleteData):
            ExpectationTable(3, {}).value(PauliString.from_text("X0", 3))

    def test_roundtrip(self, tmp_path, rng):
        rho = gibbs_density(xxz_chain(3), 1.0)
        table = build_table(rho, all_strings(3))
        noisy = add_noise(table, 1e-3, 77)
        path = tmp_path / "table.tsv"
        noisy.save(path)
        back = ExpectationTable.load(path)
        assert back.n == noisy.n
        assert back.noise_sigma == noisy.noise_sigma
        assert back.seed == noisy.seed
        assert back.values == noisy.values  # exact repr round-trip


class TestNoise:
    def test_zero_sigma_identity(self):
        rho = gibbs_density(xxz_chain(3), 1.0)
        table = build_table(rho, all_strings(3))
        out = add_noise(table, 0.0, 123)
        assert out.values == table.values

    def test_determinism(self):
        rho = gibbs_density(xxz_chain(3), 1.0)
        table = build_table(rho, all_strings(3))
        a = add_noise(table, 1e-3, 5)
        b = add_noise(table, 1e-3, 5)
        assert a.values == b.values
        c = add_noise(table, 1e-3, 6)
        assert c.values != a.values

    def test_identity_untouched_and_no_clamping(self):
        rho = gibbs_density(xxz_chain(2), 1.0)
        table = build_table(rho, all_strings(2))
        noisy = add_noise(table, 50.0, 3)
        assert noisy.values[PauliString.identity(2)] == 1.0
        assert any(abs(v) > 1 for s, v in noisy.values.items() if not s.is_identity)

    def test_negative_sigma_rejected(self):
        rho = gibbs_density(xxz_chain(2), 1.0)
        table = build_table(rho, all_strings(2))
        with pytest.raises(ValueError):
            add_noise(table, -0.1, 0)

    def test_empirical_sigma(self):
        # statistical self-test across many entries
        n = 7
        values = {PauliString.identity(n): 1.0}
        for s in all_strings(n, include_identity=False)[:12000]:
            values[s] = 0.0
        table = ExpectationTable(n, values)
        sigma = 1e-3
        noisy = add_noise(table, sigma, 11)
        draws = np.array(
            [v for s, v in noisy.values.items() if not s.is_identity]
        )
        assert abs(draws.std() - sigma) / sigma < 0.05

    def test_variance_composition(self):
        rho = gibbs_density(xxz_chain(2), 1.0)
        table = build_table(rho, all_strings(2))
        twice = add_noise(add_noise(table, 3e-4, 1), 4e-4, 2)
        assert abs(twice.noise_sigma - 5e-4) < 1e-18
