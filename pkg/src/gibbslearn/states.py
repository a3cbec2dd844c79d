"""Exact desk-scale Gibbs states, expectation tables and the noise model.

States are prepared by dense Hermitian diagonalization, which also yields
log(rho) for free.  Expectation tables are the algorithm's only window onto
the state: a map from Pauli string to a real number, optionally corrupted by
independent Gaussian noise of a given standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from . import pauli
from .errors import DimensionMismatch, IncompleteData
from .pauli import PauliOperator, PauliString

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12


@dataclass
class DensityMatrix:
    """A validated density matrix with an optional eigendecomposition cache."""

    n: int
    matrix: np.ndarray
    eigenvalues: Optional[np.ndarray] = None
    eigenvectors: Optional[np.ndarray] = None

    @classmethod
    def from_matrix(cls, n: int, matrix: np.ndarray) -> "DensityMatrix":
        matrix = np.asarray(matrix, dtype=complex)
        dim = 1 << n
        if matrix.shape != (dim, dim):
            raise DimensionMismatch(f"expected shape {(dim, dim)}, got {matrix.shape}")
        if np.abs(matrix - matrix.conj().T).max() > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(matrix).real - 1.0) > TRACE_TOL or abs(np.trace(matrix).imag) > TRACE_TOL:
            raise ValueError("density matrix does not have unit trace")
        return cls(n, matrix)

    def eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.eigenvalues is None:
            import scipy.linalg

            evals, evecs = scipy.linalg.eigh(self.matrix)
            self.eigenvalues, self.eigenvectors = evals, evecs
        return self.eigenvalues, self.eigenvectors

    def log_matrix(self) -> np.ndarray:
        """log(rho); requires a faithful (strictly positive) state."""
        evals, evecs = self.eigensystem()
        if evals.min() <= 0:
            raise ValueError("state is not faithful; log(rho) undefined")
        return (evecs * np.log(evals)) @ evecs.conj().T

    def min_eigenvalue(self) -> float:
        evals, _ = self.eigensystem()
        return float(evals.min())


def gibbs_density(h: PauliOperator, temperature: float) -> DensityMatrix:
    """rho = exp(-h/T) / tr(exp(-h/T)) by dense Hermitian diagonalization.

    The largest eigenvalue of -h/T is subtracted before exponentiating, so
    the construction cannot overflow.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if not h.is_selfadjoint():
        raise ValueError("Hamiltonian must be selfadjoint (real coefficients)")
    import scipy.linalg

    hmat = pauli.dense_matrix(h)
    energies, evecs = scipy.linalg.eigh(hmat)
    exponent = -energies / temperature
    exponent -= exponent.max()
    weights = np.exp(exponent)
    weights /= weights.sum()
    rho = (evecs * weights) @ evecs.conj().T
    out = DensityMatrix(h.n, rho)
    order = np.argsort(weights)
    out.eigenvalues = weights[order]
    out.eigenvectors = evecs[:, order]
    return out


def expectation(rho: DensityMatrix, p: PauliString) -> float:
    """tr(rho p), exploiting that a Pauli string has one entry per row."""
    if p.n != rho.n:
        raise DimensionMismatch(f"string on {p.n} sites, state on {rho.n}")
    xi, zi = pauli._index_masks(p)
    dim = 1 << p.n
    idx = np.arange(dim)
    signs = 1 - 2 * (np.bitwise_count(idx & zi).astype(np.int64) & 1)
    gathered = rho.matrix[idx, idx ^ xi]
    value = pauli.PHASES[(p.x & p.z).bit_count() % 4] * np.dot(gathered, signs)
    return float(value.real)


def required_strings(
    b_basis: Sequence[PauliString], h_terms: Sequence[PauliOperator]
) -> Set[PauliString]:
    """Closed set of strings whose expectations determine every moment matrix.

    Products b_i b_j cover the Gram matrix and the modular matrix (reversed
    products share base strings), triple products b_i t b_j with t running
    over the strings of each Hamiltonian term cover the commutator moments,
    and the strings of the terms themselves cover the normalization data.
    """
    if not b_basis:
        return set()
    n = b_basis[0].n
    needed: Set[PauliString] = {PauliString.identity(n)}
    for p in b_basis:
        for q in b_basis:
            needed.add(PauliString(n, p.x ^ q.x, p.z ^ q.z))
    term_strings = set()
    for op in h_terms:
        term_strings.update(op.terms)
    needed.update(term_strings)
    for t in term_strings:
        for p in b_basis:
            xt, zt = p.x ^ t.x, p.z ^ t.z
            for q in b_basis:
                needed.add(PauliString(n, xt ^ q.x, zt ^ q.z))
    return needed


@dataclass
class ExpectationTable:
    """Map from Pauli string to a (possibly noisy) expectation value."""

    n: int
    values: Dict[PauliString, float]
    noise_sigma: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        ident = PauliString.identity(self.n)
        if ident in self.values and self.values[ident] != 1.0:
            raise ValueError("identity expectation must be exactly 1")

    def value(self, string: PauliString) -> float:
        try:
            return self.values[string]
        except KeyError:
            raise IncompleteData(string.to_text()) from None

    def canonical_strings(self) -> List[PauliString]:
        return sorted(self.values, key=PauliString.sort_key)

    def save(self, path):
        with open(path, "w") as handle:
            handle.write(f"# n = {self.n}\n")
            handle.write(f"# noise_sigma = {self.noise_sigma!r}\n")
            handle.write(f"# seed = {'' if self.seed is None else self.seed}\n")
            for string in self.canonical_strings():
                handle.write(f"{string.to_text()}\t{self.values[string]!r}\n")

    @classmethod
    def load(cls, path) -> "ExpectationTable":
        n = None
        sigma = 0.0
        seed = None
        values: Dict[PauliString, float] = {}
        with open(path) as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, raw = line[1:].partition("=")
                    key = key.strip()
                    raw = raw.strip()
                    if key == "n":
                        n = int(raw)
                    elif key == "noise_sigma":
                        sigma = float(raw)
                    elif key == "seed":
                        seed = int(raw) if raw else None
                    continue
                if n is None:
                    raise ValueError("table file has no 'n' header before data")
                text, _, raw = line.partition("\t")
                values[PauliString.from_text(text, n)] = float(raw)
        if n is None:
            raise ValueError("table file has no 'n' header")
        return cls(n, values, noise_sigma=sigma, seed=seed)


def build_table(rho: DensityMatrix, strings: Iterable[PauliString]) -> ExpectationTable:
    """Evaluate every string exactly; identity is pinned to 1."""
    values = {}
    for string in strings:
        if string.is_identity:
            values[string] = 1.0
        else:
            values[string] = expectation(rho, string)
    return ExpectationTable(rho.n, values, noise_sigma=0.0, seed=None)


def add_noise(table: ExpectationTable, sigma: float, seed) -> ExpectationTable:
    """Independent Gaussian noise of standard deviation sigma per entry.

    The identity entry is never touched, entries are not clamped to [-1, 1],
    and draws are keyed by the canonical string order, so the result is
    independent of any evaluation schedule.  Composing noisy tables adds
    variances.
    """
    if sigma < 0:
        raise ValueError(f"noise standard deviation must be >= 0, got {sigma}")
    if sigma == 0:
        return ExpectationTable(
            table.n, dict(table.values), noise_sigma=table.noise_sigma, seed=table.seed
        )
    rng = np.random.default_rng(seed)
    values = {}
    for string in table.canonical_strings():
        draw = rng.normal(0.0, sigma)
        if string.is_identity:
            values[string] = 1.0
        else:
            values[string] = table.values[string] + draw
    combined = math.sqrt(table.noise_sigma**2 + sigma**2)
    seed_repr = seed if isinstance(seed, int) else None
    return ExpectationTable(table.n, values, noise_sigma=combined, seed=seed_repr)
