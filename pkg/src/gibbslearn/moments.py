"""Moment matrices of the state on the span of the perturbing operators.

Everything here is assembled from an expectation table alone.  The Gram
matrix of the perturbing strings is orthonormalized; in the resulting basis
the modular matrix, the commutator moment matrices, the quasi-symmetry
matrix W and its near-kernel are built exactly as the reconstruction
requires them.

Pauli products are structural: phases and base strings do not depend on the
data.  The assembler therefore precomputes integer index maps once per
(b, h_terms) pair, after which any number of (noisy) tables can be processed
with plain array gathers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np
import scipy.linalg

from .errors import GramDegenerate
from .pauli import PauliOperator, PauliString
from .states import ExpectationTable

DEFAULT_GRAM_FLOOR_REL = 1e-10
EPSILON_W_FLOOR = 1e-11
_KEY_SHIFT = 16

_PHASE_TABLE = np.array([1 + 0j, 1j, -1 + 0j, -1j])


def _popcount(arr):
    return np.bitwise_count(arr.astype(np.uint64)).astype(np.int64)


def _phase_exponents(x1, z1, x2, z2):
    """i-power of the product of two strings given as mask arrays (broadcasts)."""
    x3 = x1 ^ x2
    z3 = z1 ^ z2
    g = _popcount(x1 & z1) + _popcount(x2 & z2) - _popcount(x3 & z3) + 2 * _popcount(z1 & x2)
    return g % 4


@dataclass
class OrthoBasis:
    """Orthonormalizing coefficients against the state's Gram form.

    ``coeffs`` is the Hermitian inverse square root of the (symmetrized)
    Gram matrix G, so coeffs @ G @ coeffs^dag = I; the i-th orthonormal
    operator is the combination of the reference strings with the
    coefficients of the i-th column (equivalently the conjugated i-th row).
    """

    coeffs: np.ndarray
    gram_eigenvalues: np.ndarray  # sorted descending, all above the floor
    basis_ref: Optional[List[PauliString]] = None

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]


@dataclass
class MomentSet:
    """All Step-1/Step-2 matrices plus the thresholds used to build them."""

    delta: np.ndarray
    h_mats: np.ndarray  # (s, r, r), symmetrized
    raw_h_mats: np.ndarray  # (s, r, r), as measured
    w_matrix: np.ndarray
    w_spectrum: np.ndarray
    kernel_coeffs: np.ndarray  # (q, s) real rows
    h_tilde_mats: np.ndarray  # (q, r, r)
    h_tilde_expectations: np.ndarray  # (q,)
    h_expectations: np.ndarray  # (s,)
    epsilon_w: float

    @property
    def q(self) -> int:
        return self.kernel_coeffs.shape[0]


class MomentAssembler:
    """Structural index maps from (b, h_terms) for fast repeated assembly."""

    def __init__(self, b: Sequence[PauliString], h_terms: Sequence[PauliOperator]):
        if not b:
            raise ValueError("need at least one perturbing operator")
        self.n = b[0].n
        self.b = list(b)
        self.h_terms = list(h_terms)
        for op in self.h_terms:
            if not op.is_selfadjoint():
                raise ValueError("Hamiltonian terms must be selfadjoint")

        xb = np.array([p.x for p in self.b], dtype=np.uint64)
        zb = np.array([p.z for p in self.b], dtype=np.uint64)
        r = len(self.b)

        # flattened Hamiltonian term structure: u -> (alpha, string, coeff)
        alpha, xt, zt, ct = [], [], [], []
        for a, op in enumerate(self.h_terms):
            for string, coeff in op.terms.items():
                alpha.append(a)
                xt.append(string.x)
                zt.append(string.z)
                ct.append(coeff.real)
        self._alpha = np.array(alpha, dtype=np.int64)
        self._ct = np.array(ct, dtype=float)
        xt = np.array(xt, dtype=np.uint64)
        zt = np.array(zt, dtype=np.uint64)

        # pair products b_l b_k: base strings and phases (Gram and modular data)
        xlk = xb[:, None] ^ xb[None, :]
        zlk = zb[:, None] ^ zb[None, :]
        g_lk = _phase_exponents(xb[:, None], zb[:, None], xb[None, :], zb[None, :])
        pair_keys = (xlk << _KEY_SHIFT) | zlk

        # triple products b_l t_u b_k, laid out as (u, l, k): one base string
        # per triple, two bracketing orders with different phases
        x3 = (xt[None, :, None] ^ xb[:, None, None] ^ xb[None, None, :]).transpose(1, 0, 2)
        z3 = (zt[None, :, None] ^ zb[:, None, None] ^ zb[None, None, :]).transpose(1, 0, 2)
        # order b_l (t_u b_k): phase of t_u b_k first, then b_l times that
        g_uk = _phase_exponents(xt[:, None], zt[:, None], xb[None, :], zb[None, :])
        xuk = xt[:, None] ^ xb[None, :]
        zuk = zt[:, None] ^ zb[None, :]
        g1 = (
            g_uk[:, None, :]
            + _phase_exponents(
                xb[None, :, None], zb[None, :, None], xuk[:, None, :], zuk[:, None, :]
            )
        ) % 4
        # order (b_l b_k) t_u
        g2 = (
            g_lk[None, :, :]
            + _phase_exponents(
                xlk[None, :, :], zlk[None, :, :], xt[:, None, None], zt[:, None, None]
            )
        ) % 4
        triple_keys = (x3 << _KEY_SHIFT) | z3
        # commutator weight: omega(b_l [t, b_k]) = (phase_1 - phase_2) omega(base)
        comm_phase = _PHASE_TABLE[g1] - _PHASE_TABLE[g2]  # (u, l, k)

        term_keys = (xt << _KEY_SHIFT) | zt
        identity_key = np.zeros(1, dtype=np.uint64)

        all_keys = np.concatenate(
            [pair_keys.ravel(), triple_keys.ravel(), term_keys, identity_key]
        )
        self._keys = np.unique(all_keys)
        self._strings = [
            PauliString(self.n, int(k >> _KEY_SHIFT), int(k & ((1 << _KEY_SHIFT) - 1)))
            for k in self._keys
        ]
        self._pair_idx = np.searchsorted(self._keys, pair_keys)
        self._pair_phase = _PHASE_TABLE[g_lk]
        self._triple_idx = np.searchsorted(self._keys, triple_keys)  # (u, l, k)
        self._comm_phase = comm_phase
        self._term_idx = np.searchsorted(self._keys, term_keys)
        self._single_term_per_alpha = np.array_equal(
            self._alpha, np.arange(len(self.h_terms))
        )

        # structural count of nonzero commutator triples for the W threshold:
        # every (i, alpha, j) with [h_alpha, b_j] structurally nonzero
        anti = (_popcount(xt[:, None] & zb[None, :]) + _popcount(zt[:, None] & xb[None, :])) % 2
        pair_nonzero = np.zeros((len(self.h_terms), r), dtype=bool)
        np.logical_or.at(pair_nonzero, self._alpha, anti.astype(bool))
        self.commutator_term_count = int(r * pair_nonzero.sum())

    # -- data-dependent assembly ------------------------------------------

    def required_strings(self) -> Set[PauliString]:
        return set(self._strings)

    def _values(self, table: ExpectationTable) -> np.ndarray:
        out = np.empty(len(self._strings))
        for i, string in enumerate(self._strings):
            out[i] = table.value(string)
        return out

    def gram(self, table: ExpectationTable) -> np.ndarray:
        """G_ij = omega(b_i^* b_j), symmetrized to absorb noise asymmetry."""
        v = self._values(table)
        raw = self._pair_phase * v[self._pair_idx]
        return 0.5 * (raw + raw.conj().T)

    def h_expectations(self, table: ExpectationTable) -> np.ndarray:
        v = self._values(table)
        out = np.zeros(len(self.h_terms))
        np.add.at(out, self._alpha, self._ct * v[self._term_idx])
        return out

    def commutator_tensor(self, table: ExpectationTable) -> np.ndarray:
        """F[alpha, l, k] = omega(b_l^* [h_alpha, b_k])."""
        v = self._values(table)
        contrib = self._ct[:, None, None] * self._comm_phase * v[self._triple_idx]
        if self._single_term_per_alpha:
            return contrib
        out = np.zeros((len(self.h_terms), len(self.b), len(self.b)), dtype=complex)
        np.add.at(out, self._alpha, contrib)
        return out

    def moment_set(
        self,
        table: ExpectationTable,
        gram_floor: Optional[float] = None,
        epsilon_w_value: Optional[float] = None,
    ) -> Tuple[OrthoBasis, MomentSet]:
        """Run Steps 1 and 2 on a table; the threshold defaults to the noise formula."""
        if epsilon_w_value is None:
            epsilon_w_value = epsilon_w(table.noise_sigma, self.commutator_term_count)
        gram_sym = self.gram(table)
        f_stack = self.commutator_tensor(table)
        h_exps = self.h_expectations(table)
        return assemble_from_matrices(
            gram_sym,
            f_stack,
            h_exps,
            epsilon_w_value,
            gram_floor=gram_floor,
            basis=self.b,
        )


# -- standalone single-step operations ---------------------------------------


def gram_matrix(table: ExpectationTable, b: Sequence[PauliString]) -> np.ndarray:
    return MomentAssembler(b, []).gram(table)


def orthonormalize(
    gram: np.ndarray,
    gram_floor: Optional[float] = None,
    basis: Optional[Sequence[PauliString]] = None,
) -> OrthoBasis:
    """Hermitian inverse square root of the Gram matrix.

    Eigenvalues at or below the floor (relative to the largest by default)
    indicate a noise-corrupted or non-faithful Gram form and raise.
    """
    evals, evecs = scipy.linalg.eigh(gram)
    floor = DEFAULT_GRAM_FLOOR_REL * float(evals[-1]) if gram_floor is None else gram_floor
    if evals[0] <= floor:
        raise GramDegenerate(evals[evals <= floor].tolist(), floor)
    coeffs = (evecs * evals**-0.5) @ evecs.conj().T
    return OrthoBasis(
        coeffs=coeffs,
        gram_eigenvalues=evals[::-1].copy(),
        basis_ref=list(basis) if basis is not None else None,
    )


def build_delta(table: ExpectationTable, ortho: OrthoBasis) -> np.ndarray:
    """Modular moment matrix: expectations of reversed products, compressed."""
    if ortho.basis_ref is None:
        raise ValueError("orthonormal basis carries no string references")
    gram_sym = gram_matrix(table, ortho.basis_ref)
    return delta_from_gram(gram_sym, ortho.coeffs)


def delta_from_gram(
    gram_sym: np.ndarray,
    coeffs: np.ndarray,
    reversed_products: Optional[np.ndarray] = None,
) -> np.ndarray:
    # omega(a_j a_i^*) expands to (C^dag R^T C)_{ij} with R_{kl} = omega(b_k b_l^*);
    # for a self-adjoint string basis the reversed products are the Gram data
    # itself, so R defaults to the (symmetrized) Gram matrix.
    r_mat = gram_sym if reversed_products is None else reversed_products
    delta = coeffs.conj().T @ r_mat.T @ coeffs
    return 0.5 * (delta + delta.conj().T)


def build_h_matrix(
    table: ExpectationTable, ortho: OrthoBasis, h_term: PauliOperator
) -> Tuple[np.ndarray, np.ndarray]:
    """One commutator moment matrix: returns (raw, symmetrized)."""
    if ortho.basis_ref is None:
        raise ValueError("orthonormal basis carries no string references")
    f = MomentAssembler(ortho.basis_ref, [h_term]).commutator_tensor(table)[0]
    raw = ortho.coeffs.conj().T @ f @ ortho.coeffs
    return raw, 0.5 * (raw + raw.conj().T)


def build_w(raw_h_mats: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gram matrix of the anti-Hermitian defects of the raw moment matrices.

    The spectrum is that of the real part (Hamiltonian coefficients are
    real), with negative numerical dust clipped to zero.
    """
    raw = np.asarray(raw_h_mats)
    defects = raw - raw.conj().transpose(0, 2, 1)
    flat = defects.reshape(raw.shape[0], -1)
    w = flat.conj() @ flat.T
    spectrum = scipy.linalg.eigvalsh(0.5 * (w + w.conj()).real)
    scale = max(1.0, float(np.abs(spectrum).max())) if spectrum.size else 1.0
    spectrum = np.where((spectrum < 0) & (spectrum > -1e-12 * scale), 0.0, spectrum)
    return w, spectrum


def epsilon_w(sigma_noise: float, m: int) -> float:
    """Noise-calibrated eigenvalue threshold for the quasi-symmetry kernel."""
    if m < 0:
        raise ValueError("term count must be nonnegative")
    return 400.0 * max(sigma_noise**2 * math.sqrt(m), EPSILON_W_FLOOR)


def kernel_basis(
    w_matrix: np.ndarray,
    spectrum: np.ndarray,
    epsilon: float,
    h_expectations: np.ndarray,
    sym_h_mats: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Near-kernel of W: directions whose commutator moments are Hermitian.

    Eigenvectors of the real part of W with eigenvalue below the threshold;
    q = 0 means no candidate direction survives and the caller terminates
    with the corresponding verdict.
    """
    w_real = 0.5 * (w_matrix + w_matrix.conj()).real
    evals, evecs = scipy.linalg.eigh(w_real)
    q = int(np.count_nonzero(evals < epsilon))
    kernel_coeffs = evecs[:, :q].T.copy()
    h_tilde_mats = np.einsum("qs,sij->qij", kernel_coeffs, sym_h_mats)
    h_tilde_expectations = kernel_coeffs @ np.asarray(h_expectations)
    return kernel_coeffs, h_tilde_mats, h_tilde_expectations


def assemble_from_matrices(
    gram_sym: np.ndarray,
    f_stack: np.ndarray,
    h_expectations: np.ndarray,
    epsilon_w_value: float,
    gram_floor: Optional[float] = None,
    basis: Optional[Sequence[PauliString]] = None,
    reversed_products: Optional[np.ndarray] = None,
) -> Tuple[OrthoBasis, MomentSet]:
    """Matrix-level pipeline seam: Gram and commutator data already assembled.

    The reconstruction outcome depends only on the span of the perturbing
    operators, so callers may feed data transformed by any invertible
    recombination of the basis; a non-self-adjoint recombination must supply
    the reversed products omega(b_k b_l^*) separately.
    """
    ortho = orthonormalize(gram_sym, gram_floor=gram_floor, basis=basis)
    coeffs = ortho.coeffs
    delta = delta_from_gram(gram_sym, coeffs, reversed_products)
    raw = coeffs.conj().T[None, :, :] @ np.asarray(f_stack, dtype=complex) @ coeffs
    sym = 0.5 * (raw + raw.conj().transpose(0, 2, 1))
    w_matrix, w_spectrum = build_w(raw)
    kernel_coeffs, h_tilde_mats, h_tilde_exps = kernel_basis(
        w_matrix, w_spectrum, epsilon_w_value, h_expectations, sym
    )
    moment_set = MomentSet(
        delta=delta,
        h_mats=sym,
        raw_h_mats=raw,
        w_matrix=w_matrix,
        w_spectrum=w_spectrum,
        kernel_coeffs=kernel_coeffs,
        h_tilde_mats=h_tilde_mats,
        h_tilde_expectations=h_tilde_exps,
        h_expectations=np.asarray(h_expectations, dtype=float),
        epsilon_w=epsilon_w_value,
    )
    return ortho, moment_set


def write_spectra_csv(path, gram_eigenvalues, w_spectrum):
    """Diagnostic dump of both spectra for threshold tuning."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["matrix", "index", "eigenvalue"])
        for i, value in enumerate(gram_eigenvalues):
            writer.writerow(["gram", i, repr(float(value))])
        for i, value in enumerate(w_spectrum):
            writer.writerow(["w", i, repr(float(value))])
