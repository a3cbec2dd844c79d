"""Exact algebra of n-qubit Pauli strings and sparse operators.

Strings are stored as a pair of bitmasks (x, z); site k corresponds to bit k.
The letter at a site is determined by the bit pair: (0,0) identity, (1,0) X,
(1,1) Y, (0,1) Z, with the self-adjoint convention Y = i * X * Z.  All phases
produced by products are exact fourth roots of unity, tracked as integer
powers of i, never as floats.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Tuple

import numpy as np

from .errors import DenseLimitExceeded, DimensionMismatch

PHASES = (1 + 0j, 1j, -1 + 0j, -1j)

_LETTER_TO_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_LETTER = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}

DEFAULT_DENSE_LIMIT = 12
_DENSE_LIMIT_ENV = "GIBBSLEARN_DENSE_LIMIT"


def dense_limit() -> int:
    """Current site limit for dense 2^n x 2^n constructions."""
    value = os.environ.get(_DENSE_LIMIT_ENV)
    return int(value) if value else DEFAULT_DENSE_LIMIT


def _check_dense(n: int):
    limit = dense_limit()
    if n > limit:
        raise DenseLimitExceeded(
            f"dense representation requested for n={n} sites, limit is {limit} "
            f"(override with {_DENSE_LIMIT_ENV})"
        )


@dataclass(frozen=True)
class PauliString:
    """A single n-site Pauli string, self-adjoint and squaring to identity."""

    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError(f"site count must be positive, got {self.n}")
        mask = (1 << self.n) - 1
        if (self.x | self.z) & ~mask:
            raise ValueError("site indices out of range")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def from_letters(cls, n: int, letters: Mapping[int, str]) -> "PauliString":
        x = z = 0
        for site, letter in letters.items():
            if not 0 <= site < n:
                raise ValueError(f"site {site} outside [0, {n})")
            try:
                bx, bz = _LETTER_TO_BITS[letter]
            except KeyError:
                raise ValueError(f"unknown Pauli letter {letter!r}") from None
            x |= bx << site
            z |= bz << site
        return cls(n, x, z)

    @classmethod
    def from_text(cls, text: str, n: int) -> "PauliString":
        """Parse the textual format, e.g. "X0 X1", "Z4" or "I"."""
        text = text.strip()
        if text in ("", "I"):
            return cls.identity(n)
        letters = {}
        for token in text.split():
            letter, site = token[0], token[1:]
            if letter not in _LETTER_TO_BITS or not site.isdigit():
                raise ValueError(f"cannot parse Pauli token {token!r}")
            site = int(site)
            if site in letters:
                raise ValueError(f"site {site} listed twice in {text!r}")
            letters[site] = letter
        return cls.from_letters(n, letters)

    @property
    def letters(self) -> Dict[int, str]:
        out = {}
        occupied = self.x | self.z
        site = 0
        while occupied >> site:
            if (occupied >> site) & 1:
                bits = ((self.x >> site) & 1, (self.z >> site) & 1)
                out[site] = _BITS_TO_LETTER[bits]
            site += 1
        return out

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(sorted(self.letters))

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def commutes_with(self, other: "PauliString") -> bool:
        _require_same_n(self, other)
        return ((self.x & other.z).bit_count() + (self.z & other.x).bit_count()) % 2 == 0

    def sort_key(self):
        """Canonical order: identity first, then (leftmost site, width, letters)."""
        if self.is_identity:
            return (0, 0, 0, ())
        sites = self.support
        first, last = sites[0], sites[-1]
        window = tuple(self.letters.get(s, "I") for s in range(first, last + 1))
        return (1, first, last - first + 1, window)

    def to_text(self) -> str:
        if self.is_identity:
            return "I"
        return " ".join(f"{letter}{site}" for site, letter in sorted(self.letters.items()))

    def __repr__(self):
        return f"PauliString({self.n}, '{self.to_text()}')"


def _require_same_n(a, b):
    if a.n != b.n:
        raise DimensionMismatch(f"operands act on {a.n} and {b.n} sites")


def phase_exponent(p: PauliString, q: PauliString) -> int:
    """Integer g with p*q = i^g * (canonical string of the product)."""
    x3 = p.x ^ q.x
    z3 = p.z ^ q.z
    g = (
        (p.x & p.z).bit_count()
        + (q.x & q.z).bit_count()
        - (x3 & z3).bit_count()
        + 2 * (p.z & q.x).bit_count()
    )
    return g % 4


def multiply(p: PauliString, q: PauliString) -> Tuple[PauliString, complex]:
    """Product of two strings: p*q = phase * r with phase in {1, i, -1, -i}."""
    _require_same_n(p, q)
    r = PauliString(p.n, p.x ^ q.x, p.z ^ q.z)
    return r, PHASES[phase_exponent(p, q)]


class PauliOperator:
    """A sparse complex linear combination of Pauli strings.

    Stored in canonical form: no coefficient is exactly zero.  Immutable by
    convention; all arithmetic returns new instances.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[PauliString, complex] | None = None):
        self.n = n
        clean: Dict[PauliString, complex] = {}
        if terms:
            for string, coeff in terms.items():
                if string.n != n:
                    raise DimensionMismatch(
                        f"term on {string.n} sites in an operator on {n} sites"
                    )
                coeff = complex(coeff)
                if coeff != 0:
                    clean[string] = clean.get(string, 0) + coeff
                    if clean[string] == 0:
                        del clean[string]
        self.terms = clean

    @classmethod
    def zero(cls, n: int) -> "PauliOperator":
        return cls(n)

    @classmethod
    def from_string(cls, string: PauliString, coeff: complex = 1.0) -> "PauliOperator":
        return cls(string.n, {string: coeff})

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[Tuple[complex, str]]) -> "PauliOperator":
        """Build from (coefficient, text) pairs, e.g. [(-1.0, "X0 X1")]."""
        acc: Dict[PauliString, complex] = {}
        for coeff, text in terms:
            string = PauliString.from_text(text, n)
            acc[string] = acc.get(string, 0) + complex(coeff)
        return cls(n, acc)

    def __add__(self, other: "PauliOperator") -> "PauliOperator":
        _require_same_n(self, other)
        acc = dict(self.terms)
        for string, coeff in other.terms.items():
            acc[string] = acc.get(string, 0) + coeff
        return PauliOperator(self.n, acc)

    def __sub__(self, other: "PauliOperator") -> "PauliOperator":
        return self + (-1.0) * other

    def __neg__(self) -> "PauliOperator":
        return (-1.0) * self

    def __rmul__(self, scalar: complex) -> "PauliOperator":
        return PauliOperator(self.n, {s: scalar * c for s, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.__rmul__(other)
        return NotImplemented

    def __matmul__(self, other: "PauliOperator") -> "PauliOperator":
        """Operator product, expanded term by term with exact phases."""
        _require_same_n(self, other)
        acc: Dict[PauliString, complex] = {}
        for p, cp in self.terms.items():
            for q, cq in other.terms.items():
                r = PauliString(self.n, p.x ^ q.x, p.z ^ q.z)
                coeff = cp * cq * PHASES[phase_exponent(p, q)]
                acc[r] = acc.get(r, 0) + coeff
        return PauliOperator(self.n, acc)

    def adjoint(self) -> "PauliOperator":
        return PauliOperator(self.n, {s: c.conjugate() for s, c in self.terms.items()})

    def is_selfadjoint(self, tol: float = 0.0) -> bool:
        return all(abs(c.imag) <= tol for c in self.terms.values())

    def coefficient(self, string: PauliString) -> complex:
        return self.terms.get(string, 0j)

    def strings(self) -> List[PauliString]:
        return sorted(self.terms, key=PauliString.sort_key)

    def to_text(self) -> str:
        parts = []
        for string in self.strings():
            c = self.terms[string]
            c_repr = repr(c.real) if c.imag == 0 else repr(c)
            parts.append(f"{c_repr} {string.to_text()}")
        return "; ".join(parts) if parts else "0"

    def __repr__(self):
        return f"PauliOperator({self.n}, {self.to_text()!r})"

    def __eq__(self, other):
        return (
            isinstance(other, PauliOperator)
            and self.n == other.n
            and self.terms == other.terms
        )


def commutator(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    """ab - ba in canonical sparse form; exact zero when all terms commute."""
    _require_same_n(a, b)
    acc: Dict[PauliString, complex] = {}
    for p, cp in a.terms.items():
        for q, cq in b.terms.items():
            if p.commutes_with(q):
                continue
            # pq and qp share the base string; anticommuting means qp = -pq,
            # so [p, q] = 2 * phase(p, q) * base.
            r = PauliString(a.n, p.x ^ q.x, p.z ^ q.z)
            coeff = 2 * cp * cq * PHASES[phase_exponent(p, q)]
            acc[r] = acc.get(r, 0) + coeff
    return PauliOperator(a.n, acc)


def enumerate_geometric_k_local(
    n: int, k: int, include_identity: bool = False
) -> List[PauliString]:
    """All non-identity strings supported on a contiguous window of <= k sites.

    Deterministic canonical order; the identity is excluded unless
    ``include_identity`` is set (it contributes nothing to commutators but
    matters for operator counts that include it).
    """
    if not 1 <= k <= n:
        raise ValueError(f"locality k={k} must satisfy 1 <= k <= n={n}")
    out = []
    letters_nontrivial = ("X", "Y", "Z")
    letters_all = ("I", "X", "Y", "Z")
    for width in range(1, k + 1):
        for first in range(n - width + 1):
            if width == 1:
                for letter in letters_nontrivial:
                    out.append(PauliString.from_letters(n, {first: letter}))
                continue
            interior = range(first + 1, first + width - 1)
            for left in letters_nontrivial:
                for mid in itertools.product(letters_all, repeat=len(interior)):
                    for right in letters_nontrivial:
                        assignment = {first: left, first + width - 1: right}
                        for site, letter in zip(interior, mid):
                            if letter != "I":
                                assignment[site] = letter
                        out.append(PauliString.from_letters(n, assignment))
    out.sort(key=PauliString.sort_key)
    if include_identity:
        out.insert(0, PauliString.identity(n))
    return out


# --- dense bridge ---------------------------------------------------------

def _index_masks(string: PauliString) -> Tuple[int, int]:
    """Translate site bitmasks to computational-basis index bitmasks.

    Site 0 is the first tensor factor, i.e. the most significant index bit.
    """
    n = string.n
    xi = zi = 0
    for site in range(n):
        bit = n - 1 - site
        xi |= ((string.x >> site) & 1) << bit
        zi |= ((string.z >> site) & 1) << bit
    return xi, zi


def string_dense(string: PauliString) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a single string."""
    _check_dense(string.n)
    dim = 1 << string.n
    xi, zi = _index_masks(string)
    cols = np.arange(dim)
    signs = 1 - 2 * (np.bitwise_count(cols & zi).astype(np.int64) & 1)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[cols ^ xi, cols] = PHASES[(string.x & string.z).bit_count() % 4] * signs
    return mat


def dense_matrix(op: PauliOperator, limit: int | None = None) -> np.ndarray:
    """Dense matrix of a sparse operator; Hermitian when the operator is selfadjoint."""
    if limit is not None and op.n > limit:
        raise DenseLimitExceeded(f"n={op.n} exceeds caller limit {limit}")
    _check_dense(op.n)
    dim = 1 << op.n
    out = np.zeros((dim, dim), dtype=complex)
    for string, coeff in op.terms.items():
        out += coeff * string_dense(string)
    return out


def dense_to_operator(matrix: np.ndarray, n: int, tol: float = 1e-12) -> PauliOperator:
    """Expand a dense matrix in the Pauli basis, dropping coefficients below tol."""
    _check_dense(n)
    terms = {}
    for string in all_strings(n):
        coeff = np.trace(string_dense(string) @ matrix) / (1 << n)
        if abs(coeff) > tol:
            terms[string] = coeff
    return PauliOperator(n, terms)


def all_strings(n: int, include_identity: bool = True) -> List[PauliString]:
    """All 4^n strings (or 4^n - 1 traceless ones) in canonical order."""
    out = [
        PauliString(n, x, z)
        for x in range(1 << n)
        for z in range(1 << n)
        if include_identity or x or z
    ]
    out.sort(key=PauliString.sort_key)
    return out
