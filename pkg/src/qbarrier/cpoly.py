"""Sparse polynomials in complex variables and their conjugates.

A polynomial in ``n`` complex variables is stored as a map from monomial keys
to complex coefficients.  A key is a flat tuple of ``2n`` non-negative ints:
the first ``n`` entries are the exponents of ``z_0..z_{n-1}`` (``alpha``), the
last ``n`` those of ``conj(z_0)..conj(z_{n-1})`` (``beta``).

Real-valued ("conjugate-flattening") polynomials are exactly those whose
coefficients satisfy ``c[beta, alpha] == conj(c[alpha, beta])``.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

Key = tuple[int, ...]

ZERO_TOL = 1e-12


def make_key(alpha: Sequence[int], beta: Sequence[int]) -> Key:
    if len(alpha) != len(beta):
        raise ValueError("alpha and beta must have the same length")
    if any(e < 0 for e in alpha) or any(e < 0 for e in beta):
        raise ValueError("exponents must be non-negative")
    return tuple(int(e) for e in alpha) + tuple(int(e) for e in beta)


def split_key(key: Key) -> tuple[Key, Key]:
    n = len(key) // 2
    return key[:n], key[n:]


def conj_key(key: Key) -> Key:
    n = len(key) // 2
    return key[n:] + key[:n]


def key_degree(key: Key) -> int:
    return sum(key)


def grlex(key: Key) -> tuple:
    """Sort key: ascending total degree, then lexicographically descending."""
    return (sum(key), tuple(-e for e in key))


def _mul_keys(a: Key, b: Key) -> Key:
    return tuple(x + y for x, y in zip(a, b))


class CPolynomial:
    """Immutable sparse polynomial over ``z`` and ``conj(z)``."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Key, complex] | None = None):
        if n < 1:
            raise ValueError("a polynomial needs at least one variable")
        self.n = int(n)
        clean: dict[Key, complex] = {}
        for key, c in (terms or {}).items():
            key = tuple(int(e) for e in key)
            if len(key) != 2 * self.n:
                raise ValueError(f"monomial key {key} does not match dimension {n}")
            if any(e < 0 for e in key):
                raise ValueError(f"negative exponent in {key}")
            c = complex(c)
            if abs(c) >= ZERO_TOL:
                clean[key] = c
        self._terms = clean

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "CPolynomial":
        return cls(n)

    @classmethod
    def constant(cls, n: int, c: complex) -> "CPolynomial":
        return cls(n, {(0,) * (2 * n): c})

    @classmethod
    def z(cls, n: int, j: int) -> "CPolynomial":
        """The coordinate ``z_j``."""
        if not 0 <= j < n:
            raise IndexError(f"variable index {j} out of range for n={n}")
        key = [0] * (2 * n)
        key[j] = 1
        return cls(n, {tuple(key): 1.0})

    @classmethod
    def zbar(cls, n: int, j: int) -> "CPolynomial":
        """The conjugate coordinate ``conj(z_j)``."""
        if not 0 <= j < n:
            raise IndexError(f"variable index {j} out of range for n={n}")
        key = [0] * (2 * n)
        key[n + j] = 1
        return cls(n, {tuple(key): 1.0})

    @classmethod
    def modulus_squared(cls, n: int, j: int) -> "CPolynomial":
        """``|z_j|^2 = z_j conj(z_j)``."""
        return cls.z(n, j) * cls.zbar(n, j)

    # -- accessors ---------------------------------------------------------
    @property
    def terms(self) -> Mapping[Key, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def keys(self):
        return self._terms.keys()

    def coefficient(self, key: Key) -> complex:
        return self._terms.get(tuple(key), 0j)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self._terms), default=0)

    def sorted_items(self) -> list[tuple[Key, complex]]:
        return sorted(self._terms.items(), key=lambda kv: grlex(kv[0]))

    # -- algebra -----------------------------------------------------------
    def _check(self, other: "CPolynomial") -> None:
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            other = CPolynomial.constant(self.n, other)
        if not isinstance(other, CPolynomial):
            return NotImplemented
        self._check(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0j) + c
        return CPolynomial(self.n, out)

    __radd__ = __add__

    def __neg__(self) -> "CPolynomial":
        return CPolynomial(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            other = CPolynomial.constant(self.n, other)
        if not isinstance(other, CPolynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        if not isinstance(other, CPolynomial):
            return NotImplemented
        self._check(other)
        out: dict[Key, complex] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                k = _mul_keys(ka, kb)
                out[k] = out.get(k, 0j) + ca * cb
        return CPolynomial(self.n, out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, e: int) -> "CPolynomial":
        if e < 0:
            raise ValueError("negative powers are not polynomials")
        out = CPolynomial.constant(self.n, 1.0)
        for _ in range(e):
            out = out * self
        return out

    def scale(self, c: complex) -> "CPolynomial":
        c = complex(c)
        return CPolynomial(self.n, {k: c * v for k, v in self._terms.items()})

    def conjugate(self) -> "CPolynomial":
        return CPolynomial(
            self.n, {conj_key(k): c.conjugate() for k, c in self._terms.items()}
        )

    def is_conjugate_flattening(self, tol: float = ZERO_TOL) -> bool:
        for k, c in self._terms.items():
            partner = self._terms.get(conj_key(k), 0j)
            if abs(partner - c.conjugate()) > tol * max(1.0, abs(c)):
                return False
        return True

    def hermitian_part(self) -> "CPolynomial":
        """Closest conjugate-flattening polynomial, ``(p + conj(p)) / 2``."""
        return (self + self.conjugate()).scale(0.5)

    # -- evaluation --------------------------------------------------------
    def evaluate(self, w: Sequence[complex]) -> complex:
        w = np.asarray(w, dtype=complex).ravel()
        if w.shape[0] != self.n:
            raise ValueError(f"point has length {w.shape[0]}, expected {self.n}")
        wc = w.conj()
        total = 0j
        for k, c in self._terms.items():
            term = c
            for j in range(self.n):
                a, b = k[j], k[self.n + j]
                if a:
                    term *= w[j] ** a
                if b:
                    term *= wc[j] ** b
            total += term
        return complex(total)

    __call__ = evaluate

    def compile(self) -> "CompiledPolynomial":
        return CompiledPolynomial(self)

    def evaluate_many(self, W: np.ndarray) -> np.ndarray:
        return self.compile()(W)

    def compose_linear(self, U: np.ndarray) -> "CPolynomial":
        """Substitute ``z <- U z`` (and therefore ``conj(z) <- conj(U) conj(z)``)."""
        U = np.asarray(U, dtype=complex)
        n = self.n
        if U.shape != (n, n):
            raise ValueError(f"matrix shape {U.shape} does not match dimension {n}")
        rows = [_linear_form(n, U[j], conj=False) for j in range(n)]
        crows = [_linear_form(n, U[j].conj(), conj=True) for j in range(n)]
        powers: dict[tuple[int, int], CPolynomial] = {}

        def power(j: int, e: int, conj: bool) -> CPolynomial:
            slot = (j + (n if conj else 0), e)
            if slot not in powers:
                base = crows[j] if conj else rows[j]
                powers[slot] = base if e == 1 else power(j, e - 1, conj) * base
            return powers[slot]

        acc: dict[Key, complex] = {}
        for k, c in self._terms.items():
            term = CPolynomial.constant(n, c)
            for j in range(n):
                if k[j]:
                    term = term * power(j, k[j], False)
                if k[n + j]:
                    term = term * power(j, k[n + j], True)
            for kk, cc in term._terms.items():
                acc[kk] = acc.get(kk, 0j) + cc
        return CPolynomial(n, acc)

    # -- comparison / display ---------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, CPolynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def max_abs_diff(self, other: "CPolynomial") -> float:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return max(
            (abs(self.coefficient(k) - other.coefficient(k)) for k in keys),
            default=0.0,
        )

    def allclose(self, other: "CPolynomial", tol: float = 1e-10) -> bool:
        return self.max_abs_diff(other) <= tol

    def __repr__(self) -> str:
        return f"CPolynomial(n={self.n}, {self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for k, c in self.sorted_items():
            coeff = _format_coeff(c)
            mono = _format_monomial(k)
            if not mono:
                parts.append(coeff)
            elif coeff == "1":
                parts.append(mono)
            elif coeff == "-1":
                parts.append("-" + mono)
            else:
                parts.append(f"{coeff}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- serialization -----------------------------------------------------
    def to_records(self) -> list[dict]:
        out = []
        for k, c in self.sorted_items():
            alpha, beta = split_key(k)
            out.append({"alpha": list(alpha), "beta": list(beta), "coeff": [c.real, c.imag]})
        return out

    @classmethod
    def from_records(cls, n: int, records: Iterable[Mapping]) -> "CPolynomial":
        terms: dict[Key, complex] = {}
        for rec in records:
            key = make_key(rec["alpha"], rec["beta"])
            if len(key) != 2 * n:
                raise ValueError(f"term {rec} does not match dimension {n}")
            coeff = rec["coeff"]
            c = complex(coeff[0], coeff[1]) if isinstance(coeff, (list, tuple)) else complex(coeff)
            terms[key] = terms.get(key, 0j) + c
        return cls(n, terms)


class CompiledPolynomial:
    """Vectorised evaluator for many points at once."""

    def __init__(self, p: CPolynomial):
        self.n = p.n
        items = p.sorted_items()
        self.exps = np.array([k for k, _ in items], dtype=int).reshape(len(items), 2 * p.n)
        self.coeffs = np.array([c for _, c in items], dtype=complex)

    def __call__(self, W: np.ndarray) -> np.ndarray:
        W = np.atleast_2d(np.asarray(W, dtype=complex))
        if W.shape[1] != self.n:
            raise ValueError(f"points have dimension {W.shape[1]}, expected {self.n}")
        if not len(self.coeffs):
            return np.zeros(W.shape[0], dtype=complex)
        full = np.concatenate([W, W.conj()], axis=1)
        out = np.zeros(W.shape[0], dtype=complex)
        for e, c in zip(self.exps, self.coeffs):
            term = np.full(W.shape[0], c, dtype=complex)
            for v in np.nonzero(e)[0]:
                term *= full[:, v] ** e[v]
            out += term
        return out


def _linear_form(n: int, row: np.ndarray, conj: bool) -> CPolynomial:
    terms = {}
    for k, c in enumerate(row):
        key = [0] * (2 * n)
        key[k + (n if conj else 0)] = 1
        terms[tuple(key)] = c
    return CPolynomial(n, terms)


def _format_coeff(c: complex) -> str:
    def num(x: float) -> str:
        return f"{x:.6g}"

    if abs(c.imag) < ZERO_TOL:
        return num(c.real)
    if abs(c.real) < ZERO_TOL:
        return f"{num(c.imag)}j"
    return f"({num(c.real)}{c.imag:+.6g}j)"


def _format_monomial(key: Key) -> str:
    n = len(key) // 2
    factors = []
    for j in range(n):
        if key[j]:
            factors.append(f"z{j}" + (f"^{key[j]}" if key[j] > 1 else ""))
    for j in range(n):
        if key[n + j]:
            factors.append(f"conj(z{j})" + (f"^{key[n + j]}" if key[n + j] > 1 else ""))
    return "*".join(factors)


# Functional aliases mirroring the operator set.
def conjugate(p: CPolynomial) -> CPolynomial:
    return p.conjugate()


def is_conjugate_flattening(p: CPolynomial, tol: float = ZERO_TOL) -> bool:
    return p.is_conjugate_flattening(tol)


def evaluate(p: CPolynomial, w: Sequence[complex]) -> complex:
    return p.evaluate(w)


def compose_linear(p: CPolynomial, U: np.ndarray) -> CPolynomial:
    return p.compose_linear(U)


def add(p: CPolynomial, q: CPolynomial) -> CPolynomial:
    return p + q


def mul(p: CPolynomial, q: CPolynomial) -> CPolynomial:
    return p * q


def scale(p: CPolynomial, c: complex) -> CPolynomial:
    return p.scale(c)
