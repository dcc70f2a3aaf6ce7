"""Hermitian sum-of-squares machinery.

A polynomial ``p`` in ``(z, z̄)`` is HSOS when ``p = Σ_k p_k conj(p_k)``.  This
is equivalent to ``p = v† Q v`` for a Hermitian PSD ``Q`` where ``v`` lists all
monomials in the joint variables ``(z, z̄)`` up to half the degree.  Symbolic
Grams are realified into real PSD blocks of a :class:`ConicProblem`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .conic import Backend, ConicProblem, Infeasible, PSDBlock, SolverError, solve
from .cpoly import CPolynomial, Key, conj_key, grlex, key_degree

# Monomial variable set used for Gram bases.  "joint" means monomials in both
# z and z̄; it is a fixed choice, not a tunable.
BASIS_VARIABLES = "joint"
PSD_REJECT_TOL = 1e-6
CONST = -1  # variable index used for constant parts of affine coefficients


class ConfigurationError(ValueError):
    """Degree bookkeeping or structural misuse (not an infeasibility)."""


class NotConjugateFlattening(ValueError):
    pass


# -- bases --------------------------------------------------------------------
@dataclass(frozen=True)
class MonomialBasis:
    n: int
    d: int
    keys: tuple[Key, ...]
    index: Mapping[Key, int] = field(compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self):
        return iter(self.keys)

    def __getitem__(self, i: int) -> Key:
        return self.keys[i]


_basis_cache: dict[tuple[int, int], MonomialBasis] = {}


def basis(n: int, d: int) -> MonomialBasis:
    """All monomials in ``(z_0..z_{n-1}, z̄_0..z̄_{n-1})`` of degree ≤ d, graded-lex."""
    if n < 1 or d < 0:
        raise ValueError("basis needs n >= 1 and d >= 0")
    cached = _basis_cache.get((n, d))
    if cached is not None:
        return cached
    nv = 2 * n
    keys = []
    for t in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(nv), t):
            e = [0] * nv
            for v in combo:
                e[v] += 1
            keys.append(tuple(e))
    keys.sort(key=grlex)
    out = MonomialBasis(n, d, tuple(keys), {k: i for i, k in enumerate(keys)})
    _basis_cache[(n, d)] = out
    return out


def charge(key: Key) -> int:
    """``|alpha| - |beta|``; a global phase ``e^{i t}`` scales the monomial by ``e^{i t charge}``."""
    n = len(key) // 2
    return sum(key[:n]) - sum(key[n:])


def sub_basis(b: MonomialBasis, keys: Iterable[Key]) -> MonomialBasis:
    keys = tuple(sorted(keys, key=grlex))
    return MonomialBasis(b.n, b.d, keys, {k: i for i, k in enumerate(keys)})


def _check_gram(Q: np.ndarray, b: MonomialBasis) -> np.ndarray:
    Q = np.asarray(Q, dtype=complex)
    if Q.shape != (len(b), len(b)):
        raise ValueError(f"Gram of shape {Q.shape} does not match basis of size {len(b)}")
    return Q


# -- numeric Gram <-> polynomial ------------------------------------------------
def gram_to_poly(Q: np.ndarray, b: MonomialBasis) -> CPolynomial:
    """``Σ_{j,k} Q_jk conj(v_j) v_k``."""
    Q = _check_gram(Q, b)
    terms: dict[Key, complex] = {}
    conj_keys = [conj_key(k) for k in b.keys]
    for j, k in zip(*np.nonzero(Q)):
        key = tuple(a + c for a, c in zip(conj_keys[j], b.keys[k]))
        terms[key] = terms.get(key, 0) + Q[j, k]
    return CPolynomial(b.n, terms)


def extract_decomposition(Q: np.ndarray, b: MonomialBasis) -> list[CPolynomial]:
    """Factors ``p_k`` with ``Σ p_k conj(p_k) = gram_to_poly(Q)``.

    Uses an eigendecomposition; eigenvalues in ``[-1e-6, 0)`` are clipped.
    Each factor is scaled so its leading (graded-lex first) coefficient is
    real and positive.
    """
    Q = _check_gram(Q, b)
    Q = 0.5 * (Q + Q.conj().T)
    if Q.size == 0 or not np.any(Q):
        return []
    lam, U = np.linalg.eigh(Q)
    if lam[0] < -PSD_REJECT_TOL:
        raise ValueError(f"Gram is not PSD (min eigenvalue {lam[0]:.3e})")
    cutoff = 1e-13 * max(1.0, float(lam[-1]))
    out = []
    for lk, u in zip(lam, U.T):
        if lk <= cutoff:
            continue
        coeffs = math.sqrt(lk) * u.conj()
        lead = next(c for c in coeffs if abs(c) > 1e-14)
        coeffs = coeffs * (abs(lead) / lead)
        out.append(CPolynomial(b.n, dict(zip(b.keys, coeffs))))
    return out


def realify(Q: np.ndarray) -> np.ndarray:
    """Real embedding ``[[Re Q, -Im Q], [Im Q, Re Q]]``."""
    Q = np.asarray(Q, dtype=complex)
    return np.block([[Q.real, -Q.imag], [Q.imag, Q.real]])


def project_psd(Q: np.ndarray) -> np.ndarray:
    lam, U = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    return (U * np.clip(lam, 0.0, None)) @ U.conj().T


# -- affine polynomials in decision variables -------------------------------------
Affine = dict  # var index (CONST for constant) -> complex coefficient


def _acc(target: dict, vec: Mapping[int, complex], c: complex = 1.0) -> None:
    for v, a in vec.items():
        target[v] = target.get(v, 0) + c * a


class AffinePoly:
    """Polynomial in ``(z, z̄)`` whose coefficients are affine in real variables."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[Key, Mapping[int, complex]] | None = None):
        self.n = n
        self.terms: dict[Key, dict[int, complex]] = {}
        for k, vec in (terms or {}).items():
            vec = {v: complex(c) for v, c in vec.items() if c != 0}
            if vec:
                self.terms[k] = vec

    @classmethod
    def from_poly(cls, p: CPolynomial) -> "AffinePoly":
        return cls(p.n, {k: {CONST: c} for k, c in p.items()})

    def copy(self) -> "AffinePoly":
        return AffinePoly(self.n, self.terms)

    def __iadd__(self, other: "AffinePoly") -> "AffinePoly":
        for k, vec in other.terms.items():
            _acc(self.terms.setdefault(k, {}), vec)
        return self

    def __add__(self, other: "AffinePoly") -> "AffinePoly":
        out = self.copy()
        out += other
        return out

    def scale(self, c: complex) -> "AffinePoly":
        return AffinePoly(self.n, {k: {v: c * a for v, a in vec.items()} for k, vec in self.terms.items()})

    def __neg__(self) -> "AffinePoly":
        return self.scale(-1.0)

    def __sub__(self, other: "AffinePoly") -> "AffinePoly":
        return self + (-other)

    def add_constant(self, c: complex) -> "AffinePoly":
        out = self.copy()
        zero = (0,) * (2 * self.n)
        _acc(out.terms.setdefault(zero, {}), {CONST: c})
        return out

    def mul_poly(self, p: CPolynomial) -> "AffinePoly":
        out: dict[Key, dict[int, complex]] = {}
        for k1, vec in self.terms.items():
            for k2, c in p.items():
                key = tuple(a + b for a, b in zip(k1, k2))
                _acc(out.setdefault(key, {}), vec, c)
        return AffinePoly(self.n, out)

    def compose_linear(self, U: np.ndarray, cache: dict | None = None) -> "AffinePoly":
        """Substitute ``z <- U z`` (and ``z̄ <- Ū z̄``) monomial by monomial."""
        cache = {} if cache is None else cache
        out: dict[Key, dict[int, complex]] = {}
        for key, vec in self.terms.items():
            image = cache.get(key)
            if image is None:
                image = CPolynomial(self.n, {key: 1.0}).compose_linear(U)
                cache[key] = image
            for k2, c in image.items():
                _acc(out.setdefault(k2, {}), vec, c)
        return AffinePoly(self.n, out)

    @property
    def degree(self) -> int:
        return max(
            (key_degree(k) for k, vec in self.terms.items() if any(abs(c) > 1e-12 for c in vec.values())),
            default=0,
        )

    def variables(self) -> set[int]:
        return {v for vec in self.terms.values() for v in vec if v != CONST}

    def value(self, x: np.ndarray) -> CPolynomial:
        terms = {}
        for k, vec in self.terms.items():
            terms[k] = sum(c * (1.0 if v == CONST else x[v]) for v, c in vec.items())
        return CPolynomial(self.n, terms)

    def symmetry_defect(self) -> float:
        """Largest ``|a_{conj(m)} - conj(a_m)|`` over monomials and variables."""
        worst = 0.0
        for k, vec in self.terms.items():
            other = self.terms.get(conj_key(k), {})
            for v in set(vec) | set(other):
                worst = max(worst, abs(other.get(v, 0) - np.conj(vec.get(v, 0))))
        return worst


# -- symbolic Grams and multipliers ----------------------------------------------
class HermitianGramVar:
    """Symbolic Hermitian Gram over a basis, realified into a PSD block.

    Diagonal entries use one real variable; each upper off-diagonal entry uses
    a pair ``(a, b)`` for ``a + i b``, with the lower entry its conjugate.
    """

    def __init__(self, problem: ConicProblem, b: MonomialBasis, label: str = "Q"):
        self.basis = b
        self.label = label
        m = len(b)
        self.diag = [problem.new_var(f"{label}.re[{j},{j}]") for j in range(m)]
        self.re: dict[tuple[int, int], int] = {}
        self.im: dict[tuple[int, int], int] = {}
        for j in range(m):
            for k in range(j + 1, m):
                self.re[j, k] = problem.new_var(f"{label}.re[{j},{k}]")
                self.im[j, k] = problem.new_var(f"{label}.im[{j},{k}]")
        problem.add_block(self._realified_block(label))

    @property
    def size(self) -> int:
        return len(self.basis)

    def a(self, j: int, k: int) -> int:
        return self.diag[j] if j == k else self.re[min(j, k), max(j, k)]

    def entry(self, j: int, k: int) -> dict[int, complex]:
        if j == k:
            return {self.diag[j]: 1.0}
        if j < k:
            return {self.re[j, k]: 1.0, self.im[j, k]: 1j}
        return {self.re[k, j]: 1.0, self.im[k, j]: -1j}

    def _realified_block(self, label: str) -> PSDBlock:
        m = self.size
        if m == 1:
            return PSDBlock(1, [(0, 0, self.diag[0], 1.0)], label)
        entries = []
        for r in range(m):
            for c in range(r, m):
                var = self.a(r, c)
                entries.append((r, c, var, 1.0))
                entries.append((r + m, c + m, var, 1.0))
        # upper-right block is -Im Q
        for r in range(m):
            for c in range(m):
                if r < c:
                    entries.append((r, c + m, self.im[r, c], -1.0))
                elif r > c:
                    entries.append((r, c + m, self.im[c, r], 1.0))
        return PSDBlock(2 * m, entries, label)

    def as_affine(self) -> AffinePoly:
        b = self.basis
        conj_keys = [conj_key(k) for k in b.keys]
        terms: dict[Key, dict[int, complex]] = {}
        for j in range(self.size):
            for k in range(self.size):
                key = tuple(x + y for x, y in zip(conj_keys[j], b.keys[k]))
                _acc(terms.setdefault(key, {}), self.entry(j, k))
        return AffinePoly(b.n, terms)

    def value(self, x: np.ndarray) -> np.ndarray:
        m = self.size
        Q = np.zeros((m, m), dtype=complex)
        for j in range(m):
            Q[j, j] = x[self.diag[j]]
        for (j, k), v in self.re.items():
            Q[j, k] = x[v] + 1j * x[self.im[j, k]]
            Q[k, j] = np.conj(Q[j, k])
        return Q


class GramVar:
    """Symbolic Gram over a basis, optionally block-diagonal by monomial charge.

    With ``split_charge`` only entries between basis monomials of equal charge
    are free; the result is then invariant under a global phase.
    """

    def __init__(self, problem: ConicProblem, b: MonomialBasis, label: str = "Q", split_charge: bool = False):
        self.basis = b
        if split_charge:
            groups: dict[int, list[Key]] = {}
            for key in b.keys:
                groups.setdefault(charge(key), []).append(key)
            self.parts = [
                (sub_basis(b, keys), HermitianGramVar(problem, sub_basis(b, keys), f"{label}#q{q}"))
                for q, keys in sorted(groups.items())
            ]
        else:
            self.parts = [(b, HermitianGramVar(problem, b, label))]

    def as_affine(self) -> AffinePoly:
        out = AffinePoly(self.basis.n)
        for _, g in self.parts:
            out += g.as_affine()
        return out

    def value(self, x: np.ndarray) -> np.ndarray:
        m = len(self.basis)
        Q = np.zeros((m, m), dtype=complex)
        for sb, g in self.parts:
            idx = [self.basis.index[k] for k in sb.keys]
            Q[np.ix_(idx, idx)] = g.value(x)
        return Q


def hsos_multiplier(problem: ConicProblem, n: int, degree: int, label: str,
                    split_charge: bool = False) -> tuple[AffinePoly, GramVar]:
    """Fresh HSOS polynomial of even degree ``degree`` (Gram over half degree)."""
    if degree < 0 or degree % 2:
        raise ConfigurationError(f"HSOS multiplier degree must be even and >= 0, got {degree}")
    gram = GramVar(problem, basis(n, degree // 2), label, split_charge)
    return gram.as_affine(), gram


def free_cf_poly(problem: ConicProblem, n: int, degree: int, label: str, balanced: bool = False) -> AffinePoly:
    """Fresh conjugate-flattening polynomial of degree ≤ ``degree``.

    Self-conjugate monomials get one real coefficient; every other pair
    ``{m, conj(m)}`` gets ``a + i b`` and ``a - i b``.  With ``balanced`` only
    charge-zero monomials are used.
    """
    terms: dict[Key, dict[int, complex]] = {}
    for key in basis(n, degree).keys:
        if balanced and charge(key):
            continue
        ck = conj_key(key)
        if key == ck:
            terms[key] = {problem.new_var(f"{label}{list(key)}"): 1.0}
        elif key < ck:
            a = problem.new_var(f"{label}.re{list(key)}")
            b = problem.new_var(f"{label}.im{list(key)}")
            terms[key] = {a: 1.0, b: 1j}
            terms[ck] = {a: 1.0, b: -1j}
    return AffinePoly(n, terms)


def match_coefficients(problem: ConicProblem, expr: AffinePoly, slack_basis: MonomialBasis,
                       label: str = "expr", split_charge: bool = False) -> GramVar:
    """Require ``expr == v† Q v`` for a fresh PSD slack ``Q`` over ``slack_basis``.

    For each monomial pair ``{m, conj(m)}`` one complex equation is emitted
    (real and imaginary rows); self-conjugate monomials contribute only the
    real row since both sides are real there by construction.
    """
    deg = expr.degree
    if deg > 2 * slack_basis.d:
        raise ConfigurationError(
            f"{label}: expression degree {deg} exceeds twice the slack basis degree {slack_basis.d}"
        )
    defect = expr.symmetry_defect()
    if defect > 1e-9:
        raise NotConjugateFlattening(f"{label}: expression is not conjugate-flattening (defect {defect:.2e})")
    gram = GramVar(problem, slack_basis, f"{label}.slack", split_charge)
    diff = expr - gram.as_affine()
    for key in sorted(diff.terms, key=grlex):
        ck = conj_key(key)
        if ck < key:
            continue
        vec = diff.terms[key]
        rhs = -vec.get(CONST, 0)
        re_row = {v: c.real for v, c in vec.items() if v != CONST and c.real != 0}
        problem.add_equality(re_row, rhs.real, f"{label}:re{list(key)}")
        if ck != key:
            im_row = {v: c.imag for v, c in vec.items() if v != CONST and c.imag != 0}
            problem.add_equality(im_row, rhs.imag, f"{label}:im{list(key)}")
    return gram


def hsos_check(p: CPolynomial, d: int, backend: Backend | None = None) -> np.ndarray | None:
    """PSD Gram ``Q`` over ``basis(n, d)`` with ``gram_to_poly(Q) == p``, or None.

    Raises :class:`NotConjugateFlattening` before solving on non-real inputs and
    :class:`~qbarrier.conic.SolverError` on numerical trouble.
    """
    if not p.is_conjugate_flattening(1e-10):
        raise NotConjugateFlattening("hsos_check needs a conjugate-flattening polynomial")
    if p.degree > 2 * d:
        raise ConfigurationError(f"degree {p.degree} exceeds 2*d = {2 * d}")
    problem = ConicProblem()
    b = basis(p.n, d)
    gram = match_coefficients(problem, AffinePoly.from_poly(p), b, "p")
    try:
        res = solve(problem, backend)
    except Infeasible:
        return None
    Q = project_psd(gram.value(res.x))
    err = gram_to_poly(Q, b).max_abs_diff(p)
    if err > 1e-7:
        raise SolverError(f"Gram returned by the solver reproduces p only to {err:.2e}")
    return Q


def affine_sum(polys: Iterable[AffinePoly], n: int) -> AffinePoly:
    out = AffinePoly(n)
    for p in polys:
        out += p
    return out
