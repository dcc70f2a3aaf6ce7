"""Real expansion of conjugate-flattening polynomials and interval bounds.

Complex variables are split as ``z_j = x_j + i y_j``; a real polynomial over
``(x_0..x_{N-1}, y_0..y_{N-1})`` is stored as an exponent matrix and a
coefficient vector.  Interval evaluation is vectorised over batches of boxes.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from .cpoly import CPolynomial

IMAG_RESIDUE_TOL = 1e-9


class RealPoly:
    __slots__ = ("nvars", "exps", "coeffs")

    def __init__(self, nvars: int, terms: dict[tuple[int, ...], float]):
        self.nvars = nvars
        items = [(k, float(c)) for k, c in sorted(terms.items()) if c != 0.0]
        self.exps = np.array([k for k, _ in items], dtype=np.int64).reshape(len(items), nvars)
        self.coeffs = np.array([c for _, c in items], dtype=float)

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if len(self) else 0

    def terms(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(e) for e in row): float(c) for row, c in zip(self.exps, self.coeffs)}

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for row, c in zip(self.exps, self.coeffs):
            term = np.full(X.shape[0], c)
            for v in np.nonzero(row)[0]:
                term = term * X[:, v] ** row[v]
            out += term
        return out

    def derivative(self, v: int) -> "RealPoly":
        terms: dict[tuple[int, ...], float] = {}
        for row, c in zip(self.exps, self.coeffs):
            e = int(row[v])
            if e:
                k = list(int(x) for x in row)
                k[v] -= 1
                terms[tuple(k)] = terms.get(tuple(k), 0.0) + c * e
        return RealPoly(self.nvars, terms)

    def is_zero(self) -> bool:
        return len(self) == 0


@lru_cache(maxsize=None)
def _pair_expansion(a: int, b: int) -> tuple[tuple[int, int, complex], ...]:
    """``(x + i y)^a (x - i y)^b`` as ``(deg_x, deg_y, coeff)`` triples."""
    out: dict[tuple[int, int], complex] = {}
    for p in range(a + 1):
        for q in range(b + 1):
            c = comb(a, p) * comb(b, q) * (1j) ** (a - p) * (-1j) ** (b - q)
            key = (p + q, a + b - p - q)
            out[key] = out.get(key, 0) + c
    return tuple((dx, dy, c) for (dx, dy), c in out.items() if c != 0)


def to_real(p: CPolynomial) -> RealPoly:
    """Expand ``p(x + i y)`` into real arithmetic.

    Raises ``ValueError`` if an imaginary residue larger than
    ``IMAG_RESIDUE_TOL`` (relative) survives, i.e. ``p`` is not real-valued.
    """
    N = p.n
    acc: dict[tuple[int, ...], complex] = {}
    for key, c in p.items():
        partial: dict[tuple[int, ...], complex] = {(0,) * (2 * N): c}
        for j in range(N):
            a, b = key[j], key[N + j]
            if a == 0 and b == 0:
                continue
            nxt: dict[tuple[int, ...], complex] = {}
            for e, cc in partial.items():
                for dx, dy, f in _pair_expansion(a, b):
                    k = list(e)
                    k[j] += dx
                    k[N + j] += dy
                    k = tuple(k)
                    nxt[k] = nxt.get(k, 0) + cc * f
            partial = nxt
        for e, cc in partial.items():
            acc[e] = acc.get(e, 0) + cc
    scale = max((abs(c) for c in acc.values()), default=0.0)
    worst = max((abs(c.imag) for c in acc.values()), default=0.0)
    if worst > IMAG_RESIDUE_TOL * max(1.0, scale):
        raise ValueError(f"polynomial is not real-valued (imaginary residue {worst:.2e})")
    return RealPoly(2 * N, {e: c.real for e, c in acc.items() if abs(c.real) > 1e-15 * max(1.0, scale)})


def complex_to_real_points(W: np.ndarray) -> np.ndarray:
    W = np.atleast_2d(W)
    return np.concatenate([W.real, W.imag], axis=1)


def real_to_complex_points(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    N = X.shape[1] // 2
    return X[:, :N] + 1j * X[:, N:]


# -- interval arithmetic ------------------------------------------------------------
def _pad(lo, hi, eps):
    return lo - eps * (1.0 + np.abs(lo)), hi + eps * (1.0 + np.abs(hi))


def interval_power(lo: np.ndarray, hi: np.ndarray, e: int) -> tuple[np.ndarray, np.ndarray]:
    if e == 0:
        return np.ones_like(lo), np.ones_like(hi)
    a, b = lo**e, hi**e
    if e % 2:
        return a, b
    top = np.maximum(a, b)
    bottom = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(a, b))
    return bottom, top


def interval_mul(a_lo, a_hi, b_lo, b_hi):
    c = np.stack([a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi])
    return c.min(axis=0), c.max(axis=0)


def interval_eval(p: RealPoly, lo: np.ndarray, hi: np.ndarray, eps: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Natural interval extension of ``p`` over boxes ``[lo, hi]`` (shape B x D)."""
    B = lo.shape[0]
    out_lo = np.zeros(B)
    out_hi = np.zeros(B)
    if p.is_zero():
        return out_lo, out_hi
    powers: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for row, c in zip(p.exps, p.coeffs):
        m_lo = np.full(B, c)
        m_hi = np.full(B, c)
        for v in np.nonzero(row)[0]:
            key = (int(v), int(row[v]))
            if key not in powers:
                powers[key] = interval_power(lo[:, v], hi[:, v], key[1])
            m_lo, m_hi = interval_mul(m_lo, m_hi, *powers[key])
            m_lo, m_hi = _pad(m_lo, m_hi, eps)
        out_lo += m_lo
        out_hi += m_hi
        out_lo, out_hi = _pad(out_lo, out_hi, eps)
    return out_lo, out_hi


class IntervalEvaluator:
    """Natural extension intersected with the mean-value (centred) form."""

    def __init__(self, p: RealPoly, eps: float = 1e-12):
        self.p = p
        self.eps = eps
        self.grad = [p.derivative(v) for v in range(p.nvars)]

    def __call__(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out_lo, out_hi, _ = self.with_smear(lo, hi)
        return out_lo, out_hi

    def with_smear(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bounds plus per-variable smear ``width * max |df/dx_v|`` (for branching)."""
        n_lo, n_hi = interval_eval(self.p, lo, hi, self.eps)
        smear = np.zeros_like(lo)
        rad = 0.5 * (hi - lo)
        for v, g in enumerate(self.grad):
            if g.is_zero():
                continue
            g_lo, g_hi = interval_eval(g, lo, hi, self.eps)
            smear[:, v] = 2 * rad[:, v] * np.maximum(np.abs(g_lo), np.abs(g_hi))
        if self.p.degree <= 1:
            return n_lo, n_hi, smear
        fm = self.p(0.5 * (lo + hi))
        spread = 0.5 * smear.sum(axis=1)
        c_lo, c_hi = _pad(fm - spread, fm + spread, self.eps * max(1.0, len(self.p)))
        return np.maximum(n_lo, c_lo), np.minimum(n_hi, c_hi), smear
