"""Random generators shared by the test modules."""

import numpy as np

from qbarrier.cpoly import CPolynomial
from qbarrier.hsos import basis


def random_poly(rng, n, deg, n_terms=None):
    keys = basis(n, deg).keys
    n_terms = n_terms or min(len(keys), 6)
    idx = rng.choice(len(keys), size=n_terms, replace=False)
    coeffs = rng.normal(size=n_terms) + 1j * rng.normal(size=n_terms)
    return CPolynomial(n, {keys[i]: c for i, c in zip(idx, coeffs)})


def random_cf_poly(rng, n, deg, n_terms=None):
    p = random_poly(rng, n, deg, n_terms)
    return (p + p.conjugate()).scale(0.5)


def random_unitary(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(A)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def unit_vectors(rng, n, m):
    W = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def random_psd(rng, m, rank=None):
    rank = rank or int(rng.integers(1, m + 1))
    G = rng.normal(size=(m, rank)) + 1j * rng.normal(size=(m, rank))
    return G @ G.conj().T
