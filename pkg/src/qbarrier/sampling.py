"""Sampling unit vectors from semi-algebraic regions of the sphere."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .qsystem import Region, _sphere_poly

MIN_ACCEPTANCE = 1e-5


class ThinRegionError(RuntimeError):
    """Rejection sampling accepts too few points; use a direct sampler instead."""

    def __init__(self, rate: float, draws: int):
        super().__init__(f"acceptance rate {rate:.2e} over {draws} draws is below {MIN_ACCEPTANCE:g}")
        self.rate = rate
        self.draws = draws


def sphere_points(rng: np.random.Generator, N: int, m: int) -> np.ndarray:
    """Uniform points on the unit sphere of C^N (Gaussian normalisation)."""
    W = rng.normal(size=(m, N)) + 1j * rng.normal(size=(m, N))
    return W / np.linalg.norm(W, axis=1, keepdims=True)


class CompiledRegion:
    def __init__(self, region: Region):
        self.region = region
        self.ineqs = [g.compile() for g in region.inequalities]
        n = int(round(np.log2(region.dim)))
        s = _sphere_poly(n)
        self.extra_eqs = [h.compile() for h in region.equalities if not (h.allclose(s, 1e-12) or h.allclose(-s, 1e-12))]

    def values(self, W: np.ndarray) -> np.ndarray:
        """Inequality values, shape (m, #ineqs)."""
        if not self.ineqs:
            return np.zeros((W.shape[0], 0))
        return np.stack([g(W).real for g in self.ineqs], axis=1)

    def mask(self, W: np.ndarray, tol: float = 0.0) -> np.ndarray:
        ok = np.ones(W.shape[0], dtype=bool)
        for g in self.ineqs:
            ok &= g(W).real >= -tol
        for h in self.extra_eqs:
            ok &= np.abs(h(W)) <= max(tol, 1e-9)
        return ok

    def violation(self, W: np.ndarray) -> np.ndarray:
        v = np.zeros(W.shape[0])
        for g in self.ineqs:
            v += np.minimum(g(W).real, 0.0) ** 2
        for h in self.extra_eqs:
            v += np.abs(h(W)) ** 2
        return v


def rejection_sample(region: Region, count: int, rng: np.random.Generator, batch: int = 50_000,
                     min_draws: int = 1_000_000) -> np.ndarray:
    """``count`` points of ``region`` by filtering uniform sphere samples.

    Raises :class:`ThinRegionError` once at least ``min_draws`` candidates
    (or enough to fill ``count``) have been drawn at an acceptance rate below
    ``MIN_ACCEPTANCE``.
    """
    cr = CompiledRegion(region)
    got = []
    n_got = 0
    draws = 0
    while n_got < count:
        W = sphere_points(rng, region.dim, batch)
        draws += batch
        acc = W[cr.mask(W)]
        got.append(acc)
        n_got += len(acc)
        if draws >= min_draws and n_got / draws < MIN_ACCEPTANCE:
            raise ThinRegionError(n_got / draws, draws)
        if n_got == 0 and draws >= min_draws:
            raise ThinRegionError(0.0, draws)
    return np.concatenate(got)[:count]


def find_anchor(region: Region, rng: np.random.Generator, restarts: int = 50) -> np.ndarray:
    """A point of ``region`` found by minimising the squared constraint violation."""
    cr = CompiledRegion(region)
    N = region.dim

    def unpack(v):
        w = v[:N] + 1j * v[N:]
        return w / max(np.linalg.norm(w), 1e-12)

    best = None
    for _ in range(restarts):
        w0 = sphere_points(rng, N, 1)[0]
        res = minimize(lambda v: cr.violation(unpack(v)[None])[0], np.concatenate([w0.real, w0.imag]),
                       method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-20, "maxiter": 20_000})
        w = unpack(res.x)
        # push slightly inside by targeting strict feasibility
        if cr.mask(w[None], 0.0)[0]:
            return w
        if best is None or res.fun < best[0]:
            best = (res.fun, w)
    raise ThinRegionError(0.0, restarts)


def mcmc_sample(region: Region, count: int, rng: np.random.Generator, chains: int = 32,
                burn: int = 200, thin: int = 5) -> np.ndarray:
    """Random-walk Metropolis on the sphere restricted to ``region``.

    Uniform target, so a proposal is accepted iff it stays in the region.  The
    step size adapts towards a 30% acceptance rate during burn-in.
    """
    cr = CompiledRegion(region)
    N = region.dim
    anchor = find_anchor(region, rng)
    W = np.repeat(anchor[None], chains, axis=0)
    sigma = 0.05
    out = []
    steps = burn + thin * int(np.ceil(count / chains))
    for it in range(steps):
        prop = W + sigma * (rng.normal(size=W.shape) + 1j * rng.normal(size=W.shape))
        prop /= np.linalg.norm(prop, axis=1, keepdims=True)
        ok = cr.mask(prop)
        W = np.where(ok[:, None], prop, W)
        if it < burn:
            sigma *= 1.1 if ok.mean() > 0.3 else 0.9
            sigma = min(max(sigma, 1e-6), 1.0)
        elif (it - burn) % thin == 0:
            out.append(W.copy())
    return np.concatenate(out)[:count]


def sample_region(region: Region, count: int, rng: np.random.Generator, allow_fallback: bool = True) -> np.ndarray:
    try:
        return rejection_sample(region, count, rng)
    except ThinRegionError:
        if not allow_fallback:
            raise
        return mcmc_sample(region, count, rng)
