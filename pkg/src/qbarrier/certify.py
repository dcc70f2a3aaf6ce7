"""Independent checking of barrier certificates.

Every instantiated condition becomes a proof obligation "find z in region
with target(z) > 0".  Obligations are checked by random sampling
(falsification only), by interval branch-and-bound (verification or
falsification) and can be exported as SMT-LIB files for external solvers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .cpoly import CPolynomial
from .interval import IntervalEvaluator, RealPoly, interval_eval, real_to_complex_points, to_real
from .qsystem import QSystem, Region, step
from .sampling import MIN_ACCEPTANCE, CompiledRegion, ThinRegionError, mcmc_sample, sample_region, sphere_points
from .synth import BarrierCertificate, Instance, phase_plan, word_matrix

REGION_TOL = 1e-9
DEFAULT_SAMPLES = 100_000
DEFAULT_DEPTH = 40
DEFAULT_DELTA = 1e-4
DEFAULT_MAX_BOXES = 2_000_000
CONSTRAINT_WEIGHT = 1.0
MAX_VARIANTS = 48  # branching weight of region constraints relative to the target


@dataclass
class ProofObligation:
    id: str
    cond: str
    target: CPolynomial
    region: Region
    description: str = ""

    def __post_init__(self):
        if not self.target.is_conjugate_flattening(1e-9):
            raise ValueError(f"obligation {self.id}: target is not conjugate-flattening")


@dataclass
class Verdict:
    kind: str  # "verified" | "falsified" | "unknown"
    margin: float | None = None
    witness: np.ndarray | None = None
    violation: float | None = None
    detail: str = ""
    stats: dict = field(default_factory=dict)

    def __str__(self) -> str:
        if self.kind == "verified":
            return f"verified (margin {self.margin:.3g})"
        if self.kind == "falsified":
            w = ", ".join(f"{c.real:.6g}{c.imag:+.6g}j" for c in self.witness)
            return f"falsified (violation {self.violation:.3g} at [{w}])"
        return f"unknown ({self.detail})"


# -- obligations ----------------------------------------------------------------------
def _instance_obligation(system: QSystem, cert: BarrierCertificate, inst: Instance) -> ProofObligation:
    s = system.schedule
    B = cert.barriers
    label = inst.label(s)
    start = s.phase_name(inst.start)
    if inst.cond == "a":
        return ProofObligation(label, "a", B[0], system.initial, "B_0(z) > 0 on the initial set")
    if inst.cond == "b":
        return ProofObligation(label, "b", cert.d - B[inst.start], system.unsafe,
                               f"B_{start}(z) < d on the unsafe set")
    if inst.cond == "c":
        U = word_matrix(system, inst.word)
        target = B[inst.start].compose_linear(U) - B[inst.start] - cert.epsilon
        return ProofObligation(label, "c", target, system.state_space,
                               f"B_{start}(U z) - B_{start}(z) > eps on the state space")
    if inst.cond == "d":
        target = B[inst.end] - B[inst.start] - cert.gamma
        return ProofObligation(label, "d", target, system.state_space,
                               f"B_{s.phase_name(inst.end)}(z) - B_{start}(z) > gamma on the state space")
    if inst.cond == "e":
        W = word_matrix(system, inst.word)
        target = B[inst.end].compose_linear(W) - B[inst.start]
        return ProofObligation(label, "e", target, system.state_space,
                               f"B_{s.phase_name(inst.end)}(W z) - B_{start}(z) > 0 on the state space")
    raise ValueError(f"unknown condition {inst.cond!r}")


def obligations(system: QSystem, cert: BarrierCertificate) -> list[ProofObligation]:
    """One obligation per instantiated condition of the certificate's plan."""
    cert.check_matches(system)
    prune = bool(cert.hyperparams.get("prune_k1_gamma0")) and cert.k == 1 and cert.gamma == 0
    return [_instance_obligation(system, cert, inst) for inst in phase_plan(system.schedule, cert.k, prune)]


# -- sampling ---------------------------------------------------------------------------
def sample_falsify(ob: ProofObligation, samples: int = DEFAULT_SAMPLES, tol: float = 1e-6, seed: int = 0,
                   batch: int = 50_000, fallback: bool = False) -> Verdict:
    """Search for a violation among uniformly drawn unit vectors of the region.

    Sampling never verifies.  If fewer than ``MIN_ACCEPTANCE`` of the draws
    land in the region a :class:`ThinRegionError` is raised, unless
    ``fallback`` is set, in which case the region is sampled by a random walk.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    region = CompiledRegion(ob.region)
    f = ob.target.compile()
    N = ob.region.dim
    drawn = accepted = 0
    worst = -np.inf
    while drawn < samples:
        m = min(batch, samples - drawn)
        W = sphere_points(rng, N, m)
        drawn += m
        W = W[region.mask(W)]
        accepted += len(W)
        if not len(W):
            continue
        vals = f(W).real
        i = int(np.argmax(vals))
        worst = max(worst, float(vals[i]))
        if vals[i] > tol:
            return Verdict("falsified", witness=W[i], violation=float(vals[i]),
                           stats={"drawn": drawn, "accepted": accepted})
    if drawn >= 1 / MIN_ACCEPTANCE and accepted / drawn < MIN_ACCEPTANCE:
        if not fallback:
            raise ThinRegionError(accepted / drawn, drawn)
        W = mcmc_sample(ob.region, samples, rng)
        vals = f(W).real
        i = int(np.argmax(vals))
        if vals[i] > tol:
            return Verdict("falsified", witness=W[i], violation=float(vals[i]),
                           stats={"drawn": drawn, "accepted": accepted, "walk": len(W)})
        worst = max(worst, float(vals[i]))
        accepted += len(W)
    return Verdict("unknown", detail=f"no violation above {tol:g} in {accepted} region samples",
                   stats={"drawn": drawn, "accepted": accepted, "max_target": worst})


# -- interval branch and bound ---------------------------------------------------------------
class _Constraint:
    """A region polynomial in real variables, with a contractor when it is separable."""

    def __init__(self, p: RealPoly, equality: bool):
        self.p = p
        self.eq = equality
        self.sep = None
        if p.degree <= 2 and all(np.count_nonzero(row) <= 1 for row in p.exps):
            c0 = 0.0
            sq: dict[int, float] = {}
            lin: dict[int, float] = {}
            for row, c in zip(p.exps, p.coeffs):
                nz = np.nonzero(row)[0]
                if not len(nz):
                    c0 += c
                elif row[nz[0]] == 2:
                    sq[int(nz[0])] = c
                else:
                    lin[int(nz[0])] = c
            if not set(sq) & set(lin):
                self.sep = (c0, sq, lin)

    def feasible(self, lo, hi, eps):
        """Boxes that may meet the constraint, and a mask of boxes where it is not yet certain."""
        g_lo, g_hi = interval_eval(self.p, lo, hi, eps)
        ok = g_hi >= -REGION_TOL
        if self.eq:
            ok &= g_lo <= REGION_TOL
            return ok, np.ones_like(ok)
        return ok, g_lo < 0

    def smear(self, lo, hi, eps):
        if not hasattr(self, "_ev"):
            self._ev = IntervalEvaluator(self.p, eps)
        g_lo, g_hi, sm = self._ev.with_smear(lo, hi)
        return sm / np.maximum(g_hi - g_lo, 1e-300)[:, None]

    def contract(self, lo, hi):
        """Tighten boxes in place; returns a mask of boxes found infeasible."""
        bad = np.zeros(lo.shape[0], dtype=bool)
        if self.sep is None:
            return bad
        c0, sq, lin = self.sep
        terms = {}
        for v, a in sq.items():
            s_lo, s_hi = _sq(lo[:, v], hi[:, v])
            terms[v] = (np.minimum(a * s_lo, a * s_hi), np.maximum(a * s_lo, a * s_hi))
        for v, b in lin.items():
            terms[v] = (np.minimum(b * lo[:, v], b * hi[:, v]), np.maximum(b * lo[:, v], b * hi[:, v]))
        tot_lo = c0 + sum(t[0] for t in terms.values())
        tot_hi = c0 + sum(t[1] for t in terms.values())
        slack = REGION_TOL + 1e-12 * (1 + np.abs(tot_lo) + np.abs(tot_hi))
        for v, (t_lo, t_hi) in terms.items():
            # g = t_v + rest;  g >= 0  =>  t_v >= -rest_hi ; g <= 0 (equality) => t_v <= -rest_lo
            need_lo = -(tot_hi - t_hi) - slack
            need_hi = -(tot_lo - t_lo) + slack if self.eq else np.full_like(need_lo, np.inf)
            if v in sq:
                a = sq[v]
                if a > 0:
                    s_lo, s_hi = need_lo / a, need_hi / a
                else:
                    s_lo, s_hi = need_hi / a, need_lo / a
                _contract_square(lo[:, v], hi[:, v], s_lo, s_hi, bad)
            else:
                b = lin[v]
                if b > 0:
                    x_lo, x_hi = need_lo / b, need_hi / b
                else:
                    x_lo, x_hi = need_hi / b, need_lo / b
                lo[:, v] = np.maximum(lo[:, v], x_lo)
                hi[:, v] = np.minimum(hi[:, v], x_hi)
        bad |= (lo > hi).any(axis=1)
        return bad


def _sq(lo, hi):
    a, b = lo * lo, hi * hi
    return np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(a, b)), np.maximum(a, b)


def _contract_square(lo, hi, s_lo, s_hi, bad):
    """Restrict ``x`` in ``[lo, hi]`` to ``x^2 in [s_lo, s_hi]`` (views, modified in place)."""
    bad |= s_hi < 0
    r_hi = np.sqrt(np.maximum(s_hi, 0.0)) * (1 + 1e-12) + 1e-15
    np.maximum(lo, -r_hi, out=lo)
    np.minimum(hi, r_hi, out=hi)
    r_lo = np.sqrt(np.maximum(s_lo, 0.0)) * (1 - 1e-12)
    pos = lo > -r_lo  # box cannot reach the negative branch
    neg = hi < r_lo
    lo[pos] = np.maximum(lo[pos], r_lo[pos])
    hi[neg] = np.minimum(hi[neg], -r_lo[neg])


def _region_constraints(region: Region) -> list[_Constraint]:
    out = [_Constraint(to_real(h), True) for h in region.equalities]
    seen = set()
    for g in region.inequalities:
        for v in _sphere_variants(to_real(g), region):
            key = tuple(sorted(v.terms().items()))
            if key not in seen:
                seen.add(key)
                out.append(_Constraint(v, False))
    return out


# -- upper-bounding reformulations ------------------------------------------------------------
def _combine(p: dict, mult: dict, g: dict, nvars: int) -> RealPoly:
    """``p + mult * g`` in floating point, raised by a bound on its rounding error.

    The exact rational residual is bounded by the sum of its absolute
    coefficients (valid on ``[-1, 1]^D``) and added to the constant term, so
    the result is at least ``p + mult * g`` on every box we use.
    """
    out = dict(p)
    for em, cm in mult.items():
        for eg, cg in g.items():
            e = tuple(a + b for a, b in zip(em, eg))
            out[e] = out.get(e, 0.0) + cm * cg
    exact = {e: Fraction(c) for e, c in p.items()}
    for em, cm in mult.items():
        for eg, cg in g.items():
            e = tuple(a + b for a, b in zip(em, eg))
            exact[e] = exact.get(e, Fraction(0)) + Fraction(cm) * Fraction(cg)
    err = sum((abs(exact.get(e, Fraction(0)) - Fraction(out.get(e, 0.0))) for e in set(exact) | set(out)),
              Fraction(0))
    zero = (0,) * nvars
    if err:
        out[zero] = out.get(zero, 0.0) + float(err) * (1 + 1e-9) + 1e-300
    return RealPoly(nvars, out)


def _sphere_real(region: Region, nvars: int) -> dict | None:
    if not region.has_sphere():
        return None
    h = {tuple(2 if u == v else 0 for u in range(nvars)): 1.0 for v in range(nvars)}
    h[(0,) * nvars] = -1.0
    return h


def _monomials(nvars: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for d in range(degree + 1):
        for comb in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for v in comb:
                e[v] += 1
            out.append(tuple(e))
    return out


def _l1_reduce(p: RealPoly, h: dict) -> dict | None:
    """Multiplier ``lam`` minimising the coefficient 1-norm of ``p - lam * h`` (an LP)."""
    if p.degree < 2:
        return None
    lam = _monomials(p.nvars, p.degree - 2)
    terms = p.terms()
    keys = sorted(set(terms) | {tuple(a + b for a, b in zip(m, e)) for m in lam for e in h})
    idx = {k: i for i, k in enumerate(keys)}
    M, K = len(keys), len(lam)
    A = np.zeros((M, K))
    for j, m in enumerate(lam):
        for e, c in h.items():
            A[idx[tuple(a + b for a, b in zip(m, e))], j] += c
    t = np.zeros(M)
    for e, c in terms.items():
        t[idx[e]] = c
    eye = np.eye(M)
    res = linprog(np.concatenate([np.zeros(K), np.ones(M)]),
                  A_ub=np.block([[-A, -eye], [A, -eye]]), b_ub=np.concatenate([-t, t]),
                  bounds=[(None, None)] * K + [(0, None)] * M, method="highs")
    if res.status != 0:
        return None
    return {m: -float(c) for m, c in zip(lam, res.x[:K]) if c != 0.0}


def _sphere_variants(p: RealPoly, region: Region) -> list[RealPoly]:
    """Polynomials that are ``>= p`` on the sphere, which interval bounds cannot see.

    Candidates are ``p - c (|z|^2 - 1)`` for ``c`` at the breakpoints of the
    (convex, piecewise linear) interval upper bound, i.e. the coefficients of
    the pure squares, and ``p - lam (|z|^2 - 1)`` with ``lam`` from an LP that
    makes the coefficients as small as possible.
    """
    D = p.nvars
    h = _sphere_real(region, D)
    if h is None:
        return [p]
    terms = p.terms()
    zero = (0,) * D
    cands = {0.0}
    for v in range(D):
        e = tuple(2 if u == v else 0 for u in range(D))
        if e in terms:
            cands.add(terms[e])
    out = [p]
    for c in sorted(cands - {0.0}):
        out.append(_combine(terms, {zero: -c}, h, D))
    lam = _l1_reduce(p, h)
    if lam:
        out.append(_combine(terms, lam, h, D))
    return out


def _lp_bound_variant(p: RealPoly, region: Region) -> RealPoly | None:
    """``p + sum_g lam_g g - mu h`` minimising its global upper bound on ``[-1, 1]^D``.

    ``lam_g`` are nonnegative combinations of even monomials (so nonnegative
    everywhere) and ``mu`` is free, so the result is ``>= p`` on the region.
    The bound used is ``c_0 + sum max(c_e, 0)`` over even and ``|c_e|`` over
    other monomials.
    """
    D = p.nvars
    h = _sphere_real(region, D)
    gs = [to_real(g) for g in region.inequalities]
    cols: list[tuple[dict, dict, bool]] = []  # (multiplier, polynomial, free sign)
    if h is not None and p.degree >= 2:
        cols += [({m: 1.0}, h, True) for m in _monomials(D, p.degree - 2)]
    for g in gs:
        top = p.degree - g.degree
        if top < 0:
            continue
        cols += [({m: 1.0}, g.terms(), False) for m in _monomials(D, top) if all(x % 2 == 0 for x in m)]
    if not cols:
        return None
    terms = p.terms()
    keys = set(terms)
    for mult, g, _ in cols:
        for em in mult:
            keys |= {tuple(a + b for a, b in zip(em, eg)) for eg in g}
    zero = (0,) * D
    keys = sorted(keys - {zero})
    idx = {k: i for i, k in enumerate(keys)}
    M, K = len(keys), len(cols)
    A = np.zeros((M, K))
    a0 = np.zeros(K)
    for j, (mult, g, _) in enumerate(cols):
        for em, cm in mult.items():
            for eg, cg in g.items():
                e = tuple(a + b for a, b in zip(em, eg))
                if e == zero:
                    a0[j] += cm * cg
                else:
                    A[idx[e], j] += cm * cg
    t = np.zeros(M)
    for e, c in terms.items():
        if e != zero:
            t[idx[e]] = c
    even = np.array([all(x % 2 == 0 for x in k) for k in keys])
    # coefficients c = t + A y; w >= c, and w >= -c for non-even monomials, w >= 0 for even
    eye = np.eye(M)
    A_ub = [np.hstack([A, -eye])]
    b_ub = [-t]
    odd = np.nonzero(~even)[0]
    if len(odd):
        A_ub.append(np.hstack([-A[odd], -eye[odd]]))
        b_ub.append(t[odd])
    bounds = [(None, None) if free else (0, None) for _, _, free in cols]
    bounds += [(0, None) if ev else (None, None) for ev in even]
    res = linprog(np.concatenate([a0, np.ones(M)]), A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub),
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None
    y = res.x[:K]
    out = terms
    for (mult, g, _), c in zip(cols, y):
        if c != 0.0:
            out = _combine(out, {m: c * v for m, v in mult.items()}, g, D).terms()
    return RealPoly(D, out)


def _target_variants(target: RealPoly, region: Region, limit: int = MAX_VARIANTS) -> list[RealPoly]:
    """Upper-bounding functions for the target on the region.

    Besides the sphere variants, ``t + lam * g`` bounds ``t`` from above
    wherever ``g >= 0``; each ``lam > 0`` that cancels a monomial shared by
    ``t`` and ``g`` is tried.
    """
    base = _sphere_variants(target, region)
    lp = _lp_bound_variant(target, region)
    if lp is not None:
        base.append(lp)
    ineqs = []
    for g in region.inequalities:
        ineqs += _sphere_variants(to_real(g), region)
    out = list(base)
    seen = {tuple(sorted(t.terms().items())) for t in out}
    zero = (0,) * target.nvars
    for t in base:
        tt = t.terms()
        for g in ineqs:
            gt = g.terms()
            for e in sorted(set(tt) & set(gt)):
                if e == zero or gt[e] == 0:
                    continue
                lam = -tt[e] / gt[e]
                if lam <= 0:
                    continue
                v = _combine(tt, {zero: lam}, gt, t.nvars)
                key = tuple(sorted(v.terms().items()))
                if key not in seen:
                    seen.add(key)
                    out.append(v)
                if len(out) >= limit:
                    return out
    return out


def interval_verify(ob: ProofObligation, delta: float = DEFAULT_DELTA, max_depth: int = DEFAULT_DEPTH,
                    max_boxes: int = DEFAULT_MAX_BOXES, eps: float = 1e-12, batch: int = 4096,
                    seed: int = 0) -> Verdict:
    """Branch-and-bound over ``[-1, 1]^{2N}`` in real and imaginary parts.

    A box is discarded when interval bounds show it misses the region or has
    ``target <= 0`` throughout.  Undecided boxes are probed at their centre
    (and a random point), projected to the sphere, before being bisected along
    their widest side.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    N = ob.region.dim
    D = 2 * N
    tevs = [IntervalEvaluator(t, eps) for t in _target_variants(to_real(ob.target), ob.region)]
    cons = _region_constraints(ob.region)
    region = CompiledRegion(ob.region)
    f = ob.target.compile()

    stack = [(-np.ones((1, D)), np.ones((1, D)), np.zeros(1, dtype=int))]
    margin = np.inf
    processed = 0
    deepest = 0
    while stack:
        lo, hi, dep = stack.pop()
        if len(lo) > batch:
            stack.append((lo[batch:], hi[batch:], dep[batch:]))
            lo, hi, dep = lo[:batch], hi[:batch], dep[:batch]
        lo, hi = lo.copy(), hi.copy()
        take = len(lo)
        processed += take
        deepest = max(deepest, int(dep.max()))

        alive = np.ones(take, dtype=bool)
        for _ in range(2):
            for c in cons:
                alive &= ~c.contract(lo, hi)
        open_cons = []
        for c in cons:
            ok, uncertain = c.feasible(lo, hi, eps)
            alive &= ok
            open_cons.append(uncertain)
        lo, hi, dep = lo[alive], hi[alive], dep[alive]
        open_cons = [u[alive] for u in open_cons]
        if not len(lo):
            continue
        evals = [tev.with_smear(lo, hi) for tev in tevs]
        uppers = np.stack([e[1] for e in evals])
        best = np.argmin(uppers, axis=0)
        t_lo = np.stack([e[0] for e in evals])[best, np.arange(len(lo))]
        t_hi = uppers[best, np.arange(len(lo))]
        smear = np.stack([e[2] for e in evals])[best, np.arange(len(lo))]
        done = t_hi <= 0
        if done.any():
            margin = min(margin, float(-t_hi[done].max()) + 0.0)
        keep = ~done
        lo, hi, dep, t_lo, t_hi, smear = lo[keep], hi[keep], dep[keep], t_lo[keep], t_hi[keep], smear[keep]
        open_cons = [u[keep] for u in open_cons]
        if not len(lo):
            continue

        probes = [0.5 * (lo + hi), lo + (hi - lo) * rng.random(lo.shape)]
        for P in probes:
            W = real_to_complex_points(P)
            nrm = np.linalg.norm(W, axis=1)
            ok = nrm > 1e-12
            W = W[ok] / nrm[ok, None]
            if not len(W):
                continue
            W = W[region.mask(W, REGION_TOL)]
            if not len(W):
                continue
            vals = f(W).real
            i = int(np.argmax(vals))
            if vals[i] > delta:
                return Verdict("falsified", witness=W[i], violation=float(vals[i]),
                               stats={"boxes": processed, "depth": deepest})

        if (dep >= max_depth).any():
            i = int(np.argmax(dep))
            return Verdict("unknown", detail=f"depth {max_depth} exhausted",
                           stats={"boxes": processed, "depth": deepest, "box": (lo[i].tolist(), hi[i].tolist()),
                                  "target_bounds": (float(t_lo[i]), float(t_hi[i]))})
        if processed + sum(len(b[0]) for b in stack) + 2 * len(lo) > max_boxes:
            return Verdict("unknown", detail=f"box budget {max_boxes} exhausted",
                           stats={"boxes": processed, "depth": deepest})
        # branch on the variable with the largest normalised smear
        score = smear / np.maximum(t_hi - t_lo, 1e-300)[:, None]
        for c, u in zip(cons, open_cons):
            if u.any() and not c.eq:
                score[u] += CONSTRAINT_WEIGHT * c.smear(lo[u], hi[u], eps)
        score += 1e-9 * (hi - lo)
        axis = np.argmax(score, axis=1)
        rows = np.arange(len(lo))
        mid = 0.5 * (lo[rows, axis] + hi[rows, axis])
        lo2, hi2 = lo.copy(), hi.copy()
        hi[rows, axis] = mid
        lo2[rows, axis] = mid
        stack.append((np.concatenate([lo, lo2]), np.concatenate([hi, hi2]), np.concatenate([dep, dep]) + 1))
    return Verdict("verified", margin=float(margin), stats={"boxes": processed, "depth": deepest})


# -- SMT-LIB export ---------------------------------------------------------------------------
def _num(c: float) -> str:
    """Exact decimal form of a double, negatives as ``(- x)``."""
    d = Decimal(float(c))
    s = format(d.copy_abs(), "f")
    if "." not in s:
        s += ".0"
    return f"(- {s})" if d < 0 else s


def _var_names(N: int) -> list[str]:
    return [f"re_{j}" for j in range(N)] + [f"im_{j}" for j in range(N)]


def smt_term(p: RealPoly, names: list[str]) -> str:
    if p.is_zero():
        return "0.0"
    parts = []
    for row, c in zip(p.exps, p.coeffs):
        factors = [_num(c)] if c != 1.0 or not row.any() else []
        for v in np.nonzero(row)[0]:
            factors += [names[v]] * int(row[v])
        parts.append(factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")")
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"


def smtlib_text(ob: ProofObligation) -> str:
    N = ob.region.dim
    names = _var_names(N)
    lines = [f"; obligation {ob.id}: violation means target > 0", f"; {ob.description}",
             "(set-logic QF_NRA)"]
    lines += [f"(declare-fun {v} () Real)" for v in names]
    for h in ob.region.equalities:
        lines.append(f"(assert (= {smt_term(to_real(h), names)} 0.0))")
    for g in ob.region.inequalities:
        lines.append(f"(assert (>= {smt_term(to_real(g), names)} 0.0))")
    lines.append(f"(assert (> {smt_term(to_real(ob.target), names)} 0.0))")
    lines += ["(check-sat)", "(get-model)", "(exit)"]
    return "\n".join(lines) + "\n"


def emit_smtlib(obs: list[ProofObligation], directory: str | os.PathLike) -> list[Path]:
    """Write ``<id>.smt2`` per obligation; unsat certifies the condition."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for ob in obs:
        path = out / f"{ob.id}.smt2"
        path.write_text(smtlib_text(ob))
        paths.append(path)
    return paths


# -- simulation --------------------------------------------------------------------------------
def simulate_safety(system: QSystem, trajectories: int = 10_000, horizon: int = 100, seed: int = 0) -> dict:
    """Run random initial states forward and count visits to the unsafe set.

    ``min_unsafe_margin`` is the smallest over all visited states of the
    largest unsafe-inequality violation (positive means never inside).
    """
    rng = np.random.default_rng(seed)
    W = sample_region(system.initial, trajectories, rng)
    unsafe = CompiledRegion(system.unsafe)
    entries = 0
    margin = np.inf
    for t in range(horizon + 1):
        if t:
            W = step(system, t - 1, W)
        vals = unsafe.values(W)
        if vals.shape[1]:
            m = -vals.min(axis=1)
            margin = min(margin, float(m.min()))
            entries += int((m <= 0).sum())
        else:
            entries += len(W)
            margin = min(margin, 0.0)
    return {"unsafe_entries": entries, "min_unsafe_margin": margin, "trajectories": len(W), "horizon": horizon}


# -- pipeline ------------------------------------------------------------------------------------
@dataclass
class CheckResult:
    obligation: ProofObligation
    interval: Verdict
    sampling: Verdict

    @property
    def status(self) -> str:
        if "falsified" in (self.interval.kind, self.sampling.kind):
            return "falsified"
        return self.interval.kind


def check_obligation(ob: ProofObligation, samples: int = DEFAULT_SAMPLES, delta: float = DEFAULT_DELTA,
                     depth: int = DEFAULT_DEPTH, seed: int = 0, max_boxes: int = DEFAULT_MAX_BOXES) -> CheckResult:
    try:
        sv = sample_falsify(ob, samples, tol=1e-6, seed=seed, fallback=True)
    except ThinRegionError as exc:
        sv = Verdict("unknown", detail=str(exc))
    iv = interval_verify(ob, delta=delta, max_depth=depth, max_boxes=max_boxes, seed=seed)
    return CheckResult(ob, iv, sv)


def _check_args(args):
    return check_obligation(*args)


def check_certificate(system: QSystem, cert: BarrierCertificate, samples: int = DEFAULT_SAMPLES,
                      delta: float = DEFAULT_DELTA, depth: int = DEFAULT_DEPTH, seed: int = 0,
                      workers: int = 1, max_boxes: int = DEFAULT_MAX_BOXES) -> list[CheckResult]:
    obs = obligations(system, cert)
    args = [(ob, samples, delta, depth, seed, max_boxes) for ob in obs]
    if workers > 1 and len(obs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_check_args, args))
    return [_check_args(a) for a in args]


def verdict_record(r: CheckResult) -> dict:
    def one(v: Verdict) -> dict:
        d = {"kind": v.kind, "detail": v.detail}
        if v.margin is not None:
            d["margin"] = v.margin
        if v.witness is not None:
            d["witness"] = [[float(c.real), float(c.imag)] for c in v.witness]
            d["violation"] = v.violation
        return d

    return {"id": r.obligation.id, "status": r.status, "interval": one(r.interval), "sampling": one(r.sampling)}

