"""Barrier synthesis: instantiate the HSOS constraint system over schedule phases.

For each phase ``t`` of an eventually periodic schedule there is one barrier
``B_t``.  The expressions below must all be HSOS after subtracting multiplier
terms for the relevant region (HSOS multipliers for inequalities, free
conjugate-flattening multipliers for equalities):

* ``a``: ``-B_0``                                   on the initial set
* ``b``: ``B_t - d``                                on the unsafe set
* ``c``: ``B_t - B_t(U_t z) + eps``                 on the state space
* ``d``: ``B_t - B_{t+1} + gamma``                  on the state space
* ``e``: ``B_t - B_{t+k}(U_{t+k-1} ... U_t z)``     on the state space, t = rk
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Literal

import numpy as np

from .conic import Backend, ConicProblem, Infeasible, PSDBlock, SolverError, solve
from .cpoly import CPolynomial, conj_key
from .hsos import (
    CONST,
    AffinePoly,
    ConfigurationError,
    GramVar,
    charge,
    basis,
    free_cf_poly,
    gram_to_poly,
    hsos_multiplier,
    match_coefficients,
)
from .qsystem import QSystem, Region, Schedule

log = logging.getLogger(__name__)

SCHEMA_CERT = "qbarrier.certificate/1"
RESIDUAL_TOL = 1e-6
CONDITIONS = ("a", "b", "c", "d", "e")


# -- hyperparameters ------------------------------------------------------------------
@dataclass
class Hyperparams:
    k: int = 1
    epsilon: float = 0.01
    gamma: float = 0.01
    d: float | None = None  # defaults to k*(epsilon+gamma) + d_margin
    degree: int = 2
    multiplier_degree: dict[str, int] = field(default_factory=dict)  # per condition letter
    objective: Literal["feasibility", "min_eps_gamma"] = "feasibility"
    maximize_d: bool = False
    d_cap: float = 100.0
    d_margin: float = 0.01
    prune_k1_gamma0: bool = False
    sphere_encoding: Literal["equality", "inequalities"] = "equality"
    # "auto": restrict to global-phase invariant polynomials when every region
    # polynomial is phase invariant (exact reduction, block-diagonal Grams)
    phase_symmetry: Literal["auto", "off"] = "auto"

    def __post_init__(self):
        if self.d is None:
            self.d = self.k * (self.epsilon + self.gamma) + self.d_margin
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigurationError(f"k: must be a positive integer, got {self.k!r}")
        if self.epsilon < 0:
            raise ConfigurationError(f"epsilon: must be >= 0, got {self.epsilon}")
        if self.gamma < 0:
            raise ConfigurationError(f"gamma: must be >= 0, got {self.gamma}")
        if not self.maximize_d and self.objective == "feasibility" and not self.d > self.k * (self.epsilon + self.gamma):
            raise ConfigurationError(
                f"d: must exceed k*(epsilon+gamma) = {self.k * (self.epsilon + self.gamma):g}, got {self.d}"
            )
        if self.degree < 1 or self.degree % 2:
            raise ConfigurationError(f"degree: barrier degree must be a positive even integer, got {self.degree}")
        for cond, m in self.multiplier_degree.items():
            if cond not in CONDITIONS or m < 0 or m % 2:
                raise ConfigurationError(f"multiplier_degree.{cond}: must be an even integer >= 0 for one of {CONDITIONS}")
        if self.objective not in ("feasibility", "min_eps_gamma"):
            raise ConfigurationError(f"objective: unknown mode {self.objective!r}")
        if self.phase_symmetry not in ("auto", "off"):
            raise ConfigurationError(f"phase_symmetry: unknown mode {self.phase_symmetry!r}")
        if self.sphere_encoding not in ("equality", "inequalities"):
            raise ConfigurationError(f"sphere_encoding: unknown mode {self.sphere_encoding!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "Hyperparams":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"hyperparams: unknown field(s) {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(f"hyperparams: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


# -- phase plan ------------------------------------------------------------------------
@dataclass(frozen=True)
class Instance:
    """One instantiated condition.  ``word`` lists mode indices in time order."""

    cond: str
    start: int
    end: int
    word: tuple[int, ...] = ()

    def label(self, schedule: Schedule) -> str:
        s = schedule.phase_name(self.start).replace(":", "")
        if self.cond == "d" or (self.cond == "e" and self.end != self.start):
            return f"4{self.cond}_{s}_{schedule.phase_name(self.end).replace(':', '')}"
        return f"4{self.cond}_{s}"


def phase_plan(schedule: Schedule, k: int, prune_step: bool = False) -> list[Instance]:
    """Finite set of instances covering every time step of the schedule."""
    phases = range(schedule.n_phases)
    plan = [Instance("a", 0, 0)]
    plan += [Instance("b", ph, ph) for ph in phases]
    if not prune_step:
        plan += [Instance("c", ph, ph, (schedule.mode_of_phase(ph),)) for ph in phases]
    plan += [Instance("d", ph, schedule.next_phase(ph)) for ph in phases]
    seen = set()
    r = 0
    while True:
        t = r * k
        ph = schedule.phase(t)
        if ph in seen:
            break
        seen.add(ph)
        word = tuple(schedule.mode_at(t + i) for i in range(k))
        plan.append(Instance("e", ph, schedule.phase(t + k), word))
        r += 1
    return plan


def word_matrix(system: QSystem, word: tuple[int, ...]) -> np.ndarray:
    W = np.eye(system.dim, dtype=complex)
    for m in word:
        W = system.modes[m].matrix @ W
    return W


def phase_invariant(system: QSystem) -> bool:
    """True when every region polynomial only has charge-zero monomials."""
    regions = (system.initial, system.unsafe, system.state_space)
    return all(charge(key) == 0 for r in regions for p in r.inequalities + r.equalities for key in p.keys())


def condition_region(system: QSystem, cond: str) -> Region:
    return {"a": system.initial, "b": system.unsafe}.get(cond, system.state_space)


# -- certificate ------------------------------------------------------------------------
@dataclass
class BarrierCertificate:
    dim: int
    prefix_len: int
    cycle_len: int
    barriers: dict[int, CPolynomial]
    k: int
    epsilon: float
    gamma: float
    d: float
    hyperparams: dict = field(default_factory=dict)
    status: str = ""
    inventory: list[dict] = field(default_factory=list)
    timestamps: dict = field(default_factory=dict)
    residual: float | None = None

    def __post_init__(self):
        for ph, b in self.barriers.items():
            if not b.is_conjugate_flattening(1e-9):
                raise ValueError(f"barrier for phase {ph} is not conjugate-flattening")

    def phase_name(self, ph: int) -> str:
        return f"prefix:{ph}" if ph < self.prefix_len else f"cycle:{ph - self.prefix_len}"

    def check_matches(self, system: QSystem) -> None:
        s = system.schedule
        if (self.prefix_len, self.cycle_len) != (s.L, s.p) or self.dim != system.dim:
            raise ValueError(
                f"certificate phases (prefix {self.prefix_len}, cycle {self.cycle_len}, dim {self.dim}) "
                f"do not match system (prefix {s.L}, cycle {s.p}, dim {system.dim})"
            )
        if set(self.barriers) != set(range(s.n_phases)):
            raise ValueError("certificate does not provide a barrier for every phase")

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_CERT,
            "dim": self.dim,
            "phases": {"prefix": self.prefix_len, "cycle": self.cycle_len},
            "constants": {"k": self.k, "epsilon": self.epsilon, "gamma": self.gamma, "d": self.d},
            "barriers": {self.phase_name(ph): b.to_records() for ph, b in sorted(self.barriers.items())},
            "hyperparams": self.hyperparams,
            "status": self.status,
            "residual": self.residual,
            "inventory": self.inventory,
            "timestamps": self.timestamps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BarrierCertificate":
        if data.get("schema") != SCHEMA_CERT:
            raise ValueError(f"schema: expected {SCHEMA_CERT!r}, got {data.get('schema')!r}")
        L, p = int(data["phases"]["prefix"]), int(data["phases"]["cycle"])
        sched = Schedule(tuple(range(L)), tuple(range(p)))
        barriers = {sched.parse_phase_name(name): CPolynomial.from_records(data["dim"], recs)
                    for name, recs in data["barriers"].items()}
        if not barriers:
            raise ValueError("barriers: certificate contains no barrier polynomials")
        c = data["constants"]
        return cls(int(data["dim"]), L, p, barriers, int(c["k"]), float(c["epsilon"]), float(c["gamma"]),
                   float(c["d"]), data.get("hyperparams", {}), data.get("status", ""),
                   data.get("inventory", []), data.get("timestamps", {}), data.get("residual"))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "BarrierCertificate":
        return cls.from_dict(json.loads(text))


class NoCertificate(Exception):
    def __init__(self, reason: str, detail: str = "", stats: dict | None = None):
        super().__init__(f"{reason}: {detail}")
        self.reason = reason  # "infeasible" | "solver_error"
        self.detail = detail
        self.stats = stats or {}


# -- constraint assembly ----------------------------------------------------------------
@dataclass
class _Built:
    problem: ConicProblem
    plan: list[Instance]
    barriers: dict[int, AffinePoly]
    scalars: dict[str, dict[int, float]]
    checks: list[tuple[str, AffinePoly, GramVar]]
    phase_reduced: bool
    inventory: list[dict]


def _scalar_poly(N: int, vec: dict[int, float]) -> AffinePoly:
    return AffinePoly(N, {(0,) * (2 * N): dict(vec)})


def _region_terms(problem: ConicProblem, region: Region, hyper: Hyperparams, cond: str,
                  base_deg: int, label: str, split: bool) -> tuple[AffinePoly, int]:
    """Multiplier combination ``Σ λ_i g_i + Σ μ_j h_j`` and its degree."""
    N = region.dim
    ineqs = list(region.inequalities)
    eqs = list(region.equalities)
    if hyper.sphere_encoding == "inequalities":
        ineqs += [h for h in eqs] + [-h for h in eqs]
        eqs = []
    override = hyper.multiplier_degree.get(cond)
    out = AffinePoly(N)
    top = base_deg
    lam_degs = []
    for g in ineqs:
        if override is not None:
            m = override
        else:
            m = max(0, base_deg - g.degree)
            m += m % 2
        lam_degs.append(m)
        top = max(top, m + g.degree)
    for i, (g, m) in enumerate(zip(ineqs, lam_degs)):
        lam, _ = hsos_multiplier(problem, N, m, f"{label}.lam{i}", split)
        out += lam.mul_poly(g)
    for j, h in enumerate(eqs):
        mu = free_cf_poly(problem, N, max(0, top - h.degree), f"{label}.mu{j}", split)
        out += mu.mul_poly(h)
    return out, top


def build_constraints(system: QSystem, hyper: Hyperparams) -> _Built:
    hyper.validate()
    N = system.dim
    sched = system.schedule
    problem = ConicProblem()
    prune = False
    if hyper.prune_k1_gamma0:
        if hyper.k == 1 and hyper.gamma == 0 and hyper.objective == "feasibility":
            prune = True
        else:
            warnings.warn("pruning of step conditions only applies when k == 1 and gamma == 0; ignored")
    plan = phase_plan(sched, hyper.k, prune)
    split = hyper.phase_symmetry == "auto" and phase_invariant(system)

    barriers = {ph: free_cf_poly(problem, N, hyper.degree, f"B[{sched.phase_name(ph)}]", split)
                for ph in range(sched.n_phases)}
    scalars: dict[str, dict[int, float]] = {}
    if hyper.objective == "min_eps_gamma":
        ev, gv = problem.new_var("epsilon"), problem.new_var("gamma")
        problem.add_nonneg(ev)
        problem.add_nonneg(gv)
        scalars["epsilon"], scalars["gamma"] = {ev: 1.0}, {gv: 1.0}
    else:
        scalars["epsilon"], scalars["gamma"] = {CONST: hyper.epsilon}, {CONST: hyper.gamma}
    if hyper.maximize_d:
        dv = problem.new_var("d")
        scalars["d"] = {dv: 1.0}
        problem.add_block(PSDBlock(1, [(0, 0, -1, hyper.d_cap), (0, 0, dv, -1.0)], "d<=cap"))
    else:
        scalars["d"] = {CONST: hyper.d}
    if hyper.maximize_d or hyper.objective == "min_eps_gamma":
        entries = [(0, 0, -1, -hyper.d_margin)]
        for name, sign in (("d", 1.0), ("epsilon", -hyper.k), ("gamma", -hyper.k)):
            for v, c in scalars[name].items():
                entries.append((0, 0, v, sign * c))
        problem.add_block(PSDBlock(1, entries, "d-k(eps+gamma)>=margin"))
    objective: dict[int, float] = {}
    if hyper.objective == "min_eps_gamma":
        for name in ("epsilon", "gamma"):
            objective.update({v: 1.0 for v in scalars[name]})
    if hyper.maximize_d:
        objective.update({v: -1.0 for v in scalars["d"]})
    problem.set_objective(objective)

    if not system.unsafe.inequalities:
        warnings.warn("unsafe region has no inequalities; safety is vacuous and unsafe conditions are skipped")

    compose_cache: dict = {}
    checks = []
    inventory = []
    for inst in plan:
        if inst.cond == "b" and not system.unsafe.inequalities:
            continue
        label = inst.label(sched)
        B0, B1 = barriers[inst.start], barriers[inst.end]
        if inst.cond == "a":
            expr = -B0
        elif inst.cond == "b":
            expr = B0 - _scalar_poly(N, scalars["d"])
        elif inst.cond == "c":
            W = word_matrix(system, inst.word)
            cache = compose_cache.setdefault(inst.word, {})
            expr = B0 - B0.compose_linear(W, cache) + _scalar_poly(N, scalars["epsilon"])
        elif inst.cond == "d":
            expr = B0 - B1 + _scalar_poly(N, scalars["gamma"])
        else:
            W = word_matrix(system, inst.word)
            cache = compose_cache.setdefault(inst.word, {})
            expr = B0 - B1.compose_linear(W, cache)
        region = condition_region(system, inst.cond)
        mult, top = _region_terms(problem, region, hyper, inst.cond, hyper.degree, label, split)
        total = expr - mult
        slack_deg = math.ceil(max(top, total.degree) / 2)
        gram = match_coefficients(problem, total, basis(N, slack_deg), label, split)
        checks.append((label, total, gram))
        inventory.append({
            "id": label,
            "condition": inst.cond,
            "start": sched.phase_name(inst.start),
            "end": sched.phase_name(inst.end),
            "word": list(inst.word),
            "slack_degree": slack_deg,
            "slack_size": len(gram.basis),
        })
    problem.canonicalize()
    return _Built(problem, plan, barriers, scalars, checks, split, inventory)


def _scalar_value(vec: dict[int, float], x: np.ndarray) -> float:
    return float(sum(c * (1.0 if v == CONST else x[v]) for v, c in vec.items()))


def synthesize(system: QSystem, hyper: Hyperparams, backend: Backend | None = None) -> BarrierCertificate:
    """Run the full pipeline; raises :class:`NoCertificate` when no barrier is found."""
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    built = build_constraints(system, hyper)
    setup = time.perf_counter() - t0
    stats = {"setup_time": setup, **built.problem.stats()}
    log.info("built conic problem: %s", stats)
    try:
        res = solve(built.problem, backend)
    except Infeasible as exc:
        stats["solve_time"] = time.perf_counter() - t0 - setup
        raise NoCertificate("infeasible", str(exc), stats) from None
    except SolverError as exc:
        stats["solve_time"] = time.perf_counter() - t0 - setup
        raise NoCertificate("solver_error", str(exc), stats) from None
    stats["solve_time"] = res.solve_time
    x = res.x
    worst = 0.0
    for label, total, gram in built.checks:
        worst = max(worst, total.value(x).max_abs_diff(gram_to_poly(gram.value(x), gram.basis)))
    if worst > RESIDUAL_TOL:
        raise NoCertificate("solver_error", f"HSOS identity residual {worst:.2e} exceeds {RESIDUAL_TOL}", stats)
    barriers = {ph: b.value(x).hermitian_part() for ph, b in built.barriers.items()}
    sched = system.schedule
    return BarrierCertificate(
        dim=system.dim,
        prefix_len=sched.L,
        cycle_len=sched.p,
        barriers=barriers,
        k=hyper.k,
        epsilon=_scalar_value(built.scalars["epsilon"], x),
        gamma=_scalar_value(built.scalars["gamma"], x),
        d=_scalar_value(built.scalars["d"], x),
        hyperparams=hyper.to_dict(),
        status=f"solved ({res.backend}: {res.status})",
        inventory=built.inventory,
        timestamps={"started": started, "setup_time": round(setup, 4), "solve_time": round(res.solve_time, 4)},
        residual=worst,
    )


def cleanup_poly(p: CPolynomial, drop_tol: float, round_digits: int | None) -> CPolynomial:
    terms = {}
    for key, c in p.items():
        c = 0.5 * (c + np.conj(p.coefficient(conj_key(key))))
        if abs(c) < drop_tol:
            continue
        if round_digits is not None:
            c = complex(round(c.real, round_digits), round(c.imag, round_digits))
        terms[key] = c
    return CPolynomial(p.n, terms)


def cleanup(cert: BarrierCertificate, drop_tol: float = 1e-9, round_digits: int | None = None) -> BarrierCertificate:
    """Symmetrise paired coefficients, drop small ones and optionally round."""
    barriers = {ph: cleanup_poly(b, drop_tol, round_digits) for ph, b in cert.barriers.items()}
    out = BarrierCertificate(**{**cert.__dict__, "barriers": barriers})
    out.hyperparams = {**cert.hyperparams, "cleanup": {"drop_tol": drop_tol, "round_digits": round_digits}}
    return out


def try_synthesize(system: QSystem, hyper: Hyperparams, backend: Backend | None = None) -> tuple[str, Any]:
    """``("solved", cert)`` or ``("unsolved", NoCertificate)``."""
    try:
        return "solved", synthesize(system, hyper, backend)
    except NoCertificate as exc:
        return "unsolved", exc

