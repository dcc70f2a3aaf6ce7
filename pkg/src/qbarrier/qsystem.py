"""Gates, schedules, semi-algebraic regions and quantum systems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .cpoly import CPolynomial

UNITARY_TOL = 1e-10
SCHEMA_SYSTEM = "qbarrier.system/1"


class SystemConfigError(ValueError):
    """Malformed system description; the message names the offending field."""


# -- unitary modes -------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class UnitaryMode:
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        M = np.array(self.matrix, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"mode {self.name!r} is not square: shape {M.shape}")
        err = np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0])))
        if err > UNITARY_TOL:
            raise ValueError(f"mode {self.name!r} is not unitary (max |U†U - I| = {err:.2e})")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "UnitaryMode") -> "UnitaryMode":
        return UnitaryMode(self.matrix @ other.matrix, f"{self.name}·{other.name}")

    def __call__(self, w: np.ndarray) -> np.ndarray:
        return self.matrix @ w

    def __eq__(self, other) -> bool:
        return isinstance(other, UnitaryMode) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


_S = 1 / math.sqrt(2)
_GATES = {
    "I": np.eye(2),
    "H": np.array([[_S, _S], [_S, -_S]]),
    "Z": np.array([[1, 0], [0, -1]]),
    "X": np.array([[0, 1], [1, 0]]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
}


def gate(name: str) -> UnitaryMode:
    try:
        return UnitaryMode(_GATES[name], name)
    except KeyError:
        raise ValueError(f"unknown gate {name!r}; known: {sorted(_GATES)}") from None


def identity(n_qubits: int) -> UnitaryMode:
    return UnitaryMode(np.eye(2**n_qubits), "I" if n_qubits == 1 else f"I^{n_qubits}")


def tensor(A: UnitaryMode, B: UnitaryMode) -> UnitaryMode:
    return UnitaryMode(np.kron(A.matrix, B.matrix), f"{A.name}⊗{B.name}")


def tensor_power(A: UnitaryMode, k: int) -> UnitaryMode:
    if k < 1:
        raise ValueError("tensor power needs k >= 1")
    out = A
    for _ in range(k - 1):
        out = tensor(out, A)
    return UnitaryMode(out.matrix, f"{A.name}^⊗{k}" if k > 1 else A.name)


def grover_oracle(n: int, m: int) -> UnitaryMode:
    N = 2**n
    if not 0 <= m < N:
        raise ValueError(f"marked index {m} out of range for {n} qubits")
    diag = np.ones(N)
    diag[m] = -1
    return UnitaryMode(np.diag(diag), f"O{m}")


def grover_diffusion(n: int) -> UnitaryMode:
    # H^n (2|0><0| - I) H^n = 2|+><+| - I
    N = 2**n
    return UnitaryMode(2.0 / N * np.ones((N, N)) - np.eye(N), "D")


# -- schedules -------------------------------------------------------------------
@dataclass(frozen=True)
class Schedule:
    """Eventually periodic: ``prefix`` once, then ``cycle`` forever."""

    prefix: tuple[int, ...] = ()
    cycle: tuple[int, ...] = (0,)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(i) for i in self.prefix))
        object.__setattr__(self, "cycle", tuple(int(i) for i in self.cycle))
        if not self.cycle:
            raise ValueError("schedule cycle must be nonempty")

    @property
    def L(self) -> int:
        return len(self.prefix)

    @property
    def p(self) -> int:
        return len(self.cycle)

    @property
    def n_phases(self) -> int:
        return self.L + self.p

    def phase(self, t: int) -> int:
        """Phase id: ``t`` inside the prefix, ``L + (t - L) mod p`` afterwards."""
        if t < 0:
            raise ValueError("time must be nonnegative")
        return t if t < self.L else self.L + (t - self.L) % self.p

    def next_phase(self, ph: int) -> int:
        return ph + 1 if ph + 1 < self.n_phases else self.L

    def mode_of_phase(self, ph: int) -> int:
        return self.prefix[ph] if ph < self.L else self.cycle[ph - self.L]

    def mode_at(self, t: int) -> int:
        return self.mode_of_phase(self.phase(t))

    def phase_name(self, ph: int) -> str:
        return f"prefix:{ph}" if ph < self.L else f"cycle:{ph - self.L}"

    def parse_phase_name(self, name: str) -> int:
        kind, _, idx = name.partition(":")
        i = int(idx)
        if kind == "prefix" and 0 <= i < self.L:
            return i
        if kind == "cycle" and 0 <= i < self.p:
            return self.L + i
        raise ValueError(f"phase {name!r} does not exist in this schedule")


# -- regions -----------------------------------------------------------------------
def _sphere_poly(n_qubits: int) -> CPolynomial:
    N = 2**n_qubits
    out = CPolynomial.constant(N, -1.0)
    for j in range(N):
        out = out + CPolynomial.modulus_squared(N, j)
    return out


@dataclass(frozen=True)
class Region:
    """``{z : g_i(z) >= 0 for all i, h_j(z) = 0 for all j}``."""

    dim: int
    inequalities: tuple[CPolynomial, ...] = ()
    equalities: tuple[CPolynomial, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        for p in self.inequalities + self.equalities:
            if p.n != self.dim:
                raise ValueError(f"region polynomial has dimension {p.n}, expected {self.dim}")
            if not p.is_conjugate_flattening(1e-10):
                raise ValueError(f"region polynomial {p} is not conjugate-flattening")

    def __and__(self, other: "Region") -> "Region":
        if other.dim != self.dim:
            raise ValueError("cannot intersect regions of different dimension")
        eqs = list(self.equalities)
        for h in other.equalities:
            if not any(h.allclose(e, 1e-14) for e in eqs):
                eqs.append(h)
        ineqs = list(self.inequalities)
        for g in other.inequalities:
            if not any(g.allclose(e, 1e-14) for e in ineqs):
                ineqs.append(g)
        return Region(self.dim, tuple(ineqs), tuple(eqs))

    def has_sphere(self) -> bool:
        s = _sphere_poly(int(math.log2(self.dim)))
        return any(h.allclose(s, 1e-12) or h.allclose(-s, 1e-12) for h in self.equalities)

    def contains(self, w: Sequence[complex], tol: float = 1e-9) -> bool:
        return all(g.evaluate(w).real >= -tol for g in self.inequalities) and all(
            abs(h.evaluate(w)) <= tol for h in self.equalities
        )

    def transform(self, U: np.ndarray) -> "Region":
        """Image ``{U w : w in region}`` for a unitary ``U``."""
        Uh = np.asarray(U).conj().T
        return Region(
            self.dim,
            tuple(g.compose_linear(Uh) for g in self.inequalities),
            tuple(h.compose_linear(Uh) for h in self.equalities),
        )


def _dim(n: int) -> int:
    if n < 1:
        raise ValueError("qubit count must be >= 1")
    return 2**n


def _index(n: int, j: int) -> None:
    if not 0 <= j < 2**n:
        raise ValueError(f"amplitude index {j} out of range for {n} qubits")


def sphere(n: int) -> Region:
    return Region(_dim(n), (), (_sphere_poly(n),))


def _with_sphere(n: int, ineqs: Iterable[CPolynomial]) -> Region:
    return Region(_dim(n), tuple(ineqs), (_sphere_poly(n),))


def amplitude_at_least(n: int, j: int, c: float) -> Region:
    _index(n, j)
    return _with_sphere(n, [CPolynomial.modulus_squared(_dim(n), j) - c])


def amplitude_at_most(n: int, j: int, c: float) -> Region:
    _index(n, j)
    return _with_sphere(n, [c - CPolynomial.modulus_squared(_dim(n), j)])


def amplitude_band(n: int, j: int, lo: float, hi: float) -> Region:
    _index(n, j)
    if lo > hi:
        raise ValueError(f"inverted bounds: {lo} > {hi}")
    m = CPolynomial.modulus_squared(_dim(n), j)
    return _with_sphere(n, [m - lo, hi - m])


def imag_part(N: int, j: int) -> CPolynomial:
    """``Im z_j = (z_j - z̄_j) / (2i)`` as a conjugate-flattening polynomial."""
    return CPolynomial.z(N, j).scale(-0.5j) + CPolynomial.zbar(N, j).scale(0.5j)


def imag_band(n: int, j: int, bound: float) -> Region:
    _index(n, j)
    if bound < 0:
        raise ValueError(f"inverted bounds: imaginary band {bound} < 0")
    im = imag_part(_dim(n), j)
    return _with_sphere(n, [bound - im, im + bound])


def tail_mass_at_least(n: int, j: int, c: float) -> Region:
    _index(n, j)
    N = _dim(n)
    tail = CPolynomial.constant(N, -c)
    for k in range(N):
        if k != j:
            tail = tail + CPolynomial.modulus_squared(N, k)
    return _with_sphere(n, [tail])


BUILDERS = {
    "sphere": sphere,
    "amplitude_at_least": amplitude_at_least,
    "amplitude_at_most": amplitude_at_most,
    "amplitude_band": amplitude_band,
    "imag_band": imag_band,
    "tail_mass_at_least": tail_mass_at_least,
}


# -- systems ----------------------------------------------------------------------
@dataclass(frozen=True)
class QSystem:
    n_qubits: int
    modes: tuple[UnitaryMode, ...]
    schedule: Schedule
    initial: Region
    unsafe: Region
    state_space: Region | None = None
    name: str = ""

    def __post_init__(self):
        N = 2**self.n_qubits
        object.__setattr__(self, "modes", tuple(self.modes))
        for i, m in enumerate(self.modes):
            if m.dim != N:
                raise ValueError(f"mode {i} has dimension {m.dim}, expected {N}")
        for i in self.schedule.prefix + self.schedule.cycle:
            if not 0 <= i < len(self.modes):
                raise ValueError(f"schedule references missing mode {i}")
        base = sphere(self.n_qubits)
        ss = base if self.state_space is None else self.state_space & base
        object.__setattr__(self, "state_space", ss)
        object.__setattr__(self, "initial", self.initial & ss)
        object.__setattr__(self, "unsafe", self.unsafe & ss)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def mode_matrix(self, t: int) -> np.ndarray:
        return self.modes[self.schedule.mode_at(t)].matrix


def step(system: QSystem, t: int, w: Sequence[complex]) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    if w.shape[-1] != system.dim:
        raise ValueError(f"state has dimension {w.shape[-1]}, expected {system.dim}")
    U = system.mode_matrix(t)
    return w @ U.T if w.ndim > 1 else U @ w


def circuit_to_system(groups: Sequence[UnitaryMode], initial: Region, unsafe: Region,
                      name: str = "") -> QSystem:
    """Circuit of gate groups applied once each, followed by identity forever."""
    if not groups:
        raise ValueError("circuit needs at least one gate group")
    N = groups[0].dim
    modes: list[UnitaryMode] = []
    prefix = []
    for g in groups:
        if g.dim != N:
            raise ValueError(f"gate group {g.name!r} has dimension {g.dim}, expected {N}")
        if g not in modes:
            modes.append(g)
        prefix.append(modes.index(g))
    ident = UnitaryMode(np.eye(N), "I")
    if ident not in modes:
        modes.append(ident)
    n = int(round(math.log2(N)))
    return QSystem(n, tuple(modes), Schedule(tuple(prefix), (modes.index(ident),)), initial, unsafe, name=name)


# -- JSON-compatible descriptions ------------------------------------------------------
def _fail(path: str, msg: str):
    raise SystemConfigError(f"{path}: {msg}")


def parse_mode(expr: Any, n: int, path: str = "modes") -> UnitaryMode:
    try:
        if isinstance(expr, str):
            return gate(expr)
        if not isinstance(expr, dict) or len(expr) - ("name" in expr) != 1:
            _fail(path, "mode must be a gate name or an object with exactly one constructor")
        name = expr.get("name")
        kind, arg = next((k, v) for k, v in expr.items() if k != "name")
        if kind == "gate":
            out = gate(arg)
        elif kind == "tensor":
            parts = [parse_mode(a, n, f"{path}.tensor[{i}]") for i, a in enumerate(arg)]
            out = parts[0]
            for q in parts[1:]:
                out = tensor(out, q)
        elif kind == "tensor_power":
            base, k = arg
            out = tensor_power(parse_mode(base, n, f"{path}.tensor_power[0]"), int(k))
        elif kind == "grover_oracle":
            out = grover_oracle(n, int(arg["m"] if isinstance(arg, dict) else arg))
        elif kind == "grover_diffusion":
            out = grover_diffusion(n)
        elif kind == "product":
            parts = [parse_mode(a, n, f"{path}.product[{i}]") for i, a in enumerate(arg)]
            out = parts[0]
            for q in parts[1:]:
                out = out @ q
        elif kind == "matrix":
            M = np.array([[complex(*e) if isinstance(e, (list, tuple)) else complex(e) for e in row] for row in arg])
            out = UnitaryMode(M, "M")
        else:
            _fail(path, f"unknown mode constructor {kind!r}")
        return UnitaryMode(out.matrix, name) if name else out
    except SystemConfigError:
        raise
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        _fail(path, str(exc))


def parse_region(items: Any, n: int, path: str) -> Region:
    if not isinstance(items, list):
        _fail(path, "region must be a list of constraints")
    N = 2**n
    region = sphere(n)
    for i, item in enumerate(items):
        p = f"{path}[{i}]"
        if not isinstance(item, dict):
            _fail(p, "constraint must be an object")
        try:
            if "builder" in item:
                params = {k: v for k, v in item.items() if k != "builder"}
                fn = BUILDERS.get(item["builder"])
                if fn is None:
                    _fail(p, f"unknown builder {item['builder']!r}")
                js = range(N) if params.get("j") == "all" else [params.get("j")]
                for j in js:
                    kw = dict(params)
                    if "j" in kw:
                        kw["j"] = int(j)
                    region = region & fn(n, **kw)
            elif "poly" in item:
                poly = CPolynomial.from_records(N, item["poly"])
                kind = item.get("type", "ineq")
                if kind == "ineq":
                    region = region & Region(N, (poly,))
                elif kind == "eq":
                    region = region & Region(N, (), (poly,))
                else:
                    _fail(p, f"type must be 'ineq' or 'eq', got {kind!r}")
            else:
                _fail(p, "constraint needs 'builder' or 'poly'")
        except SystemConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            _fail(p, str(exc))
    return region


def system_from_dict(data: dict) -> QSystem:
    if not isinstance(data, dict):
        _fail("system", "must be an object")
    schema = data.get("schema", SCHEMA_SYSTEM)
    if schema != SCHEMA_SYSTEM:
        _fail("schema", f"unsupported schema {schema!r}")
    n = data.get("n_qubits")
    if not isinstance(n, int) or n < 1:
        _fail("n_qubits", "must be a positive integer")
    modes_raw = data.get("modes")
    if not isinstance(modes_raw, list) or not modes_raw:
        _fail("modes", "must be a nonempty list")
    modes = [parse_mode(m, n, f"modes[{i}]") for i, m in enumerate(modes_raw)]
    for i, m in enumerate(modes):
        if m.dim != 2**n:
            _fail(f"modes[{i}]", f"dimension {m.dim} does not match n_qubits={n}")
    sched = data.get("schedule", {})
    try:
        schedule = Schedule(tuple(sched.get("prefix", ())), tuple(sched.get("cycle", ())))
    except (ValueError, TypeError, AttributeError) as exc:
        _fail("schedule", str(exc))
    for i in schedule.prefix + schedule.cycle:
        if not 0 <= i < len(modes):
            _fail("schedule", f"references missing mode {i}")
    regions = data.get("regions", {})
    if "initial" not in regions or "unsafe" not in regions:
        _fail("regions", "needs both 'initial' and 'unsafe'")
    initial = parse_region(regions["initial"], n, "regions.initial")
    unsafe = parse_region(regions["unsafe"], n, "regions.unsafe")
    state = parse_region(regions.get("state_space", []), n, "regions.state_space")
    return QSystem(n, tuple(modes), schedule, initial, unsafe, state, name=str(data.get("name", "")))


def _region_to_list(r: Region) -> list[dict]:
    out = [{"poly": g.to_records(), "type": "ineq"} for g in r.inequalities]
    out += [{"poly": h.to_records(), "type": "eq"} for h in r.equalities]
    return out


def system_to_dict(system: QSystem) -> dict:
    """Explicit description (matrices and polynomial term lists)."""
    return {
        "schema": SCHEMA_SYSTEM,
        "name": system.name,
        "n_qubits": system.n_qubits,
        "modes": [
            {"name": m.name, "matrix": [[[float(e.real), float(e.imag)] for e in row] for row in m.matrix]}
            for m in system.modes
        ],
        "schedule": {"prefix": list(system.schedule.prefix), "cycle": list(system.schedule.cycle)},
        "regions": {
            "initial": _region_to_list(system.initial),
            "unsafe": _region_to_list(system.unsafe),
            "state_space": _region_to_list(system.state_space),
        },
    }
