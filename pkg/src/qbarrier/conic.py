"""Real conic programs with PSD blocks and affine equalities, plus solver backends.

A :class:`ConicProblem` has real decision variables ``x``, a list of symmetric
PSD blocks whose entries are affine in ``x``, affine equalities ``A x = b`` and
a linear objective (minimised).  Backends translate it to a concrete solver.
"""

from __future__ import annotations

import abc
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

PSD_ACCEPT_TOL = 1e-7
EQ_ACCEPT_TOL = 1e-6


class SolverError(RuntimeError):
    """Numerical breakdown, iteration limit or an inaccurate solution."""


class Infeasible(RuntimeError):
    """The backend certified that no feasible point exists."""


@dataclass
class PSDBlock:
    """Symmetric ``size x size`` matrix ``M(x)`` constrained PSD.

    ``entries`` holds ``(i, j, var, coef)`` with ``i <= j``; ``var == -1`` is
    the constant part.  Several records for the same position add up.
    """

    size: int
    entries: list[tuple[int, int, int, float]] = field(default_factory=list)
    label: str = ""

    def matrix(self, x: np.ndarray) -> np.ndarray:
        M = np.zeros((self.size, self.size))
        for i, j, var, coef in self.entries:
            val = coef if var < 0 else coef * x[var]
            M[i, j] += val
            if i != j:
                M[j, i] += val
        return M


@dataclass
class SolveResult:
    x: np.ndarray
    status: str
    solve_time: float
    backend: str
    message: str = ""


class ConicProblem:
    def __init__(self) -> None:
        self.labels: list[str] = []
        self.blocks: list[PSDBlock] = []
        self.eq_rows: list[dict[int, float]] = []
        self.eq_rhs: list[float] = []
        self.eq_labels: list[str] = []
        self.objective: dict[int, float] = {}

    @property
    def n_vars(self) -> int:
        return len(self.labels)

    def new_var(self, label: str = "") -> int:
        self.labels.append(label)
        return len(self.labels) - 1

    def new_vars(self, count: int, label: str = "") -> list[int]:
        return [self.new_var(f"{label}[{i}]") for i in range(count)]

    def add_equality(self, row: dict[int, float], rhs: float, label: str = "") -> None:
        row = {v: float(c) for v, c in row.items() if c != 0.0}
        self.eq_rows.append(row)
        self.eq_rhs.append(float(rhs))
        self.eq_labels.append(label)

    def add_block(self, block: PSDBlock) -> PSDBlock:
        self.blocks.append(block)
        return block

    def add_nonneg(self, var: int, label: str = "") -> None:
        self.add_block(PSDBlock(1, [(0, 0, var, 1.0)], label or f"{self.labels[var]}>=0"))

    def set_objective(self, coeffs: dict[int, float]) -> None:
        self.objective = {v: float(c) for v, c in coeffs.items() if c}

    # -- checks ------------------------------------------------------------
    def equality_matrix(self) -> tuple[sp.csr_matrix, np.ndarray]:
        rows, cols, vals = [], [], []
        for r, row in enumerate(self.eq_rows):
            for v, c in row.items():
                rows.append(r)
                cols.append(v)
                vals.append(c)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.eq_rows), self.n_vars))
        return A, np.asarray(self.eq_rhs, dtype=float)

    def equality_residual(self, x: np.ndarray) -> float:
        if not self.eq_rows:
            return 0.0
        A, b = self.equality_matrix()
        return float(np.max(np.abs(A @ x - b)))

    def min_block_eigenvalue(self, x: np.ndarray) -> float:
        return min(
            (float(np.linalg.eigvalsh(b.matrix(x))[0]) for b in self.blocks),
            default=math.inf,
        )

    def inconsistent_rows(self) -> list[str]:
        """Labels of rows that are structurally contradictory.

        Rows are normalised (sorted, leading coefficient 1); an empty row with
        non-zero right-hand side, or two equal rows with different right-hand
        sides, cannot be satisfied by any ``x``.
        """
        seen: dict[tuple, float] = {}
        bad = []
        for row, rhs, label in zip(self.eq_rows, self.eq_rhs, self.eq_labels):
            if not row:
                if abs(rhs) > EQ_ACCEPT_TOL:
                    bad.append(label)
                continue
            items = sorted(row.items())
            lead = items[0][1]
            key = tuple((v, round(c / lead, 12)) for v, c in items)
            r = rhs / lead
            if key in seen and abs(seen[key] - r) > EQ_ACCEPT_TOL:
                bad.append(label)
            seen.setdefault(key, r)
        return bad

    def canonicalize(self) -> None:
        """Drop empty ``0 = 0`` rows and exact duplicates (in place)."""
        seen = set()
        rows, rhs_out, labels = [], [], []
        for row, rhs, label in zip(self.eq_rows, self.eq_rhs, self.eq_labels):
            if not row and abs(rhs) <= EQ_ACCEPT_TOL:
                continue
            key = (tuple(sorted(row.items())), rhs)
            if key in seen:
                continue
            seen.add(key)
            rows.append(row)
            rhs_out.append(rhs)
            labels.append(label)
        self.eq_rows, self.eq_rhs, self.eq_labels = rows, rhs_out, labels

    def stats(self) -> dict:
        return {
            "variables": self.n_vars,
            "equalities": len(self.eq_rows),
            "psd_blocks": len(self.blocks),
            "largest_block": max((b.size for b in self.blocks), default=0),
        }

    # -- text dump ---------------------------------------------------------
    def dump(self, fh: TextIO) -> None:
        fh.write("conic-problem 1\n")
        fh.write(f"vars {self.n_vars}\n")
        for i, label in enumerate(self.labels):
            fh.write(f"var {i} {label or '-'}\n")
        fh.write(f"objective {len(self.objective)}\n")
        for v, c in sorted(self.objective.items()):
            fh.write(f"{v} {c!r}\n")
        fh.write(f"equalities {len(self.eq_rows)}\n")
        for row, rhs, label in zip(self.eq_rows, self.eq_rhs, self.eq_labels):
            fh.write(f"eq {len(row)} {rhs!r} {label or '-'}\n")
            for v, c in sorted(row.items()):
                fh.write(f"{v} {c!r}\n")
        fh.write(f"blocks {len(self.blocks)}\n")
        for b in self.blocks:
            fh.write(f"psd {b.size} {len(b.entries)} {b.label or '-'}\n")
            for i, j, v, c in b.entries:
                fh.write(f"{i} {j} {v} {c!r}\n")

    def dumps(self) -> str:
        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, fh: TextIO) -> "ConicProblem":
        lines = iter(fh.read().splitlines())

        def fields(expect: str) -> list[str]:
            parts = next(lines).split(" ")
            if parts[0] != expect:
                raise ValueError(f"expected '{expect}', got '{parts[0]}'")
            return parts[1:]

        if fields("conic-problem") != ["1"]:
            raise ValueError("unsupported dump version")
        prob = cls()
        n = int(fields("vars")[0])
        for _ in range(n):
            f = fields("var")
            label = " ".join(f[1:])
            prob.labels.append("" if label == "-" else label)
        for _ in range(int(fields("objective")[0])):
            v, c = next(lines).split()
            prob.objective[int(v)] = float(c)
        for _ in range(int(fields("equalities")[0])):
            f = fields("eq")
            row = {}
            for _ in range(int(f[0])):
                v, c = next(lines).split()
                row[int(v)] = float(c)
            label = " ".join(f[2:])
            prob.eq_rows.append(row)
            prob.eq_rhs.append(float(f[1]))
            prob.eq_labels.append("" if label == "-" else label)
        for _ in range(int(fields("blocks")[0])):
            f = fields("psd")
            entries = []
            for _ in range(int(f[1])):
                i, j, v, c = next(lines).split()
                entries.append((int(i), int(j), int(v), float(c)))
            label = " ".join(f[2:])
            prob.blocks.append(PSDBlock(int(f[0]), entries, "" if label == "-" else label))
        return prob

    @classmethod
    def loads(cls, text: str) -> "ConicProblem":
        return cls.load(io.StringIO(text))


# -- backends ---------------------------------------------------------------
@dataclass
class RawOutcome:
    status: str  # "solved" | "infeasible" | "error"
    x: np.ndarray | None
    message: str = ""


class Backend(abc.ABC):
    name = "abstract"

    @abc.abstractmethod
    def run(self, problem: ConicProblem) -> RawOutcome:
        """Solve ``problem``; must be safe to call concurrently on distinct problems."""


def _svec_index_upper_colmajor(i: int, j: int) -> int:
    return j * (j + 1) // 2 + i


class ClarabelBackend(Backend):
    name = "clarabel"

    def __init__(self, max_iter: int = 400, tol: float = 1e-9, verbose: bool = False):
        self.max_iter = max_iter
        self.tol = tol
        self.verbose = verbose

    def run(self, problem: ConicProblem) -> RawOutcome:
        import clarabel

        n = problem.n_vars
        rows, cols, vals = [], [], []
        b: list[float] = []
        cones = []
        r0 = 0
        for row, rhs in zip(problem.eq_rows, problem.eq_rhs):
            for v, c in row.items():
                rows.append(r0)
                cols.append(v)
                vals.append(c)
            b.append(rhs)
            r0 += 1
        if problem.eq_rows:
            cones.append(clarabel.ZeroConeT(len(problem.eq_rows)))
        for block in problem.blocks:
            m = block.size
            if m == 1:
                length = 1
                cones.append(clarabel.NonnegativeConeT(1))
            else:
                length = m * (m + 1) // 2
                cones.append(clarabel.PSDTriangleConeT(m))
            local = np.zeros(length)
            for i, j, v, c in block.entries:
                i, j = min(i, j), max(i, j)
                idx = _svec_index_upper_colmajor(i, j) if m > 1 else 0
                s = 1.0 if i == j else math.sqrt(2.0)
                if v < 0:
                    local[idx] += s * c
                else:
                    rows.append(r0 + idx)
                    cols.append(v)
                    vals.append(-s * c)
            b.extend(local.tolist())
            r0 += length
        A = sp.csc_matrix((vals, (rows, cols)), shape=(r0, n))
        q = np.zeros(n)
        for v, c in problem.objective.items():
            q[v] = c
        P = sp.csc_matrix((n, n))
        settings = clarabel.DefaultSettings()
        settings.verbose = self.verbose
        settings.max_iter = self.max_iter
        settings.tol_gap_abs = self.tol
        settings.tol_gap_rel = self.tol
        settings.tol_feas = self.tol
        try:
            sol = clarabel.DefaultSolver(P, q, A, np.asarray(b), cones, settings).solve()
        except Exception as exc:  # solver-internal failures (e.g. factorisation)
            return RawOutcome("error", None, f"clarabel raised: {exc}")
        status = str(sol.status)
        x = np.asarray(sol.x, dtype=float)
        if status in ("Solved", "AlmostSolved"):
            return RawOutcome("solved", x, status)
        if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return RawOutcome("infeasible", None, status)
        return RawOutcome("error", x, status)


class SCSBackend(Backend):
    name = "scs"

    def __init__(self, eps: float = 1e-9, max_iters: int = 200_000):
        self.eps = eps
        self.max_iters = max_iters

    def run(self, problem: ConicProblem) -> RawOutcome:
        import scs

        n = problem.n_vars
        rows, cols, vals, b = [], [], [], []
        r0 = 0
        for row, rhs in zip(problem.eq_rows, problem.eq_rhs):
            for v, c in row.items():
                rows.append(r0)
                cols.append(v)
                vals.append(c)
            b.append(rhs)
            r0 += 1
        scalars = [blk for blk in problem.blocks if blk.size == 1]
        matrices = [blk for blk in problem.blocks if blk.size > 1]
        for block in scalars:
            const = 0.0
            for _, _, v, c in block.entries:
                if v < 0:
                    const += c
                else:
                    rows.append(r0)
                    cols.append(v)
                    vals.append(-c)
            b.append(const)
            r0 += 1
        for block in matrices:
            m = block.size
            length = m * (m + 1) // 2
            local = np.zeros(length)
            for i, j, v, c in block.entries:
                lo, hi = max(i, j), min(i, j)  # lower-triangular (row, col)
                idx = hi * m - hi * (hi - 1) // 2 + (lo - hi)
                s = 1.0 if i == j else math.sqrt(2.0)
                if v < 0:
                    local[idx] += s * c
                else:
                    rows.append(r0 + idx)
                    cols.append(v)
                    vals.append(-s * c)
            b.extend(local.tolist())
            r0 += length
        data = {
            "A": sp.csc_matrix((vals, (rows, cols)), shape=(r0, n)),
            "b": np.asarray(b, dtype=float),
            "c": np.array([problem.objective.get(v, 0.0) for v in range(n)]),
        }
        cone = {"z": len(problem.eq_rows), "l": len(scalars), "s": [blk.size for blk in matrices]}
        solver = scs.SCS(data, cone, eps_abs=self.eps, eps_rel=self.eps,
                         max_iters=self.max_iters, verbose=False)
        sol = solver.solve()
        status = sol["info"]["status"]
        if status in ("solved", "solved_inaccurate"):
            return RawOutcome("solved", np.asarray(sol["x"]), status)
        if status in ("infeasible", "infeasible_inaccurate"):
            return RawOutcome("infeasible", None, status)
        return RawOutcome("error", np.asarray(sol["x"]), status)


_default_backend: Backend | None = None


def set_default_backend(backend: Backend) -> None:
    global _default_backend
    _default_backend = backend


def default_backend() -> Backend:
    global _default_backend
    if _default_backend is None:
        _default_backend = ClarabelBackend()
    return _default_backend


BACKENDS = {"clarabel": ClarabelBackend, "scs": SCSBackend}


def make_backend(name: str) -> Backend:
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend '{name}' (choose from {sorted(BACKENDS)})") from None


def solve(problem: ConicProblem, backend: Backend | None = None,
          psd_tol: float = PSD_ACCEPT_TOL, eq_tol: float = EQ_ACCEPT_TOL) -> SolveResult:
    """Solve and validate.

    Returns the assignment when every PSD block has minimum eigenvalue at least
    ``-psd_tol`` and every equality residual is at most ``eq_tol``.  Raises
    :class:`Infeasible` or :class:`SolverError` otherwise.
    """
    backend = backend or default_backend()
    bad = problem.inconsistent_rows()
    if bad:
        raise Infeasible(f"contradictory equality rows: {bad[:3]}")
    t0 = time.perf_counter()
    if problem.n_vars == 0:
        out = RawOutcome("solved", np.zeros(0), "empty")
    else:
        out = backend.run(problem)
    elapsed = time.perf_counter() - t0
    log.debug("backend %s finished with %s in %.2fs", backend.name, out.message, elapsed)
    if out.status == "infeasible":
        raise Infeasible(f"{backend.name}: {out.message}")
    if out.status != "solved":
        raise SolverError(f"{backend.name}: {out.message}")
    x = out.x
    eq_res = problem.equality_residual(x)
    min_eig = problem.min_block_eigenvalue(x)
    if eq_res > eq_tol or min_eig < -psd_tol:
        raise SolverError(
            f"{backend.name} returned {out.message} but the point fails validation "
            f"(equality residual {eq_res:.2e}, min eigenvalue {min_eig:.2e})"
        )
    return SolveResult(x, out.message, elapsed, backend.name)
