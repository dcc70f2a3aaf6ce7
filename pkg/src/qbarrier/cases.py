"""Case-study jobs: Z gate, X gate, alternating X/Z and Grover.

Each job carries the status the original experiments reported, so the
reproduce command can print expected and obtained statuses side by side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .qsystem import (QSystem, Region, Schedule, amplitude_at_least, amplitude_band, gate, grover_diffusion,
                      grover_oracle, imag_band, sphere, tail_mass_at_least, tensor_power)
from .synth import Hyperparams

SUITES = ("z-gate", "x-gate", "xz-gates", "grover")


@dataclass
class Job:
    suite: str
    experiment: str
    n: int
    target: int
    system: QSystem
    hyper: Hyperparams
    expected: str  # status reported for the original runs
    large: bool = False
    notes: str = ""
    budgets: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return f"{self.suite}/n{self.n}/p{self.target}" if self.suite != "grover" else f"grover/{self.experiment}"


def near_uniform(n: int, err: float, imag: bool = False) -> Region:
    """Every amplitude has ``|z_j|^2`` within ``err`` of ``1/2^n`` (optionally ``|Im z_j| <= sqrt(err)``)."""
    r = sphere(n)
    for j in range(2**n):
        r = r & amplitude_band(n, j, 1 / 2**n - err, 1 / 2**n + err)
        if imag:
            r = r & imag_band(n, j, err**0.5)
    return r


def x_err(n: int) -> float:
    return 1 / 10 ** (n + 1)


# -- systems ---------------------------------------------------------------------------
def z_system(n: int, p: int) -> QSystem:
    Z = tensor_power(gate("Z"), n)
    return QSystem(n, (Z,), Schedule((), (0,)), amplitude_at_least(n, p, 0.9), tail_mass_at_least(n, p, 0.2),
                   name=f"Z^{n} target {p}")


def x_system(n: int, p: int) -> QSystem:
    err = x_err(n)
    X = tensor_power(gate("X"), n)
    return QSystem(n, (X,), Schedule((), (0,)), near_uniform(n, err), amplitude_at_least(n, p, 1 / 2**n + 2 * err),
                   name=f"X^{n} target {p}")


def xz_system(n: int, p: int) -> QSystem:
    X = tensor_power(gate("X"), n)
    Z = tensor_power(gate("Z"), n)
    return QSystem(n, (X, Z), Schedule((), (0, 1)), amplitude_at_least(n, p, 0.9), amplitude_band(n, p, 0.2, 0.8),
                   name=f"X^{n}/Z^{n} target {p}")


def grover_system(variant: str, n: int = 2, m: int = 0, p: int = 1) -> QSystem:
    """Oracle/diffusion alternation, or one of the single-map variants.

    ``"alternating"`` applies O at even and D at odd steps; ``"even"`` applies
    D.O at every step from the initial set; ``"odd"`` applies O.D at every
    step from the image of the initial set under O.
    """
    O, D = grover_oracle(n, m), grover_diffusion(n)
    init = near_uniform(n, x_err(n), imag=True)
    unsafe = amplitude_at_least(n, p, 0.9)
    if variant == "alternating":
        return QSystem(n, (O, D), Schedule((), (0, 1)), init, unsafe, name="Grover O/D")
    if variant == "even":
        return QSystem(n, (D @ O,), Schedule((), (0,)), init, unsafe, name="Grover D.O")
    if variant == "odd":
        return QSystem(n, (O @ D,), Schedule((), (0,)), init.transform(O.matrix), unsafe, name="Grover O.D")
    raise ValueError(f"unknown Grover variant {variant!r}")


# -- suites ------------------------------------------------------------------------------
def z_jobs() -> list[Job]:
    hyper = dict(k=1, epsilon=0.01, gamma=0.01, degree=2)
    return [Job("z-gate", "Z gate", n, p, z_system(n, p), Hyperparams(**hyper), "solved")
            for n in (1, 2) for p in range(2**n)]


def x_jobs() -> list[Job]:
    expected = {(1, 0): "solved", (1, 1): "solved", (2, 0): "solved", (2, 1): "solved",
                (2, 2): "unsolved", (2, 3): "unsolved"}
    return [Job("x-gate", "X gate", n, p, x_system(n, p), Hyperparams(k=2, epsilon=0.01, gamma=0.0, degree=2),
                expected[n, p]) for n in (1, 2) for p in range(2**n)]


def xz_jobs(allow_large: bool = False) -> list[Job]:
    expected = {(2, 2): "unsolved", (3, 0): "killed"}
    jobs = []
    for n, p in [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (2, 3)] + ([(3, 0)] if allow_large else []):
        degree = 4 if n == 2 and p > 0 else 2
        jobs.append(Job("xz-gates", "X and Z gates", n, p, xz_system(n, p),
                        Hyperparams(k=2, epsilon=0.01, gamma=0.01, degree=degree),
                        expected.get((n, p), "solved"), large=n >= 3))
    return jobs


def grover_jobs() -> list[Job]:
    out = []
    for label, variant, k in [("k=1", "alternating", 1), ("k=2", "alternating", 2), ("even", "even", 1),
                              ("odd", "odd", 1)]:
        out.append(Job("grover", label, 2, 1, grover_system(variant),
                       Hyperparams(k=k, epsilon=0.01, gamma=0.01, degree=2), "unsolved"))
    return out


def suite_jobs(name: str, allow_large: bool = False) -> list[Job]:
    if name == "all":
        return [j for s in SUITES for j in suite_jobs(s, allow_large)]
    if name == "z-gate":
        return z_jobs()
    if name == "x-gate":
        return x_jobs()
    if name == "xz-gates":
        return xz_jobs(allow_large)
    if name == "grover":
        return grover_jobs()
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
