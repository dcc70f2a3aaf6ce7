import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbarrier.cases import x_system, xz_system, z_system
from qbarrier.cpoly import CPolynomial, make_key
from qbarrier.hsos import ConfigurationError
from qbarrier.qsystem import QSystem, Schedule, amplitude_at_least, gate, sphere
from qbarrier.synth import (
    BarrierCertificate,
    Hyperparams,
    NoCertificate,
    build_constraints,
    cleanup,
    cleanup_poly,
    phase_plan,
    synthesize,
    try_synthesize,
)

from .helpers import unit_vectors

Z_HYPER = dict(k=1, epsilon=0.01, gamma=0.01, degree=2)


# -- hyperparameters ---------------------------------------------------------------------
def test_default_d_exceeds_bound():
    h = Hyperparams(k=2, epsilon=0.01, gamma=0.02)
    assert h.d == pytest.approx(2 * 0.03 + 0.01)


@pytest.mark.parametrize("kwargs, field", [
    (dict(k=0), "k"),
    (dict(epsilon=-1), "epsilon"),
    (dict(gamma=-0.1), "gamma"),
    (dict(k=1, epsilon=0.01, gamma=0.01, d=0.02), "d"),
    (dict(degree=3), "degree"),
    (dict(multiplier_degree={"q": 2}), "multiplier_degree.q"),
    (dict(multiplier_degree={"a": 1}), "multiplier_degree.a"),
])
def test_hyperparams_invalid(kwargs, field):
    with pytest.raises(ConfigurationError) as exc:
        Hyperparams(**kwargs)
    assert str(exc.value).startswith(field)


def test_hyperparams_unknown_field():
    with pytest.raises(ConfigurationError, match="unknown"):
        Hyperparams.from_dict({"kk": 1})


def test_hyperparams_round_trip():
    h = Hyperparams(k=2, epsilon=0.01, gamma=0.0, multiplier_degree={"a": 4})
    assert Hyperparams.from_dict(h.to_dict()) == h


# -- phase plan ------------------------------------------------------------------------------
def counts(plan):
    out = {}
    for inst in plan:
        out[inst.cond] = out.get(inst.cond, 0) + 1
    return out


def test_plan_single_mode_k1():
    plan = phase_plan(Schedule((), (0,)), 1)
    assert counts(plan) == {"a": 1, "b": 1, "c": 1, "d": 1, "e": 1}
    e = [i for i in plan if i.cond == "e"]
    assert e[0].word == (0,) and e[0].start == e[0].end == 0


def test_plan_single_mode_k2_word_repeats():
    e = [i for i in phase_plan(Schedule((), (0,)), 2) if i.cond == "e"]
    assert len(e) == 1 and e[0].word == (0, 0)


def test_plan_alternating_k2():
    plan = phase_plan(Schedule((), (0, 1)), 2)
    assert counts(plan) == {"a": 1, "b": 2, "c": 2, "d": 2, "e": 1}
    e = [i for i in plan if i.cond == "e"]
    assert (e[0].start, e[0].end, e[0].word) == (0, 0, (0, 1))
    d = {(i.start, i.end) for i in plan if i.cond == "d"}
    assert d == {(0, 1), (1, 0)}


def test_plan_prefix_boundary():
    plan = phase_plan(Schedule((2,), (0, 1)), 1)
    d = {(i.start, i.end) for i in plan if i.cond == "d"}
    assert d == {(0, 1), (1, 2), (2, 1)}


def test_prune_drops_step_condition():
    plan = phase_plan(Schedule((), (0,)), 1, prune_step=True)
    assert "c" not in counts(plan)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), max_size=3), st.lists(st.integers(0, 2), min_size=1, max_size=4),
       st.integers(1, 5))
def test_plan_covers_all_times(prefix, cycle, k):
    s = Schedule(tuple(prefix), tuple(cycle))
    plan = phase_plan(s, k)
    c = {(i.start, i.word) for i in plan if i.cond == "c"}
    d = {(i.start, i.end) for i in plan if i.cond == "d"}
    e = {(i.start, i.end, i.word) for i in plan if i.cond == "e"}
    b = {i.start for i in plan if i.cond == "b"}
    assert b == set(range(s.n_phases))
    horizon = 4 * (s.L + s.p * k) + 10
    for t in range(horizon):
        assert (s.phase(t), (s.mode_at(t),)) in c
        assert (s.phase(t), s.phase(t + 1)) in d
        if t % k == 0:
            word = tuple(s.mode_at(t + i) for i in range(k))
            assert (s.phase(t), s.phase(t + k), word) in e
    assert len(e) <= s.L // k + s.p + 1


# -- constraint building -------------------------------------------------------------------
def test_inventory_labels_and_counts():
    built = build_constraints(z_system(1, 0), Hyperparams(**Z_HYPER))
    assert [row["id"] for row in built.inventory] == ["4a_cycle0", "4b_cycle0", "4c_cycle0",
                                                     "4d_cycle0_cycle0", "4e_cycle0"]
    assert built.phase_reduced
    built = build_constraints(xz_system(1, 0), Hyperparams(k=2, epsilon=0.01, gamma=0.01))
    assert len(built.inventory) == 8


def test_build_is_deterministic():
    def snapshot():
        p = build_constraints(xz_system(1, 1), Hyperparams(k=2, epsilon=0.01, gamma=0.01)).problem
        return (p.labels, p.eq_rows, p.eq_rhs, [(b.size, b.entries) for b in p.blocks], p.objective)

    assert snapshot() == snapshot()


def test_vacuous_unsafe_warns_and_returns():
    system = QSystem(1, (gate("Z"),), Schedule((), (0,)), amplitude_at_least(1, 0, 0.9), sphere(1))
    with pytest.warns(UserWarning, match="vacuous"):
        cert = synthesize(system, Hyperparams(**Z_HYPER))
    assert set(cert.barriers) == {0}


# -- synthesis ---------------------------------------------------------------------------------
@pytest.fixture(scope="module")
def z_cert():
    return synthesize(z_system(1, 0), Hyperparams(**Z_HYPER))


def test_z_certificate_residual(z_cert):
    assert z_cert.residual <= 1e-6
    assert z_cert.status.startswith("solved")
    assert all(b.is_conjugate_flattening(1e-12) for b in z_cert.barriers.values())


def test_z_certificate_pointwise(z_cert, rng):
    # independent check of the barrier inequalities at sampled states
    B = z_cert.barriers[0]
    Z = np.diag([1.0, -1.0])
    W = unit_vectors(rng, 2, 20000)
    vals = B.evaluate_many(W).real
    p0 = np.abs(W[:, 0]) ** 2
    tol = 1e-5
    assert vals[p0 >= 0.9].max() <= tol
    assert vals[1 - p0 >= 0.2].min() >= z_cert.d - tol
    step = B.evaluate_many(W @ Z.T).real - vals
    assert step.max() <= z_cert.epsilon + tol


def test_certificate_round_trip(z_cert):
    back = BarrierCertificate.loads(z_cert.dumps())
    assert back.barriers[0].allclose(z_cert.barriers[0], 0)
    assert (back.k, back.epsilon, back.gamma, back.d) == (z_cert.k, z_cert.epsilon, z_cert.gamma, z_cert.d)
    assert back.inventory == z_cert.inventory
    assert json.loads(back.dumps()) == json.loads(z_cert.dumps())


def test_certificate_phase_mismatch(z_cert):
    with pytest.raises(ValueError, match="do not match"):
        z_cert.check_matches(xz_system(1, 0))


def test_certificate_rejects_non_cf():
    with pytest.raises(ValueError):
        BarrierCertificate(1, 0, 1, {0: CPolynomial.z(1, 0)}, 1, 0.01, 0.01, 0.03)


def test_certificate_bad_schema(z_cert):
    data = z_cert.to_dict()
    data["schema"] = "other"
    with pytest.raises(ValueError, match="schema"):
        BarrierCertificate.from_dict(data)


def test_prune_flag_agrees_on_feasibility():
    system = z_system(1, 0)
    plain, _ = try_synthesize(system, Hyperparams(k=1, epsilon=0.01, gamma=0.0))
    pruned, _ = try_synthesize(system, Hyperparams(k=1, epsilon=0.01, gamma=0.0, prune_k1_gamma0=True))
    assert plain == pruned == "solved"


def test_prune_flag_ignored_with_gamma():
    with pytest.warns(UserWarning, match="pruning"):
        build_constraints(z_system(1, 0), Hyperparams(**Z_HYPER, prune_k1_gamma0=True))


def test_min_eps_gamma_objective():
    cert = synthesize(z_system(1, 0), Hyperparams(**Z_HYPER, objective="min_eps_gamma"))
    assert cert.epsilon >= -1e-7 and cert.gamma >= -1e-7
    assert cert.d > cert.k * (cert.epsilon + cert.gamma)


def test_maximize_d_respects_cap():
    cert = synthesize(z_system(1, 0), Hyperparams(**Z_HYPER, maximize_d=True, d_cap=5.0))
    assert 0.02 < cert.d <= 5.0 + 1e-6


def test_inequality_sphere_encoding_also_solves():
    status, _ = try_synthesize(z_system(1, 1), Hyperparams(**Z_HYPER, sphere_encoding="inequalities"))
    assert status == "solved"


def test_x_gate_degree2_has_no_certificate():
    status, exc = try_synthesize(x_system(1, 0), Hyperparams(k=2, epsilon=0.01, gamma=0.0, degree=2))
    assert status == "unsolved" and isinstance(exc, NoCertificate)
    assert exc.reason in ("infeasible", "solver_error")


# -- cleanup ------------------------------------------------------------------------------------
def test_cleanup_drops_small_terms():
    k = make_key((1,), (1,))
    p = CPolynomial(1, {k: 1.0, make_key((0,), (0,)): 1e-9})
    assert cleanup_poly(p, 1e-6, None) == CPolynomial(1, {k: 1.0})


def test_cleanup_conjugate_average():
    a, b = make_key((1, 0), (0, 1)), make_key((0, 1), (1, 0))
    p = CPolynomial(2, {a: 0.5 + 1e-8j, b: 0.5 - 3e-8j})
    q = cleanup_poly(p, 1e-12, None)
    assert q.coefficient(a) == pytest.approx(0.5 + 2e-8j, abs=1e-15)
    assert q.coefficient(b) == pytest.approx(0.5 - 2e-8j, abs=1e-15)
    assert q.is_conjugate_flattening(0)


def test_cleanup_keeps_phases_and_rounds(z_cert):
    out = cleanup(z_cert, 1e-6, 3)
    assert set(out.barriers) == set(z_cert.barriers)
    for c in out.barriers[0].terms.values():
        assert round(c.real, 3) == c.real and round(c.imag, 3) == c.imag
    assert out.hyperparams["cleanup"] == {"drop_tol": 1e-6, "round_digits": 3}


def test_cleanup_support_matches_pure_square_form(z_cert):
    # the rounded barrier only uses |z_0|^2, |z_1|^2 and a constant, up to negligible cross terms
    out = cleanup(z_cert, 1e-4, 3)
    allowed = {(0, 0, 0, 0), make_key((1, 0), (1, 0)), make_key((0, 1), (0, 1))}
    assert set(out.barriers[0].keys()) <= allowed
