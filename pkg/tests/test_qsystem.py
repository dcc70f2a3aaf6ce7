import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbarrier.cpoly import CPolynomial
from qbarrier.qsystem import (
    QSystem,
    Region,
    Schedule,
    SystemConfigError,
    UnitaryMode,
    amplitude_at_least,
    amplitude_band,
    circuit_to_system,
    gate,
    grover_diffusion,
    grover_oracle,
    identity,
    imag_band,
    sphere,
    step,
    system_from_dict,
    system_to_dict,
    tail_mass_at_least,
    tensor,
    tensor_power,
)

from .helpers import random_unitary, unit_vectors

# oracle and diffusion matrices for two qubits and mark 0, with both products,
# and D.O for mark 1, written out entrywise
O_M0 = np.diag([-1.0, 1.0, 1.0, 1.0])
D_2 = 0.5 * np.array([[-1, 1, 1, 1], [1, -1, 1, 1], [1, 1, -1, 1], [1, 1, 1, -1]], dtype=float)
DO_M0 = 0.5 * np.array([[1, 1, 1, 1], [-1, -1, 1, 1], [-1, 1, -1, 1], [-1, 1, 1, -1]], dtype=float)
OD_M0 = 0.5 * np.array([[1, -1, -1, -1], [1, -1, 1, 1], [1, 1, -1, 1], [1, 1, 1, -1]], dtype=float)
DO_M1 = 0.5 * np.array([[-1, -1, 1, 1], [1, 1, 1, 1], [1, -1, -1, 1], [1, -1, 1, -1]], dtype=float)


# -- modes -----------------------------------------------------------------------------
def test_basic_gates_are_unitary_and_correct():
    assert np.array_equal(gate("X").matrix, [[0, 1], [1, 0]])
    assert np.array_equal(gate("Z").matrix, [[1, 0], [0, -1]])
    H = gate("H").matrix
    assert np.allclose(H @ H, np.eye(2))
    assert np.array_equal(gate("CNOT").matrix[2:, 2:], [[0, 1], [1, 0]])


def test_non_unitary_mode_rejected():
    with pytest.raises(ValueError):
        UnitaryMode(np.array([[1, 1], [0, 1]]), "bad")


def test_mode_matrix_is_read_only():
    with pytest.raises(ValueError):
        gate("X").matrix[0, 0] = 5


def test_tensor_power_matches_kron():
    assert np.array_equal(tensor_power(gate("X"), 2).matrix, np.kron(gate("X").matrix, gate("X").matrix))
    assert np.array_equal(tensor(gate("Z"), identity(1)).matrix, np.diag([1, 1, -1, -1]))


def test_grover_matrices_entrywise():
    O0, D = grover_oracle(2, 0).matrix, grover_diffusion(2).matrix
    assert np.array_equal(O0, O_M0)
    assert np.array_equal(D, D_2)
    assert np.array_equal(D @ O0, DO_M0)
    assert np.array_equal(O0 @ D, OD_M0)
    assert np.array_equal(D @ grover_oracle(2, 1).matrix, DO_M1)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_grover_step_reaches_marked_state(m):
    u = np.full(4, 0.5)
    out = grover_diffusion(2).matrix @ grover_oracle(2, m).matrix @ u
    assert np.allclose(out, np.eye(4)[m], atol=1e-12)


def test_grover_geometric_formula_three_qubits():
    n, m = 3, 5
    N = 2**n
    theta = np.arcsin(2 * np.sqrt(N - 1) / N)
    G = grover_diffusion(n).matrix @ grover_oracle(n, m).matrix
    w = np.full(N, 1 / np.sqrt(N))
    for r in range(1, 5):
        w = G @ w
        assert abs(w[m]) == pytest.approx(abs(np.sin((2 * r + 1) / 2 * theta)), abs=1e-12)


# -- schedules --------------------------------------------------------------------------
def test_schedule_phases():
    s = Schedule((2,), (0, 1))
    assert [s.phase(t) for t in range(6)] == [0, 1, 2, 1, 2, 1]
    assert [s.mode_at(t) for t in range(5)] == [2, 0, 1, 0, 1]
    assert s.next_phase(2) == 1
    assert s.phase_name(0) == "prefix:0" and s.phase_name(2) == "cycle:1"
    assert s.parse_phase_name("cycle:1") == 2
    with pytest.raises(ValueError):
        s.parse_phase_name("cycle:5")


def test_empty_cycle_rejected():
    with pytest.raises(ValueError):
        Schedule((0,), ())


# -- regions ----------------------------------------------------------------------------
def test_region_builders_contain_expected_points():
    e0 = np.array([1, 0], dtype=complex)
    e1 = np.array([0, 1], dtype=complex)
    assert amplitude_at_least(1, 0, 0.9).contains(e0)
    assert not amplitude_at_least(1, 0, 0.9).contains(e1)
    assert tail_mass_at_least(1, 0, 0.2).contains(e1)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert amplitude_band(1, 0, 0.49, 0.51).contains(plus)
    assert imag_band(1, 0, 0.1).contains(plus)
    assert not imag_band(1, 0, 0.1).contains(np.array([1j, 0]))


def test_inverted_band_rejected():
    with pytest.raises(ValueError, match="inverted"):
        amplitude_band(1, 0, 0.6, 0.4)


def test_builder_index_out_of_range():
    with pytest.raises(ValueError):
        amplitude_at_least(1, 2, 0.5)


def test_region_rejects_non_cf_polynomial():
    with pytest.raises(ValueError):
        Region(2, (CPolynomial.z(2, 0),))


def test_intersection_dedupes_sphere():
    r = amplitude_at_least(1, 0, 0.9) & sphere(1)
    assert len(r.equalities) == 1 and r.has_sphere()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_transform_is_image(seed):
    rng = np.random.default_rng(seed)
    U = random_unitary(rng, 4)
    R = amplitude_band(2, 1, 0.1, 0.5) & imag_band(2, 0, 0.3)
    image = R.transform(U)
    for w in unit_vectors(rng, 4, 50):
        assert R.contains(w, 1e-9) == image.contains(U @ w, 1e-9)


# -- systems --------------------------------------------------------------------------------
def z_system():
    return QSystem(1, (gate("Z"),), Schedule((), (0,)), amplitude_at_least(1, 0, 0.9), tail_mass_at_least(1, 0, 0.2))


def test_system_regions_carry_sphere():
    s = z_system()
    assert s.initial.has_sphere() and s.unsafe.has_sphere() and s.state_space.has_sphere()


def test_system_rejects_bad_mode_dimension():
    with pytest.raises(ValueError):
        QSystem(2, (gate("Z"),), Schedule((), (0,)), sphere(2), sphere(2))


def test_system_rejects_missing_mode():
    with pytest.raises(ValueError):
        QSystem(1, (gate("Z"),), Schedule((), (1,)), sphere(1), sphere(1))


def test_step_single_and_batched(rng):
    s = QSystem(1, (gate("X"), gate("Z")), Schedule((), (0, 1)), sphere(1), sphere(1))
    W = unit_vectors(rng, 2, 5)
    assert np.allclose(step(s, 0, W[0]), W[0][::-1])
    assert np.allclose(step(s, 1, W), W * np.array([1, -1]))
    assert np.allclose(step(s, 3, W), W * np.array([1, -1]))


def test_step_dimension_error():
    with pytest.raises(ValueError):
        step(z_system(), 0, np.ones(4))


def test_circuit_to_system():
    H, X = gate("H"), gate("X")
    s = circuit_to_system([H, X, H], sphere(1), sphere(1))
    assert s.schedule.prefix == (0, 1, 0)
    assert np.array_equal(s.modes[s.schedule.cycle[0]].matrix, np.eye(2))
    w = np.array([1, 0], dtype=complex)
    for t in range(5):
        w = step(s, t, w)
    assert np.allclose(w, H.matrix @ X.matrix @ H.matrix @ [1, 0])


# -- JSON ------------------------------------------------------------------------------------
def grover_config():
    return {
        "schema": "qbarrier.system/1",
        "name": "grover",
        "n_qubits": 2,
        "modes": [{"grover_oracle": 0}, {"grover_diffusion": True}],
        "schedule": {"cycle": [0, 1]},
        "regions": {
            "initial": [{"builder": "amplitude_band", "j": "all", "lo": 0.249, "hi": 0.251},
                        {"builder": "imag_band", "j": "all", "bound": 0.001**0.5}],
            "unsafe": [{"builder": "amplitude_at_least", "j": 1, "c": 0.9}],
        },
    }


def test_system_from_dict_builders():
    s = system_from_dict(grover_config())
    assert np.array_equal(s.modes[0].matrix, O_M0)
    assert len(s.initial.inequalities) == 16
    assert s.initial.contains(np.full(4, 0.5))


def test_system_dict_round_trip():
    s = system_from_dict(grover_config())
    back = system_from_dict(json.loads(json.dumps(system_to_dict(s))))
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(s.modes, back.modes))
    assert back.schedule == s.schedule
    assert all(g.allclose(h, 1e-15) for g, h in zip(s.initial.inequalities, back.initial.inequalities))


@pytest.mark.parametrize("path, mutate", [
    ("n_qubits", lambda d: d.update(n_qubits=0)),
    ("modes", lambda d: d.update(modes=[])),
    ("modes[0]", lambda d: d["modes"].__setitem__(0, {"gate": "Q"})),
    ("regions.unsafe[0]", lambda d: d["regions"]["unsafe"].__setitem__(0, {"builder": "nope"})),
    ("regions.initial[0]", lambda d: d["regions"]["initial"].__setitem__(
        0, {"builder": "amplitude_band", "j": 0, "lo": 0.6, "hi": 0.4})),
    ("regions", lambda d: d["regions"].pop("unsafe")),
    ("schedule", lambda d: d.update(schedule={"cycle": [3]})),
])
def test_config_errors_name_the_field(path, mutate):
    d = grover_config()
    mutate(d)
    with pytest.raises(SystemConfigError) as exc:
        system_from_dict(d)
    assert str(exc.value).startswith(path)
