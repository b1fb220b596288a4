import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from parityqsp import (InvalidArgumentError, analytic_phases, compose_qsp,
                       expm2, real_protocol, response, rot_x, rot_z)
from parityqsp.qubit_algebra import (PhaseSequence, as_phase_sequence,
                                     compose_qsp_grid, real_protocol_grid)

I2 = np.eye(2)


def test_rot_z_special_values():
    assert np.allclose(rot_z(0.0), I2)
    # e^{i phi Z} convention: +phi on |0>, -phi on |1>
    rz = rot_z(np.pi / 2)
    assert np.allclose(rz, np.diag([1j, -1j]))
    assert np.allclose(rot_z(np.pi), -I2)


def test_rot_x_special_values():
    assert np.allclose(rot_x(0.0), I2)
    rx = rot_x(np.pi / 2)
    assert np.allclose(rx, 1j * np.array([[0, 1], [1, 0]]), atol=1e-15)
    assert np.allclose(rot_x(np.pi), -I2, atol=1e-15)


@given(st.floats(-20, 20))
def test_rotations_are_unitary(angle):
    for mat in (rot_x(angle), rot_z(angle)):
        assert np.allclose(mat @ mat.conj().T, I2, atol=1e-12)


def test_expm2_matches_scipy_on_random_stacks():
    rng = np.random.default_rng(7)
    mats = rng.normal(size=(40, 2, 2)) + 1j * rng.normal(size=(40, 2, 2))
    got = expm2(mats)
    want = np.stack([scipy.linalg.expm(m) for m in mats])
    assert np.max(np.abs(got - want)) < 1e-12


def test_expm2_nilpotent_and_zero():
    # q = 0 branch: the sinh(q)/q series, not the ratio
    nil = np.array([[0.0, 1e-9], [0.0, 0.0]], dtype=complex)
    assert np.allclose(expm2(nil), I2 + nil, atol=1e-18)
    assert np.allclose(expm2(np.zeros((2, 2), dtype=complex)), I2)


def test_expm2_non_normal_input():
    # the no-jump propagator feeds non-hermitian generators
    m = np.array([[0.3 - 0.2j, 1.1], [0.0, -0.5 + 0.4j]])
    assert np.allclose(expm2(m), scipy.linalg.expm(m), atol=1e-13)


def test_compose_qsp_is_the_interleaved_product():
    angles = [0.3, -0.7, 0.1]
    theta = 0.9
    want = rot_z(angles[0])
    for phi in angles[1:]:
        want = want @ rot_x(theta) @ rot_z(phi)
    got = compose_qsp(angles, theta)
    assert np.allclose(got, want, atol=1e-14)


@settings(max_examples=60)
@given(st.lists(st.floats(-3.2, 3.2), min_size=2, max_size=12),
       st.floats(-7.0, 7.0))
def test_compose_qsp_unitary(angles, theta):
    u = compose_qsp(angles, theta)
    assert np.max(np.abs(u @ u.conj().T - I2)) < 1e-11


def test_compose_qsp_grid_matches_pointwise():
    angles = analytic_phases(5)
    thetas = np.linspace(-1.0, 4.0, 17)
    grid = compose_qsp_grid(angles, thetas)
    for i, theta in enumerate(thetas):
        assert np.allclose(grid[i], compose_qsp(angles, theta), atol=1e-13)


@settings(max_examples=40)
@given(st.integers(2, 30), st.floats(-7.0, 7.0))
def test_real_protocol_diagonal_is_real(r, theta):
    u = real_protocol(analytic_phases(r), theta)
    assert abs(u[0, 0].imag) < 1e-10
    assert abs(u[1, 1].imag) < 1e-10


def test_real_protocol_grid_matches_pointwise():
    seq = analytic_phases(4)
    thetas = np.array([0.0, 0.3, np.pi, 2.0])
    grid = real_protocol_grid(seq, thetas)
    for i, theta in enumerate(thetas):
        assert np.allclose(grid[i], real_protocol(seq, theta), atol=1e-13)


def test_response_on_target_class():
    for r in (2, 5, 8):
        u00, u10 = response(r, r, 0, analytic_phases(r))
        assert abs(u00 - 1) < 1e-9
        assert abs(u10) < 1e-9


def test_response_periodic_in_m():
    seq = analytic_phases(6)
    for m in range(6):
        a = response(m, 6, 2, seq)
        b = response(m + 6, 6, 2, seq)
        assert abs(a[0] - b[0]) < 1e-12
        assert abs(a[1] - b[1]) < 1e-12


def test_response_amplitudes_are_normalized():
    seq = analytic_phases(7)
    for m in range(14):
        u00, u10 = response(m, 7, 3, seq)
        assert abs(abs(u00) ** 2 + abs(u10) ** 2 - 1) < 1e-12


def test_midpoint_response_value():
    # r = 2 sequence halfway between the two classes; value frozen from
    # a 50-digit arbitrary-precision evaluation of the same composition.
    u = real_protocol(analytic_phases(2), np.pi / 2)
    assert abs(u[0, 0].real - 0.3326035756124746) < 1e-12


def test_phase_sequence_wrapper():
    seq = as_phase_sequence([0.1, 0.2, 0.1])
    assert isinstance(seq, PhaseSequence)
    assert seq.degree == 2
    assert as_phase_sequence(seq) is seq


def test_empty_angles_rejected():
    with pytest.raises(InvalidArgumentError):
        compose_qsp([], 0.3)
