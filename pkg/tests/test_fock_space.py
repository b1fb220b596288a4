import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parityqsp import (FockSpaceConfig, InvalidArgumentError, TruncationError,
                       cat_reference, coherent_state, default_dim, fidelity,
                       joint_state, leaked_weight, parity_projector,
                       photon_distribution, ptrace_qubit)
from parityqsp.fock_space import (annihilation, cavity_op, dim_of,
                                  expectation, number_diag, parity_mask,
                                  qubit_op)

CFG = FockSpaceConfig(32)


def test_coherent_state_norm_and_mean():
    psi = coherent_state(4.0, CFG)
    assert abs(np.vdot(psi, psi) - 1) < 1e-12
    nmean = expectation(np.diag(number_diag(CFG)), psi).real
    assert abs(nmean - 4.0) < 1e-9


def test_coherent_state_is_poissonian():
    psi = coherent_state(3.0, CFG)
    pn = np.abs(psi) ** 2
    # ratio test: p(n+1)/p(n) = nbar/(n+1)
    for n in range(8):
        assert abs(pn[n + 1] / pn[n] - 3.0 / (n + 1)) < 1e-9


def test_truncation_guard():
    with pytest.raises(TruncationError):
        coherent_state(30.0, FockSpaceConfig(24))


def test_default_dim_keeps_leakage_small():
    for nbar in (1.0, 10.0, 50.0):
        dim = default_dim(nbar)
        psi = coherent_state(nbar, dim)
        assert leaked_weight(psi) < 1e-9


def test_dim_of_accepts_config_and_int():
    assert dim_of(CFG) == 32
    assert dim_of(32) == 32


def test_annihilation_matrix_elements():
    a = annihilation(CFG)
    n = number_diag(CFG)
    assert np.allclose(a.conj().T @ a, np.diag(n), atol=1e-12)
    psi = coherent_state(2.5, CFG)
    # coherent states are eigenvectors of a up to truncation
    resid = a @ psi - np.sqrt(2.5) * psi
    assert np.linalg.norm(resid) < 1e-5


def test_parity_projectors_resolve_identity():
    for r in (2, 3, 5, 8):
        total = sum(parity_projector(r, k, CFG) for k in range(r))
        assert np.allclose(total, np.eye(32), atol=1e-12)
        for k in range(r):
            p = parity_projector(r, k, CFG)
            assert np.allclose(p @ p, p, atol=1e-12)
            assert np.allclose(p, p.conj().T, atol=1e-12)


def test_parity_mask_matches_projector_diagonal():
    mask = parity_mask(5, 2, CFG)
    diag = np.diag(parity_projector(5, 2, CFG)).real
    assert np.array_equal(mask, diag.astype(bool))
    assert mask[2] and mask[7] and not mask[3]


def test_cat_reference_frozen_weights():
    # class weights from a 50-digit arbitrary-precision Poisson sum
    _, w4 = cat_reference(4, 10.0, 64)
    assert abs(w4 - 0.24998095362104552) < 1e-12
    _, w7 = cat_reference(7, 50.0, 128)
    assert abs(w7 - 0.14285714319524407) < 1e-12


def test_cat_reference_support_and_norm():
    state, weight = cat_reference(3, 6.0, CFG, k=1)
    assert abs(np.vdot(state, state) - 1) < 1e-12
    assert 0 < weight < 1
    off_class = ~parity_mask(3, 1, CFG)
    assert np.max(np.abs(state[off_class])) == 0


def test_joint_state_layout():
    cav = coherent_state(1.5, CFG)
    psi = joint_state(1, cav)
    assert psi.shape == (64,)
    assert np.allclose(psi[:32], 0)
    assert np.allclose(psi[32:], cav)
    with pytest.raises(InvalidArgumentError):
        joint_state(2, cav)


def test_qubit_and_cavity_lifts_commute():
    z = np.diag([1.0, -1.0])
    n = np.diag(number_diag(CFG))
    zq = qubit_op(z, CFG)
    nc = cavity_op(n, CFG)
    assert np.allclose(zq @ nc, nc @ zq, atol=1e-12)
    assert zq.shape == (64, 64)


def test_ptrace_qubit_leaves_the_cavity_state():
    cav = coherent_state(2.0, CFG)
    psi = joint_state(0, cav) / np.sqrt(2) + joint_state(1, cav) / np.sqrt(2)
    red = ptrace_qubit(np.outer(psi, psi.conj()), CFG)
    assert red.shape == (32, 32)
    assert abs(np.trace(red) - 1) < 1e-12
    assert np.allclose(red, np.outer(cav, cav.conj()), atol=1e-12)


def test_photon_distribution_normalization():
    psi = coherent_state(5.0, 64)
    pn = photon_distribution(psi)
    assert pn.shape == (64,)
    assert abs(pn.sum() - 1) < 1e-12
    rho = np.outer(psi, psi.conj())
    assert np.allclose(photon_distribution(rho), pn, atol=1e-12)


def test_fidelity_basics():
    psi = coherent_state(2.0, CFG)
    assert abs(fidelity(psi, psi) - 1) < 1e-12
    assert abs(fidelity(psi, np.exp(0.7j) * psi) - 1) < 1e-12
    other = coherent_state(2.1, CFG)
    f = fidelity(psi, other)
    assert 0 < f < 1


@settings(max_examples=30)
@given(st.integers(0, 1000))
def test_fidelity_symmetric_on_random_states(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=16) + 1j * rng.normal(size=16)
    b = rng.normal(size=16) + 1j * rng.normal(size=16)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-12
    assert fidelity(a, b) <= 1 + 1e-12


def test_cat_reference_empty_class():
    from parityqsp import DegenerateOutcomeError
    with pytest.raises(DegenerateOutcomeError):
        cat_reference(40, 0.0001, 4, k=7)
