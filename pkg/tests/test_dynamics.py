"""Engine cross-checks.

The three engines must agree with each other and with the abstract
measurement algebra wherever their models overlap: the noiseless engine
against the POVM composition exactly, the master equation against the
noiseless engine at zero rates, trajectories against the master
equation statistically. Frozen numbers were archived from a dense
superoperator-exponential evaluation of the same model (row-major
vectorization, scipy expm per segment) that shares no code with the
integrators under test.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from parityqsp import (DegenerateOutcomeError, DeviceParams, FockSpaceConfig,
                       InvalidArgumentError, IntegratorFailure,
                       analytic_phases, cat_reference, coherent_state,
                       fidelity, idle_schedule, joint_state, lindblad_evolve,
                       measure_qubit, propagate_unitary, qsp_povm,
                       run_cat_experiment, schedule_cat, trajectory_run)
from parityqsp.fock_space import number_diag

QUIET = replace(DeviceParams(), k_c=0.0, dphi_rel=0.0)
SILENT = replace(QUIET, gamma_c=0.0, gamma_q=0.0, gamma_qphi=0.0,
                 gamma_cq=0.0, gamma_qc=0.0, gamma_c_delta=0.0)


def test_unitary_engine_equals_povm_algebra():
    # two repetitions of the pulse program against the two-round
    # measurement composition: same success amplitude, exactly
    r, nbar, dim = 3, 4.0, 32
    res = run_cat_experiment(r, nbar, repeats=2, engine="unitary",
                             params=QUIET, dim=dim, processing_mode="ideal")
    povm = qsp_povm(analytic_phases(r), r, 0, FockSpaceConfig(dim))
    amp = povm.kraus["10"] @ coherent_state(nbar, dim)
    p_povm = float(np.vdot(amp, amp).real)
    assert abs(res.p_success - p_povm) < 1e-12
    target, _ = cat_reference(r, nbar, dim)
    f_povm = fidelity(amp / np.linalg.norm(amp), target)
    assert abs(res.fidelity - f_povm) < 1e-12


def test_noiseless_frozen_point():
    res = run_cat_experiment(4, 10.0, engine="unitary", params=QUIET, dim=64)
    assert abs(res.p_success - 0.2520102532971056) < 1e-10
    assert abs(res.fidelity - 0.9958412621212557) < 1e-10


def test_lindblad_frozen_gold_point():
    res = run_cat_experiment(2, 2.0, engine="lindblad", params=QUIET,
                             dim=16, channels=["cavity_decay"])
    assert abs(res.p_success - 0.5634653091688693) < 1e-7
    assert abs(res.fidelity - 0.9504786348538424) < 1e-7


def test_lindblad_zero_rates_equals_unitary():
    for processing in ("rabi", "ideal"):
        uni = run_cat_experiment(3, 3.0, engine="unitary", params=SILENT,
                                 dim=24, processing_mode=processing)
        lin = run_cat_experiment(3, 3.0, engine="lindblad", params=SILENT,
                                 dim=24, processing_mode=processing)
        assert abs(uni.p_success - lin.p_success) < 1e-9
        assert abs(uni.fidelity - lin.fidelity) < 1e-9


def test_lindblad_preserves_trace_unconditioned():
    sched = schedule_cat(2, 0, 1, DeviceParams(), 3.0)
    dim = 24
    psi = joint_state(0, coherent_state(3.0, dim))
    rho = np.outer(psi, psi.conj())
    out = lindblad_evolve(sched, rho)
    assert abs(np.trace(out).real - 1) < 1e-6
    assert np.max(np.abs(out - out.conj().T)) < 1e-10


def test_idle_decay_keeps_coherent_form():
    # pure photon loss: alpha(t) = alpha e^{-gamma t / 2}, exactly
    dev = replace(SILENT, gamma_c=QUIET.gamma_c)
    t = 5e-3
    dim = 24
    nbar = 4.0
    sched = idle_schedule(t, dev)
    psi = joint_state(0, coherent_state(nbar, dim))
    rho = lindblad_evolve(sched, np.outer(psi, psi.conj()), dt_max=2e-5)
    n_op = np.kron(np.eye(2), np.diag(number_diag(dim)))
    n_mean = np.trace(n_op @ rho).real
    assert abs(n_mean / (nbar * math.exp(-dev.gamma_c * t)) - 1) < 1e-3
    ref = joint_state(0, coherent_state(nbar * math.exp(-dev.gamma_c * t), dim))
    assert np.vdot(ref, rho @ ref).real > 1 - 1e-4


def test_trajectory_zero_rates_matches_unitary():
    uni = run_cat_experiment(2, 2.0, engine="unitary", params=SILENT, dim=16,
                             processing_mode="ideal")
    tra = run_cat_experiment(2, 2.0, engine="trajectory", params=SILENT,
                             dim=16, processing_mode="ideal", seed=5,
                             n_traj=200)
    # without jumps every trajectory is the pure-state branch
    assert abs(tra.p_success - uni.p_success) < 3 * tra.p_success_se + 1e-12
    assert abs(tra.fidelity - uni.fidelity) < 1e-9
    assert tra.n_trajectories == 200


def test_trajectory_seed_reproducibility():
    kwargs = dict(engine="trajectory", params=QUIET, dim=16, seed=42,
                  n_traj=150, channels=["cavity_decay"])
    a = run_cat_experiment(2, 2.0, **kwargs)
    b = run_cat_experiment(2, 2.0, **kwargs)
    assert a.p_success == b.p_success
    assert a.fidelity == b.fidelity
    assert a.outcomes == b.outcomes


def test_trajectory_agrees_with_lindblad():
    lin = run_cat_experiment(2, 2.0, engine="lindblad", params=QUIET,
                             dim=16, channels=["cavity_decay"])
    tra = run_cat_experiment(2, 2.0, engine="trajectory", params=QUIET,
                             dim=16, channels=["cavity_decay"], seed=11,
                             n_traj=600)
    assert abs(tra.p_success - lin.p_success) < 3 * tra.p_success_se
    assert abs(tra.fidelity - lin.fidelity) < 3 * tra.fidelity_se + 5e-4


def test_trajectory_run_records():
    sched = schedule_cat(2, 0, 1, QUIET, 2.0)
    psi = joint_state(0, coherent_state(2.0, 16))
    recs = trajectory_run(sched, psi, n_traj=50, seed=3)
    assert len(recs) == 50
    for rec in recs:
        assert rec.outcomes in ("0", "1")
        assert isinstance(rec.success, bool)
    assert any(rec.jumps for rec in recs)  # default rates do jump sometimes


def test_propagate_unitary_norm():
    sched = schedule_cat(3, 1, 1, SILENT, 3.0)
    psi = joint_state(0, coherent_state(3.0, 24))
    out = propagate_unitary(sched, psi)
    assert abs(np.linalg.norm(out) - 1) < 1e-12


def test_measure_qubit_branches():
    cav = coherent_state(2.0, 16)
    psi = (joint_state(0, cav) * 0.6 + joint_state(1, cav) * 0.8)
    both = measure_qubit(psi)
    assert abs(both["p0"] - 0.36) < 1e-12
    assert abs(both["p1"] - 0.64) < 1e-12
    forced = measure_qubit(psi, outcome=1)
    assert forced["outcome"] == 1
    assert abs(np.linalg.norm(forced["state"]) - 1) < 1e-12
    assert np.allclose(forced["state"][:16], 0)


def test_measure_qubit_degenerate_branch():
    psi = joint_state(0, coherent_state(2.0, 16))
    with pytest.raises(DegenerateOutcomeError):
        measure_qubit(psi, outcome=1)


def test_measure_qubit_sampling_reproducible():
    cav = coherent_state(2.0, 16)
    psi = (joint_state(0, cav) + joint_state(1, cav)) / np.sqrt(2)
    a = measure_qubit(psi, rng=np.random.default_rng(9))
    b = measure_qubit(psi, rng=np.random.default_rng(9))
    assert a["outcome"] == b["outcome"]


def test_run_cat_experiment_validation():
    with pytest.raises(InvalidArgumentError):
        run_cat_experiment(3, 3.0, engine="magic", dim=24)
    with pytest.raises(InvalidArgumentError):
        run_cat_experiment(3, 3.0, engine="trajectory", dim=24)


def test_result_bookkeeping():
    res = run_cat_experiment(3, 3.0, engine="unitary", params=QUIET, dim=24)
    assert abs(sum(res.outcomes.values()) - 1) < 1e-9
    assert abs(sum(res.photon_dist) - 1) < 1e-9
    assert res.leaked_weight < 1e-9
    assert res.total_time > 0
    assert 0 < res.ideal_weight < 1


def test_lindblad_coarse_steps_fail_loudly():
    # a stiff decay rate with whole-segment RK4 steps must trip the
    # trace guard instead of returning a silently wrong state
    hot = replace(DeviceParams(), gamma_c=2e7)
    sched = schedule_cat(2, 0, 1, hot, 8.0)
    psi = joint_state(0, coherent_state(8.0, 48))
    rho = np.outer(psi, psi.conj())
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(IntegratorFailure):
            lindblad_evolve(sched, rho, theta_cap=1e9)
