import math
from dataclasses import replace

import numpy as np
import pytest

from parityqsp import (DeviceParams, FockSpaceConfig, InvalidArgumentError,
                       SingularParametersError, derive_params,
                       hamiltonian_terms, idle_schedule, jump_operators,
                       schedule_cat)

DEV = DeviceParams()
TWO_PI = 2 * math.pi


def test_default_device_is_the_headline_point():
    assert abs(DEV.chi - TWO_PI * 41e3) < 1e-6
    assert abs(DEV.k_c - TWO_PI * 2.0) < 1e-9
    assert DEV.eta == 0.45
    assert abs(DEV.gamma_c - TWO_PI * 3.2) < 1e-9
    # qubit lifetime 300 us, pure dephasing 2/3 of 100 us
    assert abs(1 / DEV.gamma_q - 300e-6) < 1e-12
    assert DEV.dphi_rel == 0.01


def test_derive_params_formulas():
    g, delta, e_c = TWO_PI * 100e6, TWO_PI * 2e9, TWO_PI * 200e6
    dev = derive_params(g, delta, e_c)
    assert abs(dev.chi - g ** 2 * e_c / (delta * (delta - e_c))) < 1e-6
    assert abs(dev.k_c - e_c * (g / delta) ** 4) < 1e-9
    assert abs(dev.eta - 4.5 * e_c / delta) < 1e-12
    assert abs(dev.n_crit - delta ** 2 / (12 * g ** 2)) < 1e-9
    lam2 = (g / delta) ** 2
    assert abs(dev.gamma_cq - lam2 * dev.gamma_q) < 1e-9
    assert abs(dev.gamma_qc - lam2 * dev.gamma_c) < 1e-9
    assert abs(dev.gamma_c_delta - 2 * lam2 * dev.gamma_qphi) < 1e-9


def test_derive_params_singular_inputs():
    with pytest.raises(SingularParametersError):
        derive_params(1.0, 5.0, 5.0)
    with pytest.raises(SingularParametersError):
        derive_params(1.0, 0.0, 5.0)


def test_schedule_shape_and_pattern():
    for r, repeats in [(2, 1), (4, 2), (5, 3)]:
        d = 2 * math.ceil(r / 2)
        sched = schedule_cat(r, 0, repeats, DEV, 10.0)
        assert len(sched.segments) == repeats * (2 * d + 2)
        kinds = [seg.kind for seg in sched.segments]
        assert kinds.count("measure") == repeats
        assert kinds.count("signal") == repeats * d
        assert sched.expected_pattern() == "10101"[:repeats]


def test_signal_segment_timing_and_frame():
    r, k = 6, 2
    sched = schedule_cat(r, k, 1, DEV, 8.0)
    signals = [seg for seg in sched.segments if seg.kind == "signal"]
    for seg in signals:
        assert abs(seg.duration - math.pi / (r * DEV.chi)) < 1e-18
        assert abs(seg.virtual_z - math.pi * k / r) < 1e-15
        assert seg.x_amp == 0.0


def test_rabi_processing_encodes_the_angle():
    sched = schedule_cat(4, 0, 1, DEV, 10.0)
    procs = [seg for seg in sched.segments if seg.kind == "processing"]
    for seg in procs:
        # finite pulse at fixed drive frequency, 1% miscalibration
        angle = seg.x_amp * seg.duration
        assert abs(seg.duration - abs(angle) / DEV.omega_q / (1 + DEV.dphi_rel)) < 1e-20
    total_proc = sum(abs(s.x_amp) * s.duration for s in procs)
    assert total_proc > 0


def test_ideal_processing_is_instantaneous():
    sched = schedule_cat(4, 0, 1, DEV, 10.0, processing_mode="ideal")
    procs = [seg for seg in sched.segments if seg.kind == "processing"]
    angles = [seg.instant_x for seg in procs]
    assert all(seg.duration == 0.0 for seg in procs)
    # palindromic table applied in reverse equals itself
    assert np.allclose(sorted(angles), sorted(np.abs(angles)), atol=1e-15)
    assert abs(sum(angles) - math.pi / 2) < 1e-12


def test_schedule_validation():
    with pytest.raises(InvalidArgumentError):
        schedule_cat(1, 0, 1, DEV, 5.0)
    with pytest.raises(InvalidArgumentError):
        schedule_cat(4, 4, 1, DEV, 5.0)
    with pytest.raises(InvalidArgumentError):
        schedule_cat(4, 0, 0, DEV, 5.0)
    with pytest.raises(InvalidArgumentError):
        schedule_cat(4, 0, 1, DEV, 5.0, processing_mode="magic")


def test_total_time_adds_up():
    sched = schedule_cat(3, 0, 2, DEV, 6.0)
    assert abs(sched.total_time - sum(s.duration for s in sched.segments)) < 1e-18


def test_hamiltonian_terms_shapes():
    cfg = FockSpaceConfig(12)
    terms = hamiltonian_terms(DEV, cfg)
    assert set(terms) == {"chi", "kerr_dressed", "kerr"}
    assert terms["chi"].shape == (24, 24)
    assert terms["kerr"].shape == (12, 12)
    for mat in terms.values():
        assert np.max(np.abs(mat - mat.conj().T)) < 1e-9
    n = np.arange(12.0)
    assert np.allclose(np.diag(terms["kerr"]), DEV.k_c / 2 * n ** 2)


def test_jump_operator_census():
    cfg = FockSpaceConfig(10)
    ops = jump_operators(DEV, cfg)
    assert len(ops) == 5
    quiet = replace(DEV, gamma_qphi=0.0, gamma_c_delta=0.0)
    # dephasing and both dressed channels drop out
    assert len(jump_operators(quiet, cfg)) == 2
    only = jump_operators(DEV, cfg, channels=["qubit_dephasing"])
    assert len(only) == 1
    assert only[0].name == "qubit_dephasing"
    # rate folded as sqrt: Z dephasing operator squared gives the rate
    z = only[0].op
    assert np.allclose(z @ z, DEV.gamma_qphi / 2 * np.eye(20), atol=1e-9)


def test_only_channels_zeroes_the_rest():
    dev = DEV.only_channels(["cavity_decay"])
    assert dev.gamma_c == DEV.gamma_c
    assert dev.gamma_q == 0.0
    assert dev.gamma_qphi == 0.0
    assert dev.gamma_c_delta == 0.0


def test_idle_schedule():
    sched = idle_schedule(2e-3, DEV)
    assert abs(sched.total_time - 2e-3) < 1e-18
    assert all(seg.kind != "measure" for seg in sched.segments)
    disp = idle_schedule(1e-3, DEV, dispersive=True)
    assert any(seg.chi_n != 0 for seg in disp.segments)
