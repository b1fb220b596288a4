"""First-order error budget of the repeated measurement.

The engines in dynamics.py integrate the full open-system dynamics;
this module instead expands the conditioned state to a single quantum
jump.  Each jump branch is conjugated by the exact compiled evolution
before and after the jump time, and the jump time is integrated over
the schedule on a trapezoid grid that subdivides every finite-duration
segment.  The integration matters: pinning jumps to segment boundaries
is exact for operators that commute with the signal generator (qubit
dephasing), but photon loss and qubit decay pick up photon-number
dependent phases inside a signal segment, and those phases control how
much of a branch survives the readout.  Everything stays in
per-photon-number 2x2 blocks, so a full per-channel budget costs far
less than one master-equation run.

modified_jump and slot_weights keep the coarser slot picture (one slot
per signal segment), which is where the closed-form products live.
The closed forms assume the schedule was compiled without the cavity
self-Kerr term; the dressed dephasing channels are outside the
single-jump treatment and are never included here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cavity_qed import ProtocolSchedule
from .dynamics import (_apply_instant_psi, _jump_appliers, _rates_of,
                       _segment_blocks, _w_diag)
from .errors import (InvalidArgumentError, InvalidComparisonError,
                     TruncationError, UnsupportedInputError)
from .fock_space import coherent_state, default_dim, parity_mask
from .parity_measurement import _lift_blocks
from .qubit_algebra import expm2, rot_x

PERTURBATION_CHANNELS = ("cavity_decay", "qubit_decay", "qubit_dephasing")


@dataclass(frozen=True)
class PerturbationReport:
    """Single-jump error budget of one schedule.

    eta_factors maps a channel name to the ratio between its estimated
    infidelity and the bare rate-times-half-duration guess, so a value
    below one means the measurement filters part of that error out of
    the success branch.  per_channel_infidelity holds 1 - F for each
    channel taken alone.  Fidelities are clamped to [0, 1.001]; the
    first-order estimate may legitimately poke slightly above one.
    """

    p_succ_pert: float
    fidelity_pert: float
    fidelity_naive: float
    eta_factors: dict = field(default_factory=dict)
    per_channel_infidelity: dict = field(default_factory=dict)
    channels: tuple = ()
    total_time: float = 0.0


def _channel_rate(params, name: str) -> float:
    if name == "cavity_decay":
        return params.gamma_c + params.gamma_cq
    if name == "qubit_decay":
        return params.gamma_q + params.gamma_qc
    if name == "qubit_dephasing":
        return params.gamma_qphi
    raise InvalidArgumentError(
        f"channel {name!r} is outside the single-jump treatment; "
        f"choose from {PERTURBATION_CHANNELS}")


def _resolve_channels(params, channels):
    if channels is None:
        names = [n for n in PERTURBATION_CHANNELS
                 if _channel_rate(params, n) > 0.0]
    else:
        names = [str(n) for n in channels]
        for n in names:
            _channel_rate(params, n)
    return tuple(dict.fromkeys(names))


def _segment_op(seg, dim: int):
    u = None
    if seg.duration > 0.0:
        u = expm2(-1j * seg.duration * _segment_blocks(seg, dim))

    def apply(p2, u=u, seg=seg):
        if u is not None:
            p2 = np.einsum('nqb,bn->qn', u, p2)
        return _apply_instant_psi(p2, seg)
    return apply


def _measure_op(seg):
    o = seg.expected
    if o not in (0, 1):
        raise InvalidArgumentError(
            "measurement segment without an expected outcome")

    def apply(p2, o=o):
        out = p2.copy()
        out[1 - o] = 0.0
        return out
    return apply


def _walk(schedule: ProtocolSchedule, dim: int):
    """Per-segment appliers plus the slot layout.

    Returns (ops, cut, weights, last_measure): cut[l] is the number of
    ops that precede the jump of slot l (everything up to and including
    that signal segment), weights[l] its attributed duration, and
    last_measure the op index of the final readout (None without one).
    """
    ops, cut, weights = [], [], []
    pending = 0.0
    last_measure = None
    for seg in schedule.segments:
        if seg.kind == "measure":
            ops.append(_measure_op(seg))
            last_measure = len(ops) - 1
            if weights:
                weights[-1] += pending
            pending = 0.0
            continue
        ops.append(_segment_op(seg, dim))
        pending += seg.duration
        if seg.kind == "signal":
            cut.append(len(ops))
            weights.append(pending)
            pending = 0.0
    if pending and weights:
        weights[-1] += pending
    return ops, cut, np.asarray(weights, dtype=float), last_measure


def slot_weights(schedule: ProtocolSchedule) -> np.ndarray:
    """Duration attributed to each jump slot, in seconds.

    One slot per signal segment; each covers the processing time since
    the previous slot plus the signal itself, and any processing after
    the final signal of a block is folded into that block's last slot,
    so the weights sum to the schedule's total time.
    """
    _, _, weights, _ = _walk(schedule, 2)
    return weights


def _instant_blocks(seg, dim: int) -> np.ndarray:
    post = np.eye(2, dtype=complex)
    if seg.instant_x != 0.0:
        post = rot_x(seg.instant_x) @ post
    if seg.virtual_z != 0.0:
        e = complex(math.cos(seg.virtual_z), math.sin(seg.virtual_z))
        post = np.diag([e, e.conjugate()]) @ post
    return np.broadcast_to(post, (dim, 2, 2))


def _fine_steps(schedule: ProtocolSchedule, dim: int, substeps: int):
    """Sub-divided per-photon-number step blocks plus jump-time weights.

    Returns (blocks, weights): blocks is a list of (dim, 2, 2) step
    matrices and weights maps a state index (the count of already
    applied steps) to the time attributed to a jump at that point.
    Every finite-duration segment is split into ``substeps`` equal
    propagator slices with endpoint weights of half a slice, so the
    weights add up to the schedule's total time exactly.  Instantaneous
    rotations and readouts are zero-weight steps of their own.
    """
    if int(substeps) != substeps or substeps < 1:
        raise InvalidArgumentError("substeps must be a positive integer")
    substeps = int(substeps)
    blocks, weights = [], {}

    def add_weight(h):
        i = len(blocks)
        weights[i] = weights.get(i, 0.0) + h

    for seg in schedule.segments:
        if seg.kind == "measure":
            o = seg.expected
            if o not in (0, 1):
                raise InvalidArgumentError(
                    "measurement segment without an expected outcome")
            proj = np.zeros((2, 2), dtype=complex)
            proj[o, o] = 1.0
            blocks.append(np.broadcast_to(proj, (dim, 2, 2)))
            continue
        if seg.duration > 0.0:
            u = expm2(-1j * (seg.duration / substeps)
                      * _segment_blocks(seg, dim))
            half = 0.5 * seg.duration / substeps
            for _ in range(substeps):
                add_weight(half)
                blocks.append(u)
                add_weight(half)
        if seg.instant_x != 0.0 or seg.virtual_z != 0.0:
            blocks.append(_instant_blocks(seg, dim))
    return blocks, weights


def _split_init(psi):
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size % 2:
        raise InvalidArgumentError("joint state must have even length")
    dim = psi.size // 2
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise InvalidArgumentError("initial state must be normalized")
    p2 = psi.reshape(2, dim)
    if float(np.max(np.abs(p2[1]))) > 1e-9:
        raise UnsupportedInputError(
            "initial state must leave the qubit in its ground level")
    nbar = float(np.sum(np.abs(p2[0]) ** 2 * np.arange(dim)))
    try:
        ref = coherent_state(nbar, dim)
    except TruncationError as exc:
        raise UnsupportedInputError(
            "initial cavity state is not coherent") from exc
    if abs(np.vdot(ref, p2[0])) < 1.0 - 1e-8:
        raise UnsupportedInputError(
            "initial cavity state is not coherent; the closed forms "
            "assume a displaced vacuum")
    return p2, dim, nbar


def perturbative_estimates(schedule: ProtocolSchedule, psi_init,
                           channels=None,
                           substeps: int = 16) -> PerturbationReport:
    """Single-jump estimate of success probability and fidelity.

    The zero-jump branch contributes the target-class weight minus the
    no-jump norm loss; each jump time and channel adds one conditioned
    branch, propagated through the exact remaining protocol including
    every readout projector, and the jump time is integrated over the
    whole schedule with ``substeps`` trapezoid slices per segment.
    Fidelity uses the component of each surviving branch orthogonal to
    the reference cat, which keeps the estimate exactly 1 when all
    rates vanish.

    channels picks which decoherence channels participate (default:
    every supported channel with a nonzero rate in the schedule's
    parameters).  Per-channel entries are computed with that channel
    alone, the headline numbers with all of them together.

    Raises UnsupportedInputError unless psi_init is the qubit ground
    level times a coherent cavity state.
    """
    p2, dim, nbar = _split_init(psi_init)
    params = schedule.params
    chosen = _resolve_channels(params, channels)
    step_blocks, wmap = _fine_steps(schedule, dim, substeps)
    if not wmap:
        raise UnsupportedInputError(
            "schedule has no finite-duration segments, nothing to "
            "expand around")

    mask = parity_mask(schedule.r, schedule.k, dim)
    n_class = float(np.sum(mask * np.abs(p2[0]) ** 2))
    if n_class <= 0.0:
        raise InvalidArgumentError(
            "initial state has no weight in the target class")
    phi_des = mask * p2[0] / math.sqrt(n_class)

    # Forward pass; states[i] is the state after the first i steps.
    # rest[i] is the remaining protocol from that point as one block
    # map, so finishing a branch costs a single contraction.
    states = [p2.copy()]
    for blk in step_blocks:
        states.append(np.einsum('nqb,bn->qn', blk, states[-1]))
    m_final = states[-1]
    rest = [None] * (len(step_blocks) + 1)
    rest[-1] = np.broadcast_to(np.eye(2, dtype=complex), (dim, 2, 2))
    for i in range(len(step_blocks) - 1, -1, -1):
        rest[i] = np.einsum('nab,nbc->nac', rest[i + 1], step_blocks[i])

    idxs = sorted(wmap)
    sum_f, sum_p, cross, naive_g = {}, {}, {}, {}
    for name in chosen:
        rates = _rates_of(params.only_channels([name]))
        fns = _jump_appliers(rates, dim)
        w = _w_diag(rates, dim)
        sf = pj = cr = 0.0
        for i in idxs:
            dt = wmap[i]
            a = states[i]
            for _, f in fns:
                b = np.einsum('nqb,bn->qn', rest[i], f(a))
                n2 = float(np.sum(np.abs(b) ** 2))
                pj += dt * n2
                cav = b[0] + b[1]
                sf += dt * (n2 - abs(np.vdot(phi_des, cav)) ** 2)
            u = np.einsum('nqb,bn->qn', rest[i], w * a)
            cr += dt * float(np.real(np.vdot(m_final, u)))
        sum_f[name], sum_p[name], cross[name] = sf, pj, cr
        rate = _channel_rate(params, name)
        naive_g[name] = rate * nbar if name == "cavity_decay" else (
            rate if name == "qubit_decay" else rate / 2.0)

    t_half = 0.5 * schedule.total_time
    eta, infid = {}, {}
    for name in chosen:
        f_ch = _clamp(math.sqrt(max(0.0, 1.0 - sum_f[name] / n_class)),
                      f"{name} fidelity")
        infid[name] = 1.0 - f_ch
        if naive_g[name] > 0.0:
            eta[name] = infid[name] / (t_half * naive_g[name])

    p_pert = n_class - math.fsum(cross.values()) + math.fsum(sum_p.values())
    f_pert = _clamp(math.sqrt(max(
        0.0, 1.0 - math.fsum(sum_f.values()) / n_class)), "combined fidelity")
    f_naive = max(0.0, 1.0 - t_half * math.fsum(naive_g.values()))
    return PerturbationReport(
        p_succ_pert=p_pert, fidelity_pert=f_pert, fidelity_naive=f_naive,
        eta_factors=eta, per_channel_infidelity=infid, channels=chosen,
        total_time=schedule.total_time)


def _clamp(x: float, label: str) -> float:
    if x > 1.001:
        warnings.warn(f"{label} estimate {x:.6f} exceeds 1.001; clamped",
                      RuntimeWarning, stacklevel=3)
        return 1.001
    return max(0.0, x)


def _segment_block_matrix(seg, dim: int) -> np.ndarray:
    blocks = np.broadcast_to(np.eye(2, dtype=complex), (dim, 2, 2)).copy()
    if seg.duration > 0.0:
        blocks = expm2(-1j * seg.duration * _segment_blocks(seg, dim))
    post = np.eye(2, dtype=complex)
    if seg.instant_x != 0.0:
        post = rot_x(seg.instant_x) @ post
    if seg.virtual_z != 0.0:
        e = complex(math.cos(seg.virtual_z), math.sin(seg.virtual_z))
        post = np.diag([e, e.conjugate()]) @ post
    return np.einsum('ab,nbc->nac', post, blocks)


def modified_jump(schedule: ProtocolSchedule, channel: str, slot: int,
                  dim: int = None) -> np.ndarray:
    """Dense joint-space operator of one jump dressed by the protocol.

    The bare jump operator of the named channel (rate folded in) is
    conjugated by the compiled evolution before and after slot number
    ``slot`` (1-based, one slot per signal segment).  Readout
    projectors between the slot and the end ride along; the final
    readout does not, since the probability formulas apply the success
    projector explicitly.  For operators diagonal in photon number
    this reduces to closed forms: the cavity-decay product equals the
    rate times the photon number operator, and qubit dephasing gives
    half its rate times the identity, at every slot.
    """
    if dim is None:
        dim = default_dim(schedule.nbar)
    rate = _channel_rate(schedule.params, channel)
    segments = []
    cut = []
    for seg in schedule.segments:
        if seg.kind == "measure":
            o = seg.expected
            proj = np.zeros((2, 2), dtype=complex)
            proj[o, o] = 1.0
            segments.append(("measure", np.broadcast_to(
                proj, (dim, 2, 2)).copy()))
        else:
            segments.append((seg.kind, _segment_block_matrix(seg, dim)))
            if seg.kind == "signal":
                cut.append(len(segments))
    if not 1 <= slot <= len(cut):
        raise InvalidArgumentError(
            f"slot {slot} out of range 1..{len(cut)}")
    last_measure = max((i for i, (kind, _) in enumerate(segments)
                        if kind == "measure"), default=None)

    def product(items):
        acc = np.broadcast_to(np.eye(2, dtype=complex), (dim, 2, 2)).copy()
        for _, blocks in items:
            acc = np.einsum('nab,nbc->nac', blocks, acc)
        return acc

    before = product(segments[:cut[slot - 1]])
    after_items = [item for i, item in enumerate(segments[cut[slot - 1]:],
                                                 start=cut[slot - 1])
                   if i != last_measure]
    after = product(after_items)

    if rate == 0.0:
        return np.zeros((2 * dim, 2 * dim), dtype=complex)
    fns = dict(_jump_appliers(_rates_of(
        schedule.params.only_channels([channel])), dim))
    f = fns[channel]
    bare = np.zeros((2 * dim, 2 * dim), dtype=complex)
    basis = np.zeros(2 * dim, dtype=complex)
    for j in range(2 * dim):
        basis[:] = 0.0
        basis[j] = 1.0
        bare[:, j] = f(basis.reshape(2, dim)).ravel()
    return _lift_blocks(after) @ bare @ _lift_blocks(before)


def compare_with_full(schedule: ProtocolSchedule, psi_init, channels,
                      engine_results) -> list:
    """Rows comparing the budget against full engine runs.

    engine_results maps a channel name or "combined" to the result of a
    dissipative run_cat_experiment run on the matching configuration; a
    bare result is treated as {"combined": result}.  Each row carries
    channel, F_full, F_pert, F_naive and the absolute gaps of the two
    estimates.  Raises InvalidComparisonError when a result's recorded
    configuration does not match the schedule and state.
    """
    if hasattr(engine_results, "fidelity"):
        engine_results = {"combined": engine_results}
    psi = np.asarray(psi_init, dtype=complex).ravel()
    order = PERTURBATION_CHANNELS + ("combined",)
    rows = []
    for label in sorted(engine_results, key=order.index):
        res = engine_results[label]
        _check_match(schedule, psi, res)
        sub = channels if label == "combined" else [label]
        rep = perturbative_estimates(schedule, psi, channels=sub)
        rows.append({
            "channel": label,
            "F_full": float(res.fidelity),
            "F_pert": rep.fidelity_pert,
            "F_naive": rep.fidelity_naive,
            "gap_pert": abs(rep.fidelity_pert - float(res.fidelity)),
            "gap_naive": abs(rep.fidelity_naive - float(res.fidelity)),
        })
    return rows


def _check_match(schedule: ProtocolSchedule, psi, res):
    if getattr(res, "engine", None) == "unitary":
        raise InvalidComparisonError(
            "full run must use a dissipative engine, got 'unitary'")
    for name, mine in (("r", schedule.r), ("k", schedule.k),
                       ("repeats", schedule.repeats)):
        theirs = getattr(res, name, None)
        if theirs != mine:
            raise InvalidComparisonError(
                f"{name} mismatch: schedule has {mine}, result has {theirs}")
    if abs(getattr(res, "nbar", float("nan")) - schedule.nbar) > 1e-9:
        raise InvalidComparisonError(
            f"nbar mismatch: schedule has {schedule.nbar}, "
            f"result has {getattr(res, 'nbar', None)}")
    if 2 * getattr(res, "dim", -1) != psi.size:
        raise InvalidComparisonError(
            f"dimension mismatch: result ran at dim {getattr(res, 'dim', None)}, "
            f"state has {psi.size // 2}")
