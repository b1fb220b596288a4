"""Device model: dispersive qubit-cavity parameters, segment generators
and full protocol schedules.

A schedule is a flat list of segments, each describing a piecewise
constant Hamiltonian that is diagonal over photon number up to a 2x2
qubit block:

    H(n) = x_amp X + [chi_n n + kerr_half_z n^2 - z_cancel] Z
           + kerr_half_i n^2 I

All coefficients are angular frequencies (rad/s) and durations are
seconds.  Measurement segments have zero duration; readouts and the
small frame rotations compiled as virtual Z pulses are treated as
instantaneous and ideal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, SingularParametersError
from .phase_synthesis import analytic_phases
from .qubit_algebra import as_phase_sequence

TWO_PI = 2.0 * math.pi

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_SIGMA_PLUS = _SIGMA_MINUS.T.conj()


@dataclass(frozen=True)
class DeviceParams:
    """Dispersive-regime device constants, all rates in rad/s or 1/s.

    chi is the dispersive shift entering H as chi Z n (positive by
    convention; the sign is a frame choice).  k_c is the bare cavity
    self-Kerr, eta the ratio between the qubit-state-dependent Kerr and
    k_c, omega_q the processing Rabi rate.  The gamma_* fields are
    decay and dephasing rates: gamma_c cavity decay, gamma_q qubit
    decay, gamma_qphi qubit dephasing, gamma_cq and gamma_qc the
    dressed cross rates, gamma_c_delta the dephasing-induced dressed
    rate.  dphi_rel is the relative processing-angle miscalibration and
    n_crit the photon number where the dispersive expansion fails.
    """

    chi: float = TWO_PI * 41e3
    k_c: float = TWO_PI * 2.0
    eta: float = 0.45
    omega_q: float = TWO_PI * 8.2e6
    gamma_c: float = TWO_PI * 3.2
    gamma_q: float = 1.0 / 300e-6
    gamma_qphi: float = 4.5 / 300e-6
    gamma_cq: float = (1.0 / 12000.0) * (1.0 / 300e-6)
    gamma_qc: float = (1.0 / 12000.0) * TWO_PI * 3.2
    gamma_c_delta: float = 2.0 * (1.0 / 12000.0) * (4.5 / 300e-6)
    dphi_rel: float = 0.01
    n_crit: float = 1000.0

    def __post_init__(self):
        if self.chi <= 0:
            raise InvalidArgumentError("chi must be positive")
        for name in ("gamma_c", "gamma_q", "gamma_qphi", "gamma_cq",
                     "gamma_qc", "gamma_c_delta"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be nonnegative")
        if not 0.0 <= self.dphi_rel <= 0.1:
            raise InvalidArgumentError("dphi_rel must lie in [0, 0.1]")
        if self.omega_q <= 0:
            raise InvalidArgumentError("omega_q must be positive")

    @property
    def kerr_dressed(self) -> float:
        """Qubit-state-dependent Kerr coefficient eta * k_c."""
        return self.eta * self.k_c

    def without_rates(self) -> "DeviceParams":
        """Copy with every incoherent rate set to zero."""
        return replace(self, gamma_c=0.0, gamma_q=0.0, gamma_qphi=0.0,
                       gamma_cq=0.0, gamma_qc=0.0, gamma_c_delta=0.0)

    def only_channels(self, channels) -> "DeviceParams":
        """Copy keeping only the named jump channels (others zeroed)."""
        keep = set(channels)
        known = {"cavity_decay", "qubit_decay", "qubit_dephasing",
                 "dressed_down", "dressed_up"}
        bad = keep - known
        if bad:
            raise InvalidArgumentError(f"unknown channels: {sorted(bad)}")
        kw = {}
        if "cavity_decay" not in keep:
            kw["gamma_c"] = 0.0
            kw["gamma_cq"] = 0.0
        if "qubit_decay" not in keep:
            kw["gamma_q"] = 0.0
            kw["gamma_qc"] = 0.0
        if "qubit_dephasing" not in keep:
            kw["gamma_qphi"] = 0.0
        if "dressed_down" not in keep and "dressed_up" not in keep:
            kw["gamma_c_delta"] = 0.0
        return replace(self, **kw)


def derive_params(g: float, delta: float, e_c: float, *, gamma_c=TWO_PI * 3.2,
                  gamma_q=1.0 / 300e-6, gamma_qphi=4.5 / 300e-6,
                  omega_q=TWO_PI * 8.2e6, dphi_rel=0.01) -> DeviceParams:
    """Device constants from coupling g, detuning delta and anharmonicity.

    Uses the standard dispersive-regime expressions

        chi    = g^2 e_c / (delta (delta - e_c))      (magnitude)
        k_c    = e_c (g / delta)^4                    (magnitude)
        eta    = (9/2) e_c / delta
        n_crit = delta^2 / (12 g^2)

    plus the dressed decoherence rates (g/delta)^2 gamma_q into the
    cavity, (g/delta)^2 gamma_c into the qubit, and 2 (g/delta)^2
    gamma_qphi of dephasing-induced cavity decay.  Signs of chi and k_c
    are dropped: both enter the model as magnitudes with the sign
    absorbed into the Z convention.

    Raises
    ------
    SingularParametersError
        If delta equals e_c (straddling pole) or either is zero.
    """
    if delta == 0 or delta == e_c:
        raise SingularParametersError(
            "dispersive expressions are singular at delta = 0 and delta = e_c")
    ratio = g / delta
    if abs(ratio) > 0.1:
        warnings.warn(
            f"g/delta = {ratio:.3f} is outside the dispersive regime; "
            "derived constants are unreliable", stacklevel=2)
    chi = abs(g ** 2 * e_c / (delta * (delta - e_c)))
    if chi == 0:
        raise SingularParametersError("derived chi vanished; check g and e_c")
    return DeviceParams(
        chi=chi,
        k_c=abs(e_c * ratio ** 4),
        eta=4.5 * e_c / delta,
        omega_q=omega_q,
        gamma_c=gamma_c,
        gamma_q=gamma_q,
        gamma_qphi=gamma_qphi,
        gamma_cq=ratio ** 2 * gamma_q,
        gamma_qc=ratio ** 2 * gamma_c,
        gamma_c_delta=2.0 * ratio ** 2 * gamma_qphi,
        dphi_rel=dphi_rel,
        n_crit=delta ** 2 / (12.0 * g ** 2),
    )


@dataclass(frozen=True)
class Segment:
    """One piecewise constant stretch of the protocol.

    kind is one of "signal", "processing", "measure", "idle".  The
    generator coefficients are described in the module docstring;
    z_cancel collects the constant Z offset that recentres the
    dispersive and Kerr phases on the mean photon number.  virtual_z
    and instant_x are instantaneous exp(i virtual_z Z) and
    exp(i instant_x X) rotations applied after the timed part of the
    segment; ideal processing segments are pure instant_x rotations of
    zero duration.  Measurement segments carry the expected readout of
    the success branch in ``expected`` and have zero duration.
    """

    kind: str
    duration: float
    x_amp: float = 0.0
    chi_n: float = 0.0
    kerr_half_z: float = 0.0
    kerr_half_i: float = 0.0
    z_cancel: float = 0.0
    virtual_z: float = 0.0
    instant_x: float = 0.0
    expected: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("signal", "processing", "measure", "idle"):
            raise InvalidArgumentError(f"unknown segment kind {self.kind!r}")
        if self.duration < 0 or not math.isfinite(self.duration):
            raise InvalidArgumentError("segment duration must be finite and >= 0")
        if self.kind == "measure" and self.duration != 0.0:
            raise InvalidArgumentError("measurement segments are instantaneous")


@dataclass(frozen=True)
class ProtocolSchedule:
    """Complete pulse program for a repeated parity measurement."""

    segments: tuple
    params: DeviceParams
    r: int
    k: int
    repeats: int
    nbar: float
    total_time: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(
            self, "total_time",
            math.fsum(s.duration for s in self.segments))

    def expected_pattern(self) -> str:
        """Readout string of the success branch, in time order."""
        return "".join(str(s.expected) for s in self.segments
                       if s.kind == "measure")


def hamiltonian_terms(params: DeviceParams, cfg) -> dict:
    """Dense always-on Hamiltonian pieces, for inspection and tests.

    Returns a dict with "chi" (chi Z n, joint), "kerr_dressed"
    (eta k_c / 2 Z n^2, joint) and "kerr" (k_c / 2 n^2, cavity only).
    The simulation engines do not consume these dense matrices; they
    build the same physics from segment coefficients.
    """
    from .fock_space import dim_of
    dim = dim_of(cfg)
    n = np.arange(dim, dtype=float)
    z = np.diag([1.0, -1.0])
    return {
        "chi": np.kron(z, np.diag(params.chi * n)),
        "kerr_dressed": np.kron(z, np.diag(0.5 * params.kerr_dressed * n ** 2)),
        "kerr": np.diag(0.5 * params.k_c * n ** 2),
    }


@dataclass(frozen=True)
class JumpChannel:
    """One Lindblad channel; op already carries the sqrt(rate) factor."""

    name: str
    rate: float
    op: np.ndarray


def jump_operators(params: DeviceParams, cfg, channels=None) -> list:
    """Collapse operators on the joint space, rates folded in.

    The five channels are cavity decay at gamma_c + gamma_cq, qubit
    decay at gamma_q + gamma_qc, qubit dephasing at gamma_qphi / 2 with
    operator Z, and the two dephasing-induced dressed channels at
    gamma_c_delta with operators sigma_minus b_dagger and sigma_plus b.
    Channels with zero rate are dropped; ``channels`` restricts the
    list to the named subset.
    """
    from .fock_space import annihilation, dim_of
    dim = dim_of(cfg)
    b = annihilation(dim)
    eye_c = np.eye(dim)
    z = np.diag([1.0, -1.0]).astype(complex)
    defs = [
        ("cavity_decay", params.gamma_c + params.gamma_cq,
         np.kron(np.eye(2), b)),
        ("qubit_decay", params.gamma_q + params.gamma_qc,
         np.kron(_SIGMA_MINUS, eye_c)),
        ("qubit_dephasing", params.gamma_qphi / 2.0, np.kron(z, eye_c)),
        ("dressed_down", params.gamma_c_delta, np.kron(_SIGMA_MINUS, b.T.conj())),
        ("dressed_up", params.gamma_c_delta, np.kron(_SIGMA_PLUS, b)),
    ]
    out = []
    for name, rate, op in defs:
        if channels is not None and name not in channels:
            continue
        if rate > 0.0:
            out.append(JumpChannel(name=name, rate=rate,
                                   op=math.sqrt(rate) * op))
    return out


def processing_generator(phi: float, params: DeviceParams, nbar: float,
                         rng=None, label: str = "") -> Segment:
    """Finite-duration qubit rotation segment implementing exp(i phi X).

    The drive runs at the fixed Rabi rate omega_q for |phi| / omega_q
    seconds, so the dispersive and Kerr terms keep acting while the
    qubit turns.  Their mean-photon-number parts are cancelled by the
    recentring offset z_cancel = chi nbar + (eta k_c / 2) nbar^2, which
    leaves only the spread around nbar as a coherent error.  The angle
    is miscalibrated by a relative epsilon: +dphi_rel deterministically,
    or uniform in [-dphi_rel, +dphi_rel] when an rng is supplied.
    """
    if not math.isfinite(phi):
        raise InvalidArgumentError("processing angle must be finite")
    if nbar < 0:
        raise InvalidArgumentError("nbar must be nonnegative")
    eps = params.dphi_rel if rng is None else rng.uniform(-params.dphi_rel,
                                                          params.dphi_rel)
    duration = abs(phi) / params.omega_q
    x_amp = 0.0 if duration == 0.0 else -phi * (1.0 + eps) / duration
    return Segment(
        kind="processing", duration=duration, x_amp=x_amp,
        chi_n=params.chi, kerr_half_z=0.5 * params.kerr_dressed,
        kerr_half_i=0.5 * params.k_c,
        z_cancel=params.chi * nbar + 0.5 * params.kerr_dressed * nbar ** 2,
        label=label)


def _ideal_processing(phi: float, label: str = "") -> Segment:
    """Zero-duration exact exp(i phi X), for noiseless reference runs."""
    return Segment(kind="processing", duration=0.0, instant_x=phi, label=label)


def _signal_segment(r: int, k: int, params: DeviceParams, nbar: float,
                    label: str = "") -> Segment:
    """One full dispersive signal step of duration pi / (r chi).

    Accumulates exp(-i (pi/r) Z n) from the always-on chi Z n term; the
    photon-class offset k is compiled as the instantaneous virtual
    rotation exp(+i (pi/r) k Z) at the segment end.  The dressed Kerr
    is recentred exactly as during processing, the bare Kerr stays.
    """
    return Segment(
        kind="signal", duration=math.pi / (r * params.chi),
        chi_n=params.chi, kerr_half_z=0.5 * params.kerr_dressed,
        kerr_half_i=0.5 * params.k_c,
        z_cancel=0.5 * params.kerr_dressed * nbar ** 2,
        virtual_z=math.pi * k / r, label=label)


def schedule_cat(r: int, k: int, repeats: int, params: DeviceParams,
                 nbar: float, phases=None, processing_mode: str = "rabi",
                 rng=None) -> ProtocolSchedule:
    """Pulse program for ``repeats`` back-to-back parity measurements.

    Each repetition alternates d + 1 processing segments with d signal
    segments (d the sequence depth) and ends in an instantaneous qubit
    readout; the expected readouts of the success branch alternate
    1, 0, 1, ...  Processing angles are applied in time-reversed order,
    which is invisible for the palindromic default but kept correct for
    arbitrary sequences.

    processing_mode "rabi" uses finite-duration drives with the
    miscalibration model of :func:`processing_generator`; "ideal" uses
    exact zero-duration rotations, the right reference for noiseless
    equivalence checks.
    """
    if int(r) != r or r < 2:
        raise InvalidArgumentError(f"modulus must be an integer >= 2, got {r!r}")
    if int(k) != k or not 0 <= k < r:
        raise InvalidArgumentError(f"need an integer 0 <= k < r, got k={k!r}")
    if int(repeats) != repeats or repeats < 1:
        raise InvalidArgumentError("repeats must be a positive integer")
    if processing_mode not in ("rabi", "ideal"):
        raise InvalidArgumentError("processing_mode must be 'rabi' or 'ideal'")
    r, k, repeats = int(r), int(k), int(repeats)
    seq = analytic_phases(r) if phases is None else as_phase_sequence(phases)
    angles = seq.angles
    d = seq.degree

    def proc(j, rep):
        lab = f"rep{rep}.proc[{j}]"
        if processing_mode == "ideal":
            return _ideal_processing(angles[j], label=lab)
        return processing_generator(angles[j], params, nbar, rng=rng, label=lab)

    segments = []
    for rep in range(repeats):
        segments.append(proc(d, rep))
        for j in range(d - 1, -1, -1):
            segments.append(_signal_segment(r, k, params, nbar,
                                            label=f"rep{rep}.signal[{j}]"))
            segments.append(proc(j, rep))
        segments.append(Segment(kind="measure", duration=0.0,
                                expected=1 if rep % 2 == 0 else 0,
                                label=f"rep{rep}.measure"))
    return ProtocolSchedule(segments=tuple(segments), params=params, r=r,
                            k=k, repeats=repeats, nbar=float(nbar))


def idle_schedule(duration: float, params: DeviceParams,
                  dispersive: bool = False) -> ProtocolSchedule:
    """Single idle stretch, for relaxation checks.

    With dispersive=False the coherent generator is dropped entirely,
    which is exact for any observable diagonal in photon number since
    the always-on terms commute with n.  Set dispersive=True to keep
    the full diagonal Hamiltonian (much stiffer to integrate).
    """
    if duration <= 0 or not math.isfinite(duration):
        raise InvalidArgumentError("idle duration must be finite and positive")
    if dispersive:
        seg = Segment(kind="idle", duration=duration, chi_n=params.chi,
                      kerr_half_z=0.5 * params.kerr_dressed,
                      kerr_half_i=0.5 * params.k_c, label="idle")
    else:
        seg = Segment(kind="idle", duration=duration, label="idle")
    return ProtocolSchedule(segments=(seg,), params=params, r=2, k=0,
                            repeats=1, nbar=0.0)
