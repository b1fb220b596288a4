"""Measurement operators for mod-r photon-number classes, both the
ideal projective version and the one the pulse sequence actually
implements.

Every operator here is diagonal in photon number, so the joint-space
matrices are assembled from per-photon-number 2x2 blocks and the error
metric never has to touch a dense matrix at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, UnsupportedModulusError
from .fock_space import dim_of, parity_mask
from .phase_synthesis import analytic_phases
from .qubit_algebra import as_phase_sequence, real_protocol_grid


@dataclass(frozen=True)
class PovmPair:
    """Two-element positive partition {accept, reject} of the identity."""

    accept: np.ndarray
    reject: np.ndarray
    label: str = ""

    def __post_init__(self):
        a, b = np.asarray(self.accept), np.asarray(self.reject)
        if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidArgumentError("POVM elements must be square and match")
        eye = np.eye(a.shape[0])
        if (np.max(np.abs(a - a.conj().T)) > 1e-10
                or np.max(np.abs(b - b.conj().T)) > 1e-10):
            raise InvalidArgumentError("POVM elements must be Hermitian")
        if np.max(np.abs(a + b - eye)) > 1e-10:
            raise InvalidArgumentError("POVM elements must sum to the identity")


@dataclass(frozen=True)
class CrtPlan:
    """Coprime factorization of a measurement into sequential rounds."""

    modulus: int
    photon_class: int
    factors: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class QspPovm:
    """Kraus operators of one two-round sequence run, cavity side.

    Keys of ``kraus`` are outcome strings in time order, so "10" means
    the first readout gave 1 and the second gave 0, which is the
    success branch; "00" is the confirmed-reject branch.  All operators
    are diagonal over photon number.  ``accept`` and
    ``reject_confirmed`` are the positive elements K^dagger K of those
    two branches.
    """

    kraus: dict
    accept: np.ndarray = field(init=False)
    reject_confirmed: np.ndarray = field(init=False)

    def __post_init__(self):
        k_acc = self.kraus["10"]
        k_rej = self.kraus["00"]
        object.__setattr__(self, "accept", k_acc.conj().T @ k_acc)
        object.__setattr__(self, "reject_confirmed", k_rej.conj().T @ k_rej)


def _check_r_k(r, k):
    if int(r) != r or r < 2:
        raise InvalidArgumentError(f"modulus must be an integer >= 2, got {r!r}")
    if int(k) != k or not 0 <= k < r:
        raise InvalidArgumentError(f"need an integer 0 <= k < r, got k={k!r}")
    return int(r), int(k)


def ideal_measurement(r: int, k: int, cfg) -> PovmPair:
    """Projective measurement of (n mod r == k) on the cavity."""
    r, k = _check_r_k(r, k)
    mask = parity_mask(r, k, cfg).astype(float)
    return PovmPair(accept=np.diag(mask), reject=np.diag(1.0 - mask),
                    label=f"ideal mod-{r} class {k}")


def _lift_blocks(blocks: np.ndarray) -> np.ndarray:
    """Per-photon-number 2x2 blocks (dim, 2, 2) to a dense joint matrix."""
    dim = blocks.shape[0]
    out = np.zeros((2 * dim, 2 * dim), dtype=complex)
    for q in range(2):
        for p in range(2):
            out[q * dim:(q + 1) * dim, p * dim:(p + 1) * dim] = \
                np.diag(blocks[:, q, p])
    return out


def signal_unitary(r: int, k: int, t_fraction: float, cfg) -> np.ndarray:
    """Joint unitary of a partial signal step.

    exp[-i (pi/r) t_fraction X (n - k)] on the qubit-cavity space, with
    n the photon number operator.  t_fraction = 1 is one full step.
    """
    r, k = _check_r_k(r, k)
    if not 0.0 < t_fraction <= 1.0:
        raise InvalidArgumentError("t_fraction must lie in (0, 1]")
    dim = dim_of(cfg)
    theta = -(math.pi / r) * t_fraction * (np.arange(dim) - k)
    blocks = np.zeros((dim, 2, 2), dtype=complex)
    blocks[:, 0, 0] = np.cos(theta)
    blocks[:, 1, 1] = np.cos(theta)
    blocks[:, 0, 1] = 1j * np.sin(theta)
    blocks[:, 1, 0] = 1j * np.sin(theta)
    return _lift_blocks(blocks)


def _protocol_blocks(phases, r: int, k: int, dim: int) -> np.ndarray:
    """Real-protocol blocks at theta_n = (pi/r)(n - k) for n = 0..dim-1."""
    thetas = (math.pi / r) * (np.arange(dim) - k)
    return real_protocol_grid(phases, thetas)


def qsp_protocol_unitary(phases, r: int, k: int, cfg) -> np.ndarray:
    """Dense joint unitary of one full sequence run.

    Block n of the result is the real-diagonal protocol evaluated at
    theta_n = (pi/r)(n - k); exchanging the qubit levels in block n
    equals block -n, which is how the lifted operator relates to the
    signal convention of :func:`signal_unitary`.
    """
    r, k = _check_r_k(r, k)
    return _lift_blocks(_protocol_blocks(phases, r, k, dim_of(cfg)))


def qsp_povm(phases, r: int, k: int, cfg) -> QspPovm:
    """Cavity Kraus operators of the two-round measurement.

    One run applies the sequence, reads the qubit, applies the sequence
    again and reads again, with no reset in between.  The per-round
    unitary carries the trailing qubit flip of the real-diagonal
    protocol absorbed into the outcome labels, so a photon number in
    the target class drives the readout pattern (1, 0) deterministically
    while numbers far from the class give (0, 0).  Conditioned on the
    pattern (s1, s2) the cavity is multiplied by the diagonal operator

        K_{s1 s2}(n) = U_n[1 - s2, s1] U_n[1 - s1, 0]

    with U_n the per-photon-number protocol block.  The four branches
    sum to a complete POVM by unitarity.
    """
    r, k = _check_r_k(r, k)
    u = _protocol_blocks(phases, r, k, dim_of(cfg))
    kraus = {}
    for s1 in (0, 1):
        for s2 in (0, 1):
            amp = u[:, 1 - s2, s1] * u[:, 1 - s1, 0]
            kraus[f"{s1}{s2}"] = np.diag(amp)
    return QspPovm(kraus=kraus)


def delta_error(r: int, k: int, cfg, phases=None) -> float:
    """Distance of the sequence measurement from the ideal projective one.

    1 - (1/dim) [ sum_{n in class} |M_10(n)|^2
                  + sum_{n not in class} |M_00(n)|^2 ]

    i.e. one minus the per-photon-number average of the correct-branch
    weights, taking the success branch on class members and the
    confirmed-reject branch elsewhere.  Nonnegative up to rounding, at
    most 1, independent of k up to a shift, and independent of dim
    whenever dim is a multiple of r.

    ``k`` may be any integer; it is reduced mod r.
    """
    if int(r) != r or r < 2:
        raise InvalidArgumentError(f"modulus must be an integer >= 2, got {r!r}")
    r = int(r)
    k = int(k) % r
    if phases is None:
        phases = analytic_phases(r)
    dim = dim_of(cfg)
    u = _protocol_blocks(phases, r, k, dim)
    member = parity_mask(r, k, dim)
    return 1.0 - _similarity(u, member) / dim


def _similarity(u: np.ndarray, member: np.ndarray) -> float:
    """Sum over photon numbers of the correct-branch weight.

    Class members contribute |K_10|^2 = |u00|^4 and everything else
    contributes |K_00|^2 = |u10|^4, both evaluated on the diagonal of
    the per-photon-number blocks.
    """
    acc = np.abs(u[:, 0, 0]) ** 4
    rej = np.abs(u[:, 1, 0]) ** 4
    return float(np.sum(np.where(member, acc, rej)))


def delta_report(r: int, k: int, cfg, phases=None) -> dict:
    """delta under both normalizations plus the raw similarity sum."""
    if phases is None:
        phases = analytic_phases(int(r))
    seq = as_phase_sequence(phases)
    dim = dim_of(cfg)
    u = _protocol_blocks(seq, int(r), int(k) % int(r), dim)
    member = parity_mask(int(r), int(k), dim)
    sim = _similarity(u, member)
    return {
        "delta": 1.0 - sim / dim,
        "delta_joint": 1.0 - sim / (2 * dim),
        "similarity": sim,
        "depth": seq.degree,
        "dim": dim,
    }


def crt_plan(r: int, k: int) -> CrtPlan:
    """Factor a squarefree modulus into prime rounds.

    Returns the prime factors r_i of r in increasing order, each with
    its reduced photon class k_i = k mod r_i.  Moduli with a repeated
    prime factor are rejected, since the class structure then does not
    split into independent rounds.
    """
    r, k = _check_r_k(r, k)
    factors = []
    rem = r
    p = 2
    while p * p <= rem:
        if rem % p == 0:
            rem //= p
            if rem % p == 0:
                raise UnsupportedModulusError(
                    f"modulus {r} is divisible by {p}^2; only squarefree "
                    "moduli split into sequential rounds")
            factors.append((p, k % p))
        p += 1
    if rem > 1:
        factors.append((rem, k % rem))
    return CrtPlan(modulus=r, photon_class=k, factors=tuple(factors))


def sequential_povm(plan: CrtPlan, cfg, phase_source=None) -> PovmPair:
    """All-rounds-accept element of the factored measurement.

    Composes the per-factor accept operators in increasing factor
    order.  With ``phase_source=None`` each round is the ideal
    projector, and the composition equals the ideal mod-r projector
    exactly.  Otherwise ``phase_source(r_i)`` must return the angle
    list for the round with modulus r_i, and the accept elements of the
    two-round sequence measurements are composed instead.
    """
    if not isinstance(plan, CrtPlan):
        raise InvalidArgumentError("plan must be a CrtPlan")
    dim = dim_of(cfg)
    acc = np.eye(dim, dtype=complex)
    for r_i, k_i in plan.factors:
        if phase_source is None:
            f_i = ideal_measurement(r_i, k_i, dim).accept.astype(complex)
        else:
            f_i = qsp_povm(phase_source(r_i), r_i, k_i, dim).accept
        acc = acc @ f_i
    acc = 0.5 * (acc + acc.conj().T)
    return PovmPair(accept=acc, reject=np.eye(dim) - acc,
                    label=f"sequential mod-{plan.modulus} class {plan.photon_class}")
