"""Truncated oscillator plumbing: state builders, projectors and the
joint qubit-oscillator layout used by the simulation engines.

Joint vectors are laid out qubit-major: index q * dim + n holds qubit
level q and photon number n.  Qubit level 0 is the ground state and the
Z convention is diag(+1, -1) on levels (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateOutcomeError, InvalidArgumentError,
                     TruncationError)


@dataclass(frozen=True)
class FockSpaceConfig:
    """Photon-number truncation; dim levels 0 .. dim-1 are kept."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidArgumentError(
                f"truncation dimension must be an integer >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))


def dim_of(cfg) -> int:
    """Accept a FockSpaceConfig or a bare integer dimension."""
    if isinstance(cfg, FockSpaceConfig):
        return cfg.dim
    return FockSpaceConfig(cfg).dim


def default_dim(nbar: float) -> int:
    """Smallest power of two holding nbar + 8 sqrt(nbar) + 16 levels."""
    if nbar < 0:
        raise InvalidArgumentError("mean photon number must be nonnegative")
    need = nbar + 8.0 * math.sqrt(nbar) + 16.0
    dim = 2
    while dim < need:
        dim *= 2
    return dim


def coherent_state(nbar: float, cfg) -> np.ndarray:
    """Coherent state of mean photon number nbar, amplitude sqrt(nbar).

    Amplitudes are built in log space so large nbar does not overflow,
    then renormalized over the kept levels.

    Raises
    ------
    TruncationError
        If the weight beyond the cutoff exceeds 1e-8.
    """
    dim = dim_of(cfg)
    if nbar < 0 or not math.isfinite(nbar):
        raise InvalidArgumentError("mean photon number must be finite and >= 0")
    vec = np.zeros(dim)
    if nbar == 0:
        vec[0] = 1.0
        return vec
    log_w = np.array([-nbar + n * math.log(nbar) - math.lgamma(n + 1)
                      for n in range(dim)])
    w = np.exp(log_w)
    lost = abs(1.0 - float(w.sum()))
    if lost > 1e-8:
        raise TruncationError(
            f"coherent state with nbar={nbar} loses weight {lost:.3e} at "
            f"dim={dim}; enlarge the truncation", lost_weight=lost)
    vec = np.sqrt(w)
    return vec / np.linalg.norm(vec)


def parity_mask(r: int, k: int, cfg) -> np.ndarray:
    """Boolean mask over photon numbers with n mod r == k."""
    if int(r) != r or r < 2:
        raise InvalidArgumentError(f"modulus must be an integer >= 2, got {r!r}")
    if int(k) != k:
        raise InvalidArgumentError("photon class k must be an integer")
    return np.arange(dim_of(cfg)) % int(r) == int(k) % int(r)


def parity_projector(r: int, k: int, cfg) -> np.ndarray:
    """Dense projector onto photon numbers congruent to k mod r."""
    if not 0 <= k < r:
        raise InvalidArgumentError(f"need 0 <= k < r, got k={k}, r={r}")
    return np.diag(parity_mask(r, k, cfg).astype(float))


def cat_reference(r: int, nbar: float, cfg, k: int = 0):
    """Normalized mod-r projection of the coherent state, plus its weight.

    Returns
    -------
    (state, weight)
        ``state`` is the normalized projection of the sqrt(nbar)
        coherent state onto photon numbers congruent to k mod r, and
        ``weight`` is the squared norm of the unnormalized projection,
        i.e. the ideal success probability of the matching measurement.

    Raises
    ------
    DegenerateOutcomeError
        If the projection carries no weight at all.
    """
    vec = coherent_state(nbar, cfg)
    mask = parity_mask(r, k, cfg)
    proj = np.where(mask, vec, 0.0)
    weight = float(np.sum(np.abs(proj) ** 2))
    if weight < 1e-300:
        raise DegenerateOutcomeError(
            f"projection onto n = {k} (mod {r}) of the nbar={nbar} coherent "
            "state has zero weight")
    return proj / math.sqrt(weight), weight


def photon_distribution(state, cfg=None) -> np.ndarray:
    """Photon-number probabilities p(n).

    Accepts a cavity vector, a cavity density matrix, or (when ``cfg``
    is given and the sizes match) a joint qubit-cavity vector or matrix,
    in which case the qubit is traced out.
    """
    arr = np.asarray(state)
    if arr.ndim == 1:
        p = np.abs(arr) ** 2
    elif arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        p = np.real(np.diagonal(arr)).copy()
    else:
        raise InvalidArgumentError("state must be a vector or a square matrix")
    if cfg is not None:
        dim = dim_of(cfg)
        if p.size == 2 * dim:
            p = p[:dim] + p[dim:]
        elif p.size != dim:
            raise InvalidArgumentError(
                f"state of size {p.size} does not match dim={dim}")
    return p


def leaked_weight(state, cfg=None) -> float:
    """Probability sitting on the topmost kept photon level."""
    return float(photon_distribution(state, cfg)[-1])


def annihilation(cfg) -> np.ndarray:
    """Cavity lowering operator on the truncated space."""
    dim = dim_of(cfg)
    return np.diag(np.sqrt(np.arange(1.0, dim)), 1).astype(complex)


def number_diag(cfg) -> np.ndarray:
    """Photon numbers 0 .. dim-1 as a float vector."""
    return np.arange(dim_of(cfg), dtype=float)


def qubit_op(a, cfg) -> np.ndarray:
    """Lift a 2x2 qubit operator to the joint space."""
    a = np.asarray(a, dtype=complex)
    if a.shape != (2, 2):
        raise InvalidArgumentError("qubit operator must be 2x2")
    return np.kron(a, np.eye(dim_of(cfg)))


def cavity_op(m, cfg) -> np.ndarray:
    """Lift a cavity operator to the joint space."""
    m = np.asarray(m, dtype=complex)
    dim = dim_of(cfg)
    if m.shape != (dim, dim):
        raise InvalidArgumentError(f"cavity operator must be {dim}x{dim}")
    return np.kron(np.eye(2), m)


def joint_state(qubit_level: int, cavity_vec) -> np.ndarray:
    """|q> tensor |cavity> as a flat qubit-major vector."""
    if qubit_level not in (0, 1):
        raise InvalidArgumentError("qubit level must be 0 or 1")
    cav = np.asarray(cavity_vec, dtype=complex).ravel()
    out = np.zeros(2 * cav.size, dtype=complex)
    out[qubit_level * cav.size:(qubit_level + 1) * cav.size] = cav
    return out


def ptrace_qubit(rho, cfg) -> np.ndarray:
    """Trace the qubit out of a joint density matrix."""
    dim = dim_of(cfg)
    rho = np.asarray(rho)
    if rho.shape != (2 * dim, 2 * dim):
        raise InvalidArgumentError("density matrix does not match dim")
    r4 = rho.reshape(2, dim, 2, dim)
    return r4[0, :, 0, :] + r4[1, :, 1, :]


def expectation(op, state) -> complex:
    """<op> for a vector or density matrix state."""
    op = np.asarray(op)
    arr = np.asarray(state)
    if arr.ndim == 1:
        return complex(np.vdot(arr, op @ arr))
    return complex(np.trace(op @ arr))


def fidelity(state, target) -> float:
    """Overlap fidelity with a pure target.

    |<target|psi>| for vector states, sqrt(<target|rho|target>) for
    density matrices.  Unsquared in both cases.
    """
    tgt = np.asarray(target, dtype=complex).ravel()
    arr = np.asarray(state)
    if arr.ndim == 1:
        if arr.size != tgt.size:
            raise InvalidArgumentError("state and target sizes differ")
        return float(abs(np.vdot(tgt, arr)))
    if arr.shape != (tgt.size, tgt.size):
        raise InvalidArgumentError("state and target sizes differ")
    val = float(np.real(np.vdot(tgt, arr @ tgt)))
    return math.sqrt(max(val, 0.0))
