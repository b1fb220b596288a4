"""Exact two-level building blocks for phase-alternating pulse sequences.

The central object is the composition

    U(angles, theta) = e^{i phi_0 Z} prod_{j=1..d} [ e^{i theta X} e^{i phi_j Z} ]

whose matrix entries are fixed-parity polynomials in cos(theta).  For a
palindromic angle list the basis-changed form used by the measurement
protocol has a real diagonal, which is what every construction
downstream relies on.  Everything here is dense 2x2 numpy, vectorized
over theta where grids are involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)

# Global phase in front of X H U H.  Pinned so that a palindromic
# sequence summing to pi/2 gives exactly the identity at theta = 0.
REAL_PROTOCOL_PHASE = -1.0j

_XH = X @ HADAMARD


@dataclass(frozen=True)
class PhaseSequence:
    """Ordered processing angles, in radians.

    ``angles`` has d + 1 entries for a depth-d sequence.  ``symmetric``
    is the exact (bitwise) palindrome check.  ``modulus_r`` records the
    parity target the sequence was built for, when one is known.
    """

    angles: np.ndarray
    modulus_r: int | None = None
    symmetric: bool = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.angles, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidArgumentError(
                "a phase sequence needs a 1-D list of at least two angles")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("phase angles must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "angles", arr)
        object.__setattr__(self, "symmetric",
                           bool(np.array_equal(arr, arr[::-1])))

    @property
    def degree(self) -> int:
        """Number of signal interludes, one less than the angle count."""
        return self.angles.size - 1

    def __len__(self) -> int:
        return self.angles.size


def as_phase_sequence(phases) -> PhaseSequence:
    """Coerce an angle list to a validated PhaseSequence."""
    if isinstance(phases, PhaseSequence):
        return phases
    return PhaseSequence(np.asarray(phases, dtype=float))


def rot_x(theta: float) -> np.ndarray:
    """exp(i theta X) as a dense 2x2 array."""
    if not math.isfinite(theta):
        raise InvalidArgumentError("rotation angle must be finite")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]])


def rot_z(phi: float) -> np.ndarray:
    """exp(i phi Z) as a dense 2x2 array."""
    if not math.isfinite(phi):
        raise InvalidArgumentError("rotation angle must be finite")
    e = complex(math.cos(phi), math.sin(phi))
    return np.array([[e, 0.0], [0.0, e.conjugate()]])


def compose_qsp_grid(phases, thetas) -> np.ndarray:
    """Evaluate the alternating composition on a grid of signal angles.

    Parameters
    ----------
    phases : PhaseSequence or array_like
        d + 1 processing angles.
    thetas : array_like
        Signal angles, any shape; flattened to 1-D.

    Returns
    -------
    ndarray, shape (len(thetas), 2, 2)
        One unitary per grid point.  Grid evaluation is the workhorse
        behind response curves, the synthesis cost and the measurement
        error metric, so it is vectorized over theta rather than looped.
    """
    angles = as_phase_sequence(phases).angles
    th = np.atleast_1d(np.asarray(thetas, dtype=float)).ravel()
    if not np.all(np.isfinite(th)):
        raise InvalidArgumentError("signal angles must be finite")
    c = np.cos(th)
    s = 1j * np.sin(th)
    sig = np.zeros((th.size, 2, 2), dtype=complex)
    sig[:, 0, 0] = c
    sig[:, 1, 1] = c
    sig[:, 0, 1] = s
    sig[:, 1, 0] = s

    u = np.zeros((th.size, 2, 2), dtype=complex)
    e0 = complex(math.cos(angles[0]), math.sin(angles[0]))
    u[:, 0, 0] = e0
    u[:, 1, 1] = e0.conjugate()
    for phi in angles[1:]:
        u = u @ sig
        e = complex(math.cos(phi), math.sin(phi))
        u[..., 0] *= e
        u[..., 1] *= e.conjugate()
    return u


def compose_qsp(phases, theta: float) -> np.ndarray:
    """Single-point version of :func:`compose_qsp_grid`."""
    return compose_qsp_grid(phases, [float(theta)])[0]


def real_protocol_grid(phases, thetas) -> np.ndarray:
    """Basis-changed protocol unitaries, one per grid point.

    Computes -i X H U(angles, theta) H.  Palindromic angle lists make
    the diagonal entries real and equal; if the angles additionally sum
    to pi/2 the theta = 0 unitary is exactly the identity, which is why
    the -i sits in front.

    Raises
    ------
    InvalidArgumentError
        If the angle list is not an exact palindrome.
    """
    seq = as_phase_sequence(phases)
    if not seq.symmetric:
        raise InvalidArgumentError(
            "the real-diagonal protocol requires a palindromic phase sequence")
    u = compose_qsp_grid(seq, thetas)
    return REAL_PROTOCOL_PHASE * (_XH @ u @ HADAMARD)


def real_protocol(phases, theta: float) -> np.ndarray:
    """Single-point version of :func:`real_protocol_grid`."""
    return real_protocol_grid(phases, [float(theta)])[0]


def response(m: int, r: int, k: int, phases) -> tuple[complex, complex]:
    """Ancilla amplitudes (u00, u10) at photon number m, target class k.

    Evaluates the real-diagonal protocol at theta = (pi/r)(m - k).  The
    pair of amplitudes satisfies |u00|^2 + |u10|^2 = 1, u00 is 1 exactly
    when m - k is a multiple of r, and the whole curve is periodic in m
    with period r.
    """
    _check_modulus(r)
    theta = math.pi * (int(m) - int(k)) / r
    u = real_protocol(phases, theta)
    return complex(u[0, 0]), complex(u[1, 0])


def _check_modulus(r) -> int:
    if int(r) != r or int(r) < 2:
        raise InvalidArgumentError(f"modulus must be an integer >= 2, got {r!r}")
    return int(r)


def expm2(mats) -> np.ndarray:
    """Matrix exponential of a stack of arbitrary 2x2 complex matrices.

    Closed form through Cayley-Hamilton:

        exp(M) = e^mu [ cosh(q) I + sinh(q)/q (M - mu I) ]

    with mu the mean eigenvalue and q^2 = ((a-d)/2)^2 + bc.  The
    sinh(q)/q factor switches to its power series near q = 0.  Works for
    non-normal input, which is what the no-jump trajectory propagator
    feeds it.

    Parameters
    ----------
    mats : ndarray, shape (..., 2, 2)

    Returns
    -------
    ndarray, same shape.
    """
    m = np.asarray(mats, dtype=complex)
    if m.shape[-2:] != (2, 2):
        raise InvalidArgumentError("expm2 expects trailing shape (2, 2)")
    a = m[..., 0, 0]
    b = m[..., 0, 1]
    c = m[..., 1, 0]
    d = m[..., 1, 1]
    mu = 0.5 * (a + d)
    q = np.sqrt(0.25 * (a - d) ** 2 + b * c + 0j)
    small = np.abs(q) < 1e-6
    qs = np.where(small, 1.0, q)
    q2 = q * q
    cosh_q = np.where(small, 1.0 + q2 / 2.0 + q2 * q2 / 24.0, np.cosh(qs))
    sinhc_q = np.where(small, 1.0 + q2 / 6.0 + q2 * q2 / 120.0,
                       np.sinh(qs) / qs)
    scale = np.exp(mu)
    out = np.empty_like(m)
    out[..., 0, 0] = scale * (cosh_q + sinhc_q * (a - mu))
    out[..., 0, 1] = scale * (sinhc_q * b)
    out[..., 1, 0] = scale * (sinhc_q * c)
    out[..., 1, 1] = scale * (cosh_q + sinhc_q * (d - mu))
    return out
