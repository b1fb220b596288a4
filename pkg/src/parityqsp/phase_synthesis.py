"""Construction of the processing angles: a closed-form family plus a
numeric refiner for when the closed form is not good enough.

The closed-form angles sample a raised-cosine window and are palindromic
by construction; the refiner is a small projected quasi-Newton descent
over the symmetric half of the angle list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .qubit_algebra import (PhaseSequence, _check_modulus, as_phase_sequence,
                            real_protocol_grid)


@dataclass(frozen=True)
class SynthesisReport:
    """Outcome of a numeric phase refinement."""

    phases: PhaseSequence
    cost: float
    iterations: int
    converged: bool
    grid_size: int


def target_g(r: int, m_minus_k: int) -> int:
    """Ideal binary response: 1 on multiples of the modulus, else 0."""
    r = _check_modulus(r)
    return 1 if int(m_minus_k) % r == 0 else 0


def analytic_phases(r: int) -> PhaseSequence:
    """Closed-form palindromic angle list for modulus r.

    The bulk entries sample (4 / (pi r)) (1 + cos(4 x / r) / 2) on the
    integer grid x = -(c-1) .. (c-1) with c = ceil(r / 2), and the two
    edge angles split the remainder so the full list sums to pi/2
    exactly.  The raised-cosine window keeps every bulk angle at or
    below 6 / (pi r).  The resulting depth is 2 c, always even.
    """
    r = _check_modulus(r)
    c = (r + 1) // 2
    x_half = np.arange(c, dtype=float)
    bulk_half = (4.0 / (math.pi * r)) * (1.0 + 0.5 * np.cos(4.0 * x_half / r))
    # Mirror the x > 0 half onto x < 0 so the palindrome is bitwise.
    bulk = np.concatenate((bulk_half[:0:-1], bulk_half))
    edge = 0.5 * (0.5 * math.pi - math.fsum(bulk))
    angles = np.concatenate(([edge], bulk, [edge]))
    return PhaseSequence(angles, modulus_r=r)


def _cost_grid(d: int, r: int):
    """Sample points and binary targets for the depth-d cost.

    The sample points are the x >= 0 extrema of the order-d Chebyshev
    polynomial, theta_j = pi j / d for j = 0 .. ceil((d+1)/2) - 1.  A
    point falling between integer multiples of pi/r inherits the nearest
    multiple's target value.
    """
    if d < 1:
        raise InvalidArgumentError("cost needs a sequence of depth >= 1")
    half = (d + 2) // 2
    thetas = math.pi * np.arange(half) / d
    targets = (np.rint(r * thetas / math.pi).astype(int) % r == 0)
    return thetas, targets.astype(float)


def cost(phases, r: int) -> float:
    """Mean squared response error over the Chebyshev sample grid.

    Evaluates the diagonal of the real protocol at the nonnegative
    extremal nodes of the Chebyshev polynomial of order d (the sequence
    depth) and averages |u00 - g|^2 against the binary target g.
    """
    seq = as_phase_sequence(phases)
    r = _check_modulus(r)
    thetas, targets = _cost_grid(seq.degree, r)
    u00 = real_protocol_grid(seq, thetas)[:, 0, 0]
    return float(np.mean(np.abs(u00 - targets) ** 2))


def _mirror(free: np.ndarray, d: int) -> np.ndarray:
    """Rebuild the full palindromic angle list from its free half."""
    half = (d + 2) // 2
    return np.concatenate((free, free[:d + 1 - half][::-1]))


def _free_cost(free: np.ndarray, d: int, r: int, thetas, targets) -> float:
    u00 = real_protocol_grid(_mirror(free, d), thetas)[:, 0, 0]
    return float(np.mean(np.abs(u00 - targets) ** 2))


def optimize_phases(r: int, d: int, init=None, tol: float = 1e-10,
                    max_iter: int = 200) -> SynthesisReport:
    """Refine a palindromic angle list by projected quasi-Newton descent.

    Works in the reduced parameterization (first ceil((d+1)/2) angles
    free, the rest mirrored) with central-difference gradients, a BFGS
    inverse-Hessian model and Armijo backtracking.  Angles are kept in
    the symmetric search box |phi| <= pi/2, except the central angle of
    an even-depth sequence which ranges over [-pi, pi).

    Parameters
    ----------
    r : int
        Target modulus.
    d : int
        Sequence depth; the angle list has d + 1 entries.
    init : PhaseSequence or array_like, optional
        Palindromic starting point of matching depth.  Defaults to the
        closed-form angles when their depth matches d.
    tol : float
        Cost at which the search stops and reports convergence.
    max_iter : int
        Iteration cap; hitting it is not an error, just converged=False.

    Notes
    -----
    Deterministic: no randomness anywhere, so identical arguments give
    identical reports.  ``converged`` is True only when the final cost
    is at or below ``tol``.
    """
    r = _check_modulus(r)
    if int(d) != d or d < 1:
        raise InvalidArgumentError("depth must be a positive integer")
    d = int(d)
    if init is None:
        seq = analytic_phases(r)
        if seq.degree != d:
            raise InvalidArgumentError(
                f"no default start for depth {d}; closed form has depth "
                f"{seq.degree}, pass init explicitly")
    else:
        seq = as_phase_sequence(init)
        if seq.degree != d:
            raise InvalidArgumentError(
                f"init has depth {seq.degree}, expected {d}")
        if not seq.symmetric:
            raise InvalidArgumentError("init must be palindromic")

    half = (d + 2) // 2
    lo = np.full(half, -0.5 * math.pi)
    hi = np.full(half, 0.5 * math.pi)
    if d % 2 == 0:
        # The central angle is the last free one for even depth.
        lo[-1] = -math.pi
        hi[-1] = math.pi - 1e-15
    thetas, targets = _cost_grid(d, r)

    x = np.clip(seq.angles[:half].copy(), lo, hi)
    f = _free_cost(x, d, r, thetas, targets)
    h_inv = np.eye(half)
    grad = _fd_gradient(x, d, r, thetas, targets)
    iters = 0

    while f > tol and iters < max_iter:
        p = -(h_inv @ grad)
        if p @ grad > -1e-15:
            h_inv = np.eye(half)
            p = -grad
        alpha = 1.0
        x_new, f_new = None, None
        for _ in range(40):
            trial = np.clip(x + alpha * p, lo, hi)
            step = trial - x
            if np.max(np.abs(step)) < 1e-18:
                break
            f_trial = _free_cost(trial, d, r, thetas, targets)
            if f_trial <= f + 1e-4 * (grad @ step):
                x_new, f_new = trial, f_trial
                break
            alpha *= 0.5
        if x_new is None:
            break
        grad_new = _fd_gradient(x_new, d, r, thetas, targets)
        s = x_new - x
        y = grad_new - grad
        sy = s @ y
        if sy > 1e-14:
            rho = 1.0 / sy
            eye = np.eye(half)
            left = eye - rho * np.outer(s, y)
            h_inv = left @ h_inv @ left.T + rho * np.outer(s, s)
        x, f, grad = x_new, f_new, grad_new
        iters += 1

    final = PhaseSequence(_mirror(x, d), modulus_r=r)
    return SynthesisReport(phases=final, cost=f, iterations=iters,
                           converged=bool(f <= tol), grid_size=len(thetas))


def _fd_gradient(x: np.ndarray, d: int, r: int, thetas, targets,
                 h: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(x)
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump[i] = h
        f_plus = _free_cost(x + bump, d, r, thetas, targets)
        f_minus = _free_cost(x - bump, d, r, thetas, targets)
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad
