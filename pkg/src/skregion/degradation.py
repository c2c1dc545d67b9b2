"""Stochastic degradation orders between component channels or source legs.

A channel to Eve is (stochastically) degraded with respect to the channel
to Bob when an intermediate kernel f exists with

    p(z|x) = sum_y p(y|x) f(z|y)   for every x, z.

Existence is decided by a small linear program that minimizes the maximum
factorization error over row-stochastic kernels f; the pair is declared
degraded when the optimum is within tolerance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import ArgumentError, CompositionError
from .prob import Channel

DEFAULT_TOL = 1e-7


class DegradationOrder(enum.Enum):
    FORWARD = "forwardly-degraded"  # Eve's leg factors through Bob's
    REVERSE = "reversely-degraded"  # Bob's leg factors through Eve's
    BOTH = "both"
    NEITHER = "neither"


@dataclass(frozen=True)
class DegradationVerdict:
    """Outcome of classifying a (Bob leg, Eve leg) pair.

    ``residual_*`` is the optimal max factorization error of the LP in that
    direction; the matching witness kernel is present iff the residual is
    within the tolerance the classification ran at.
    """

    order: DegradationOrder
    witness_forward: Channel | None
    residual_forward: float
    witness_reverse: Channel | None
    residual_reverse: float

    @property
    def forward_feasible(self) -> bool:
        return self.witness_forward is not None

    @property
    def reverse_feasible(self) -> bool:
        return self.witness_reverse is not None


def _single_output(channel: Channel, role: str) -> np.ndarray:
    if len(channel.outputs) != 1:
        raise ArgumentError(f"{role} must be a single-output channel")
    return channel.rows


def _solve_factorization(first: np.ndarray, second: np.ndarray):
    """min over row-stochastic f of max |second - first @ f|.

    Returns (f, residual). Variables are the entries of f plus the scalar
    max error t; all constraints are linear.
    """
    nx, ny = first.shape
    nz = second.shape[1]
    nf = ny * nz
    # Objective: minimize t (last variable).
    c = np.zeros(nf + 1)
    c[-1] = 1.0
    # |second[x,z] - sum_y first[x,y] f[y,z]| <= t, two inequalities each.
    rows = []
    rhs = []
    for x in range(nx):
        for z in range(nz):
            coef = np.zeros(nf + 1)
            coef[z : nf : nz] = first[x]  # f stored row-major: f[y,z] at y*nz+z
            coef[-1] = -1.0
            rows.append(coef)
            rhs.append(second[x, z])
            neg = -coef
            neg[-1] = -1.0
            rows.append(neg)
            rhs.append(-second[x, z])
    a_ub = np.array(rows)
    b_ub = np.array(rhs)
    # Rows of f sum to 1.
    a_eq = np.zeros((ny, nf + 1))
    for y in range(ny):
        a_eq[y, y * nz : (y + 1) * nz] = 1.0
    b_eq = np.ones(ny)
    bounds = [(0.0, 1.0)] * nf + [(0.0, None)]
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
        method="highs",
    )
    if not res.success:  # the LP is always feasible; treat failure as no witness
        return None, float("inf")
    f = res.x[:nf].reshape(ny, nz)
    f = np.clip(f, 0.0, None)
    f /= f.sum(axis=1, keepdims=True)
    residual = float(np.abs(second - first @ f).max())
    return f, residual


def find_degrading_map(
    first: Channel, second: Channel, tol: float = DEFAULT_TOL
) -> Channel | None:
    """Row-stochastic kernel f with ``second = first . f``, if one exists.

    ``first`` and ``second`` must share their input alphabet. Returns the
    witness as a channel from ``first``'s output to ``second``'s output, or
    None when the best achievable max factorization error exceeds ``tol``.
    """
    fr = _single_output(first, "first")
    sr = _single_output(second, "second")
    if first.in_size != second.in_size:
        raise ArgumentError(
            f"channels must share the input alphabet: "
            f"{first.in_size} vs {second.in_size}"
        )
    f, residual = _solve_factorization(fr, sr)
    if f is None or residual > tol:
        return None
    return Channel(first.outputs[0], (second.outputs[0],), f)


def _classify(
    bob: Channel, eve: Channel, tol: float
) -> DegradationVerdict:
    fr = _single_output(bob, "channel_to_bob")
    er = _single_output(eve, "channel_to_eve")
    if bob.in_size != eve.in_size:
        raise ArgumentError(
            f"channels must share the input alphabet: "
            f"{bob.in_size} vs {eve.in_size}"
        )
    f_fwd, r_fwd = _solve_factorization(fr, er)
    f_rev, r_rev = _solve_factorization(er, fr)
    fwd_ok = f_fwd is not None and r_fwd <= tol
    rev_ok = f_rev is not None and r_rev <= tol
    if fwd_ok and rev_ok:
        order = DegradationOrder.BOTH
    elif fwd_ok:
        order = DegradationOrder.FORWARD
    elif rev_ok:
        order = DegradationOrder.REVERSE
    else:
        order = DegradationOrder.NEITHER
    return DegradationVerdict(
        order=order,
        witness_forward=(
            Channel(bob.outputs[0], (eve.outputs[0],), f_fwd) if fwd_ok else None
        ),
        residual_forward=r_fwd,
        witness_reverse=(
            Channel(eve.outputs[0], (bob.outputs[0],), f_rev) if rev_ok else None
        ),
        residual_reverse=r_rev,
    )


def classify_component(
    channel_to_bob: Channel, channel_to_eve: Channel, tol: float = DEFAULT_TOL
) -> DegradationVerdict:
    """Degradation order of a broadcast component given its two legs."""
    return _classify(channel_to_bob, channel_to_eve, tol)


def classify_source_leg(
    sb_given_sa: Channel, se_given_sa: Channel, tol: float = DEFAULT_TOL
) -> DegradationVerdict:
    """Degradation order of a source component.

    Forward means Eve's conditional factors through Bob's, i.e. the Markov
    chain SA - SB - SE holds for some witness kernel.
    """
    return _classify(sb_given_sa, se_given_sa, tol)


def source_conditionals(source) -> tuple[Channel, Channel]:
    """Extract p(SB|SA) and p(SE|SA) channels from a (SA,SB,SE) joint."""
    if source.names != ("SA", "SB", "SE"):
        raise CompositionError(
            f"source must have variables (SA, SB, SE), got {source.names}"
        )
    p = source.probabilities
    p_sa = p.sum(axis=(1, 2))
    if np.any(p_sa <= 0):
        raise ArgumentError(
            "every SA symbol needs positive mass to condition on"
        )
    sb = p.sum(axis=2) / p_sa[:, None]
    se = p.sum(axis=1) / p_sa[:, None]
    sa_size = p.shape[0]
    return (
        Channel(("SA", sa_size), (("SB", p.shape[1]),), sb),
        Channel(("SA", sa_size), (("SE", p.shape[2]),), se),
    )
