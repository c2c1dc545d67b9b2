"""Closed-form scalar Gaussian trade-off region.

Alice and Bob observe jointly Gaussian sources (Bob through unit-variance
additive noise, source power ``snr_src``); Eve has no source observation.
The broadcast channel is additive Gaussian with input power ``snr_bob``
and Eve noise scaled so her receive SNR is ``snr_eve``.  The region is

    R_SM <= 1/2 log2( (1+s)(1+b) / (1 + s + min(b, e)) )
    R_SK <= 1/2 log2( ((1+s)(1+b) * 2^(-2 R_SM) - s) / (1 + min(b, e)) )

with s = snr_src, b = snr_bob, e = snr_eve.  The source expressions are
stated in natural units; the public interface works in bits, which for
base-2 exponentials amounts to replacing exp(-2R) by 2^(-2R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ArgumentError


@dataclass(frozen=True)
class GaussianScenario:
    """Scalar Gaussian setup; all SNRs strictly positive and finite.

    Scenarios where Eve also observes a source are rejected by
    construction: whether Gaussian auxiliaries suffice there is open, so
    this module does not model them.
    """

    snr_src: float
    snr_bob: float
    snr_eve: float

    def __post_init__(self):
        for name in ("snr_src", "snr_bob", "snr_eve"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0.0:
                raise ArgumentError(f"{name} must be strictly positive and finite, got {v}")
            object.__setattr__(self, name, v)


def gaussian_max_sm(s: GaussianScenario) -> float:
    """Largest achievable secret-message rate, in bits per use."""
    num = (1.0 + s.snr_src) * (1.0 + s.snr_bob)
    den = 1.0 + s.snr_src + min(s.snr_bob, s.snr_eve)
    return 0.5 * math.log2(num / den)


def gaussian_max_sk(s: GaussianScenario, r_sm: float) -> float:
    """Largest secret-key rate at message rate ``r_sm`` (bits per use)."""
    r_sm = float(r_sm)
    max_sm = gaussian_max_sm(s)
    if r_sm < 0.0 or r_sm > max_sm + 1e-12:
        raise ArgumentError(
            f"r_sm must lie in [0, {max_sm:.6f}], got {r_sm}"
        )
    r_sm = min(r_sm, max_sm)
    num = (1.0 + s.snr_src) * (1.0 + s.snr_bob) * 2.0 ** (-2.0 * r_sm) - s.snr_src
    den = 1.0 + min(s.snr_bob, s.snr_eve)
    # num/den >= 1 on the admissible interval, with equality at r_sm = max_sm.
    return max(0.0, 0.5 * math.log2(num / den))


def gaussian_boundary(
    s: GaussianScenario, samples: int
) -> list[tuple[float, float]]:
    """Boundary points (R_SK, R_SM) at uniformly spaced message rates."""
    if samples < 2:
        raise ArgumentError(f"samples must be >= 2, got {samples}")
    max_sm = gaussian_max_sm(s)
    out = []
    for i in range(samples):
        r_sm = max_sm * i / (samples - 1)
        out.append((gaussian_max_sk(s, r_sm), r_sm))
    return out


def boundary_csv(points: list[tuple[float, float]]) -> str:
    lines = ["r_sm_bits,r_sk_bits"]
    lines += [f"{sm!r},{sk!r}" for sk, sm in points]
    return "\n".join(lines) + "\n"
