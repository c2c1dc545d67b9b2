"""Ensemble-exact simulation of random-coding decode events at large n.

Materializing an i.i.d. codebook with 2^(n R) codewords is impossible once
n R exceeds a few dozen bits, but the *error events* of maximum-likelihood
decoding over such a codebook can still be sampled exactly, because the
competitors are i.i.d. and independent of the received word:

* For a uniform binary codebook sent through a binary symmetric channel,
  a competitor's Hamming distance to the received word is Binomial(n, 1/2)
  regardless of what was received.  Given the true codeword's realized
  distance d0, the number of strictly closer competitors is
  Binomial(N, P(D < d0)) with N the number of competitors, and the number
  of ties is Binomial(N', P(D = d0)).  Sampling those two counts and a
  uniform tie-break reproduces the ML decoder's error process exactly,
  averaged over codebooks - which is precisely the random-coding
  experiment the achievability argument runs.
* For key agreement with U1 = SA over a binary symmetric source leg, the
  same arithmetic applies to the sequences that could beat SA^n inside
  Bob's announced bin: there are C(n, d) sequences at distance d from
  SB^n, each landing in the bin independently with probability 2^(-bin
  bits) under uniform random binning.

Count sampling is exact: numpy's binomial sampler is used whenever the
trial count fits in 64 bits; beyond that the Poisson law with the same
mean is used, whose total-variation distance from the binomial (Le Cam:
N q^2 <= lambda * q with q < 2^-53) is far below Monte Carlo resolution.
The secret key is realized as a GF(2)-linear hash of SA^n, whose exact
uniformity on a uniform source block is certified by a rank computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import PreconditionError

_LN2 = float(np.log(2.0))
# Above this expected count the no-error probability is < exp(-45) ~ 3e-20:
# certain failure at any Monte Carlo resolution.
_CERTAIN_LOG2_LAMBDA = np.log2(45.0) + 6  # lambda > 45 * 64, generous
_MAX_EXACT_N = 2**53


class BinomialScoreModel:
    """log2 tail probabilities of Binomial(n, 1/2) competitor distances."""

    def __init__(self, n: int):
        self.n = n
        ks = np.arange(n + 1)
        log_pmf = gammaln(n + 1) - gammaln(ks + 1) - gammaln(n - ks + 1) - n * _LN2
        self.log2_pmf = log_pmf / _LN2
        # log2 P(D < d), exact prefix logsumexp.
        strict = np.full(n + 2, -np.inf)
        acc = -np.inf
        for d in range(n + 1):
            strict[d] = acc
            acc = np.logaddexp(acc, log_pmf[d])
        strict[n + 1] = acc
        self.log2_cdf_strict = strict / _LN2

    def log2_p_strict(self, d: int) -> float:
        return float(self.log2_cdf_strict[d])

    def log2_p_tie(self, d: int) -> float:
        return float(self.log2_pmf[d])


@lru_cache(maxsize=8)
def _score_model(n: int) -> BinomialScoreModel:
    return BinomialScoreModel(n)


def sample_hit_count(
    rng: np.random.Generator, trials: int, log2_p: float
) -> int:
    """Number of successes among ``trials`` independent events of
    probability 2**log2_p; ``trials`` may be an arbitrary Python int."""
    if trials <= 0 or log2_p == -np.inf:
        return 0
    log2_lam = log2_p + math.log2(trials)
    if log2_lam > _CERTAIN_LOG2_LAMBDA:
        return 1 << 30  # certainly enormous; only ">= 1" is ever used then
    if trials <= _MAX_EXACT_N:
        return int(rng.binomial(trials, min(1.0, 2.0**log2_p)))
    return int(rng.poisson(2.0**log2_lam))


def ml_decode_event(
    rng: np.random.Generator,
    n: int,
    d0: int,
    competitors: int,
) -> bool:
    """Whether ML decoding recovers the true codeword.

    ``d0`` is the true codeword's realized distance to the received word;
    competitors are i.i.d. uniform, so their distances are Binomial(n, 1/2).
    Ties are broken uniformly, which by exchangeability matches any
    index-based rule in distribution.
    """
    model = _score_model(n)
    log2_strict = model.log2_p_strict(d0)
    better = sample_hit_count(rng, competitors, log2_strict)
    if better > 0:
        return False
    # Tie count conditioned on "no strictly better": the same competitors
    # produce both counts, so the tie probability renormalizes by 1 - q.
    p_strict = 2.0**log2_strict if log2_strict > -1074 else 0.0
    log2_tie = model.log2_p_tie(d0) - math.log2(max(1.0 - p_strict, 2.0**-60))
    ties = sample_hit_count(rng, competitors, log2_tie)
    if ties == 0:
        return True
    return bool(rng.random() < 1.0 / (ties + 1))


def rand_bits(rng: np.random.Generator, bits: int) -> int:
    """Uniform ``bits``-wide integer from a seeded generator."""
    if bits <= 0:
        return 0
    nbytes = (bits + 7) // 8
    value = int.from_bytes(rng.bytes(nbytes), "big")
    return value & ((1 << bits) - 1)


def rand_wrong_index(rng: np.random.Generator, bits: int, true_value: int) -> int:
    """Uniform ``bits``-wide integer different from ``true_value``."""
    if bits <= 0:
        return 0
    while True:
        v = rand_bits(rng, bits)
        if v != true_value:
            return v


# ---------------------------------------------------------------------------
# Structure checks: which couplings the ensemble path can simulate.
# ---------------------------------------------------------------------------


def _binary_symmetric_flip(kernel: np.ndarray, atol: float = 1e-9) -> float:
    """Crossover probability if ``kernel`` is a 2x2 binary symmetric matrix."""
    if kernel.shape != (2, 2):
        raise PreconditionError(
            f"ensemble mode needs a binary kernel, got shape {kernel.shape}"
        )
    f = float(kernel[0, 1])
    target = np.array([[1 - f, f], [f, 1 - f]])
    if not np.allclose(kernel, target, atol=atol):
        raise PreconditionError(
            "ensemble mode needs a binary symmetric kernel; got rows "
            f"{kernel.tolist()}"
        )
    if f >= 0.5:
        raise PreconditionError(
            f"ensemble mode needs crossover < 1/2, got {f}"
        )
    return f


def effective_bob_flip(coupling) -> float:
    """Crossover of the effective V1 -> Y kernel, or raise.

    The ensemble pipe transport requires: a constant V2, a uniform binary
    effective V1 law, and a binary symmetric composed kernel
    p(Y|V1) = p(X|V1) p(Y|X).
    """
    prov = coupling.provenance
    v2_law = prov.v2_law
    if np.count_nonzero(v2_law > 1e-12) != 1:
        raise PreconditionError(
            "ensemble mode needs a constant V2 (single-atom law); got "
            f"{v2_law.tolist()}"
        )
    v2_atom = int(np.argmax(v2_law))
    v1_law = prov.v1_given_v2.rows[v2_atom]
    support = np.flatnonzero(v1_law > 1e-12)
    if support.size != 2 or not np.allclose(v1_law[support], 0.5, atol=1e-9):
        raise PreconditionError(
            "ensemble mode needs a uniform binary V1 law; got "
            f"{v1_law.tolist()}"
        )
    p_y_given_x = prov.channel.rows.sum(axis=2)
    p_y_given_v1 = prov.x_given_v1.rows[support] @ p_y_given_x
    return _binary_symmetric_flip(p_y_given_v1)


@dataclass(frozen=True)
class VirtualWiretapCode:
    """Stand-in for an unmaterializably large wiretap codebook.

    Carries the pipe geometry and the effective Bob crossover; decode
    events are sampled by :meth:`transmit`.  The public-a layer must be
    empty (constant V2), so the joint codebook has
    2^(bits_private + bits_public_b) codewords.
    """

    n: int
    bits_private: int
    bits_public_b: int
    flip_bob: float
    rates: tuple[float, float, float]

    @property
    def bits_public_a(self) -> int:
        return 0

    @property
    def total_bits(self) -> int:
        return self.bits_private + self.bits_public_b

    def transmit(
        self, priv: int, pub_b: int, rng: np.random.Generator
    ) -> tuple[int, int]:
        """One use of the pipes: returns Bob's decoded (priv, pub_b).

        Draw order is fixed (channel flips, competitor counts, tie break,
        wrong index) so seeded runs are reproducible.
        """
        d0 = int(rng.binomial(self.n, self.flip_bob))
        competitors = (1 << self.total_bits) - 1
        if ml_decode_event(rng, self.n, d0, competitors):
            return priv, pub_b
        wrong = rand_wrong_index(
            rng, self.total_bits, (priv << self.bits_public_b) | pub_b
        )
        return wrong >> self.bits_public_b, wrong & ((1 << self.bits_public_b) - 1)


# ---------------------------------------------------------------------------
# Hash-realized key agreement for U1 = SA over a symmetric binary leg.
# ---------------------------------------------------------------------------


def gf2_rank(rows: list[int]) -> int:
    """Rank over GF(2) of a matrix given as row bitmasks."""
    rank = 0
    basis: list[int] = []
    for row in rows:
        for b in basis:
            row = min(row, row ^ b)
        if row:
            basis.append(row)
            basis.sort(reverse=True)
            rank += 1
    return rank


def require_hashable_key_source(source, u1_given_sa) -> float:
    """Bob-leg crossover if the scheme is ensemble-realizable, else raise.

    Requirements: SA uniform binary, U1 = SA (identity kernel), and a
    binary symmetric p(SB|SA).  Eve's leg only enters through rates.
    """
    p = source.probabilities
    if p.shape[0] != 2 or p.shape[1] != 2:
        raise PreconditionError(
            "ensemble key agreement needs binary SA and SB alphabets"
        )
    p_sa = p.sum(axis=(1, 2))
    if not np.allclose(p_sa, 0.5, atol=1e-9):
        raise PreconditionError(f"ensemble key agreement needs uniform SA; got {p_sa}")
    if u1_given_sa.rows.shape != (2, 2) or not np.allclose(
        u1_given_sa.rows, np.eye(2), atol=1e-9
    ):
        raise PreconditionError(
            "ensemble key agreement needs the identity kernel U1 = SA"
        )
    p_sb_given_sa = p.sum(axis=2) / p_sa[:, None]
    return _binary_symmetric_flip(p_sb_given_sa)


@dataclass(frozen=True)
class HashKeyScheme:
    """Key agreement realized by hashing the source block directly.

    With U1 = SA the codebook of the binning scheme covers the source
    space, so binning SA^n itself is an equivalent realization: the bin
    index is a uniform random function (rate I(U1;SA|SB) + delta) and the
    key is a fixed GF(2)-linear hash, exactly uniform on the uniform
    source block whenever the matrix has full row rank.
    """

    n: int
    psi_bits: int
    key_bits: int
    flip_bob: float
    seed: int
    key_matrix: tuple[int, ...]  # key_bits rows, each an n-bit mask
    key_matrix_rank: int

    @classmethod
    def build(
        cls, n: int, psi_bits: int, key_bits: int, flip_bob: float, seed: int
    ) -> "HashKeyScheme":
        rng = np.random.default_rng((seed, 4))
        rows = tuple(rand_bits(rng, n) for _ in range(key_bits))
        return cls(
            n=n,
            psi_bits=psi_bits,
            key_bits=key_bits,
            flip_bob=flip_bob,
            seed=seed,
            key_matrix=rows,
            key_matrix_rank=gf2_rank(list(rows)),
        )

    def _hash_key(self, sa_value: int) -> int:
        key = 0
        for row in self.key_matrix:
            key = (key << 1) | (bin(row & sa_value).count("1") & 1)
        return key

    def alice(self, rng: np.random.Generator) -> tuple[int, int, int]:
        """Returns (bin message psi, key K_A, realized Bob distance d0)."""
        sa_value = rand_bits(rng, self.n)
        psi = rand_bits(rng, self.psi_bits)  # uniform random binning of SA^n
        d0 = int(rng.binomial(self.n, self.flip_bob))
        ka = self._hash_key(sa_value)
        return psi, ka, d0

    def bob(
        self, psi_ok: bool, ka: int, d0: int, rng: np.random.Generator
    ) -> int:
        """Bob's key: K_A on successful in-bin decoding, a wrong value else.

        In-bin competitors at each distance are disjoint sequence sets with
        independent bin assignments, so their counts are independent
        binomials (no multinomial conditioning as in the channel decode).
        """
        decoded = False
        if psi_ok:
            log2_q = -float(self.psi_bits)  # uniform binning hit probability
            better = 0
            for d in range(d0):
                better += sample_hit_count(rng, _binomial_count(self.n, d), log2_q)
                if better:
                    break
            if better == 0:
                ties = sample_hit_count(
                    rng, _binomial_count(self.n, d0) - 1, log2_q
                )
                decoded = ties == 0 or bool(rng.random() < 1.0 / (ties + 1))
        if decoded:
            return ka
        if self.key_bits == 0:
            return 0
        if self.key_bits >= 48:
            return ka ^ 1  # hash coincidence probability below resolution
        return rand_wrong_index(rng, self.key_bits, ka)

    @property
    def key_entropy_bits(self) -> float:
        """Exact entropy of K_A: the rank of the hash on a uniform block."""
        return float(self.key_matrix_rank)


@lru_cache(maxsize=4)
def _binomial_table(n: int) -> list[int]:
    row = [1]
    for k in range(n):
        row.append(row[-1] * (n - k) // (k + 1))
    return row


def _binomial_count(n: int, d: int) -> int:
    if d < 0 or d > n:
        return 0
    return _binomial_table(n)[d]
