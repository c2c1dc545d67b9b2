"""Desk-scale Monte Carlo of the separation protocol.

The protocol converts the broadcast channel into a secret bit pipe (SBP)
and a public bit pipe (PBP) with a superposition wiretap code, runs key
agreement over the correlated sources through the public pipe, and
combines the two resources with a one-time pad:

* Case 1 (message rate at least the secret pipe rate): the SBP carries
  part of the message; the source key splits into the output key and an
  OTP pad that protects the message remainder on the public pipe.
* Case 2 (message fits in the SBP): the message rides the SBP; leftover
  SBP capacity is filled with fresh coin flips that join the key, and the
  key-agreement public message (plus filler) rides the PBP.

All pipe and key payloads are whole bits; every episode pushes exactly
sbp_bits + pbp_bits through the pipes, with local-randomness filler sized
to close any deficit.  Decoding is maximum likelihood: it dominates
typicality decoding at finite blocklength and is unambiguous.

Two execution modes share the case bookkeeping: ``explicit`` materializes
codebooks and decodes them exhaustively (required for exact leakage
enumeration), while ``ensemble`` samples the identical decode events from
the random-coding ensemble without materializing codebooks, which is what
makes blocklengths like n=400 reachable (see ensemble.py).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ensemble as ens
from .errors import ArgumentError, CodebookLimitError, PreconditionError
from .prob import (
    LOG_FLOOR,
    AuxiliaryCoupling,
    Channel,
    JointDistribution,
    tensor_conditional_mi,
    tensor_mutual_information,
)
from .regions import RegionPolygon, region_bounds

DEFAULT_CODEWORD_LIMIT = 10_000_000
DEFAULT_EXACT_LEAKAGE_CAP = 1 << 16


def _rand_symbols(rng: np.random.Generator, law: np.ndarray, count: int) -> np.ndarray:
    """Vectorized i.i.d. sampling from a finite law via inverse CDF."""
    cum = np.cumsum(law)
    u = rng.random(count)
    return np.searchsorted(cum, u, side="right").clip(0, law.size - 1)


def _rand_rows(
    rng: np.random.Generator, rows: np.ndarray, conditions: np.ndarray
) -> np.ndarray:
    """Sample one symbol per entry of ``conditions`` from ``rows[cond]``."""
    cum = np.cumsum(rows, axis=1)[conditions]
    u = rng.random(conditions.shape)
    return (u[..., None] > cum).sum(axis=-1).clip(0, rows.shape[1] - 1)


def _log_probs(p: np.ndarray) -> np.ndarray:
    # Impossible transitions get a finite dominant penalty so ML stays
    # well defined when some observed symbol has zero likelihood everywhere.
    return np.where(p > LOG_FLOOR, np.log(np.maximum(p, LOG_FLOOR)), -1e30)


def _floor_bits(n: int, rate: float) -> int:
    return max(0, int(math.floor(n * rate + 1e-12)))


def _stream(seed, *tags: int) -> tuple:
    """Flatten a seed (int or tuple) plus stream tags into one rng key."""
    base = tuple(seed) if isinstance(seed, tuple) else (seed,)
    return base + tags


def _source_block(source: JointDistribution, u1_given_sa: Channel) -> np.ndarray:
    """Joint tensor over (U1, SA, SB, SE)."""
    return np.einsum(
        "ga,ghi->aghi", u1_given_sa.rows, source.probabilities, optimize=True
    )


# ---------------------------------------------------------------------------
# Pipe rates and the wiretap code (explicit realization).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipeRates:
    """Realized secret/public bit-pipe rates for one blocklength."""

    n: int
    sbp_bits: int
    pbp_bits: int

    @property
    def r_sbp(self) -> float:
        return self.sbp_bits / self.n

    @property
    def r_pbp(self) -> float:
        return self.pbp_bits / self.n


@dataclass(frozen=True)
class WiretapCodebooks:
    """Materialized superposition codebooks of the channel interface.

    ``v2_codewords[l]`` carries the public-a message; ``v1_codewords[j, k,
    l]`` is indexed by (private, public-b, public-a) and drawn i.i.d. from
    p(V1|V2) conditioned on its parent v2 codeword.  ``x_given_v1`` is the
    memoryless input kernel the encoder simulates.
    """

    n: int
    delta: float
    seed: int
    bits_public_a: int
    bits_public_b: int
    bits_private: int
    rates: tuple[float, float, float]  # pre-rounding (r_pub_a, r_pub_b, r_sbp)
    v2_codewords: np.ndarray
    v1_codewords: np.ndarray
    x_given_v1: np.ndarray

    @property
    def num_public_a(self) -> int:
        return 1 << self.bits_public_a

    @property
    def num_public_b(self) -> int:
        return 1 << self.bits_public_b

    @property
    def num_private(self) -> int:
        return 1 << self.bits_private


def pipe_rate_targets(coupling: AuxiliaryCoupling) -> tuple[float, float, float]:
    """Pre-backoff rate targets (r_public_a, r_public_b, r_sbp) in bits/use."""
    iv2y = coupling.measure("I(V2;Y)")
    iv1z_v2 = coupling.measure("I(V1;Z|V2)")
    iv1y_v2 = coupling.measure("I(V1;Y|V2)")
    return iv2y, iv1z_v2, max(0.0, iv1y_v2 - iv1z_v2)


def build_wiretap_code(
    coupling: AuxiliaryCoupling,
    n: int,
    delta: float,
    seed: int,
    rate_scale: float | None = None,
    codeword_limit: int = DEFAULT_CODEWORD_LIMIT,
) -> WiretapCodebooks:
    """Draw the superposition codebooks for one coupling.

    Rates default to the decodability targets minus ``delta``; passing
    ``rate_scale`` multiplies the raw targets instead (used both for the
    standard inside-the-region backoff and for converse experiments above
    the targets).  A pipe whose rate comes out nonpositive is built at
    rate zero.
    """
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    ra_t, rb_t, rp_t = pipe_rate_targets(coupling)
    if rate_scale is None:
        rates = (ra_t - delta, rb_t - delta, rp_t - delta)
    else:
        rates = (rate_scale * ra_t, rate_scale * rb_t, rate_scale * rp_t)
    bits_a = _floor_bits(n, rates[0])
    bits_b = _floor_bits(n, rates[1])
    bits_p = _floor_bits(n, rates[2])
    num_a, num_b, num_p = 1 << bits_a, 1 << bits_b, 1 << bits_p
    total_symbols = (num_a + num_p * num_b * num_a) * n
    if total_symbols > codeword_limit:
        raise CodebookLimitError(
            f"codebooks need {total_symbols} codeword-symbols, exceeding the "
            f"cap of {codeword_limit}; use the ensemble mode at this scale"
        )
    prov = coupling.provenance
    rng = np.random.default_rng(_stream(seed, 1))
    v2_cw = _rand_symbols(rng, prov.v2_law, num_a * n).reshape(num_a, n)
    v1_cw = np.empty((num_p, num_b, num_a, n), dtype=np.int64)
    for ell in range(num_a):
        cond = np.broadcast_to(v2_cw[ell], (num_p * num_b, n))
        v1_cw[:, :, ell, :] = _rand_rows(rng, prov.v1_given_v2.rows, cond).reshape(
            num_p, num_b, n
        )
    return WiretapCodebooks(
        n=n,
        delta=delta,
        seed=seed,
        bits_public_a=bits_a,
        bits_public_b=bits_b,
        bits_private=bits_p,
        rates=(ra_t, rb_t, rp_t),
        v2_codewords=v2_cw,
        v1_codewords=v1_cw,
        x_given_v1=prov.x_given_v1.rows,
    )


def build_virtual_wiretap_code(
    coupling: AuxiliaryCoupling,
    n: int,
    rate_scale: float,
) -> ens.VirtualWiretapCode:
    """Ensemble stand-in for codebooks too large to materialize.

    Same rate bookkeeping as :func:`build_wiretap_code` with a
    multiplicative scale, for couplings the ensemble sampler supports
    (constant V2, uniform binary V1, binary symmetric Bob kernel).
    """
    flip_bob = ens.effective_bob_flip(coupling)
    ra_t, rb_t, rp_t = pipe_rate_targets(coupling)
    if _floor_bits(n, rate_scale * ra_t) != 0:
        raise PreconditionError(
            "ensemble mode supports a constant V2 only (public-a rate 0)"
        )
    return ens.VirtualWiretapCode(
        n=n,
        bits_private=_floor_bits(n, rate_scale * rp_t),
        bits_public_b=_floor_bits(n, rate_scale * rb_t),
        flip_bob=flip_bob,
        rates=(ra_t, rb_t, rp_t),
    )


def transmit_and_decode(
    code: WiretapCodebooks,
    channel: Channel,
    w_private: int,
    w_public_a: int,
    w_public_b: int,
    seed,
) -> tuple[tuple[int, int, int], np.ndarray]:
    """Send one triple through the channel; Bob decodes by joint ML.

    Returns (Bob's decoded (private, public_b, public_a), Eve's Z^n).
    Decoding failure is data, not an error.
    """
    if not 0 <= w_private < code.num_private:
        raise ArgumentError(f"w_private {w_private} out of range")
    if not 0 <= w_public_a < code.num_public_a:
        raise ArgumentError(f"w_public_a {w_public_a} out of range")
    if not 0 <= w_public_b < code.num_public_b:
        raise ArgumentError(f"w_public_b {w_public_b} out of range")
    rng = np.random.default_rng(_stream(seed, 2))
    v1 = code.v1_codewords[w_private, w_public_b, w_public_a]
    x = _rand_rows(rng, code.x_given_v1, v1)
    yz = _rand_rows(rng, channel.matrix, x)
    nz = channel.outputs[1][1]
    y, z = yz // nz, yz % nz
    return _ml_decode(code, channel, y), z


def _ml_decode(
    code: WiretapCodebooks, channel: Channel, y: np.ndarray
) -> tuple[int, int, int]:
    p_y_given_x = channel.rows.sum(axis=2)
    log_p = _log_probs(code.x_given_v1 @ p_y_given_x)
    flat = code.v1_codewords.reshape(-1, code.n)
    ll = log_p[flat, y[None, :]].sum(axis=1)
    best = int(np.argmax(ll))  # ties resolve to the lowest flat index
    j, k, ell = np.unravel_index(
        best, (code.num_private, code.num_public_b, code.num_public_a)
    )
    return int(j), int(k), int(ell)


# ---------------------------------------------------------------------------
# Key agreement by random binning (explicit realization).
# ---------------------------------------------------------------------------


def _tv_to_joint(
    codewords: np.ndarray, seq: np.ndarray, p_joint: np.ndarray, n: int
) -> np.ndarray:
    """Total-variation distance of each codeword's empirical joint with
    ``seq`` from the model joint ``p_joint`` (shape |U| x |S|)."""
    nu, ns = p_joint.shape
    dist = np.zeros(codewords.shape[0])
    for u in range(nu):
        cw_is_u = codewords == u
        for s in range(ns):
            emp = (cw_is_u & (seq == s)).sum(axis=1) / n
            dist += np.abs(emp - p_joint[u, s])
    return 0.5 * dist


@dataclass(frozen=True)
class KeyAgreementScheme:
    """Binned codebook realizing key agreement over the public pipe.

    Codewords are i.i.d. from the U1 marginal; the index bits split into
    [bin | key coset | residual], so each codeword belongs to exactly one
    bin and one coset.  The encoder maps SA^n to the bin of the first
    codeword jointly typical with it (total-variation threshold 2*delta,
    falling back to codeword 0); Bob scans the announced bin with the
    matching rule against SB^n, so on identical side information both ends
    select the same codeword.
    """

    n: int
    delta: float
    seed: int
    bits_codebook: int
    bits_bin: int
    bits_key: int
    rates: tuple[float, float]  # (r_public target, r_key target) bits/use
    codewords: np.ndarray
    p_joint_u1_sa: np.ndarray
    p_joint_u1_sb: np.ndarray

    @property
    def psi_bits(self) -> int:
        return self.bits_bin

    @property
    def key_bits(self) -> int:
        return self.bits_key

    def _index_parts(self, idx: int) -> tuple[int, int]:
        resid = self.bits_codebook - self.bits_bin - self.bits_key
        return (
            idx >> (self.bits_key + resid),
            (idx >> resid) & ((1 << self.bits_key) - 1),
        )

    def encode(self, sa_seq: np.ndarray) -> tuple[int, int]:
        """psi(SA^n) and Alice's key K_A."""
        tv = _tv_to_joint(self.codewords, sa_seq, self.p_joint_u1_sa, self.n)
        hits = np.flatnonzero(tv <= 2 * self.delta)
        chosen = int(hits[0]) if hits.size else 0
        return self._index_parts(chosen)[0], self._index_parts(chosen)[1]

    def decode(self, bin_idx: int, sb_seq: np.ndarray) -> int:
        """Bob's key K_B from the announced bin and his source block.

        First in-bin codeword within the typicality threshold: the same
        scan rule and fallback as the encoder, so identical side
        information always reproduces K_A (including when the source block
        itself was atypical and the encoder fell back).
        """
        resid = self.bits_codebook - self.bits_bin - self.bits_key
        per_bin = 1 << (self.bits_key + resid)
        start = bin_idx * per_bin
        members = self.codewords[start : start + per_bin]
        tv = _tv_to_joint(members, sb_seq, self.p_joint_u1_sb, self.n)
        hits = np.flatnonzero(tv <= 2 * self.delta)
        offset = int(hits[0]) if hits.size else 0
        return self._index_parts(start + offset)[1]


def build_key_agreement(
    source: JointDistribution,
    u1_given_sa: Channel,
    n: int,
    delta: float,
    seed: int,
    rate_scale: float | None = None,
    codeword_limit: int = DEFAULT_CODEWORD_LIMIT,
) -> KeyAgreementScheme:
    """Draw the binned codebook for one auxiliary kernel.

    The codebook holds 2^(n (I(U1;SA) + delta)) codewords; the bin message
    has rate I(U1;SA|SB) + delta and the key coset rate defaults to
    [I(U1;SB) - I(U1;SE)]_+ - delta (or ``rate_scale`` times the raw
    target).  When Eve's side information dominates Bob's the key is
    empty, which is allowed.
    """
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    block = _source_block(source, u1_given_sa)
    i_u1_sa = tensor_mutual_information(block, (0,), (1,))
    r_pub_t = tensor_conditional_mi(block, (0,), (1,), (2,))
    r_key_t = max(
        0.0,
        tensor_mutual_information(block, (0,), (2,))
        - tensor_mutual_information(block, (0,), (3,)),
    )
    bits_cw = _floor_bits(n, i_u1_sa + delta)
    # A bin message is only sized when Bob actually lacks information
    # about SA; the delta slack on an exactly-zero requirement would
    # squander public rate.
    if r_pub_t <= 1e-12:
        bits_bin = 0
    else:
        bits_bin = min(_floor_bits(n, r_pub_t + delta), bits_cw)
    if rate_scale is None:
        bits_key = _floor_bits(n, r_key_t - delta)
    else:
        bits_key = _floor_bits(n, rate_scale * r_key_t)
    bits_key = min(bits_key, bits_cw - bits_bin)
    num_cw = 1 << bits_cw
    if num_cw * n > codeword_limit:
        raise CodebookLimitError(
            f"key-agreement codebook needs {num_cw * n} codeword-symbols, "
            f"exceeding the cap of {codeword_limit}; use the ensemble mode"
        )
    p_u1 = block.sum(axis=(1, 2, 3))
    p_u1_sa = block.sum(axis=(2, 3))
    p_u1_sb = block.sum(axis=(1, 3))
    rng = np.random.default_rng(_stream(seed, 3))
    codewords = _rand_symbols(rng, p_u1, num_cw * n).reshape(num_cw, n)
    return KeyAgreementScheme(
        n=n,
        delta=delta,
        seed=seed,
        bits_codebook=bits_cw,
        bits_bin=bits_bin,
        bits_key=bits_key,
        rates=(r_pub_t + delta, r_key_t),
        codewords=codewords,
        p_joint_u1_sa=p_u1_sa,
        p_joint_u1_sb=p_u1_sb,
    )


# ---------------------------------------------------------------------------
# One-time pad.
# ---------------------------------------------------------------------------


def one_time_pad(message_bits, key_bits) -> np.ndarray:
    """Bitwise XOR of two equal-length 0/1 sequences."""
    m = np.asarray(message_bits, dtype=np.uint8)
    k = np.asarray(key_bits, dtype=np.uint8)
    if m.shape != k.shape:
        raise ArgumentError(f"message and key lengths differ: {m.shape} vs {k.shape}")
    if m.size and (m.max() > 1 or k.max() > 1):
        raise ArgumentError("inputs must be 0/1 bit sequences")
    return m ^ k


# ---------------------------------------------------------------------------
# Leakage estimation.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeakageEstimate:
    """I(secret; eve-view) estimate in total bits, with provenance."""

    bits_total: float
    estimator: str
    bias_bound: float | None
    samples: int | None


def _mi_of_law(law: np.ndarray) -> float:
    pa = law.sum(axis=1, keepdims=True)
    pb = law.sum(axis=0, keepdims=True)
    mask = law > LOG_FLOOR
    terms = np.zeros_like(law)
    terms[mask] = law[mask] * (np.log2(law[mask]) - np.log2((pa @ pb)[mask]))
    return max(0.0, float(terms.sum()))


def estimate_leakage(
    transcripts, mode: str, outcome_cap: int = DEFAULT_EXACT_LEAKAGE_CAP
) -> LeakageEstimate:
    """Leakage in bits (total over the block).

    ``mode='exact'`` takes the protocol's joint law as a 2-D array indexed
    by (secret payload, Eve view) and computes mutual information by
    enumeration.  ``mode='plugin'`` takes at least 100 sampled (secret,
    view) pairs and reports the plug-in estimate together with its
    Miller-Madow bias bound; the plug-in value is biased upward and is
    never presented as ground truth.
    """
    if mode == "exact":
        law = np.asarray(transcripts, dtype=float)
        if law.ndim != 2:
            raise ArgumentError("exact mode expects a 2-D joint law")
        if law.size > outcome_cap:
            raise ArgumentError(
                f"exact law has {law.size} cells, above the cap {outcome_cap}"
            )
        if abs(law.sum() - 1.0) > 1e-9:
            raise ArgumentError(f"law sums to {law.sum()!r}, not 1")
        return LeakageEstimate(_mi_of_law(law), "exact(enumeration)", None, None)
    if mode == "plugin":
        pairs = list(transcripts)
        if len(pairs) < 100:
            raise ArgumentError(f"plugin mode needs >= 100 transcripts, got {len(pairs)}")
        n = len(pairs)
        joint: dict = {}
        lefts: dict = {}
        rights: dict = {}
        for a, b in pairs:
            joint[(a, b)] = joint.get((a, b), 0) + 1
            lefts[a] = lefts.get(a, 0) + 1
            rights[b] = rights.get(b, 0) + 1

        def plugin_h(counts: dict) -> float:
            ps = np.array(list(counts.values()), dtype=float) / n
            return float(-(ps * np.log2(ps)).sum())

        mi = max(0.0, plugin_h(lefts) + plugin_h(rights) - plugin_h(joint))
        # Miller-Madow bias of the plug-in MI estimate.
        bias = (len(joint) - len(lefts) - len(rights) + 1) / (2 * n * math.log(2))
        return LeakageEstimate(mi, "plugin(miller-madow)", abs(bias), n)
    raise ArgumentError(f"unknown leakage mode {mode!r}")


def wiretap_private_law(
    code: WiretapCodebooks,
    channel: Channel,
    outcome_cap: int = DEFAULT_EXACT_LEAKAGE_CAP,
) -> np.ndarray:
    """Exact joint law p(W_private, Z^n) of a materialized wiretap code.

    Enumerates all of Eve's sequences; requires the law to fit under
    ``outcome_cap`` cells.
    """
    nz = channel.outputs[1][1]
    n_z_seqs = nz**code.n
    if n_z_seqs * code.num_private > outcome_cap:
        raise ArgumentError(
            f"exact law needs {n_z_seqs * code.num_private} cells, above the "
            f"cap {outcome_cap}"
        )
    p_z_given_x = channel.rows.sum(axis=1)
    p_z_given_v1 = code.x_given_v1 @ p_z_given_x
    z_seqs = np.stack(
        np.meshgrid(*([np.arange(nz)] * code.n), indexing="ij"), axis=-1
    ).reshape(-1, code.n)
    flat = code.v1_codewords.reshape(-1, code.n)
    prob = np.ones((flat.shape[0], n_z_seqs))
    for i in range(code.n):
        prob *= p_z_given_v1[flat[:, i]][:, z_seqs[:, i]]
    per_private = prob.reshape(code.num_private, -1, n_z_seqs).mean(axis=1)
    return per_private / code.num_private


# ---------------------------------------------------------------------------
# Case bookkeeping shared by both execution modes.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _CaseLayout:
    """Exact integer-bit realization of the two-case assembly."""

    case: int
    sbp_bits: int
    pbp_bits: int
    msg_bits: int
    psi_bits: int
    ka_bits: int
    key_out_bits: int
    # Case 1 only: message overflow onto the public pipe, OTP-protected.
    msg_pbp_bits: int = 0
    # Case 2 only: how psi splits across the pipes and SBP coin filler.
    psi_sbp_bits: int = 0
    psi_pbp_bits: int = 0
    filler_sbp_bits: int = 0
    filler_pub_bits: int = 0


def _plan_case(
    sbp_bits: int, pbp_bits: int, msg_bits: int, psi_bits: int, ka_bits: int
) -> _CaseLayout:
    if msg_bits >= sbp_bits:
        m_prime = msg_bits - sbp_bits
        if ka_bits < m_prime:
            raise PreconditionError(
                f"source key too short for the one-time pad: have {ka_bits} "
                f"bits, need {m_prime}; the target message rate is too close "
                "to the boundary at this blocklength"
            )
        filler = pbp_bits - psi_bits - m_prime
        if filler < 0:
            raise PreconditionError(
                f"public pipe too short: {pbp_bits} bits for psi={psi_bits} "
                f"plus padded message {m_prime}"
            )
        return _CaseLayout(
            case=1,
            sbp_bits=sbp_bits,
            pbp_bits=pbp_bits,
            msg_bits=msg_bits,
            psi_bits=psi_bits,
            ka_bits=ka_bits,
            key_out_bits=ka_bits - m_prime,
            msg_pbp_bits=m_prime,
            filler_pub_bits=filler,
        )
    spare = sbp_bits - msg_bits
    if psi_bits >= spare:
        psi_sbp, psi_pbp, filler_sbp = spare, psi_bits - spare, 0
    else:
        psi_sbp, psi_pbp, filler_sbp = psi_bits, 0, spare - psi_bits
    filler_pub = pbp_bits - psi_pbp
    if filler_pub < 0:
        raise PreconditionError(
            f"public pipe too short: {pbp_bits} bits for psi overflow {psi_pbp}"
        )
    return _CaseLayout(
        case=2,
        sbp_bits=sbp_bits,
        pbp_bits=pbp_bits,
        msg_bits=msg_bits,
        psi_bits=psi_bits,
        ka_bits=ka_bits,
        key_out_bits=spare + ka_bits,
        psi_sbp_bits=psi_sbp,
        psi_pbp_bits=psi_pbp,
        filler_sbp_bits=filler_sbp,
        filler_pub_bits=filler_pub,
    )


def _pack(fields: Sequence[tuple[int, int]]) -> int:
    value = 0
    for v, bits in fields:
        value = (value << bits) | (v & ((1 << bits) - 1))
    return value


def _unpack(value: int, widths: Sequence[int]) -> list[int]:
    out = []
    total = sum(widths)
    for bits in widths:
        total -= bits
        out.append((value >> total) & ((1 << bits) - 1))
    return out


class _ExplicitTransport:
    """Pipes backed by materialized codebooks and exhaustive ML decoding."""

    def __init__(self, code: WiretapCodebooks, channel: Channel, seed: int):
        self.code = code
        self.channel = channel
        self.seed = seed
        self.sbp_bits = code.bits_private
        self.pbp_bits = code.bits_public_a + code.bits_public_b

    def transmit(self, priv, pub, trial, rng, sink=None):
        code = self.code
        w_a = pub >> code.bits_public_b
        w_b = pub & ((1 << code.bits_public_b) - 1)
        (j, k, ell), z = transmit_and_decode(
            code, self.channel, priv, w_a, w_b, seed=(self.seed, 777, trial)
        )
        if sink is not None:
            sink.append(z)
        return j, (ell << code.bits_public_b) | k


class _VirtualTransport:
    """Pipes backed by ensemble-exact decode-event sampling."""

    def __init__(self, vcode: ens.VirtualWiretapCode):
        self.vcode = vcode
        self.sbp_bits = vcode.bits_private
        self.pbp_bits = vcode.bits_public_b

    def transmit(self, priv, pub, trial, rng, sink=None):
        return self.vcode.transmit(priv, pub, rng)


class _TrivialKeyScheme:
    psi_bits = 0
    key_bits = 0

    def alice(self, rng):
        return 0, 0, None

    def bob(self, psi_hat, psi_ok, ka, side, rng):
        return 0


class _ExplicitKeyScheme:
    """Per-trial driver of the binned-codebook scheme."""

    def __init__(self, scheme: KeyAgreementScheme, source: JointDistribution):
        self.scheme = scheme
        self.psi_bits = scheme.psi_bits
        self.key_bits = scheme.key_bits
        p = source.probabilities
        self.flat_law = p.reshape(-1)
        self.shape = p.shape

    def alice(self, rng):
        flat = _rand_symbols(rng, self.flat_law, self.scheme.n)
        sa, sb, se = np.unravel_index(flat, self.shape)
        psi, ka = self.scheme.encode(np.asarray(sa))
        return psi, ka, (np.asarray(sb), np.asarray(se))

    def bob(self, psi_hat, psi_ok, ka, side, rng):
        # Bob decodes in whatever bin he received; a corrupted bin index
        # sends him to the wrong part of the codebook.
        return self.scheme.decode(psi_hat, side[0])


class _HashKeyScheme:
    def __init__(self, scheme: ens.HashKeyScheme):
        self.scheme = scheme
        self.psi_bits = scheme.psi_bits
        self.key_bits = scheme.key_bits

    def alice(self, rng):
        return self.scheme.alice(rng)

    def bob(self, psi_hat, psi_ok, ka, side, rng):
        return self.scheme.bob(psi_ok, ka, side, rng)


def _run_trial(layout: _CaseLayout, transport, key_scheme, trial, rng, sink=None):
    """One protocol episode; returns (message_ok, key_ok, key_value)."""
    psi, ka, side = key_scheme.alice(rng)
    m = ens.rand_bits(rng, layout.msg_bits)
    if layout.case == 1:
        k_out = ka >> layout.msg_pbp_bits
        k_otp = ka & ((1 << layout.msg_pbp_bits) - 1)
        m_sbp = m >> layout.msg_pbp_bits
        m_pbp = m & ((1 << layout.msg_pbp_bits) - 1)
        filler = ens.rand_bits(rng, layout.filler_pub_bits)
        w_priv = m_sbp
        w_pub = _pack(
            [
                (psi, layout.psi_bits),
                (k_otp ^ m_pbp, layout.msg_pbp_bits),
                (filler, layout.filler_pub_bits),
            ]
        )
        key_sent = k_out
    else:
        psi_sbp = psi >> layout.psi_pbp_bits
        psi_pbp = psi & ((1 << layout.psi_pbp_bits) - 1)
        filler_sbp = ens.rand_bits(rng, layout.filler_sbp_bits)
        eta_sbp = _pack(
            [(psi_sbp, layout.psi_sbp_bits), (filler_sbp, layout.filler_sbp_bits)]
        )
        filler_pub = ens.rand_bits(rng, layout.filler_pub_bits)
        w_priv = _pack(
            [(m, layout.msg_bits), (eta_sbp, layout.sbp_bits - layout.msg_bits)]
        )
        w_pub = _pack(
            [(psi_pbp, layout.psi_pbp_bits), (filler_pub, layout.filler_pub_bits)]
        )
        key_sent = _pack(
            [(eta_sbp, layout.sbp_bits - layout.msg_bits), (ka, layout.ka_bits)]
        )

    priv_hat, pub_hat = transport.transmit(w_priv, w_pub, trial, rng, sink)

    if layout.case == 1:
        psi_hat, pad_hat, _ = _unpack(
            pub_hat, [layout.psi_bits, layout.msg_pbp_bits, layout.filler_pub_bits]
        )
        ka_hat = key_scheme.bob(psi_hat, psi_hat == psi, ka, side, rng)
        k_otp_hat = ka_hat & ((1 << layout.msg_pbp_bits) - 1)
        m_hat = _pack(
            [(priv_hat, layout.sbp_bits), (pad_hat ^ k_otp_hat, layout.msg_pbp_bits)]
        )
        key_ok = (ka_hat >> layout.msg_pbp_bits) == key_sent
        msg_ok = m_hat == m
    else:
        m_hat, eta_sbp_hat = _unpack(
            priv_hat, [layout.msg_bits, layout.sbp_bits - layout.msg_bits]
        )
        psi_pbp_hat, _ = _unpack(
            pub_hat, [layout.psi_pbp_bits, layout.filler_pub_bits]
        )
        psi_sbp_hat = eta_sbp_hat >> layout.filler_sbp_bits
        psi_hat = (psi_sbp_hat << layout.psi_pbp_bits) | psi_pbp_hat
        ka_hat = key_scheme.bob(psi_hat, psi_hat == psi, ka, side, rng)
        key_hat = _pack(
            [
                (eta_sbp_hat, layout.sbp_bits - layout.msg_bits),
                (ka_hat, layout.ka_bits),
            ]
        )
        key_ok = key_hat == key_sent
        msg_ok = m_hat == m
    return msg_ok, key_ok, key_sent


# ---------------------------------------------------------------------------
# End-to-end run.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationReport:
    """Aggregate outcome of one seeded protocol experiment."""

    trials: int
    n: int
    seed: int
    mode: str
    case: int
    pipe_rates: PipeRates
    message_bits: int
    key_bits: int
    message_error_rate: float
    key_error_rate: float
    key_uniformity_deficit: float
    uniformity_estimator: str
    leakage_rate: float | None
    leakage_estimator: str
    leakage_trials: int | None

    def _fields(self) -> list[tuple[str, object]]:
        return [
            ("trials", self.trials),
            ("n", self.n),
            ("seed", self.seed),
            ("mode", self.mode),
            ("case", self.case),
            ("sbp_bits", self.pipe_rates.sbp_bits),
            ("pbp_bits", self.pipe_rates.pbp_bits),
            ("r_sbp_bits_per_use", self.pipe_rates.r_sbp),
            ("r_pbp_bits_per_use", self.pipe_rates.r_pbp),
            ("message_bits", self.message_bits),
            ("key_bits", self.key_bits),
            ("message_error_rate", self.message_error_rate),
            ("key_error_rate", self.key_error_rate),
            ("key_uniformity_deficit", self.key_uniformity_deficit),
            ("uniformity_estimator", self.uniformity_estimator),
            ("leakage_rate", self.leakage_rate),
            ("leakage_estimator", self.leakage_estimator),
            ("leakage_trials", self.leakage_trials),
        ]

    def to_text(self) -> str:
        return "\n".join(f"{k} = {v!r}" for k, v in self._fields()) + "\n"

    def to_csv(self) -> str:
        fields = self._fields()
        head = ",".join(k for k, _ in fields)
        row = ",".join(repr(v) if v is not None else "" for _, v in fields)
        return head + "\n" + row + "\n"


def _build_explicit(
    source, channel, coupling, n, delta, seed, scale, codeword_limit
):
    code = build_wiretap_code(
        coupling, n, delta, seed, rate_scale=scale, codeword_limit=codeword_limit
    )
    transport = _ExplicitTransport(code, channel, seed)
    if all(s == 1 for _, s in source.variables):
        key_scheme = _TrivialKeyScheme()
    else:
        scheme = build_key_agreement(
            source,
            coupling.provenance.u1_given_sa,
            n,
            delta,
            seed,
            rate_scale=scale,
            codeword_limit=codeword_limit,
        )
        key_scheme = _ExplicitKeyScheme(scheme, source)
    return transport, key_scheme, code


def _build_ensemble(source, coupling, n, delta, seed, scale):
    flip_bob = ens.effective_bob_flip(coupling)
    ra_t, rb_t, rp_t = pipe_rate_targets(coupling)
    if _floor_bits(n, scale * ra_t) != 0:
        raise PreconditionError(
            "ensemble mode supports a constant V2 only (public-a rate 0)"
        )
    vcode = ens.VirtualWiretapCode(
        n=n,
        bits_private=_floor_bits(n, scale * rp_t),
        bits_public_b=_floor_bits(n, scale * rb_t),
        flip_bob=flip_bob,
        rates=(ra_t, rb_t, rp_t),
    )
    transport = _VirtualTransport(vcode)
    if all(s == 1 for _, s in source.variables):
        key_scheme = _TrivialKeyScheme()
    else:
        flip_b = ens.require_hashable_key_source(
            source, coupling.provenance.u1_given_sa
        )
        block = _source_block(source, coupling.provenance.u1_given_sa)
        r_pub_t = tensor_conditional_mi(block, (0,), (1,), (2,))
        r_key_t = max(
            0.0,
            tensor_mutual_information(block, (0,), (2,))
            - tensor_mutual_information(block, (0,), (3,)),
        )
        psi_bits = 0 if r_pub_t <= 1e-12 else _floor_bits(n, r_pub_t + delta)
        key_scheme = _HashKeyScheme(
            ens.HashKeyScheme.build(
                n=n,
                psi_bits=psi_bits,
                key_bits=_floor_bits(n, scale * r_key_t),
                flip_bob=flip_b,
                seed=seed,
            )
        )
    return transport, key_scheme


def _explicit_fits(source, coupling, n, delta, scale, codeword_limit) -> bool:
    ra_t, rb_t, rp_t = pipe_rate_targets(coupling)
    bits_a = _floor_bits(n, scale * ra_t)
    bits_b = _floor_bits(n, scale * rb_t)
    bits_p = _floor_bits(n, scale * rp_t)
    total = ((1 << bits_a) + (1 << (bits_a + bits_b + bits_p))) * n
    if total > codeword_limit:
        return False
    if not all(s == 1 for _, s in source.variables):
        block = _source_block(source, coupling.provenance.u1_given_sa)
        i_u1_sa = tensor_mutual_information(block, (0,), (1,))
        if (1 << _floor_bits(n, i_u1_sa + delta)) * n > codeword_limit:
            return False
    return True


def _uniformity(mode, layout, key_scheme, key_values, n):
    if layout.key_out_bits == 0:
        return 0.0, "exact(empty-key)"
    if mode == "ensemble":
        # The key is fresh SBP coin flips (exactly uniform) plus bits of a
        # GF(2)-linear hash of the uniform source block; its exact entropy
        # is coins + rank of the hash rows that reach the output.
        if isinstance(key_scheme, _HashKeyScheme):
            rows = list(key_scheme.scheme.key_matrix)
            if layout.case == 1:
                rows = rows[: layout.key_out_bits]  # MSB rows feed the output key
            hash_bits = len(rows)
            deficit = (hash_bits - ens.gf2_rank(rows)) / n
            return deficit, "exact(linear-hash-rank)"
        return 0.0, "exact(uniform-filler)"
    counts: dict[int, int] = {}
    for v in key_values:
        counts[v] = counts.get(v, 0) + 1
    ps = np.array(list(counts.values()), dtype=float) / len(key_values)
    h_hat = float(-(ps * np.log2(ps)).sum())
    h_mm = h_hat + (len(counts) - 1) / (2 * len(key_values) * math.log(2))
    return (layout.key_out_bits - h_mm) / n, "plugin(miller-madow)"


def run_end_to_end(
    source: JointDistribution,
    channel: Channel,
    coupling: AuxiliaryCoupling,
    target: tuple[float, float],
    n: int,
    delta: float,
    trials: int,
    seed: int,
    mode: str = "auto",
    rate_margin: float = 0.1,
    threads: int = 1,
    codeword_limit: int = DEFAULT_CODEWORD_LIMIT,
    exact_leakage_cap: int = DEFAULT_EXACT_LEAKAGE_CAP,
    transcript_sink: list | None = None,
) -> SimulationReport:
    """Monte Carlo the full separation protocol toward a target rate pair.

    ``target`` is (R_SK, R_SM) in bits/use and must lie inside the
    coupling's region shrunk by ``rate_margin`` (the finite-n stand-in for
    the asymptotic slack).  Pipes and key rates are built at
    (1 - rate_margin) times their targets.  Trial i draws from a stream
    derived from (seed, i), so parallel and serial schedules agree.
    """
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")
    if not 0.0 <= rate_margin < 1.0:
        raise ArgumentError(f"rate_margin must be in [0, 1), got {rate_margin}")
    a, b = region_bounds(coupling)
    shrunk = RegionPolygon.from_bounds(a, b).scaled(1.0 - rate_margin)
    margin = shrunk.margin(target)
    if margin < -1e-12:
        raise PreconditionError(
            f"target {target} lies outside the backed-off region "
            f"(margin {margin:.6f} bits)",
            margin=margin,
        )

    scale = 1.0 - rate_margin
    chosen_mode = mode
    if mode == "auto":
        chosen_mode = (
            "explicit"
            if _explicit_fits(source, coupling, n, delta, scale, codeword_limit)
            else "ensemble"
        )
    code = None
    if chosen_mode == "explicit":
        transport, key_scheme, code = _build_explicit(
            source, channel, coupling, n, delta, seed, scale, codeword_limit
        )
    elif chosen_mode == "ensemble":
        transport, key_scheme = _build_ensemble(
            source, coupling, n, delta, seed, scale
        )
        if transcript_sink is not None:
            raise ArgumentError(
                "transcript dumps need materialized symbols; run in explicit mode"
            )
    else:
        raise ArgumentError(f"unknown mode {mode!r}")

    layout = _plan_case(
        sbp_bits=transport.sbp_bits,
        pbp_bits=transport.pbp_bits,
        msg_bits=_floor_bits(n, target[1]),
        psi_bits=key_scheme.psi_bits,
        ka_bits=key_scheme.key_bits,
    )

    def one_trial(t: int):
        rng = np.random.default_rng((seed, 10, t))
        sink: list | None = [] if transcript_sink is not None else None
        msg_ok, key_ok, key_val = _run_trial(
            layout, transport, key_scheme, t, rng, sink
        )
        return msg_ok, key_ok, key_val, sink

    if threads <= 1:
        outcomes = [one_trial(t) for t in range(trials)]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            outcomes = list(ex.map(one_trial, range(trials)))

    msg_errors = 0
    key_errors = 0
    key_values: list[int] = []
    for msg_ok, key_ok, key_val, sink in outcomes:  # merged in trial order
        msg_errors += 0 if msg_ok else 1
        key_errors += 0 if key_ok else 1
        key_values.append(key_val)
        if transcript_sink is not None and sink:
            transcript_sink.extend(sink)

    deficit, unif_label = _uniformity(chosen_mode, layout, key_scheme, key_values, n)
    source_trivial = all(s == 1 for _, s in source.variables)
    leak_rate: float | None = None
    leak_label = "not-estimated(scale)"
    if chosen_mode == "explicit" and source_trivial and code is not None:
        try:
            law = wiretap_private_law(code, channel, exact_leakage_cap)
            est = estimate_leakage(law, "exact", exact_leakage_cap)
            leak_rate, leak_label = est.bits_total / n, est.estimator
        except ArgumentError:
            pass

    return SimulationReport(
        trials=trials,
        n=n,
        seed=seed,
        mode=chosen_mode,
        case=layout.case,
        pipe_rates=PipeRates(n, transport.sbp_bits, transport.pbp_bits),
        message_bits=layout.msg_bits,
        key_bits=layout.key_out_bits,
        message_error_rate=msg_errors / trials,
        key_error_rate=key_errors / trials,
        key_uniformity_deficit=deficit,
        uniformity_estimator=unif_label,
        leakage_rate=leak_rate,
        leakage_estimator=leak_label,
        leakage_trials=None,
    )
