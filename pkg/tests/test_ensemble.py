"""Ensemble-exact sampler tests, validated against materialized codebooks."""

import math

import numpy as np
import pytest
from scipy.stats import binom

from skregion.ensemble import (
    BinomialScoreModel,
    HashKeyScheme,
    VirtualWiretapCode,
    effective_bob_flip,
    gf2_rank,
    ml_decode_event,
    rand_bits,
    rand_wrong_index,
    require_hashable_key_source,
    sample_hit_count,
)
from skregion.errors import PreconditionError
from skregion.prob import (
    Channel,
    JointDistribution,
    assemble_coupling,
    binary_symmetric_channel,
    constant_channel,
    identity_channel,
    product_channel,
)
from skregion.protocol import build_virtual_wiretap_code, build_wiretap_code, transmit_and_decode


def test_score_model_matches_scipy():
    model = BinomialScoreModel(40)
    for d in (0, 1, 7, 20, 33, 40):
        assert model.log2_p_tie(d) == pytest.approx(
            binom.logpmf(d, 40, 0.5) / math.log(2), abs=1e-9
        )
        if d > 0:
            assert model.log2_p_strict(d) == pytest.approx(
                math.log2(binom.cdf(d - 1, 40, 0.5)), abs=1e-9
            )
    assert model.log2_p_strict(0) == -np.inf


def test_sample_hit_count_matches_binomial_mean():
    rng = np.random.default_rng(1)
    draws = [sample_hit_count(rng, 1000, math.log2(0.05)) for _ in range(4000)]
    assert np.mean(draws) == pytest.approx(50.0, rel=0.05)


def test_sample_hit_count_huge_population_poisson_regime():
    rng = np.random.default_rng(2)
    n_big = 1 << 200
    log2_p = -200 + math.log2(3.0)  # lambda = 3
    draws = [sample_hit_count(rng, n_big, log2_p) for _ in range(4000)]
    assert np.mean(draws) == pytest.approx(3.0, rel=0.08)


def test_sample_hit_count_certain_branch():
    rng = np.random.default_rng(3)
    assert sample_hit_count(rng, 1 << 400, -10.0) >= 1


def test_rand_bits_determinism_and_width():
    a = rand_bits(np.random.default_rng(5), 130)
    b = rand_bits(np.random.default_rng(5), 130)
    assert a == b
    assert 0 <= a < (1 << 130)
    assert rand_bits(np.random.default_rng(5), 0) == 0


def test_rand_wrong_index_never_true_value():
    rng = np.random.default_rng(6)
    for _ in range(50):
        assert rand_wrong_index(rng, 3, 5) != 5


def test_gf2_rank():
    assert gf2_rank([0b100, 0b010, 0b001]) == 3
    assert gf2_rank([0b110, 0b011, 0b101]) == 2  # third row = xor of first two
    assert gf2_rank([0, 0]) == 0


def test_ml_decode_event_zero_distance_few_competitors():
    # d0 = 0 can only lose to an exact-copy tie.
    rng = np.random.default_rng(7)
    losses = sum(
        0 if ml_decode_event(rng, 10, 0, 7) else 1 for _ in range(4000)
    )
    # P(tie) = 1 - (1 - 2^-10)^7 ~ 0.68%; half are lost.
    assert losses / 4000 == pytest.approx(0.0034, abs=0.004)


def test_ensemble_matches_explicit_codebook_statistics():
    # Ground-truth check: the ensemble sampler reproduces the error rate
    # of materialized i.i.d. codebooks with ML decoding on a BSC.
    flip = 0.1
    n = 10
    chan = product_channel(
        binary_symmetric_channel("X", "Y", flip), constant_channel("X", 2, "Z")
    )
    source = JointDistribution((("SA", 1), ("SB", 1), ("SE", 1)), np.ones((1, 1, 1)))
    cpl = assemble_coupling(
        source,
        chan,
        constant_channel("SA", 1, "U1"),
        [1.0],
        Channel(("V2", 1), (("V1", 2),), [[0.5, 0.5]]),
        identity_channel("V1", "X", 2),
    )
    explicit_errors = 0
    trials_per_book = 16
    books = 120
    for b in range(books):
        code = build_wiretap_code(cpl, n=n, delta=0.05, seed=b, rate_scale=0.6)
        assert code.bits_private == 3
        for t in range(trials_per_book):
            w = (b * trials_per_book + t) % code.num_private
            (j, _, _), _ = transmit_and_decode(code, chan, w, 0, 0, seed=(b, t))
            explicit_errors += j != w
    explicit_rate = explicit_errors / (books * trials_per_book)

    vcode = VirtualWiretapCode(
        n=n, bits_private=3, bits_public_b=0, flip_bob=flip, rates=(0, 0, 0)
    )
    rng = np.random.default_rng(123)
    virtual_errors = 0
    virtual_trials = 8000
    for t in range(virtual_trials):
        priv = rand_bits(rng, 3)
        ph, _ = vcode.transmit(priv, 0, rng)
        virtual_errors += ph != priv
    virtual_rate = virtual_errors / virtual_trials
    # Both estimate the same random-coding ensemble error probability;
    # the explicit estimate is clustered by codebook, so allow extra slack.
    se = math.sqrt(explicit_rate * (1 - explicit_rate) / (books * trials_per_book))
    assert virtual_rate == pytest.approx(explicit_rate, abs=3.5 * se + 0.015)


def test_effective_bob_flip_structure_checks():
    source = JointDistribution((("SA", 1), ("SB", 1), ("SE", 1)), np.ones((1, 1, 1)))
    chan = product_channel(
        binary_symmetric_channel("X", "Y", 0.1),
        binary_symmetric_channel("X", "Z", 0.2),
    )
    good = assemble_coupling(
        source, chan, constant_channel("SA", 1, "U1"), [1.0],
        Channel(("V2", 1), (("V1", 2),), [[0.5, 0.5]]),
        identity_channel("V1", "X", 2),
    )
    assert effective_bob_flip(good) == pytest.approx(0.1, abs=1e-12)
    skewed = assemble_coupling(
        source, chan, constant_channel("SA", 1, "U1"), [1.0],
        Channel(("V2", 1), (("V1", 2),), [[0.7, 0.3]]),
        identity_channel("V1", "X", 2),
    )
    with pytest.raises(PreconditionError):
        effective_bob_flip(skewed)


def test_hashable_key_source_checks():
    probs = np.zeros((2, 2, 1))
    probs[0, 0, 0] = probs[1, 1, 0] = 0.5
    src = JointDistribution((("SA", 2), ("SB", 2), ("SE", 1)), probs)
    flip = require_hashable_key_source(src, identity_channel("SA", "U1", 2))
    assert flip == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(PreconditionError):
        require_hashable_key_source(src, constant_channel("SA", 2, "U1"))


def test_hash_key_scheme_perfect_side_information():
    scheme = HashKeyScheme.build(n=100, psi_bits=0, key_bits=60, flip_bob=0.0, seed=9)
    rng = np.random.default_rng(10)
    for _ in range(50):
        psi, ka, d0 = scheme.alice(rng)
        assert d0 == 0
        assert scheme.bob(True, ka, d0, rng) == ka
    assert scheme.key_matrix_rank == 60  # exact uniformity certificate


def test_hash_key_scheme_corrupted_bin_breaks_key():
    scheme = HashKeyScheme.build(n=100, psi_bits=20, key_bits=60, flip_bob=0.0, seed=9)
    rng = np.random.default_rng(11)
    psi, ka, d0 = scheme.alice(rng)
    assert scheme.bob(False, ka, d0, rng) != ka


def test_converse_above_capacity_fails_hard():
    source = JointDistribution((("SA", 1), ("SB", 1), ("SE", 1)), np.ones((1, 1, 1)))
    chan = product_channel(
        binary_symmetric_channel("X", "Y", 0.1),
        binary_symmetric_channel("X", "Z", 0.2),
    )
    cpl = assemble_coupling(
        source, chan, constant_channel("SA", 1, "U1"), [1.0],
        Channel(("V2", 1), (("V1", 2),), [[0.5, 0.5]]),
        identity_channel("V1", "X", 2),
    )
    vcode = build_virtual_wiretap_code(cpl, n=400, rate_scale=1.1)
    rng = np.random.default_rng(12)
    errors = 0
    for _ in range(300):
        priv = rand_bits(rng, vcode.bits_private)
        pub = rand_bits(rng, vcode.bits_public_b)
        ph, qh = vcode.transmit(priv, pub, rng)
        errors += (ph != priv) or (qh != pub)
    assert errors / 300 >= 0.5
