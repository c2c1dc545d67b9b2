"""Acceptance suite: one test per criterion, each printing a PASS line.

Every tolerance and runtime budget is pinned here; a criterion that cannot
meet its stated numbers fails red rather than being loosened.
"""

import json
import time

import numpy as np
import pytest

from skregion.cli import main
from skregion.degradation import classify_component, find_degrading_map
from skregion.ensemble import rand_bits
from skregion.gaussian import GaussianScenario, gaussian_boundary, gaussian_max_sk, gaussian_max_sm
from skregion.prob import (
    Channel,
    JointDistribution,
    assemble_coupling,
    binary_symmetric_channel,
    constant_channel,
    identity_channel,
    product_channel,
)
from skregion.protocol import (
    _plan_case,
    build_virtual_wiretap_code,
    build_wiretap_code,
    estimate_leakage,
    one_time_pad,
    run_end_to_end,
    wiretap_private_law,
)
from skregion.regions import (
    SearchConfig,
    channel_only_region,
    inner_bound_region,
    region_bounds,
)

from oracles import bsc, random_stochastic, wiretap_sum_rate_grid


def report(criterion: int, budget_s: float, started: float, detail: str):
    elapsed = time.time() - started
    assert elapsed < budget_s, f"criterion {criterion} overran: {elapsed:.1f}s"
    print(f"ACCEPTANCE {criterion}: PASS ({elapsed:.1f}s) {detail}")


def joint(variables, probs):
    return JointDistribution(tuple(variables), np.asarray(probs, dtype=float))


def trivial_source():
    return joint([("SA", 1), ("SB", 1), ("SE", 1)], np.ones((1, 1, 1)))


def noiseless_bit_channel():
    return product_channel(identity_channel("X", "Y", 2), constant_channel("X", 2, "Z"))


def bsc_pair(pb, pe):
    return product_channel(
        binary_symmetric_channel("X", "Y", pb),
        binary_symmetric_channel("X", "Z", pe),
    )


def uniform_input_coupling(channel, source=None, u1_identity=False):
    source = source if source is not None else trivial_source()
    na = source.size_of("SA")
    u1 = (
        Channel(("SA", na), (("U1", na),), np.eye(na))
        if u1_identity
        else constant_channel("SA", na, "U1")
    )
    return assemble_coupling(
        source,
        channel,
        u1,
        [1.0],
        Channel(("V2", 1), (("V1", 2),), [[0.5, 0.5]]),
        identity_channel("V1", "X", 2),
    )


def test_criterion_1_unit_triangle_region():
    started = time.time()
    poly = inner_bound_region(
        trivial_source(), noiseless_bit_channel(), SearchConfig(seed=1)
    )
    has_01 = any(abs(x) < 1e-3 and abs(y - 1) < 1e-3 for x, y in poly.vertices)
    has_10 = any(abs(x - 1) < 1e-3 and abs(y) < 1e-3 for x, y in poly.vertices)
    assert has_01 and has_10, f"vertices {poly.vertices}"
    report(1, 10.0, started, f"unit-triangle vertices within 1e-3: {poly.vertices}")


def test_criterion_2_wiretap_sum_rate_with_grid_oracle():
    started = time.time()
    poly = channel_only_region(bsc_pair(0.1, 0.2), SearchConfig(seed=2))
    achieved = poly.max_sum_rate
    assert achieved == pytest.approx(0.252983, abs=1e-3)
    # Independent oracle: exhaustive 10^4-point grid over binary V1 couplings.
    oracle = wiretap_sum_rate_grid(bsc(0.1), bsc(0.2), steps=22)
    assert achieved == pytest.approx(oracle, abs=1e-3)
    report(2, 60.0, started, f"sum rate {achieved:.6f} vs grid oracle {oracle:.6f}")


def test_criterion_3_reversely_degraded_source_reduction():
    started = time.time()
    # SA - SE - SB by kernel composition.
    probs = np.einsum("a,ae,eb->abe", [0.5, 0.5], bsc(0.1), bsc(0.15))
    source = joint([("SA", 2), ("SB", 2), ("SE", 2)], probs)
    channel = bsc_pair(0.1, 0.2)
    inner = inner_bound_region(source, channel, SearchConfig(seed=3))
    only = channel_only_region(channel, SearchConfig(seed=3))
    assert inner.max_sum_rate == pytest.approx(only.max_sum_rate, abs=1e-3)
    report(
        3, 120.0, started,
        f"inner sum corner {inner.max_sum_rate:.6f} matches channel-only "
        f"{only.max_sum_rate:.6f}",
    )


def test_criterion_4_gaussian_closed_form():
    started = time.time()
    s = GaussianScenario(snr_src=1.0, snr_bob=1.0, snr_eve=0.5)
    assert gaussian_max_sm(s) == pytest.approx(0.339036, abs=1e-6)
    assert gaussian_max_sk(s, 0.0) == pytest.approx(0.5, abs=1e-6)
    rng = np.random.default_rng(4)
    for _ in range(100):
        scen = GaussianScenario(
            snr_src=float(rng.uniform(0.05, 20)),
            snr_bob=float(rng.uniform(0.05, 20)),
            snr_eve=float(rng.uniform(0.05, 20)),
        )
        assert gaussian_max_sk(scen, gaussian_max_sm(scen)) == pytest.approx(
            0.0, abs=1e-9
        )
    # Region enlarges pointwise as Eve's SNR drops.
    strong = GaussianScenario(snr_src=1.0, snr_bob=1.0, snr_eve=0.5)
    weak = GaussianScenario(snr_src=1.0, snr_bob=1.0, snr_eve=2.0)
    for sk, sm in gaussian_boundary(weak, 33):
        assert gaussian_max_sm(strong) >= sm - 1e-12
        assert gaussian_max_sk(strong, sm) >= sk - 1e-12
    report(4, 1.0, started, "closed form, endpoints, and dominance verified")


def test_criterion_5_degradation_lp():
    started = time.time()
    w = find_degrading_map(
        binary_symmetric_channel("X", "Y", 0.1),
        binary_symmetric_channel("X", "Z", 0.2),
        1e-7,
    )
    assert w is not None
    assert w.rows[0, 1] == pytest.approx(0.125, abs=1e-6)
    assert w.rows[1, 0] == pytest.approx(0.125, abs=1e-6)
    assert (
        find_degrading_map(
            binary_symmetric_channel("X", "Y", 0.2),
            binary_symmetric_channel("X", "Z", 0.1),
            1e-7,
        )
        is None
    )
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        base = random_stochastic(rng, 3, 3)
        f = random_stochastic(rng, 3, 3)
        bob = Channel(("X", 3), (("Y", 3),), base)
        eve = Channel(("X", 3), (("Z", 3),), base @ f)
        v = classify_component(bob, eve, 1e-7)
        assert v.forward_feasible, "composed pair must be forward degraded"
        worst = max(worst, v.residual_forward)
    assert worst <= 1e-7
    report(5, 30.0, started, f"witness 0.125; 200 composed pairs, worst residual {worst:.2e}")


def test_criterion_6_private_layer_exact_leakage_bound():
    started = time.time()
    delta, n = 0.05, 6
    channel = product_channel(
        identity_channel("X", "Y", 2), binary_symmetric_channel("X", "Z", 0.2)
    )
    coupling = uniform_input_coupling(channel)
    code = build_wiretap_code(coupling, n=n, delta=delta, seed=6)
    assert code.bits_private > 0 and code.bits_public_b > 0
    law = wiretap_private_law(code, channel)
    leak = estimate_leakage(law, "exact").bits_total / n
    assert leak > 0.0  # Eve genuinely observes something
    assert leak <= 8 * delta
    report(6, 60.0, started, f"I(W_private;Z^n)/n = {leak:.4f} <= 8*delta = {8 * delta}")


def test_criterion_7_monte_carlo_direction_check():
    started = time.time()
    channel = bsc_pair(0.1, 0.2)
    coupling = uniform_input_coupling(channel)
    _, b = region_bounds(coupling)
    target = (0.449 * b, 0.449 * b)  # ~10% inside the sum-rate boundary
    rep = run_end_to_end(
        trivial_source(), channel, coupling, target=target, n=400, delta=0.05,
        trials=1000, seed=20260810,
    )
    assert rep.message_error_rate <= 0.1
    assert rep.key_error_rate <= 0.1
    # Converse direction: pipes 10% above I(X;Y) must fail badly.
    vcode = build_virtual_wiretap_code(coupling, n=400, rate_scale=1.1)
    assert (vcode.bits_private + vcode.bits_public_b) > 400 * 0.531
    rng = np.random.default_rng(77)
    errors = 0
    for _ in range(1000):
        priv = rand_bits(rng, vcode.bits_private)
        pub = rand_bits(rng, vcode.bits_public_b)
        ph, qh = vcode.transmit(priv, pub, rng)
        errors += (ph != priv) or (qh != pub)
    assert errors / 1000 >= 0.5
    report(
        7, 600.0, started,
        f"inside: msg {rep.message_error_rate:.3f}, key {rep.key_error_rate:.3f}; "
        f"above capacity: msg {errors / 1000:.3f}",
    )


def test_criterion_8_case_mechanics():
    started = time.time()
    rng = np.random.default_rng(8)
    for _ in range(10_000):
        m = rng.integers(0, 2, 32)
        k = rng.integers(0, 2, 32)
        np.testing.assert_array_equal(one_time_pad(one_time_pad(m, k), k), m)

    # Two targets straddling the R_SM = R_SBP boundary.
    probs = np.zeros((2, 2, 1))
    probs[0, 0, 0] = probs[1, 1, 0] = 0.5
    source = joint([("SA", 2), ("SB", 2), ("SE", 1)], probs)
    channel = product_channel(
        identity_channel("X", "Y", 2), binary_symmetric_channel("X", "Z", 0.3)
    )
    coupling = uniform_input_coupling(channel, source, u1_identity=True)
    common = dict(n=20, delta=0.15, trials=40, seed=8, rate_margin=0.2)
    rep1 = run_end_to_end(
        source, channel, coupling, target=(0.4, 0.75), **common
    )
    rep2 = run_end_to_end(
        source, channel, coupling, target=(0.4, 0.25), **common
    )
    assert rep1.case == 1 and rep1.message_bits >= rep1.pipe_rates.sbp_bits
    assert rep2.case == 2 and rep2.message_bits < rep2.pipe_rates.sbp_bits

    # Exact rate accounting on both sides of the boundary.  The key scheme
    # here has I(U1;SA|SB) = 0 (no bin message) and key target I(U1;SB) = 1
    # bit/use scaled by (1 - rate_margin).
    psi_bits = 0
    ka_bits = int(20 * 0.8 * 1.0)
    for rep in (rep1, rep2):
        lay = _plan_case(
            sbp_bits=rep.pipe_rates.sbp_bits,
            pbp_bits=rep.pipe_rates.pbp_bits,
            msg_bits=rep.message_bits,
            psi_bits=psi_bits,
            ka_bits=ka_bits,
        )
        assert lay.case == rep.case
        if lay.case == 1:
            assert lay.psi_bits + lay.msg_pbp_bits + lay.filler_pub_bits == lay.pbp_bits
            assert lay.key_out_bits + lay.msg_pbp_bits == lay.ka_bits
        else:
            assert lay.msg_bits + lay.psi_sbp_bits + lay.filler_sbp_bits == lay.sbp_bits
            assert lay.psi_pbp_bits + lay.filler_pub_bits == lay.pbp_bits
            assert lay.key_out_bits == (lay.sbp_bits - lay.msg_bits) + lay.ka_bits
    report(
        8, 10.0, started,
        f"OTP involution x 10^4; case tags ({rep1.case}, {rep2.case}) straddle the "
        "boundary with exact bit accounting",
    )


def test_criterion_9_seeded_byte_determinism(tmp_path, capsys):
    started = time.time()
    region_scenario = tmp_path / "region.json"
    region_scenario.write_text(
        json.dumps(
            {
                "source": {"kind": "none"},
                "channel": {"kind": "noiseless-bit"},
                "search": {"seed": 9, "restarts": 2, "iterations": 30,
                           "directions": 9},
            }
        )
    )
    sim_scenario = tmp_path / "sim.json"
    sim_scenario.write_text(
        json.dumps(
            {
                "source": {"kind": "none"},
                "channel": {"kind": "bsc-pair", "bob_flip": 0.1, "eve_flip": 0.2},
                "simulation": {
                    "n": 400, "delta": 0.05, "trials": 200, "seed": 9,
                    "target": [0.11, 0.11],
                },
            }
        )
    )
    outputs = []
    for tag, threads in (("a", "1"), ("b", "1"), ("c", "8")):
        region_csv = tmp_path / f"r{tag}.csv"
        region_png = tmp_path / f"r{tag}.png"
        sim_txt = tmp_path / f"s{tag}.txt"
        gauss_csv = tmp_path / f"g{tag}.csv"
        degrade_txt = tmp_path / f"d{tag}.txt"
        assert main(["region", "--scenario", str(region_scenario),
                     "--out", str(region_csv), "--plot", str(region_png),
                     "--threads", threads]) == 0
        assert main(["simulate", "--scenario", str(sim_scenario),
                     "--out", str(sim_txt), "--threads", threads]) == 0
        assert main(["gaussian", "--snr-src", "1", "--snr-bob", "2",
                     "--snr-eve", "0.7", "--samples", "33",
                     "--out", str(gauss_csv)]) == 0
        assert main(["degrade", "--scenario", str(sim_scenario),
                     "--out", str(degrade_txt)]) == 0
        outputs.append(
            (
                region_csv.read_bytes(),
                region_png.read_bytes(),
                sim_txt.read_bytes(),
                gauss_csv.read_bytes(),
                degrade_txt.read_bytes(),
            )
        )
    capsys.readouterr()
    assert outputs[0] == outputs[1] == outputs[2]
    report(9, 120.0, started, "region/simulate/gaussian/degrade byte-identical "
                              "across reruns and thread counts 1 vs 8")
