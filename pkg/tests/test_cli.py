"""CLI behavior: subcommands, exit codes, determinism of seeded output."""

import json

import pytest

from skregion.cli import main

QUICK_SEARCH = {"seed": 1, "restarts": 2, "iterations": 30, "directions": 9}


def write_scenario(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def noiseless_scenario(tmp_path):
    return write_scenario(
        tmp_path,
        {
            "name": "noiseless-bit",
            "source": {"kind": "none"},
            "channel": {"kind": "noiseless-bit"},
            "search": QUICK_SEARCH,
        },
    )


def test_region_unit_triangle(tmp_path, capsys):
    out = tmp_path / "region.csv"
    code = main(
        ["region", "--scenario", noiseless_scenario(tmp_path), "--out", str(out),
         "--format", "csv"]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "r_sk_bits,r_sm_bits"
    verts = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    assert any(abs(x - 1) < 1e-3 and abs(y) < 1e-3 for x, y in verts)
    assert any(abs(x) < 1e-3 and abs(y - 1) < 1e-3 for x, y in verts)


def test_region_more_directions_refines(tmp_path, capsys):
    scenario = write_scenario(
        tmp_path,
        {
            "source": {"kind": "binary-symmetric", "bob_flip": 0.0, "eve_flip": None,
                       "chain": "parallel"},
            "channel": {"kind": "bsc-pair", "bob_flip": 0.05, "eve_flip": 0.3},
            "search": QUICK_SEARCH,
        },
    )
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["region", "--scenario", scenario, "--out", str(out_a)]) == 0
    capsys.readouterr()
    assert (
        main(["region", "--scenario", scenario, "--out", str(out_b),
              "--directions", "17"])
        == 0
    )
    capsys.readouterr()
    rows_a = len(out_a.read_text().splitlines())
    rows_b = len(out_b.read_text().splitlines())
    assert rows_b >= rows_a


def test_region_misdeclared_degradation_exits_2(tmp_path, capsys):
    scenario = write_scenario(
        tmp_path,
        {
            "parallel": {
                "forward": {
                    "channel": {"kind": "bsc-pair", "bob_flip": 0.2, "eve_flip": 0.1}
                },
                "reverse": {},
            },
            "search": QUICK_SEARCH,
        },
    )
    assert main(["region", "--scenario", scenario]) == 2
    err = capsys.readouterr().err
    assert "forward channel" in err


def test_region_unknown_scenario_key_exits_2(tmp_path, capsys):
    scenario = write_scenario(
        tmp_path, {"channel": {"kind": "noiseless-bit"}, "wat": 1}
    )
    assert main(["region", "--scenario", scenario]) == 2


def test_gaussian_reference_rows(tmp_path, capsys):
    out = tmp_path / "g.csv"
    code = main(
        ["gaussian", "--snr-src", "1", "--snr-bob", "1", "--snr-eve", "0.5",
         "--samples", "2", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "r_sm_bits,r_sk_bits"
    first = [float(v) for v in lines[1].split(",")]
    last = [float(v) for v in lines[2].split(",")]
    assert first == pytest.approx([0.0, 0.5], abs=1e-9)
    assert last == pytest.approx([0.339036, 0.0], abs=1e-6)


def test_gaussian_validation_exits(tmp_path, capsys):
    assert main(["gaussian", "--snr-src", "1", "--snr-bob", "1",
                 "--snr-eve", "0.5", "--samples", "1"]) == 2
    assert main(["gaussian", "--snr-src", "-2", "--snr-bob", "1",
                 "--snr-eve", "0.5"]) == 2


def test_degrade_reports_witness(tmp_path, capsys):
    scenario = write_scenario(
        tmp_path,
        {"channel": {"kind": "bsc-pair", "bob_flip": 0.1, "eve_flip": 0.2}},
    )
    assert main(["degrade", "--scenario", scenario]) == 0
    out = capsys.readouterr().out
    assert "channel.order = forwardly-degraded" in out
    witness_line = next(
        ln for ln in out.splitlines() if ln.startswith("channel.witness_forward")
    )
    rows = json.loads(witness_line.split(" = ", 1)[1])
    assert rows[0][1] == pytest.approx(0.125, abs=1e-6)


def test_degrade_neither_is_success(tmp_path, capsys):
    scenario = write_scenario(
        tmp_path,
        {
            "channel": {
                "kind": "legs",
                "bob": {"kind": "bsc", "flip": 0.1},
                "eve": {"kind": "erasure", "erase": 0.3},
            }
        },
    )
    assert main(["degrade", "--scenario", scenario]) == 0
    assert "neither" in capsys.readouterr().out


def sim_scenario(tmp_path, thresholds, trials=60, name="sim.json"):
    # n/margin/seed picked so the drawn codebook is collision free: on a
    # noiseless channel every error field is then exactly zero.
    return write_scenario(
        tmp_path,
        {
            "source": {"kind": "none"},
            "channel": {
                "kind": "legs",
                "bob": {"kind": "noiseless"},
                "eve": {"kind": "constant"},
            },
            "simulation": {
                "n": 16, "delta": 0.05, "trials": trials, "seed": 0,
                "target": [0.0, 0.4], "rate_margin": 0.5,
                "thresholds": thresholds,
            },
        },
        name,
    )


def test_simulate_noiseless_meets_thresholds(tmp_path, capsys):
    scenario = sim_scenario(tmp_path, {"message_error": 0.1, "leakage_rate": 1e-9})
    out = tmp_path / "report.txt"
    assert main(["simulate", "--scenario", scenario, "--out", str(out)]) == 0
    text = out.read_text()
    assert "message_error_rate = 0.0" in text
    assert "leakage_rate = 0.0" in text


def test_simulate_threshold_violation_exits_3(tmp_path, capsys):
    scenario = write_scenario(
        tmp_path,
        {
            "source": {"kind": "none"},
            "channel": {"kind": "bsc-pair", "bob_flip": 0.1, "eve_flip": 0.2},
            "simulation": {
                "n": 400, "delta": 0.05, "trials": 80, "seed": 5,
                "target": [0.11, 0.11],
                "thresholds": {"message_error": 1e-6},
            },
        },
    )
    assert main(["simulate", "--scenario", scenario]) == 3
    assert "threshold failure" in capsys.readouterr().err


def test_simulate_transcript_dump(tmp_path, capsys):
    scenario = sim_scenario(tmp_path, {}, trials=5)
    dump = tmp_path / "transcripts.bin"
    assert main(["simulate", "--scenario", scenario, "--dump-transcripts",
                 str(dump)]) == 0
    data = dump.read_bytes()
    # Five records: 4-byte length (16) plus 16 symbol bytes each.
    assert len(data) == 5 * (4 + 16)
    assert data[:4] == (16).to_bytes(4, "little")


def test_compare_dominance(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["gaussian", "--snr-src", "1", "--snr-bob", "1", "--snr-eve", "0.5",
          "--samples", "11", "--out", str(a)])
    main(["gaussian", "--snr-src", "1", "--snr-bob", "1", "--snr-eve", "2.0",
          "--samples", "11", "--out", str(b)])
    capsys.readouterr()
    assert main(["compare", str(a), str(b)]) == 0
    assert "first-dominates-second" in capsys.readouterr().out
    assert main(["compare", str(a), str(a)]) == 0
    assert "equal" in capsys.readouterr().out


def test_missing_scenario_file_exits_2(tmp_path, capsys):
    assert main(["region", "--scenario", str(tmp_path / "nope.json")]) == 2


def test_simulate_infeasible_target_exits_2(tmp_path, capsys):
    scenario = write_scenario(
        tmp_path,
        {
            "source": {"kind": "none"},
            "channel": {"kind": "noiseless-bit"},
            "simulation": {
                "n": 8, "delta": 0.05, "trials": 5, "seed": 1,
                "target": [1.0, 1.0],
            },
        },
    )
    assert main(["simulate", "--scenario", scenario]) == 2
    assert "outside" in capsys.readouterr().err


def test_internal_error_exits_1(tmp_path, capsys, monkeypatch):
    import skregion.cli as cli_mod

    def boom(*args, **kwargs):
        raise RuntimeError("unexpected")

    monkeypatch.setattr(cli_mod, "inner_bound_search", boom)
    assert main(["region", "--scenario", noiseless_scenario(tmp_path)]) == 1
    assert "internal error" in capsys.readouterr().err


def test_threads_env_var_honored(tmp_path, capsys, monkeypatch):
    scenario = noiseless_scenario(tmp_path)
    out_env = tmp_path / "env.csv"
    out_flag = tmp_path / "flag.csv"
    monkeypatch.setenv("SKREGION_THREADS", "8")
    assert main(["region", "--scenario", scenario, "--out", str(out_env)]) == 0
    monkeypatch.delenv("SKREGION_THREADS")
    assert main(["region", "--scenario", scenario, "--out", str(out_flag),
                 "--threads", "8"]) == 0
    capsys.readouterr()
    assert out_env.read_bytes() == out_flag.read_bytes()


def test_seeded_commands_byte_identical(tmp_path, capsys):
    scenario = noiseless_scenario(tmp_path)
    sim = sim_scenario(tmp_path, {})
    outputs = {}
    for tag, threads in (("t1", "1"), ("t1b", "1"), ("t8", "8")):
        region_csv = tmp_path / f"region_{tag}.csv"
        report = tmp_path / f"report_{tag}.txt"
        plot = tmp_path / f"plot_{tag}.png"
        assert main(
            ["region", "--scenario", scenario, "--out", str(region_csv),
             "--report", str(report), "--plot", str(plot), "--threads", threads]
        ) == 0
        sim_out = tmp_path / f"sim_{tag}.txt"
        assert main(
            ["simulate", "--scenario", sim, "--out", str(sim_out),
             "--threads", threads]
        ) == 0
        outputs[tag] = (
            region_csv.read_bytes(),
            report.read_bytes(),
            plot.read_bytes(),
            sim_out.read_bytes(),
        )
    capsys.readouterr()
    assert outputs["t1"] == outputs["t1b"] == outputs["t8"]
