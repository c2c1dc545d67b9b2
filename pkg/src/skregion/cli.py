"""Command-line front end.

Subcommands: region, gaussian, degrade, simulate, compare.  Exit codes:
0 success, 2 validation error, 3 threshold failure (the run worked, the
physics did not meet the configured limits), 1 internal error.  Every
seeded command writes byte-identical output across runs and across
thread counts.
"""

from __future__ import annotations

import os
import struct
import sys
from pathlib import Path

import click
import numpy as np

from .degradation import classify_component, classify_source_leg, source_conditionals
from .errors import (
    ArgumentError,
    CompositionError,
    DistributionError,
    InfeasibleCouplingError,
    PreconditionError,
    ScenarioError,
    SkregionError,
    UnknownVariableError,
)
from .gaussian import GaussianScenario, boundary_csv, gaussian_boundary
from .protocol import run_end_to_end
from .regions import (
    RegionPolygon,
    SearchConfig,
    inner_bound_search,
    parallel_degraded_region,
)
from .scenario import load_scenario

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_THRESHOLD = 3

_VALIDATION_ERRORS = (
    ScenarioError,
    ArgumentError,
    PreconditionError,
    DistributionError,
    CompositionError,
    UnknownVariableError,
    InfeasibleCouplingError,
)


class ThresholdFailure(SkregionError):
    """Configured report thresholds were not met."""


def _threads_option(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("SKREGION_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ScenarioError(f"SKREGION_THREADS must be an integer: {env!r}") from exc
    return 1


def _write(path: str | None, content: str):
    if path:
        Path(path).write_text(content)


@click.group()
def cli():
    """Secret-key / secret-message rate regions and protocol simulation."""


@cli.command("region")
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Region vertices CSV (r_sk_bits, r_sm_bits, counterclockwise).")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Text report naming the best coupling per corner.")
@click.option("--plot", "plot_path", type=click.Path(), default=None,
              help="Render the region to an image file.")
@click.option("--seed", type=int, default=None, help="Override the search seed.")
@click.option("--threads", type=int, default=None)
@click.option("--directions", type=int, default=None,
              help="Override the number of weighted-sum directions.")
@click.option("--format", "fmt", type=click.Choice(["csv", "text"]), default="text")
def cmd_region(scenario_path, out_path, report_path, plot_path, seed, threads,
               directions, fmt):
    """Compute the achievable-region polygon for a scenario."""
    sc = load_scenario(scenario_path)
    cfg = sc.search
    if seed is not None:
        cfg = SearchConfig(**{**_cfg_dict(cfg), "seed": seed})
    if directions is not None:
        cfg = SearchConfig(**{**_cfg_dict(cfg), "directions": directions})
    nthreads = _threads_option(threads)

    report_lines = [f"# region report: {sc.name}"]
    if sc.parallel is not None:
        poly = parallel_degraded_region(
            sc.parallel.forward_channel,
            sc.parallel.reverse_channel,
            sc.parallel.forward_source,
            sc.parallel.reverse_source,
            cfg,
            threads=nthreads,
            tol=sc.degradation_tol,
        )
        report_lines.append("engine = parallel-degraded (tight)")
    else:
        result = inner_bound_search(sc.source, sc.channel, cfg, threads=nthreads)
        poly = result.polygon
        report_lines.append("engine = coupling-union search (inner bound)")
        report_lines += _corner_report(poly, result)

    csv_text = poly.to_csv()
    _write(out_path, csv_text)
    report_lines.append("vertices (r_sk_bits, r_sm_bits):")
    report_lines += [f"  ({x!r}, {y!r})" for x, y in poly.vertices]
    report_text = "\n".join(report_lines) + "\n"
    _write(report_path, report_text)
    if plot_path:
        from .plots import plot_region

        plot_region(poly, plot_path, title=sc.name)
    click.echo(csv_text if fmt == "csv" else report_text, nl=False)


def _cfg_dict(cfg: SearchConfig) -> dict:
    return {
        "u1_card": cfg.u1_card,
        "v1_card": cfg.v1_card,
        "v2_card": cfg.v2_card,
        "restarts": cfg.restarts,
        "iterations": cfg.iterations,
        "perturbation": cfg.perturbation,
        "seed": cfg.seed,
        "directions": cfg.directions,
    }


def _corner_report(poly: RegionPolygon, result) -> list[str]:
    lines = ["best couplings per corner:"]
    seen = set()
    for best in result.best_by_direction:
        corner = (round(best.corner[0], 6), round(best.corner[1], 6))
        if corner in seen:
            continue
        if poly.margin(best.corner) < -1e-6:
            continue
        seen.add(corner)
        lines.append(
            f"  corner (r_sk={corner[0]!r}, r_sm={corner[1]!r}) "
            f"from direction (lam={best.weight[0]:.4f}, mu={best.weight[1]:.4f})"
        )
        for key in sorted(best.kernels):
            lines.append(f"    {key} = {np.asarray(best.kernels[key]).tolist()!r}")
    return lines


@cli.command("gaussian")
@click.option("--snr-src", type=float, required=True)
@click.option("--snr-bob", type=float, required=True)
@click.option("--snr-eve", type=float, required=True)
@click.option("--samples", type=int, default=101, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Boundary CSV (r_sm_bits, r_sk_bits).")
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "text"]), default="csv")
def cmd_gaussian(snr_src, snr_bob, snr_eve, samples, out_path, plot_path, fmt):
    """Closed-form scalar Gaussian boundary."""
    scen = GaussianScenario(snr_src=snr_src, snr_bob=snr_bob, snr_eve=snr_eve)
    points = gaussian_boundary(scen, samples)
    csv_text = boundary_csv(points)
    _write(out_path, csv_text)
    if plot_path:
        from .plots import plot_boundary

        plot_boundary(points, plot_path, title="Gaussian rate boundary")
    if fmt == "csv":
        click.echo(csv_text, nl=False)
    else:
        click.echo(f"max r_sm = {points[-1][1]!r}\nmax r_sk = {points[0][0]!r}")


def _verdict_lines(tag: str, verdict) -> list[str]:
    lines = [f"{tag}.order = {verdict.order.value}"]
    lines.append(f"{tag}.residual_forward = {verdict.residual_forward!r}")
    lines.append(f"{tag}.residual_reverse = {verdict.residual_reverse!r}")
    if verdict.witness_forward is not None:
        lines.append(
            f"{tag}.witness_forward = {verdict.witness_forward.rows.tolist()!r}"
        )
    if verdict.witness_reverse is not None:
        lines.append(
            f"{tag}.witness_reverse = {verdict.witness_reverse.rows.tolist()!r}"
        )
    return lines


@cli.command("degrade")
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "text"]), default="text")
def cmd_degrade(scenario_path, out_path, fmt):
    """Classify stochastic degradation of the scenario's channel and source."""
    sc = load_scenario(scenario_path)
    tol = sc.degradation_tol
    bob = sc.channel.output_marginal("Y")
    eve = sc.channel.output_marginal("Z")
    lines = _verdict_lines("channel", classify_component(bob, eve, tol))
    if any(size > 1 for _, size in sc.source.variables):
        sb, se = source_conditionals(sc.source)
        lines += _verdict_lines("source", classify_source_leg(sb, se, tol))
    text = "\n".join(lines) + "\n"
    if fmt == "csv":
        keys = [ln.split(" = ")[0] for ln in lines]
        values = [ln.split(" = ", 1)[1] for ln in lines]
        text = ",".join(keys) + "\n" + ",".join(f'"{v}"' for v in values) + "\n"
    _write(out_path, text)
    click.echo(text, nl=False)


@cli.command("simulate")
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--dump-transcripts", "dump_path", type=click.Path(), default=None,
              help="Write Eve's channel views as flat binary records.")
@click.option("--seed", type=int, default=None, help="Override the simulation seed.")
@click.option("--threads", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "text"]), default="text")
def cmd_simulate(scenario_path, out_path, dump_path, seed, threads, fmt):
    """Run the separation protocol toward the scenario's target rates."""
    sc = load_scenario(scenario_path)
    if sc.simulation is None:
        raise ScenarioError("scenario has no 'simulation' section")
    sim = sc.simulation
    coupling = sim.coupling.assemble(sc.source, sc.channel)
    sink: list | None = [] if dump_path else None
    report = run_end_to_end(
        sc.source,
        sc.channel,
        coupling,
        target=sim.target,
        n=sim.n,
        delta=sim.delta,
        trials=sim.trials,
        seed=seed if seed is not None else sim.seed,
        mode=sim.mode,
        rate_margin=sim.rate_margin,
        threads=_threads_option(threads),
        transcript_sink=sink,
    )
    text = report.to_csv() if fmt == "csv" else report.to_text()
    _write(out_path, text)
    if dump_path and sink is not None:
        with open(dump_path, "wb") as fh:
            for z in sink:
                fh.write(struct.pack("<I", len(z)))
                fh.write(bytes(int(v) & 0xFF for v in z))
    click.echo(text, nl=False)

    checks = {
        "message_error": report.message_error_rate,
        "key_error": report.key_error_rate,
        "key_uniformity_deficit": report.key_uniformity_deficit,
        "leakage_rate": report.leakage_rate,
    }
    violations = []
    for name, limit in sim.thresholds.items():
        value = checks[name]
        if value is None:
            violations.append(f"{name}: no estimate available to certify <= {limit}")
        elif value > limit:
            violations.append(f"{name} = {value!r} exceeds threshold {limit!r}")
    if violations:
        raise ThresholdFailure("; ".join(violations))


def _read_points_csv(path: str) -> list[tuple[float, float]]:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ScenarioError(f"{path} is empty")
    header = [h.strip() for h in lines[0].split(",")]
    if header == ["r_sk_bits", "r_sm_bits"]:
        order = (0, 1)
    elif header == ["r_sm_bits", "r_sk_bits"]:
        order = (1, 0)
    else:
        raise ScenarioError(
            f"{path} must start with a r_sk_bits/r_sm_bits header, got {header}"
        )
    points = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 2:
            raise ScenarioError(f"bad CSV row in {path}: {ln!r}")
        vals = [float(c) for c in cells]
        points.append((vals[order[0]], vals[order[1]]))
    if not points:
        raise ScenarioError(f"{path} has a header but no rows")
    return points


@cli.command("compare")
@click.argument("first", type=click.Path(exists=False))
@click.argument("second", type=click.Path(exists=False))
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@click.option("--tol", type=float, default=1e-9, show_default=True)
def cmd_compare(first, second, out_path, plot_path, tol):
    """Compare two region/boundary CSVs for pointwise dominance."""
    pts1 = _read_points_csv(first)
    pts2 = _read_points_csv(second)
    r1 = RegionPolygon.from_corner_points(pts1)
    r2 = RegionPolygon.from_corner_points(pts2)
    one_covers = all(r1.margin(p) >= -tol for p in r2.vertices)
    two_covers = all(r2.margin(p) >= -tol for p in r1.vertices)
    if one_covers and two_covers:
        verdict = "equal"
    elif one_covers:
        verdict = "first-dominates-second"
    elif two_covers:
        verdict = "second-dominates-first"
    else:
        verdict = "incomparable"
    text = f"verdict = {verdict}\n"
    _write(out_path, text)
    if plot_path:
        from .plots import plot_comparison

        plot_comparison(pts1, pts2, plot_path, labels=(first, second))
    click.echo(text, nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except ThresholdFailure as exc:
        click.echo(f"threshold failure: {exc}", err=True)
        return EXIT_THRESHOLD
    except _VALIDATION_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except click.UsageError as exc:
        exc.show()
        return EXIT_VALIDATION
    except click.exceptions.Exit as exc:  # e.g. --help
        return exc.exit_code
    except SystemExit as exc:
        return int(exc.code or 0)
    except SkregionError as exc:
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - safety net
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
