"""Scenario files: one JSON document describing a whole experiment.

A scenario couples a source, a channel, an optional parallel-component
split, the region-search knobs, and the simulation settings.  Named
generators cover the standard desk-scale objects (symmetric channels,
erasure channels, doubly symmetric binary sources) so no test setup needs
hand-written tensors.  Validation is strict: unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .prob import (
    Channel,
    JointDistribution,
    binary_symmetric_channel,
    constant_channel,
    erasure_channel,
    identity_channel,
    product_channel,
)
from .regions import SearchConfig


def _check_keys(obj: dict, allowed: set[str], where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)} in {where}")


def _get(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"missing key {key!r} in {where}")
    return obj[key]


# ---------------------------------------------------------------------------
# Sources.
# ---------------------------------------------------------------------------


def _flip_joint(flip: float) -> np.ndarray:
    return np.array([[1 - flip, flip], [flip, 1 - flip]])


def build_source(spec: dict | None) -> JointDistribution:
    """A (SA, SB, SE) joint from a source spec; None means no sources."""
    if spec is None or spec == {"kind": "none"}:
        return JointDistribution(
            (("SA", 1), ("SB", 1), ("SE", 1)), np.ones((1, 1, 1))
        )
    where = "source"
    kind = _get(spec, "kind", where)
    if kind == "none":
        _check_keys(spec, {"kind"}, where)
        return build_source(None)
    if kind == "binary-symmetric":
        _check_keys(spec, {"kind", "bob_flip", "eve_flip", "chain"}, where)
        bob = float(_get(spec, "bob_flip", where))
        eve = spec.get("eve_flip")
        chain = spec.get("chain", "parallel")
        sa = np.array([0.5, 0.5])
        if chain == "parallel":
            sb_given_sa = _flip_joint(bob)
            if eve is None:
                joint = np.einsum("a,ab->ab", sa, sb_given_sa)[:, :, None]
                return JointDistribution((("SA", 2), ("SB", 2), ("SE", 1)), joint)
            joint = np.einsum(
                "a,ab,ae->abe", sa, sb_given_sa, _flip_joint(float(eve))
            )
            return JointDistribution((("SA", 2), ("SB", 2), ("SE", 2)), joint)
        if chain == "sa-sb-se":
            if eve is None:
                raise ScenarioError("chain 'sa-sb-se' needs eve_flip (SB -> SE stage)")
            joint = np.einsum(
                "a,ab,be->abe", sa, _flip_joint(bob), _flip_joint(float(eve))
            )
            return JointDistribution((("SA", 2), ("SB", 2), ("SE", 2)), joint)
        if chain == "sa-se-sb":
            if eve is None:
                raise ScenarioError("chain 'sa-se-sb' needs eve_flip (SA -> SE stage)")
            # Reversely degraded sources: SB is a further degraded view of SE.
            joint = np.einsum(
                "a,ae,eb->abe", sa, _flip_joint(float(eve)), _flip_joint(bob)
            )
            return JointDistribution((("SA", 2), ("SB", 2), ("SE", 2)), joint)
        raise ScenarioError(f"unknown source chain {chain!r}")
    if kind == "tensor":
        _check_keys(spec, {"kind", "variables", "probabilities"}, where)
        variables = tuple(
            (str(n), int(s)) for n, s in _get(spec, "variables", where)
        )
        if tuple(n for n, _ in variables) != ("SA", "SB", "SE"):
            raise ScenarioError("source variables must be SA, SB, SE in order")
        probs = np.asarray(_get(spec, "probabilities", where), dtype=float)
        return JointDistribution(variables, probs)
    raise ScenarioError(f"unknown source kind {kind!r}")


# ---------------------------------------------------------------------------
# Channels.
# ---------------------------------------------------------------------------


def _build_leg(spec: dict, out_name: str, where: str) -> Channel:
    kind = _get(spec, "kind", where)
    if kind == "bsc":
        _check_keys(spec, {"kind", "flip"}, where)
        return binary_symmetric_channel("X", out_name, float(_get(spec, "flip", where)))
    if kind == "noiseless":
        _check_keys(spec, {"kind", "size"}, where)
        return identity_channel("X", out_name, int(spec.get("size", 2)))
    if kind == "constant":
        _check_keys(spec, {"kind", "size"}, where)
        return constant_channel("X", int(spec.get("size", 2)), out_name)
    if kind == "erasure":
        _check_keys(spec, {"kind", "erase", "size"}, where)
        return erasure_channel(
            "X", out_name, int(spec.get("size", 2)), float(_get(spec, "erase", where))
        )
    raise ScenarioError(f"unknown channel leg kind {kind!r} in {where}")


def build_channel(spec: dict) -> Channel:
    """A broadcast channel X -> (Y, Z) from a channel spec."""
    where = "channel"
    kind = _get(spec, "kind", where)
    if kind == "legs":
        _check_keys(spec, {"kind", "bob", "eve"}, where)
        bob = _build_leg(_get(spec, "bob", where), "Y", "channel.bob")
        eve = _build_leg(_get(spec, "eve", where), "Z", "channel.eve")
        return product_channel(bob, eve)
    if kind == "bsc-pair":
        _check_keys(spec, {"kind", "bob_flip", "eve_flip"}, where)
        return product_channel(
            binary_symmetric_channel("X", "Y", float(_get(spec, "bob_flip", where))),
            binary_symmetric_channel("X", "Z", float(_get(spec, "eve_flip", where))),
        )
    if kind == "noiseless-bit":
        _check_keys(spec, {"kind"}, where)
        return product_channel(
            identity_channel("X", "Y", 2), constant_channel("X", 2, "Z")
        )
    if kind == "matrix":
        _check_keys(spec, {"kind", "input", "outputs", "rows"}, where)
        in_name, in_size = _get(spec, "input", where)
        outs = tuple((str(n), int(s)) for n, s in _get(spec, "outputs", where))
        rows = np.asarray(_get(spec, "rows", where), dtype=float)
        return Channel((str(in_name), int(in_size)), outs, rows)
    raise ScenarioError(f"unknown channel kind {kind!r}")


# ---------------------------------------------------------------------------
# Coupling kernels for the simulator.
# ---------------------------------------------------------------------------


def _kernel_rows(spec, in_size: int, default_out: int, where: str) -> np.ndarray:
    if isinstance(spec, str):
        if spec == "identity":
            return np.eye(in_size)
        if spec == "constant":
            return np.ones((in_size, 1))
        if spec == "uniform-binary":
            return np.full((in_size, 2), 0.5)
        raise ScenarioError(f"unknown kernel shorthand {spec!r} in {where}")
    rows = np.asarray(spec, dtype=float)
    if rows.ndim != 2 or rows.shape[0] != in_size:
        raise ScenarioError(
            f"{where} must have {in_size} rows, got shape {rows.shape}"
        )
    return rows


@dataclass(frozen=True)
class CouplingSpec:
    """Kernel choices the simulator assembles its coupling from."""

    u1_given_sa: object = "identity"
    v2_law: object = "constant"
    v1_given_v2: object = "uniform-binary"
    x_given_v1: object = "identity"

    def assemble(self, source: JointDistribution, channel: Channel):
        from .prob import assemble_coupling

        na = source.size_of("SA")
        u1_rows = _kernel_rows(self.u1_given_sa, na, na, "coupling.u1_given_sa")
        if isinstance(self.v2_law, str):
            if self.v2_law != "constant":
                raise ScenarioError(
                    f"unknown v2_law shorthand {self.v2_law!r}"
                )
            v2 = np.array([1.0])
        else:
            v2 = np.asarray(self.v2_law, dtype=float)
        v1_rows = _kernel_rows(self.v1_given_v2, v2.size, 2, "coupling.v1_given_v2")
        x_rows = _kernel_rows(
            self.x_given_v1, v1_rows.shape[1], channel.in_size, "coupling.x_given_v1"
        )
        return assemble_coupling(
            source,
            channel,
            Channel(("SA", na), (("U1", u1_rows.shape[1]),), u1_rows),
            v2,
            Channel(("V2", v2.size), (("V1", v1_rows.shape[1]),), v1_rows),
            Channel(("V1", v1_rows.shape[1]), (("X", x_rows.shape[1]),), x_rows),
        )


# ---------------------------------------------------------------------------
# Whole scenarios.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParallelSplit:
    forward_channel: Channel | None
    reverse_channel: Channel | None
    forward_source: JointDistribution | None
    reverse_source: JointDistribution | None


@dataclass(frozen=True)
class SimulationSettings:
    n: int
    delta: float
    trials: int
    seed: int
    target: tuple[float, float]
    mode: str = "auto"
    rate_margin: float = 0.1
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    thresholds: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    source: JointDistribution
    channel: Channel
    parallel: ParallelSplit | None
    search: SearchConfig
    degradation_tol: float
    simulation: SimulationSettings | None


_SCENARIO_KEYS = {
    "name",
    "source",
    "channel",
    "parallel",
    "search",
    "degradation",
    "simulation",
}
_SEARCH_KEYS = {
    "u1_card",
    "v1_card",
    "v2_card",
    "restarts",
    "iterations",
    "perturbation",
    "seed",
    "directions",
}
_SIM_KEYS = {
    "n",
    "delta",
    "trials",
    "seed",
    "target",
    "mode",
    "rate_margin",
    "coupling",
    "thresholds",
}
_THRESHOLD_KEYS = {
    "message_error",
    "key_error",
    "leakage_rate",
    "key_uniformity_deficit",
}
_COUPLING_KEYS = {"u1_given_sa", "v2_law", "v1_given_v2", "x_given_v1"}
_PARALLEL_KEYS = {"forward", "reverse"}
_COMPONENT_KEYS = {"channel", "source"}


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    _check_keys(doc, _SCENARIO_KEYS, "scenario")
    if "channel" not in doc and "parallel" not in doc:
        raise ScenarioError("scenario needs a 'channel' or a 'parallel' split")

    source = build_source(doc.get("source"))
    channel = build_channel(doc["channel"]) if "channel" in doc else None

    parallel = None
    if "parallel" in doc:
        pdoc = doc["parallel"]
        _check_keys(pdoc, _PARALLEL_KEYS, "parallel")

        def component(side: str):
            sdoc = pdoc.get(side) or {}
            _check_keys(sdoc, _COMPONENT_KEYS, f"parallel.{side}")
            ch = build_channel(sdoc["channel"]) if sdoc.get("channel") else None
            src = build_source(sdoc["source"]) if sdoc.get("source") else None
            return ch, src

        fch, fsrc = component("forward")
        rch, rsrc = component("reverse")
        parallel = ParallelSplit(fch, rch, fsrc, rsrc)

    sdoc = doc.get("search", {})
    _check_keys(sdoc, _SEARCH_KEYS, "search")
    search = SearchConfig(**sdoc)

    ddoc = doc.get("degradation", {})
    _check_keys(ddoc, {"tol"}, "degradation")
    tol = float(ddoc.get("tol", 1e-7))

    simulation = None
    if "simulation" in doc:
        simdoc = dict(doc["simulation"])
        _check_keys(simdoc, _SIM_KEYS, "simulation")
        for key in ("n", "delta", "trials", "seed", "target"):
            _get(simdoc, key, "simulation")
        cdoc = simdoc.get("coupling", {})
        _check_keys(cdoc, _COUPLING_KEYS, "simulation.coupling")
        tdoc = simdoc.get("thresholds", {})
        _check_keys(tdoc, _THRESHOLD_KEYS, "simulation.thresholds")
        target = simdoc["target"]
        if not (isinstance(target, (list, tuple)) and len(target) == 2):
            raise ScenarioError("simulation.target must be [r_sk, r_sm]")
        simulation = SimulationSettings(
            n=int(simdoc["n"]),
            delta=float(simdoc["delta"]),
            trials=int(simdoc["trials"]),
            seed=int(simdoc["seed"]),
            target=(float(target[0]), float(target[1])),
            mode=str(simdoc.get("mode", "auto")),
            rate_margin=float(simdoc.get("rate_margin", 0.1)),
            coupling=CouplingSpec(**cdoc),
            thresholds={k: float(v) for k, v in tdoc.items()},
        )

    if channel is None and parallel is None:
        raise ScenarioError("scenario needs a channel")
    return Scenario(
        name=str(doc.get("name", "scenario")),
        source=source,
        channel=channel if channel is not None else _parallel_product(parallel),
        parallel=parallel,
        search=search,
        degradation_tol=tol,
        simulation=simulation,
    )


def _parallel_product(parallel: ParallelSplit) -> Channel:
    """Flat stand-in channel when only a parallel split is declared."""
    for ch in (parallel.forward_channel, parallel.reverse_channel):
        if ch is not None:
            return ch
    raise ScenarioError("parallel split declares no channel component")


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {path}: {exc}") from exc
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(doc)


def scenario_to_dict(s: Scenario) -> dict:
    """Serialize back to the explicit (tensor/matrix) schema.

    Parsing the result reproduces the same internal values, so round
    trips are lossless even when the original used named generators.
    """

    def channel_dict(ch: Channel) -> dict:
        return {
            "kind": "matrix",
            "input": [ch.input[0], ch.input[1]],
            "outputs": [[n, sz] for n, sz in ch.outputs],
            "rows": ch.rows.tolist(),
        }

    def source_dict(src: JointDistribution) -> dict:
        return {
            "kind": "tensor",
            "variables": [[n, sz] for n, sz in src.variables],
            "probabilities": src.probabilities.tolist(),
        }

    doc: dict = {
        "name": s.name,
        "source": source_dict(s.source),
        "channel": channel_dict(s.channel),
        "search": {
            "u1_card": s.search.u1_card,
            "v1_card": s.search.v1_card,
            "v2_card": s.search.v2_card,
            "restarts": s.search.restarts,
            "iterations": s.search.iterations,
            "perturbation": s.search.perturbation,
            "seed": s.search.seed,
            "directions": s.search.directions,
        },
        "degradation": {"tol": s.degradation_tol},
    }
    doc["search"] = {k: v for k, v in doc["search"].items() if v is not None}
    if s.parallel is not None:
        def comp(ch, src):
            out = {}
            if ch is not None:
                out["channel"] = channel_dict(ch)
            if src is not None:
                out["source"] = source_dict(src)
            return out

        doc["parallel"] = {
            "forward": comp(s.parallel.forward_channel, s.parallel.forward_source),
            "reverse": comp(s.parallel.reverse_channel, s.parallel.reverse_source),
        }
    if s.simulation is not None:
        sim = s.simulation
        doc["simulation"] = {
            "n": sim.n,
            "delta": sim.delta,
            "trials": sim.trials,
            "seed": sim.seed,
            "target": [sim.target[0], sim.target[1]],
            "mode": sim.mode,
            "rate_margin": sim.rate_margin,
            "coupling": {
                "u1_given_sa": _kernel_doc(sim.coupling.u1_given_sa),
                "v2_law": _kernel_doc(sim.coupling.v2_law),
                "v1_given_v2": _kernel_doc(sim.coupling.v1_given_v2),
                "x_given_v1": _kernel_doc(sim.coupling.x_given_v1),
            },
            "thresholds": dict(sim.thresholds),
        }
    return doc


def _kernel_doc(spec):
    if isinstance(spec, str):
        return spec
    return np.asarray(spec, dtype=float).tolist()
