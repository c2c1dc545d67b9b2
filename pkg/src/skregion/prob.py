"""Exact finite-alphabet probability calculus.

Dense joint tensors over named variables, channel kernels, information
measures in bits (log base 2), and the coupling assembler that builds the
structured joint law over (U1, V1, V2, X, Y, Z, SA, SB, SE) used by the
rate-region engine and the protocol simulator.

Everything here is immutable and pure; values are safe to share across
worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ArgumentError,
    CellLimitError,
    CompositionError,
    DistributionError,
    UnknownVariableError,
)

# Probabilities must sum to 1 within this tolerance.
PROB_ATOL = 1e-9
# Mass below this is treated as an exact zero inside log computations.
LOG_FLOOR = 1e-15
# Default cap on dense joint tensor size (cells).
DEFAULT_CELL_LIMIT = 10_000_000

# Canonical variable names of an assembled coupling, in tensor axis order.
COUPLING_VARS = ("U1", "V1", "V2", "X", "Y", "Z", "SA", "SB", "SE")


def _as_prob_array(values, shape=None) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if shape is not None and arr.shape != tuple(shape):
        raise DistributionError(f"expected shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DistributionError("probabilities must be finite")
    if np.any(arr < -PROB_ATOL):
        raise DistributionError(f"negative probability mass: min {arr.min()}")
    return np.clip(arr, 0.0, None)


@dataclass(frozen=True)
class JointDistribution:
    """Dense joint probability tensor over an ordered list of variables.

    Parameters
    ----------
    variables : tuple of (name, alphabet_size)
        One entry per tensor axis, in axis order. Names must be unique,
        sizes at least 1.
    probabilities : ndarray
        Nonnegative tensor of shape ``(size_1, ..., size_k)`` summing to 1
        within ``PROB_ATOL``.
    """

    variables: tuple[tuple[str, int], ...]
    probabilities: np.ndarray

    def __post_init__(self):
        variables = tuple((str(n), int(s)) for n, s in self.variables)
        object.__setattr__(self, "variables", variables)
        names = [n for n, _ in variables]
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate variable names in {names}")
        if any(s < 1 for _, s in variables):
            raise DistributionError("alphabet sizes must be >= 1")
        cells = int(np.prod([s for _, s in variables], dtype=object))
        if cells > DEFAULT_CELL_LIMIT:
            raise CellLimitError(
                f"joint tensor has {cells} cells, exceeding the cap of "
                f"{DEFAULT_CELL_LIMIT}; reduce alphabet sizes"
            )
        arr = _as_prob_array(self.probabilities, [s for _, s in variables])
        total = arr.sum()
        if abs(total - 1.0) > PROB_ATOL:
            raise DistributionError(f"probabilities sum to {total!r}, not 1")
        # Renormalize only when needed so parse/serialize round trips are
        # bit-stable; deviations below 1e-12 are numerically harmless.
        if abs(total - 1.0) > 1e-12:
            arr = arr / total
        arr.flags.writeable = False
        object.__setattr__(self, "probabilities", arr)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    def size_of(self, name: str) -> int:
        return self.variables[self.axis_of(name)][1]

    def axis_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariableError(
                f"variable {name!r} not among {self.names}"
            ) from None

    def _axes_of(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.axis_of(n) for n in names)

    def marginal(self, names: Iterable[str]) -> "JointDistribution":
        """Marginal over ``names``, keeping this distribution's axis order."""
        keep = set(self._axes_of(names))
        drop = tuple(a for a in range(len(self.variables)) if a not in keep)
        arr = self.probabilities.sum(axis=drop) if drop else self.probabilities
        vs = tuple(v for a, v in enumerate(self.variables) if a in keep)
        return JointDistribution(vs, arr)


@dataclass(frozen=True)
class Channel:
    """Memoryless kernel from one input variable to one or more outputs.

    ``rows[x]`` is the joint distribution of the output tuple given input
    symbol ``x``; stored with shape ``(in_size, *out_sizes)``.
    """

    input: tuple[str, int]
    outputs: tuple[tuple[str, int], ...]
    rows: np.ndarray

    def __post_init__(self):
        inp = (str(self.input[0]), int(self.input[1]))
        outs = tuple((str(n), int(s)) for n, s in self.outputs)
        object.__setattr__(self, "input", inp)
        object.__setattr__(self, "outputs", outs)
        names = [inp[0]] + [n for n, _ in outs]
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate variable names in {names}")
        if inp[1] < 1 or any(s < 1 for _, s in outs):
            raise DistributionError("alphabet sizes must be >= 1")
        shape = (inp[1],) + tuple(s for _, s in outs)
        arr = _as_prob_array(self.rows, shape)
        sums = arr.reshape(inp[1], -1).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > PROB_ATOL):
            raise DistributionError(
                f"channel rows must sum to 1; got sums {sums}"
            )
        if np.any(np.abs(sums - 1.0) > 1e-12):
            arr = arr / sums.reshape((-1,) + (1,) * len(outs))
        arr.flags.writeable = False
        object.__setattr__(self, "rows", arr)

    @property
    def in_size(self) -> int:
        return self.input[1]

    @property
    def out_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.outputs)

    @property
    def matrix(self) -> np.ndarray:
        """Rows flattened to shape (in_size, prod(out_sizes))."""
        return self.rows.reshape(self.in_size, -1)

    def output_marginal(self, name: str) -> "Channel":
        """Single-output channel obtained by marginalizing other outputs."""
        if name not in self.out_names:
            raise UnknownVariableError(f"output {name!r} not among {self.out_names}")
        keep = self.out_names.index(name)
        drop = tuple(1 + i for i in range(len(self.outputs)) if i != keep)
        arr = self.rows.sum(axis=drop) if drop else self.rows
        return Channel(self.input, (self.outputs[keep],), arr)


def identity_channel(in_name: str, out_name: str, size: int) -> Channel:
    return Channel((in_name, size), ((out_name, size),), np.eye(size))


def constant_channel(in_name: str, in_size: int, out_name: str) -> Channel:
    """Channel whose single output is a deterministic constant (size 1)."""
    return Channel((in_name, in_size), ((out_name, 1),), np.ones((in_size, 1)))


def binary_symmetric_channel(in_name: str, out_name: str, flip: float) -> Channel:
    if not 0.0 <= flip <= 1.0:
        raise ArgumentError(f"crossover probability must be in [0, 1], got {flip}")
    rows = np.array([[1 - flip, flip], [flip, 1 - flip]])
    return Channel((in_name, 2), ((out_name, 2),), rows)


def erasure_channel(in_name: str, out_name: str, size: int, erase: float) -> Channel:
    """Erasure channel: output symbol ``size`` is the erasure flag."""
    if not 0.0 <= erase <= 1.0:
        raise ArgumentError(f"erasure probability must be in [0, 1], got {erase}")
    rows = np.hstack([(1 - erase) * np.eye(size), np.full((size, 1), erase)])
    return Channel((in_name, size), ((out_name, size + 1),), rows)


def product_channel(bob: Channel, eve: Channel, out_names=("Y", "Z")) -> Channel:
    """Broadcast channel with conditionally independent legs to Bob and Eve."""
    if bob.in_size != eve.in_size:
        raise CompositionError(
            f"legs disagree on input size: {bob.in_size} vs {eve.in_size}"
        )
    if len(bob.outputs) != 1 or len(eve.outputs) != 1:
        raise CompositionError("legs must be single-output channels")
    rows = np.einsum("xy,xz->xyz", bob.rows, eve.rows)
    outs = ((out_names[0], bob.outputs[0][1]), (out_names[1], eve.outputs[0][1]))
    return Channel((bob.input[0], bob.in_size), outs, rows)


# ---------------------------------------------------------------------------
# Information measures (bits).
# ---------------------------------------------------------------------------


def _entropy_of_array(arr: np.ndarray) -> float:
    p = arr.reshape(-1)
    p = p[p > LOG_FLOOR]
    return float(-(p * np.log2(p)).sum()) if p.size else 0.0


def tensor_entropy(block: np.ndarray, axes_keep: tuple[int, ...]) -> float:
    """Entropy in bits of a marginal of a raw probability tensor."""
    drop = tuple(i for i in range(block.ndim) if i not in axes_keep)
    return _entropy_of_array(block.sum(axis=drop)) if drop else _entropy_of_array(block)


def tensor_mutual_information(
    block: np.ndarray, axes_a: tuple[int, ...], axes_b: tuple[int, ...]
) -> float:
    """I(A;B) in bits on a raw tensor, clamped nonnegative."""
    value = (
        tensor_entropy(block, axes_a)
        + tensor_entropy(block, axes_b)
        - tensor_entropy(block, axes_a + axes_b)
    )
    return max(0.0, value)


def tensor_conditional_mi(
    block: np.ndarray,
    axes_a: tuple[int, ...],
    axes_b: tuple[int, ...],
    axes_c: tuple[int, ...],
) -> float:
    """I(A;B|C) in bits on a raw tensor, clamped nonnegative."""
    value = (
        tensor_entropy(block, axes_a + axes_c)
        + tensor_entropy(block, axes_b + axes_c)
        - tensor_entropy(block, axes_a + axes_b + axes_c)
        - tensor_entropy(block, axes_c)
    )
    return max(0.0, value)


def entropy(dist: JointDistribution, vars: Iterable[str]) -> float:
    """Shannon entropy H of the marginal on ``vars``, in bits.

    0*log(0) is treated as 0; mass below ``LOG_FLOOR`` counts as exact zero.
    """
    names = tuple(vars)
    if not names:
        return 0.0
    return _entropy_of_array(dist.marginal(names).probabilities)


def _check_disjoint(*groups: Sequence[str]):
    seen: set[str] = set()
    for g in groups:
        gs = set(g)
        if gs & seen:
            raise ArgumentError(f"variable sets must be disjoint; {gs & seen} repeat")
        seen |= gs


def mutual_information(
    dist: JointDistribution, a: Iterable[str], b: Iterable[str]
) -> float:
    """I(A;B) in bits, clamped to be nonnegative."""
    a, b = tuple(a), tuple(b)
    _check_disjoint(a, b)
    value = entropy(dist, a) + entropy(dist, b) - entropy(dist, a + b)
    return max(0.0, value)


def conditional_mutual_information(
    dist: JointDistribution,
    a: Iterable[str],
    b: Iterable[str],
    c: Iterable[str],
) -> float:
    """I(A;B|C) in bits, clamped to be nonnegative."""
    a, b, c = tuple(a), tuple(b), tuple(c)
    _check_disjoint(a, b, c)
    value = (
        entropy(dist, a + c)
        + entropy(dist, b + c)
        - entropy(dist, a + b + c)
        - entropy(dist, c)
    )
    return max(0.0, value)


# ---------------------------------------------------------------------------
# Coupling assembly.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingKernels:
    """The pieces a coupling was assembled from (kept for provenance)."""

    source: JointDistribution
    channel: Channel
    u1_given_sa: Channel
    v2_law: np.ndarray
    v1_given_v2: Channel
    x_given_v1: Channel


@dataclass(frozen=True)
class AuxiliaryCoupling:
    """Structured joint law over (U1, V1, V2, X, Y, Z, SA, SB, SE).

    Built only through :func:`assemble_coupling`, so the factorization

        p(u1|sa) p(sa,sb,se) * p(v2) p(v1|v2) p(x|v1) p(y,z|x)

    holds by construction: the source block (U1, SA, SB, SE) is independent
    of the channel block (V1, V2, X, Y, Z).
    """

    joint: JointDistribution
    provenance: CouplingKernels

    def measure(self, kind: str) -> float:
        """Named information measures used by the rate-region bounds."""
        j = self.joint
        if kind == "I(V1;Y)":
            return mutual_information(j, ["V1"], ["Y"])
        if kind == "I(U1;SA|SB)":
            return conditional_mutual_information(j, ["U1"], ["SA"], ["SB"])
        if kind == "I(V1;Y|V2)":
            return conditional_mutual_information(j, ["V1"], ["Y"], ["V2"])
        if kind == "I(V1;Z|V2)":
            return conditional_mutual_information(j, ["V1"], ["Z"], ["V2"])
        if kind == "I(U1;SB)":
            return mutual_information(j, ["U1"], ["SB"])
        if kind == "I(U1;SE)":
            return mutual_information(j, ["U1"], ["SE"])
        if kind == "I(V2;Y)":
            return mutual_information(j, ["V2"], ["Y"])
        raise ArgumentError(f"unknown measure {kind!r}")

    @property
    def feasibility_margin(self) -> float:
        """I(V1;Y) - I(U1;SA|SB); a coupling is feasible when >= -1e-9."""
        return self.measure("I(V1;Y)") - self.measure("I(U1;SA|SB)")

    @property
    def feasible(self) -> bool:
        return self.feasibility_margin >= -PROB_ATOL


def _require_single_output(kernel: Channel, role: str, out_name: str):
    if len(kernel.outputs) != 1:
        raise CompositionError(f"{role} must have a single output")
    if kernel.out_names[0] != out_name:
        raise CompositionError(
            f"{role} output must be named {out_name!r}, got {kernel.out_names[0]!r}"
        )


def assemble_coupling(
    source: JointDistribution,
    channel: Channel,
    u1_given_sa: Channel,
    v2_law,
    v1_given_v2: Channel,
    x_given_v1: Channel,
) -> AuxiliaryCoupling:
    """Assemble the full joint over (U1, V1, V2, X, Y, Z, SA, SB, SE).

    ``source`` must be a joint over (SA, SB, SE); ``channel`` maps X to
    (Y, Z).  The auxiliary kernels realize the Markov chains
    U1 - SA - (SB, SE) and V2 - V1 - X - (Y, Z), with the (U1, source)
    block independent of the (V2, V1, X, channel) block.
    """
    if source.names != ("SA", "SB", "SE"):
        raise CompositionError(
            f"source must have variables (SA, SB, SE), got {source.names}"
        )
    if channel.input[0] != "X" or channel.out_names != ("Y", "Z"):
        raise CompositionError(
            "channel must map X to outputs (Y, Z); got "
            f"{channel.input[0]!r} -> {channel.out_names}"
        )
    _require_single_output(u1_given_sa, "u1_given_sa", "U1")
    _require_single_output(v1_given_v2, "v1_given_v2", "V1")
    _require_single_output(x_given_v1, "x_given_v1", "X")

    v2 = _as_prob_array(v2_law)
    if v2.ndim != 1:
        raise CompositionError("v2_law must be a 1-D probability vector")
    if abs(v2.sum() - 1.0) > PROB_ATOL:
        raise DistributionError(f"v2_law sums to {v2.sum()!r}, not 1")
    v2 = v2 / v2.sum()

    if u1_given_sa.in_size != source.size_of("SA"):
        raise CompositionError(
            f"u1_given_sa input size {u1_given_sa.in_size} != |SA| "
            f"{source.size_of('SA')}"
        )
    if v1_given_v2.in_size != v2.size:
        raise CompositionError(
            f"v1_given_v2 input size {v1_given_v2.in_size} != |V2| {v2.size}"
        )
    if x_given_v1.in_size != v1_given_v2.outputs[0][1]:
        raise CompositionError(
            f"x_given_v1 input size {x_given_v1.in_size} != |V1| "
            f"{v1_given_v2.outputs[0][1]}"
        )
    if x_given_v1.outputs[0][1] != channel.in_size:
        raise CompositionError(
            f"x_given_v1 output size {x_given_v1.outputs[0][1]} != |X| "
            f"{channel.in_size}"
        )

    sizes = {
        "U1": u1_given_sa.outputs[0][1],
        "V1": v1_given_v2.outputs[0][1],
        "V2": int(v2.size),
        "X": channel.in_size,
        "Y": channel.outputs[0][1],
        "Z": channel.outputs[1][1],
        "SA": source.size_of("SA"),
        "SB": source.size_of("SB"),
        "SE": source.size_of("SE"),
    }
    cells = int(np.prod([sizes[v] for v in COUPLING_VARS], dtype=object))
    if cells > DEFAULT_CELL_LIMIT:
        raise CellLimitError(
            f"assembled coupling would have {cells} cells, exceeding the cap "
            f"of {DEFAULT_CELL_LIMIT}"
        )

    # Axis letters: a=U1 b=V1 c=V2 d=X e=Y f=Z g=SA h=SB i=SE.
    joint = np.einsum(
        "ga,ghi,c,cb,bd,def->abcdefghi",
        u1_given_sa.rows,
        source.probabilities,
        v2,
        v1_given_v2.rows,
        x_given_v1.rows,
        channel.rows,
        optimize=True,
    )
    dist = JointDistribution(
        tuple((v, sizes[v]) for v in COUPLING_VARS), joint
    )
    kernels = CouplingKernels(
        source=source,
        channel=channel,
        u1_given_sa=u1_given_sa,
        v2_law=v2,
        v1_given_v2=v1_given_v2,
        x_given_v1=x_given_v1,
    )
    return AuxiliaryCoupling(joint=dist, provenance=kernels)
