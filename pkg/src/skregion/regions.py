"""Secret-key / secret-message rate-region computation.

For a fixed auxiliary coupling p the achievable region is the set of
nonnegative pairs (R_SK, R_SM) with

    R_SM        <=  A(p) = I(V1;Y) - I(U1;SA|SB)
    R_SK + R_SM <=  B(p) = [I(V1;Y|V2) - I(V1;Z|V2)]_+ + [I(U1;SB) - I(U1;SE)]_+

subject to the feasibility constraint I(V1;Y) >= I(U1;SA|SB).  The full
inner bound is the union of these regions over couplings; this module
searches that union by sweeping weighted-sum directions with seeded random
restarts and greedy simplex-projected perturbation, and reports the
down-closed convex hull of every achieved corner.  The parallel
forward/reverse degraded case is evaluated with its own (tight) pair of
bounds, and the channel-only reduction collapses to a single sum-rate
triangle.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np

from .degradation import (
    DEFAULT_TOL,
    classify_component,
    classify_source_leg,
    source_conditionals,
)
from .errors import ArgumentError, InfeasibleCouplingError, PreconditionError
from .prob import (
    LOG_FLOOR,
    AuxiliaryCoupling,
    Channel,
    JointDistribution,
    assemble_coupling,
    tensor_conditional_mi,
    tensor_mutual_information,
)

FEAS_TOL = 1e-9
_VERTEX_TOL = 1e-12


# ---------------------------------------------------------------------------
# Region polygons.
# ---------------------------------------------------------------------------


def _convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew monotone chain; returns extreme points in CCW order."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= _VERTEX_TOL:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= _VERTEX_TOL:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


@dataclass(frozen=True)
class RegionPolygon:
    """Down-closed convex region of (R_SK, R_SM) pairs, in bits per use.

    ``vertices`` are the extreme points in counterclockwise order starting
    at the origin.  ``constraints`` are half-planes (a, b, c) meaning
    a*R_SK + b*R_SM <= c; they include the axis constraints, and their
    intersection equals the polygon.
    """

    vertices: tuple[tuple[float, float], ...]
    constraints: tuple[tuple[float, float, float], ...]

    @classmethod
    def from_bounds(cls, sm_max: float, sum_max: float) -> "RegionPolygon":
        """Region {R_SM <= sm_max, R_SK + R_SM <= sum_max} in the quadrant."""
        a = max(0.0, float(sm_max))
        b = max(0.0, float(sum_max))
        m = min(a, b)
        verts: list[tuple[float, float]] = [(0.0, 0.0)]
        if b > 0.0:
            verts.append((b, 0.0))
            if m > 0.0:
                if b - m > _VERTEX_TOL:
                    verts.append((b - m, m))
                verts.append((0.0, m))
        cons = ((0.0, 1.0, a), (1.0, 1.0, b), (-1.0, 0.0, 0.0), (0.0, -1.0, 0.0))
        return cls(tuple(verts), cons)

    @classmethod
    def from_corner_points(
        cls, points: Iterable[tuple[float, float]]
    ) -> "RegionPolygon":
        """Down-closed convex hull of achieved corner points."""
        pts = [(max(0.0, float(x)), max(0.0, float(y))) for x, y in points]
        pts.append((0.0, 0.0))
        xmax = max(x for x, _ in pts)
        ymax = max(y for _, y in pts)
        pts += [(xmax, 0.0), (0.0, ymax)]
        hull = _convex_hull(pts)
        # Rotate the CCW cycle to start at the origin.
        start = hull.index(min(hull))
        hull = hull[start:] + hull[:start]

        cons: list[tuple[float, float, float]] = [(1.0, 0.0, xmax), (0.0, 1.0, ymax)]
        # Northeast chain: from (xmax, 0) counterclockwise up to (0, ymax).
        ne = [v for v in hull if v[0] > _VERTEX_TOL or v[1] > _VERTEX_TOL]
        ne = sorted(ne, key=lambda v: (-v[0], v[1]))
        for (x1, y1), (x2, y2) in zip(ne, ne[1:]):
            a, b = y2 - y1, x1 - x2  # outward normal of the CCW edge
            if a <= _VERTEX_TOL and b <= _VERTEX_TOL:
                continue
            scale = max(abs(a), abs(b))
            a, b = a / scale, b / scale
            cons.append((a, b, a * x1 + b * y1))
        cons += [(-1.0, 0.0, 0.0), (0.0, -1.0, 0.0)]
        return cls(tuple(hull), tuple(cons))

    def margin(self, point: tuple[float, float]) -> float:
        """Smallest constraint slack at ``point``; >= 0 means member."""
        x, y = point
        return min(c - a * x - b * y for a, b, c in self.constraints)

    def contains(self, point: tuple[float, float], tol: float = 0.0) -> bool:
        return self.margin(point) >= -tol

    def scaled(self, factor: float) -> "RegionPolygon":
        """Polygon shrunk (or grown) about the origin by ``factor``."""
        if factor < 0:
            raise ArgumentError("scale factor must be nonnegative")
        verts = tuple((x * factor, y * factor) for x, y in self.vertices)
        cons = tuple(
            (a, b, c * factor) if c > 0 else (a, b, c)
            for a, b, c in self.constraints
        )
        return RegionPolygon(verts, cons)

    @property
    def max_sum_rate(self) -> float:
        return max(x + y for x, y in self.vertices)

    @property
    def max_sk(self) -> float:
        return max(x for x, _ in self.vertices)

    @property
    def max_sm(self) -> float:
        return max(y for _, y in self.vertices)

    def to_csv(self) -> str:
        lines = ["r_sk_bits,r_sm_bits"]
        lines += [f"{x!r},{y!r}" for x, y in self.vertices]
        return "\n".join(lines) + "\n"


def point_in_region(poly: RegionPolygon, point: tuple[float, float]) -> float:
    """Membership margin of ``point``: the smallest constraint slack.

    Nonnegative means the point belongs to the region; the magnitude of a
    negative value is how far the worst constraint is violated.
    """
    return poly.margin(point)


# ---------------------------------------------------------------------------
# Region for a fixed coupling.
# ---------------------------------------------------------------------------


def region_bounds(p: AuxiliaryCoupling) -> tuple[float, float]:
    """(A, B) bounds of the fixed-coupling region, clamped nonnegative.

    Raises :class:`InfeasibleCouplingError` when p violates the feasibility
    constraint I(V1;Y) >= I(U1;SA|SB).
    """
    iv1y = p.measure("I(V1;Y)")
    iu1sa_sb = p.measure("I(U1;SA|SB)")
    margin = iv1y - iu1sa_sb
    if margin < -FEAS_TOL:
        raise InfeasibleCouplingError(
            f"coupling infeasible: I(V1;Y)={iv1y:.6f} < "
            f"I(U1;SA|SB)={iu1sa_sb:.6f}",
            margin=-margin,
        )
    a = max(0.0, margin)
    chan = p.measure("I(V1;Y|V2)") - p.measure("I(V1;Z|V2)")
    src = p.measure("I(U1;SB)") - p.measure("I(U1;SE)")
    b = max(0.0, chan) + max(0.0, src)
    return a, b


def region_for_coupling(p: AuxiliaryCoupling) -> RegionPolygon:
    """Achievable region of a fixed feasible coupling."""
    a, b = region_bounds(p)
    return RegionPolygon.from_bounds(a, b)


# ---------------------------------------------------------------------------
# Search configuration.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the randomized union search.

    Cardinality caps default to |SA|+3 (U1) and |X|+3 (V1, V2) when left as
    None; the bound behind those defaults is a finite-cardinality guarantee
    without an explicit constant, so the caps stay configuration.
    """

    u1_card: int | None = None
    v1_card: int | None = None
    v2_card: int | None = None
    restarts: int = 4
    iterations: int = 80
    perturbation: float = 0.35
    seed: int = 0
    directions: int = 33

    def __post_init__(self):
        for name in ("u1_card", "v1_card", "v2_card"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ArgumentError(f"{name} must be >= 1, got {v}")
        if self.restarts < 1 or self.iterations < 1 or self.directions < 1:
            raise ArgumentError("restart, iteration, and direction budgets must be >= 1")
        if self.perturbation <= 0:
            raise ArgumentError("perturbation scale must be positive")


def _direction_weights(count: int) -> list[tuple[float, float]]:
    ts = np.linspace(0.0, 1.0, count)
    return [(float(1.0 - t), float(t)) for t in ts]


def _run_tasks(fn: Callable[[int], object], n_tasks: int, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n_tasks)))


# ---------------------------------------------------------------------------
# Fast block-wise measure evaluation used inside the search loops.
# ---------------------------------------------------------------------------


_mi = tensor_mutual_information
_cmi = tensor_conditional_mi


def _perturb_rows(rows: np.ndarray, rng: np.random.Generator, scale: float) -> np.ndarray:
    out = rows.copy()
    idx = rng.integers(out.shape[0]) if out.ndim == 2 else None
    row = out[idx] if idx is not None else out
    cand = row + rng.normal(0.0, scale, row.shape)
    cand = np.clip(cand, 0.0, None)
    total = cand.sum()
    cand = np.full_like(row, 1.0 / row.size) if total <= LOG_FLOOR else cand / total
    if idx is not None:
        out[idx] = cand
    else:
        out = cand
    return out


def _random_rows(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    if len(shape) == 1:
        return rng.dirichlet(np.ones(shape[0]))
    return rng.dirichlet(np.ones(shape[1]), size=shape[0])


def _padded_identity(n_in: int, n_out: int) -> np.ndarray:
    rows = np.zeros((n_in, n_out))
    rows[np.arange(n_in), np.minimum(np.arange(n_in), n_out - 1)] = 1.0
    return rows


def _spread_law(card: int, support: int) -> np.ndarray:
    law = np.zeros(card)
    law[:support] = 1.0 / support
    return law


class _CornerCollector:
    """Corner points of every feasible coupling a task evaluated."""

    def __init__(self):
        self.points: list[tuple[float, float]] = []

    def add(self, a: float, b: float):
        m = min(a, b)
        self.points.append((b, 0.0))
        if m > 0.0:
            self.points.append((b - m, m))
            self.points.append((0.0, m))


def _corner_objective(a: float, b: float, weight: tuple[float, float]) -> float:
    lam, mu = weight
    m = min(a, b)
    best = max(lam * b, lam * (b - m) + mu * m, mu * m, 0.0)
    return best


class _SearchSpace:
    """A parameterized family of couplings with a per-direction objective.

    Subclasses define the kernel dictionary layout, canonical starting
    points, and the (A, B) bound evaluation.  ``evaluate`` returns None for
    candidates outside the feasible set (they are rejected, not penalized).
    """

    kernel_shapes: dict[str, tuple[int, ...]]

    def canonical_starts(self) -> list[dict[str, np.ndarray]]:
        raise NotImplementedError

    def random_start(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {
            k: _random_rows(rng, shape) for k, shape in self.kernel_shapes.items()
        }

    def perturb(
        self, kernels: dict[str, np.ndarray], rng: np.random.Generator, scale: float
    ) -> dict[str, np.ndarray]:
        out = dict(kernels)
        key = list(self.kernel_shapes)[rng.integers(len(self.kernel_shapes))]
        out[key] = _perturb_rows(out[key], rng, scale)
        return out

    def evaluate(self, kernels: dict[str, np.ndarray]) -> tuple[float, float] | None:
        raise NotImplementedError


def _climb(
    space: _SearchSpace,
    start: dict[str, np.ndarray],
    weight: tuple[float, float],
    cfg: SearchConfig,
    rng: np.random.Generator,
    collector: _CornerCollector,
):
    """Greedy hill climb on the weighted-sum objective from one start."""

    def score(kernels):
        bounds = space.evaluate(kernels)
        if bounds is None:
            return None
        collector.add(*bounds)
        return _corner_objective(*bounds, weight), bounds

    best_kernels = start
    scored = score(start)
    best_val, best_bounds = scored if scored else (-np.inf, None)
    scale = cfg.perturbation
    for _ in range(cfg.iterations):
        cand = space.perturb(best_kernels, rng, scale)
        scored = score(cand)
        if scored and scored[0] > best_val + 1e-12:
            best_val, best_bounds = scored
            best_kernels = cand
        else:
            scale = max(scale * 0.9, 1e-4)
    return best_val, best_bounds, best_kernels


@dataclass(frozen=True)
class DirectionBest:
    """Best coupling found while optimizing one weighted-sum direction."""

    weight: tuple[float, float]
    value: float
    bounds: tuple[float, float]
    kernels: dict[str, np.ndarray]

    @property
    def corner(self) -> tuple[float, float]:
        a, b = self.bounds
        lam, mu = self.weight
        m = min(a, b)
        options = [(b, 0.0), (b - m, m), (0.0, m)]
        return max(options, key=lambda p: lam * p[0] + mu * p[1])


@dataclass(frozen=True)
class SearchResult:
    polygon: RegionPolygon
    best_by_direction: tuple[DirectionBest, ...]


def _sweep(space: _SearchSpace, cfg: SearchConfig, threads: int) -> SearchResult:
    weights = _direction_weights(cfg.directions)
    canonical = space.canonical_starts()
    starts_per_dir = len(canonical) + cfg.restarts

    def run_direction(d_idx: int):
        weight = weights[d_idx]
        collector = _CornerCollector()
        best = None
        for s_idx in range(starts_per_dir):
            rng = np.random.default_rng((cfg.seed, d_idx, s_idx))
            if s_idx < len(canonical):
                start = {k: v.copy() for k, v in canonical[s_idx].items()}
            else:
                start = space.random_start(rng)
            val, bounds, kernels = _climb(space, start, weight, cfg, rng, collector)
            if bounds is not None and (best is None or val > best.value + 1e-12):
                best = DirectionBest(weight, val, bounds, kernels)
        return collector.points, best

    results = _run_tasks(run_direction, len(weights), threads)
    points: list[tuple[float, float]] = [(0.0, 0.0)]
    bests: list[DirectionBest] = []
    for pts, best in results:
        points.extend(pts)
        if best is not None:
            bests.append(best)
    return SearchResult(RegionPolygon.from_corner_points(points), tuple(bests))


# ---------------------------------------------------------------------------
# Union search over full couplings.
# ---------------------------------------------------------------------------


class _CouplingSpace(_SearchSpace):
    def __init__(self, source: JointDistribution, channel: Channel, cfg: SearchConfig):
        if source.names != ("SA", "SB", "SE"):
            raise ArgumentError(
                f"source must have variables (SA, SB, SE), got {source.names}"
            )
        self.source = source
        self.channel = channel
        self.na = source.size_of("SA")
        self.nx = channel.in_size
        self.u1 = cfg.u1_card if cfg.u1_card is not None else self.na + 3
        self.v1 = cfg.v1_card if cfg.v1_card is not None else self.nx + 3
        self.v2 = cfg.v2_card if cfg.v2_card is not None else self.nx + 3
        self.kernel_shapes = {
            "u1_given_sa": (self.na, self.u1),
            "v2_law": (self.v2,),
            "v1_given_v2": (self.v2, self.v1),
            "x_given_v1": (self.v1, self.nx),
        }
        self.src = source.probabilities
        self.ch = channel.rows

    def canonical_starts(self):
        v1_given_v2 = np.tile(_spread_law(self.v1, min(self.nx, self.v1)), (self.v2, 1))
        base = {
            "v2_law": _spread_law(self.v2, 1),
            "v1_given_v2": v1_given_v2,
            "x_given_v1": _padded_identity(self.v1, self.nx),
        }
        u1_constant = np.hstack(
            [np.ones((self.na, 1)), np.zeros((self.na, self.u1 - 1))]
        )
        degenerate = dict(base, u1_given_sa=u1_constant)
        identity = dict(base, u1_given_sa=_padded_identity(self.na, self.u1))
        return [degenerate, identity]

    def evaluate(self, kernels):
        # Channel block, axes (V2, V1, X, Y, Z).
        cb = np.einsum(
            "c,cb,bd,def->cbdef",
            kernels["v2_law"],
            kernels["v1_given_v2"],
            kernels["x_given_v1"],
            self.ch,
            optimize=True,
        )
        iv1y = _mi(cb, (1,), (3,))
        # Source block, axes (U1, SA, SB, SE).
        sb = np.einsum("ga,ghi->aghi", kernels["u1_given_sa"], self.src, optimize=True)
        iu1sa_sb = _cmi(sb, (0,), (1,), (2,))
        margin = iv1y - iu1sa_sb
        if margin < -FEAS_TOL:
            return None
        a = max(0.0, margin)
        chan = _cmi(cb, (1,), (3,), (0,)) - _cmi(cb, (1,), (4,), (0,))
        src = _mi(sb, (0,), (2,)) - _mi(sb, (0,), (3,))
        b = max(0.0, chan) + max(0.0, src)
        return a, b

    def coupling(self, kernels) -> AuxiliaryCoupling:
        """Assemble the full joint for a kernel dictionary of this space."""
        return assemble_coupling(
            self.source,
            self.channel,
            Channel(("SA", self.na), (("U1", self.u1),), kernels["u1_given_sa"]),
            kernels["v2_law"],
            Channel(("V2", self.v2), (("V1", self.v1),), kernels["v1_given_v2"]),
            Channel(("V1", self.v1), (("X", self.nx),), kernels["x_given_v1"]),
        )


def inner_bound_search(
    source: JointDistribution,
    channel: Channel,
    cfg: SearchConfig,
    threads: int = 1,
) -> SearchResult:
    """Union search over couplings; returns the polygon and per-direction bests."""
    space = _CouplingSpace(source, channel, cfg)
    return _sweep(space, cfg, threads)


def inner_bound_region(
    source: JointDistribution,
    channel: Channel,
    cfg: SearchConfig,
    threads: int = 1,
) -> RegionPolygon:
    """Searched inner bound: the union of fixed-coupling regions."""
    return inner_bound_search(source, channel, cfg, threads).polygon


def coupling_from_kernels(
    source: JointDistribution,
    channel: Channel,
    cfg: SearchConfig,
    kernels: dict[str, np.ndarray],
) -> AuxiliaryCoupling:
    """Assemble the coupling a search result's kernel dictionary describes."""
    return _CouplingSpace(source, channel, cfg).coupling(kernels)


# ---------------------------------------------------------------------------
# Channel-only reduction.
# ---------------------------------------------------------------------------


class _ChannelOnlySpace(_SearchSpace):
    def __init__(self, channel: Channel, cfg: SearchConfig):
        self.channel = channel
        self.nx = channel.in_size
        self.v1 = cfg.v1_card if cfg.v1_card is not None else self.nx + 3
        self.kernel_shapes = {
            "v1_law": (self.v1,),
            "x_given_v1": (self.v1, self.nx),
        }
        self.ch = channel.rows

    def canonical_starts(self):
        return [
            {
                "v1_law": _spread_law(self.v1, min(self.nx, self.v1)),
                "x_given_v1": _padded_identity(self.v1, self.nx),
            }
        ]

    def evaluate(self, kernels):
        # Block axes (V1, X, Y, Z).
        block = np.einsum(
            "b,bd,def->bdef", kernels["v1_law"], kernels["x_given_v1"], self.ch,
            optimize=True,
        )
        s = max(0.0, _mi(block, (0,), (2,)) - _mi(block, (0,), (3,)))
        return s, s


def channel_only_region(
    channel: Channel, cfg: SearchConfig, threads: int = 1
) -> RegionPolygon:
    """Region when the sources are ignored: all pairs with

    R_SK + R_SM <= S* = max over V1 - X couplings of [I(V1;Y) - I(V1;Z)]_+.
    """
    space = _ChannelOnlySpace(channel, cfg)
    # The region is one triangle parameterized by a scalar; a single
    # objective direction suffices.
    cfg1 = replace(cfg, directions=1)
    result = _sweep(space, cfg1, threads)
    s = result.polygon.max_sum_rate
    return RegionPolygon.from_bounds(s, s)


# ---------------------------------------------------------------------------
# Parallel degraded components (tight case).
# ---------------------------------------------------------------------------


def _trivial_channel() -> Channel:
    return Channel(("X", 1), (("Y", 1), ("Z", 1)), np.ones((1, 1, 1)))


def _trivial_source() -> JointDistribution:
    return JointDistribution(
        (("SA", 1), ("SB", 1), ("SE", 1)), np.ones((1, 1, 1))
    )


class _ParallelSpace(_SearchSpace):
    def __init__(
        self,
        forward_channel: Channel,
        reverse_channel: Channel,
        forward_source: JointDistribution,
        cfg: SearchConfig,
    ):
        self.fch = forward_channel.rows
        self.rch = reverse_channel.rows
        self.fsrc = forward_source.probabilities
        self.nxf = forward_channel.in_size
        self.nxr = reverse_channel.in_size
        self.naf = forward_source.size_of("SA")
        self.u1 = cfg.u1_card if cfg.u1_card is not None else self.naf + 3
        self.v2 = cfg.v2_card if cfg.v2_card is not None else self.nxf + 3
        self.kernel_shapes = {
            # Joint law over (V2, XF), optimized as one simplex block.
            "v2_xf": (1, self.v2 * self.nxf),
            "xr_law": (self.nxr,),
            "u1_given_saf": (self.naf, self.u1),
        }

    def canonical_starts(self):
        v2xf = np.zeros((self.v2, self.nxf))
        v2xf[0, :] = 1.0 / self.nxf
        base = {
            "v2_xf": v2xf.reshape(1, -1),
            "xr_law": np.full(self.nxr, 1.0 / self.nxr),
        }
        constant = dict(
            base,
            u1_given_saf=np.hstack(
                [np.ones((self.naf, 1)), np.zeros((self.naf, self.u1 - 1))]
            ),
        )
        identity = dict(base, u1_given_saf=_padded_identity(self.naf, self.u1))
        return [constant, identity]

    def evaluate(self, kernels):
        v2xf = kernels["v2_xf"].reshape(self.v2, self.nxf)
        # Forward channel block, axes (V2, XF, YF, ZF).
        fb = np.einsum("cd,def->cdef", v2xf, self.fch, optimize=True)
        # Reverse channel block, axes (XR, YR, ZR).
        rb = np.einsum("d,def->def", kernels["xr_law"], self.rch, optimize=True)
        # Forward source block, axes (U1, SAF, SBF, SEF).
        sb = np.einsum("ga,ghi->aghi", kernels["u1_given_saf"], self.fsrc, optimize=True)
        a = (
            _mi(fb, (1,), (2,))
            + _mi(rb, (0,), (1,))
            - _cmi(sb, (0,), (1,), (2,))
        )
        if a < -FEAS_TOL:
            return None  # no nonnegative R_SM satisfies the first bound
        b = (
            _cmi(fb, (1,), (2,), (0,))
            - _cmi(fb, (1,), (3,), (0,))
            + _cmi(sb, (0,), (2,), (3,))
        )
        return max(0.0, a), max(0.0, b)


def _check_parallel_preconditions(
    forward_channel: Channel | None,
    reverse_channel: Channel | None,
    forward_source: JointDistribution | None,
    reverse_source: JointDistribution | None,
    tol: float,
):
    if forward_channel is not None:
        v = classify_component(
            forward_channel.output_marginal("Y"),
            forward_channel.output_marginal("Z"),
            tol,
        )
        if not v.forward_feasible:
            raise PreconditionError(
                "forward channel is not stochastically degraded in favor of Bob "
                f"(best residual {v.residual_forward:.3e})"
            )
    if reverse_channel is not None:
        v = classify_component(
            reverse_channel.output_marginal("Y"),
            reverse_channel.output_marginal("Z"),
            tol,
        )
        if not v.reverse_feasible:
            raise PreconditionError(
                "reverse channel is not stochastically degraded in favor of Eve "
                f"(best residual {v.residual_reverse:.3e})"
            )
    if forward_source is not None:
        sb, se = source_conditionals(forward_source)
        v = classify_source_leg(sb, se, tol)
        if not v.forward_feasible:
            raise PreconditionError(
                "forward source is not stochastically degraded in favor of Bob "
                f"(best residual {v.residual_forward:.3e})"
            )
    if reverse_source is not None:
        sb, se = source_conditionals(reverse_source)
        v = classify_source_leg(sb, se, tol)
        if not v.reverse_feasible:
            raise PreconditionError(
                "reverse source is not stochastically degraded in favor of Eve "
                f"(best residual {v.residual_reverse:.3e})"
            )


def parallel_degraded_region(
    forward_channel: Channel | None,
    reverse_channel: Channel | None,
    forward_source: JointDistribution | None,
    reverse_source: JointDistribution | None,
    cfg: SearchConfig,
    threads: int = 1,
    tol: float = DEFAULT_TOL,
) -> RegionPolygon:
    """Tight region for parallel forward/reverse degraded components.

    The bounds searched are

        R_SM        <= I(XF;YF) + I(XR;YR) - I(U1;SAF|SBF)
        R_SK + R_SM <= I(XF;YF|V2) - I(XF;ZF|V2) + I(U1;SBF|SEF)

    over joint laws p(V2, XF), p(XR), and kernels p(U1|SAF).  The reversely
    degraded source component never enters the distribution family, so it
    is accepted (verified for its ordering) and then ignored.  Absent
    components may be passed as None.
    """
    _check_parallel_preconditions(
        forward_channel, reverse_channel, forward_source, reverse_source, tol
    )
    fch = forward_channel if forward_channel is not None else _trivial_channel()
    rch = reverse_channel if reverse_channel is not None else _trivial_channel()
    fsrc = forward_source if forward_source is not None else _trivial_source()
    space = _ParallelSpace(fch, rch, fsrc, cfg)
    return _sweep(space, cfg, threads).polygon
