"""
Rate regions built from the closed-form constraint sets.

A region is held intensionally as a RegionHandle (model, channel, auxiliary
grid). Boundary slices at a fixed common rate r0 are sampled from it, and
membership searches the auxiliary knobs for a setting that admits a point.
"""
import asyncio
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

import config
from cache import cached
from error_handling import DomainError, require_nonnegative
from gaussian_rates import (
    ChannelParams,
    ConstraintSet,
    RateTriple,
    bc_rates,
    beta_star,
    df_partial_rates,
    ef_partial_rates,
    feedback_rates,
    full_feedback_rates,
    full_inner_rates,
    full_outer_rates,
    harmonic_noise,
    partial_outer_rates,
)
from logging_config import log_execution_time

logger = logging.getLogger("region_geometry")
time_logger = logging.getLogger("time_analysis")

KNOB_COLUMNS = ("alpha", "beta", "gamma", "eta")

Knobs = Dict[str, np.ndarray]
Evaluator = Callable[[ChannelParams, Knobs], Tuple[ConstraintSet, Knobs]]


def _gaussian_bc(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    cs = bc_rates(params, knobs["alpha"])
    # The common message must reach the weaker receiver, whose rate carries it
    if params.N1 <= params.N2:
        bounds = {"r1": cs["r1"], "r0+r2": cs["r2"]}
    else:
        bounds = {"r0+r1": cs["r1"], "r2": cs["r2"]}
    return ConstraintSet(bounds), knobs


def _decode_forward(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    params.require_weak_user_two("decode-and-forward")
    alpha = knobs["alpha"]
    beta = beta_star(params.P, params.P1, params.N1, params.N2, alpha)
    cs = df_partial_rates(params.P, params.P1, params.N1, params.N2, alpha, beta)
    return cs, {**knobs, "beta": beta}


def _feedback(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    params.require_weak_user_two("feedback")
    alpha = knobs["alpha"]
    harmonic = harmonic_noise(params.N1, params.N2)
    beta = beta_star(params.P, params.P1, harmonic, params.N2, alpha)
    return feedback_rates(params, alpha, beta), {**knobs, "beta": beta}


def _full_feedback(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    params.require_weak_user_two("awgn-full-feedback")
    alpha = knobs["alpha"]
    harmonic = harmonic_noise(params.N1, params.N2)
    beta = beta_star(params.P, params.P1, harmonic, params.N2, alpha)
    return full_feedback_rates(params, alpha, beta), {**knobs, "beta": beta}


def _partial_outer(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    return partial_outer_rates(params, knobs["alpha"], knobs["beta"]), knobs


def _ef_partial(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    return ef_partial_rates(params, knobs["alpha"], knobs["eta"]), knobs


def _full_inner(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    params.require_weak_user_two("awgn-full-inner")
    alpha, eta = knobs["alpha"], knobs["eta"]
    beta = beta_star(params.P, params.P1, params.N1 + np.asarray(eta) * params.P2, params.N2, alpha)
    return full_inner_rates(params, alpha, beta, eta), {**knobs, "beta": beta}


def _full_outer(params: ChannelParams, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
    return full_outer_rates(params, knobs["alpha"], knobs["beta"], knobs["gamma"]), knobs


@dataclass(frozen=True)
class ModelSpec:
    knobs: Tuple[str, ...]
    evaluate: Evaluator
    hull: bool = False
    noise_order: str = "weak-user-two"  # "weak-user-two" (N1 < N2), "weak-relay" (N1 > N2) or "any"


MODELS: Dict[str, ModelSpec] = {
    "gaussian-bc": ModelSpec(("alpha",), _gaussian_bc, noise_order="any"),
    "dawgn-partial": ModelSpec(("alpha",), _decode_forward),
    "awgn-partial-inner": ModelSpec(("alpha",), _decode_forward),
    "awgn-partial-outer": ModelSpec(("alpha", "beta"), _partial_outer),
    "awgn-partial-feedback": ModelSpec(("alpha",), _feedback),
    "ef-partial": ModelSpec(("alpha", "eta"), _ef_partial, noise_order="weak-relay"),
    "awgn-full-inner": ModelSpec(("alpha", "eta"), _full_inner, hull=True),
    "awgn-full-outer": ModelSpec(("alpha", "beta", "gamma"), _full_outer),
    "awgn-full-feedback": ModelSpec(("alpha",), _full_feedback),
}

FULL_MODELS = frozenset({"awgn-full-inner", "awgn-full-outer", "awgn-full-feedback"})


def default_resolution(model: str, knob: str) -> int:
    if knob == "alpha":
        return config.DEFAULT_ALPHA_GRID
    return config.DEFAULT_KNOB_GRID if len(MODELS[model].knobs) <= 2 else config.OUTER_KNOB_GRID


@dataclass(frozen=True)
class RegionHandle:
    model: str
    params: ChannelParams
    grid: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.model not in MODELS:
            raise DomainError(f"Unknown model {self.model!r}; choose from {sorted(MODELS)}")
        spec = MODELS[self.model]
        requested = dict(self.grid)
        unknown = set(requested) - set(spec.knobs)
        if unknown:
            raise DomainError(f"{self.model} has no knobs {sorted(unknown)}; its knobs are {spec.knobs}")
        grid = tuple((knob, int(requested.get(knob, default_resolution(self.model, knob)))) for knob in spec.knobs)
        for knob, resolution in grid:
            if resolution < 2:
                raise DomainError(f"Grid resolution for {knob} must be >= 2, got {resolution}")
        object.__setattr__(self, "grid", grid)
        if spec.noise_order == "weak-user-two":
            self.params.require_weak_user_two(self.model)
        elif spec.noise_order == "weak-relay":
            self.params.require_weak_relay(self.model)

    @classmethod
    def create(cls, model: str, params: ChannelParams, **resolutions: int) -> "RegionHandle":
        return cls(model, params, tuple(sorted(resolutions.items())))

    @property
    def spec(self) -> ModelSpec:
        return MODELS[self.model]

    def resolution(self, knob: str) -> int:
        return dict(self.grid)[knob]

    def evaluate(self, knobs: Knobs) -> Tuple[ConstraintSet, Knobs]:
        return self.spec.evaluate(self.params, knobs)


@dataclass(eq=False)
class ParetoSlice:
    model: str
    params: Optional[ChannelParams]
    r0: float
    points: np.ndarray
    knobs: np.ndarray = field(default=None)
    label: str = ""

    def __post_init__(self):
        self.points = np.array(self.points, dtype=float).reshape(-1, 2)
        if self.knobs is None:
            self.knobs = np.full((len(self.points), len(KNOB_COLUMNS)), np.nan)
        self.knobs = np.array(self.knobs, dtype=float).reshape(-1, len(KNOB_COLUMNS))
        self.points.setflags(write=False)
        self.knobs.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def r1(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def r2(self) -> np.ndarray:
        return self.points[:, 1]

    def frontier(self, r1) -> np.ndarray:
        """Largest r2 on the piecewise-linear frontier at ``r1``; 0 past the last point."""
        if not len(self):
            return np.zeros_like(np.asarray(r1, dtype=float))
        return np.interp(r1, self.r1, self.r2, left=self.r2[0], right=0.0)

    def to_records(self) -> List[Dict]:
        records = []
        for (r1, r2), knobs in zip(self.points, self.knobs):
            record = {"model": self.model}
            record.update({name: (None if np.isnan(v) else float(v)) for name, v in zip(KNOB_COLUMNS, knobs)})
            record.update({"r0": float(self.r0), "r1": float(r1), "r2": float(r2)})
            records.append(record)
        return records


def pareto_order(points: np.ndarray) -> np.ndarray:
    if not len(points):
        return np.zeros(0, dtype=int)
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    r2 = points[order, 1]
    best_before = np.concatenate(([-np.inf], np.maximum.accumulate(r2)[:-1]))
    return order[r2 > best_before][::-1]


def pareto_filter(points) -> np.ndarray:
    """Non-dominated points sorted by increasing r1 (r2 then strictly decreases)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    return points[pareto_order(points)]


def _upper_hull_indices(points: np.ndarray) -> List[int]:
    hull: List[int] = []
    for i, (x, y) in enumerate(points):
        while len(hull) >= 2:
            ox, oy = points[hull[-2]]
            ax, ay = points[hull[-1]]
            if (ax - ox) * (y - oy) - (ay - oy) * (x - ox) >= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def concave_hull(pareto_slice: ParetoSlice) -> ParetoSlice:
    """Upper concave envelope of a slice: closure under time sharing."""
    order = pareto_order(pareto_slice.points)
    points, knobs = pareto_slice.points[order], pareto_slice.knobs[order]
    keep = _upper_hull_indices(points)
    return ParetoSlice(pareto_slice.model, pareto_slice.params, pareto_slice.r0,
                       points[keep], knobs[keep], pareto_slice.label)


def _knob_matrix(used: Knobs, size: int) -> np.ndarray:
    columns = []
    for name in KNOB_COLUMNS:
        if name in used:
            columns.append(np.broadcast_to(np.asarray(used[name], dtype=float), (size,)))
        else:
            columns.append(np.full(size, np.nan))
    return np.column_stack(columns)


def _mesh(grids: Sequence[np.ndarray], names: Sequence[str]) -> Knobs:
    mesh = np.meshgrid(*grids, indexing="ij")
    return {name: m.ravel() for name, m in zip(names, mesh)}


GOLDEN_RATIO_INV = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_section_max(objective: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray,
                        iterations: int = config.GOLDEN_SECTION_ITERS) -> np.ndarray:
    """Row-wise golden-section search for the maximiser of ``objective`` on [lo, hi]."""
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    for _ in range(iterations):
        width = GOLDEN_RATIO_INV * (hi - lo)
        left, right = hi - width, lo + width
        keep_left = objective(left) >= objective(right)
        hi = np.where(keep_left, right, hi)
        lo = np.where(keep_left, lo, left)
    return 0.5 * (lo + hi)


def _corners(handle: RegionHandle, knobs: Knobs, r0: float, size: int) -> Tuple[np.ndarray, Knobs]:
    cs, used = handle.evaluate(knobs)
    return np.column_stack([np.broadcast_to(v, (size,)) for v in cs.slice_corner(r0)]), used


def _refine_corners(handle: RegionHandle, knobs: Knobs, corners: np.ndarray, r0: float,
                    n_alpha: int) -> Tuple[np.ndarray, np.ndarray]:
    """Refine the free knobs of each alpha row around its best grid cell.

    Two passes per row: one pushes r2 as high as it goes, the other r1. Each
    free knob is searched in turn within one grid step of the best cell.
    """
    free = handle.spec.knobs[1:]
    alpha = knobs["alpha"].reshape(n_alpha, -1)[:, 0]
    rows = np.arange(n_alpha)
    points, matrices = [], []
    for axis in (1, 0):
        score = np.where(corners[:, 1 - axis] >= 0.0, corners[:, axis], -np.inf).reshape(n_alpha, -1)
        best = np.argmax(score, axis=1)
        current = {name: knobs[name].reshape(n_alpha, -1)[rows, best] for name in free}
        for name in free:
            step = 1.0 / (handle.resolution(name) - 1)

            def objective(x: np.ndarray, name: str = name, axis: int = axis) -> np.ndarray:
                trial, _ = _corners(handle, {"alpha": alpha, **current, name: x}, r0, n_alpha)
                return np.where(trial[:, 1 - axis] >= 0.0, trial[:, axis], -np.inf)

            current[name] = _golden_section_max(
                objective, np.clip(current[name] - step, 0.0, 1.0), np.clip(current[name] + step, 0.0, 1.0)
            )
        refined, used = _corners(handle, {"alpha": alpha, **current}, r0, n_alpha)
        points.append(refined)
        matrices.append(_knob_matrix(used, n_alpha))
    return np.vstack(points), np.vstack(matrices)


@cached
def boundary_slice(handle: RegionHandle, r0: float = 0.0, n_alpha: int = config.DEFAULT_ALPHA_GRID) -> ParetoSlice:
    """Pareto boundary of the region at common rate ``r0``.

    Every auxiliary setting on the grid contributes the corner of the rectangle
    its constraints leave once r0 is subtracted from the sum bounds. Free knobs
    besides alpha are then refined per alpha row by golden-section search, and
    the non-dominated corners of grid and refined settings form the slice.
    """
    require_nonnegative(r0, "r0")
    if n_alpha < 2:
        raise DomainError(f"n_alpha must be >= 2, got {n_alpha}")
    spec = handle.spec
    grids = [
        np.linspace(0.0, 1.0, n_alpha if knob == "alpha" else handle.resolution(knob))
        for knob in spec.knobs
    ]
    knobs = _mesh(grids, spec.knobs)
    size = knobs["alpha"].size
    corners, used = _corners(handle, knobs, r0, size)
    knob_matrix = _knob_matrix(used, size)
    if len(spec.knobs) > 1:
        refined, refined_knobs = _refine_corners(handle, knobs, corners, r0, n_alpha)
        corners = np.vstack([corners, refined])
        knob_matrix = np.vstack([knob_matrix, refined_knobs])
    feasible = np.all(corners >= 0.0, axis=1)
    if not np.any(feasible):
        logger.warning(f"{handle.model}: r0={r0} exceeds every common-rate bound, empty slice")
        return ParetoSlice(handle.model, handle.params, r0, np.zeros((0, 2)))

    points, knob_matrix = corners[feasible], knob_matrix[feasible]
    order = pareto_order(points)
    result = ParetoSlice(handle.model, handle.params, r0, points[order], knob_matrix[order])
    if spec.hull:
        result = concave_hull(result)
    logger.debug(f"{handle.model}: {size} auxiliary settings -> {len(result)} boundary points at r0={r0}")
    return result


def _membership_grid(handle: RegionHandle) -> Knobs:
    knobs = handle.spec.knobs
    per_knob = max(2, int(config.MEMBERSHIP_GRID_BUDGET ** (1.0 / len(knobs))))
    grids = [np.linspace(0.0, 1.0, min(handle.resolution(k), per_knob)) for k in knobs]
    return _mesh(grids, knobs)


def _best_margin(handle: RegionHandle, point: RateTriple, eps: float) -> float:
    """Largest constraint margin over the auxiliary knobs (grid, then local refinement)."""
    names = handle.spec.knobs
    grid = _membership_grid(handle)
    margins, _ = handle.evaluate(grid)
    margins = np.broadcast_to(margins.margin(point), grid["alpha"].shape)
    best = int(np.argmax(margins))
    best_margin = float(margins[best])
    if best_margin >= -eps:
        return best_margin

    def negative_margin(x) -> float:
        x = np.clip(np.atleast_1d(x), 0.0, 1.0)
        cs, _ = handle.evaluate({name: float(v) for name, v in zip(names, x)})
        return -float(cs.margin(point))

    start = np.array([grid[name][best] for name in names])
    if len(names) == 1:
        step = 1.0 / (min(handle.resolution(names[0]), len(grid[names[0]])) - 1)
        lo, hi = max(0.0, start[0] - step), min(1.0, start[0] + step)
        refined = optimize.minimize_scalar(
            negative_margin, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
        )
        refined_margin = -float(refined.fun)
    else:
        refined = optimize.minimize(
            negative_margin, start, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(names),
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400 * len(names)},
        )
        refined_margin = -float(refined.fun)
    return max(best_margin, refined_margin)


def _slice_shortfall(handle: RegionHandle, point: RateTriple) -> float:
    """Distance from ``point`` to the region under the sampled boundary slice at its r0.

    Corners are achievable, so this never undercuts the true violation. Hulled
    models use the piecewise-linear frontier, the rest the staircase of corners.
    """
    sampled = boundary_slice(handle, point.r0, handle.resolution("alpha"))
    if not len(sampled):
        return np.inf
    if handle.spec.hull:
        beyond_r1 = max(0.0, point.r1 - float(sampled.r1[-1]))
        if beyond_r1 > 0.0:
            return beyond_r1
        return max(0.0, point.r2 - float(sampled.frontier(point.r1)))
    gaps = np.maximum(point.r1 - sampled.r1, point.r2 - sampled.r2)
    return max(0.0, float(np.min(gaps)))


def violation(handle: RegionHandle, point: RateTriple, eps: float = config.CONTAINMENT_EPS) -> float:
    """How far (bits) the best auxiliary setting falls short of admitting ``point``; 0 for members."""
    shortfall = _slice_shortfall(handle, point)
    if shortfall <= eps:
        return shortfall
    return min(shortfall, max(0.0, -_best_margin(handle, point, eps)))


def membership(handle: RegionHandle, point: RateTriple, eps: float = config.CONTAINMENT_EPS) -> bool:
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    return violation(handle, point, eps) <= eps


class Containment(NamedTuple):
    contained: bool
    max_violation: float


@log_execution_time(time_logger)
def contains(outer: RegionHandle, inner_slice: ParetoSlice, eps: float = config.CONTAINMENT_EPS) -> Containment:
    if eps <= 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    worst = 0.0
    for r1, r2 in inner_slice.points:
        point = RateTriple(inner_slice.r0, max(r1, 0.0), max(r2, 0.0))
        worst = max(worst, violation(outer, point, eps))
    contained = worst <= eps
    logger.info(
        f"{inner_slice.model} within {outer.model}: {contained} (max violation {worst:.3e} bits)"
    )
    return Containment(contained, worst)


def slice_distance(a: ParetoSlice, b: ParetoSlice) -> float:
    """Sup-norm distance between two frontiers, r2 interpolated along r1."""
    if not len(a) or not len(b):
        return 0.0 if len(a) == len(b) else np.inf
    grid = np.union1d(a.r1, b.r1)
    gap = np.max(np.abs(a.frontier(grid) - b.frontier(grid)))
    return float(max(gap, abs(a.r1[-1] - b.r1[-1])))


async def _slice_task(semaphore: asyncio.Semaphore, handle: RegionHandle, r0: float, n_alpha: int) -> ParetoSlice:
    async with semaphore:
        return await asyncio.to_thread(boundary_slice, handle, r0, n_alpha)


async def sweep_slices_async(handles: Sequence[RegionHandle], r0: float = 0.0,
                             n_alpha: int = config.DEFAULT_ALPHA_GRID) -> List[ParetoSlice]:
    semaphore = asyncio.Semaphore(config.MAX_CONCURRENT_TASKS)
    tasks = [_slice_task(semaphore, handle, r0, n_alpha) for handle in handles]
    return list(await asyncio.gather(*tasks))


def sweep_slices(handles: Sequence[RegionHandle], r0: float = 0.0,
                 n_alpha: int = config.DEFAULT_ALPHA_GRID) -> List[ParetoSlice]:
    """Boundary slices of many regions, computed concurrently, returned in input order."""
    return asyncio.run(sweep_slices_async(handles, r0, n_alpha))


def _split_handles(model: str, Ptot: float, noise: Tuple[float, float], split_grid: int,
                   resolutions: Dict[str, int]) -> List[RegionHandle]:
    N1, N2 = noise
    splits = np.linspace(0.0, 1.0, split_grid)
    handles = []
    for lam in splits:
        source, relay = lam * Ptot, (1.0 - lam) * Ptot
        if model == "gaussian-bc":
            powers = [(Ptot, 0.0, 0.0)]
        elif model in FULL_MODELS:
            powers = [(source, mu * relay, (1.0 - mu) * relay) for mu in splits]
        else:
            powers = [(source, relay, 0.0)]
        for P, P1, P2 in powers:
            params = ChannelParams(P=P, P1=P1, P2=P2, N1=N1, N2=N2)
            handles.append(RegionHandle.create(model, params, **resolutions))
        if model == "gaussian-bc":
            break
    return handles


@log_execution_time(time_logger)
def sum_power_slice(model: str, Ptot: float, noise: Tuple[float, float],
                    split_grid: int = config.DEFAULT_SPLIT_GRID, r0: float = 0.0,
                    n_alpha: int = config.DEFAULT_ALPHA_GRID, **resolutions: int) -> ParetoSlice:
    """Frontier when source and relays share a total power budget ``Ptot``."""
    require_nonnegative(Ptot, "Ptot")
    if split_grid < 2:
        raise DomainError(f"split_grid must be >= 2, got {split_grid}")
    if Ptot == 0.0:
        logger.warning(f"{model}: zero total power, slice collapses to the origin")
    handles = _split_handles(model, Ptot, noise, split_grid, resolutions)
    slices = sweep_slices(handles, r0, n_alpha)
    points = np.vstack([s.points for s in slices] or [np.zeros((0, 2))])
    knobs = np.vstack([s.knobs for s in slices] or [np.zeros((0, len(KNOB_COLUMNS)))])
    order = pareto_order(points)
    provenance = ChannelParams(P=Ptot, N1=noise[0], N2=noise[1])
    result = ParetoSlice(model, provenance, r0, points[order], knobs[order], label="sum-power")
    if MODELS[model].hull:
        result = concave_hull(result)
    logger.info(f"{model}: sum-power slice at Ptot={Ptot} from {len(handles)} power splits, {len(result)} points")
    return result
