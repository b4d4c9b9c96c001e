"""
Finite-alphabet bounds for discrete memoryless relay broadcast channels.

Channel tensors are indexed p[x, x1, x2, y1, y2]; partially cooperative
channels carry a singleton x2 axis. Distributions are labeled pmfs over a
subset of ("u", "v", "x1", "x2", "x"), where "v" is the second auxiliary
(U') of the two-auxiliary outer bound.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special

import config
from error_handling import DomainError, PreconditionError
from gaussian_rates import ConstraintSet
from gaussian_scheme import stream_rng
from logging_config import log_execution_time
from region_geometry import ParetoSlice, pareto_order

logger = logging.getLogger("dm_bounds")
time_logger = logging.getLogger("time_analysis")

LN2 = math.log(2.0)
DIST_ORDER = ("u", "v", "x1", "x2", "x")
OUTPUTS = ("y1", "y2")
_EINSUM = {"u": "u", "v": "v", "x1": "a", "x2": "b", "x": "x", "y1": "c", "y2": "d"}

Labels = Union[str, Sequence[str]]


def _labels(labels: Labels) -> Tuple[str, ...]:
    return (labels,) if isinstance(labels, str) else tuple(labels)


@dataclass(eq=False)
class DMChannel:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim == 4:
            p = p[:, :, None, :, :]
        if p.ndim != 5:
            raise DomainError(f"Channel tensor must be indexed [x][x1]([x2])[y1][y2], got {p.ndim} axes")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise DomainError("Channel transition probabilities must lie in [0, 1]")
        sums = p.sum(axis=(3, 4))
        worst = np.unravel_index(np.argmax(np.abs(sums - 1.0)), sums.shape)
        if abs(sums[worst] - 1.0) > config.NORMALIZATION_TOL:
            raise DomainError(f"Channel slice p[{']['.join(map(str, worst))}] sums to {sums[worst]!r}, not 1")
        p.setflags(write=False)
        self.p = p

    @property
    def sizes(self) -> Dict[str, int]:
        return dict(zip(("x", "x1", "x2", "y1", "y2"), self.p.shape))

    @property
    def is_full(self) -> bool:
        return self.p.shape[2] > 1

    @property
    def aux_cardinality(self) -> int:
        s = self.sizes
        return s["x"] * s["x1"] * s["x2"] + 2


@dataclass(eq=False)
class JointDist:
    labels: Tuple[str, ...]
    pmf: np.ndarray

    def __post_init__(self):
        self.labels = tuple(self.labels)
        pmf = np.array(self.pmf, dtype=float)
        if len(set(self.labels)) != len(self.labels):
            raise DomainError(f"Duplicate labels {self.labels}")
        if pmf.ndim != len(self.labels):
            raise DomainError(f"pmf has {pmf.ndim} axes but {len(self.labels)} labels {self.labels}")
        if np.any(pmf < 0.0):
            raise DomainError("pmf entries must be nonnegative")
        total = pmf.sum()
        if abs(total - 1.0) > config.NORMALIZATION_TOL:
            raise DomainError(f"pmf sums to {total!r}, not 1")
        pmf.setflags(write=False)
        self.pmf = pmf

    def size(self, label: str) -> int:
        return self.pmf.shape[self.labels.index(label)]

    def marginal(self, keep: Labels) -> np.ndarray:
        keep = _labels(keep)
        missing = [label for label in keep if label not in self.labels]
        if missing:
            raise DomainError(f"Unknown variables {missing}; pmf has {self.labels}")
        axes = tuple(i for i, label in enumerate(self.labels) if label not in keep)
        return self.pmf.sum(axis=axes)


def entropy_bits(pmf: np.ndarray) -> float:
    return float(np.sum(special.entr(pmf)) / LN2)


def cond_mi(joint: JointDist, A: Labels, B: Labels, C: Labels = ()) -> float:
    """I(A; B | C) in bits from a labeled pmf."""
    a, b, c = _labels(A), _labels(B), _labels(C)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise DomainError(f"Label sets must be disjoint, got A={a}, B={b}, C={c}")
    value = (
        entropy_bits(joint.marginal(a + c))
        + entropy_bits(joint.marginal(b + c))
        - entropy_bits(joint.marginal(a + b + c))
        - (entropy_bits(joint.marginal(c)) if c else 0.0)
    )
    return max(value, 0.0)


def induced_joint(channel: DMChannel, dist: JointDist) -> JointDist:
    """Joint pmf of the distribution's variables and the channel outputs."""
    unknown = [label for label in dist.labels if label not in DIST_ORDER]
    if unknown:
        raise DomainError(f"Distribution variables {unknown} are not among {DIST_ORDER}")
    if "x" not in dist.labels or "x1" not in dist.labels:
        raise DomainError(f"Distribution must include x and x1, got {dist.labels}")
    sizes = channel.sizes
    pmf, labels = dist.pmf, list(dist.labels)
    if "x2" not in labels:
        if channel.is_full:
            raise DomainError("Fully cooperative channel needs x2 in the distribution")
        pmf = pmf[..., None]
        labels.append("x2")
    for label in ("x", "x1", "x2"):
        if pmf.shape[labels.index(label)] != sizes[label]:
            raise DomainError(
                f"Alphabet mismatch on {label}: distribution has {pmf.shape[labels.index(label)]}, "
                f"channel has {sizes[label]}"
            )
    for aux in ("u", "v"):
        if aux in labels and pmf.shape[labels.index(aux)] > channel.aux_cardinality:
            raise DomainError(f"|{aux}| exceeds the cardinality bound {channel.aux_cardinality}")

    ordered = [label for label in DIST_ORDER if label in labels]
    pmf = np.transpose(pmf, [labels.index(label) for label in ordered])
    subscript = "".join(_EINSUM[label] for label in ordered)
    joint = np.einsum(f"{subscript},xabcd->{subscript}cd", pmf, channel.p)
    return JointDist(tuple(ordered) + OUTPUTS, joint)


def degradedness_residual(channel: DMChannel) -> float:
    """Max deviation of p from p(y1|x,x1,x2) q(y2|y1,x1,x2), q averaged over x."""
    p = channel.p
    p_y1 = p.sum(axis=4)
    weight = p_y1.sum(axis=0)
    numerator = p.sum(axis=0)
    q = np.divide(numerator, weight[..., None], out=np.zeros_like(numerator), where=weight[..., None] > 0)
    rebuilt = p_y1[..., None] * q[None]
    return float(np.max(np.abs(p - rebuilt)))


def check_degraded(channel: DMChannel, tol: float = config.DEGRADED_TOL) -> bool:
    residual = degradedness_residual(channel)
    logger.debug(f"Degradedness residual {residual:.3e} (tol {tol:.1e})")
    return residual <= tol


def _markov_violation(joint: JointDist, given: Tuple[str, ...]) -> float:
    relay = tuple(label for label in ("x1", "x2") if label in joint.labels)
    return cond_mi(joint, ("x",), relay, given)


def _require_markov(joint: JointDist, given: Tuple[str, ...], name: str) -> None:
    violation = _markov_violation(joint, given)
    if violation > config.MARKOV_TOL:
        raise DomainError(
            f"{name} needs X independent of the relay inputs given {','.join(given)}; "
            f"violation {violation:.3e} bits"
        )


# label -> (A, B, C) of the mutual information bounding it
Bounds = Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...], Tuple[str, ...]]]

_PARTIAL_INNER: Bounds = {
    "r0+r2:multiple-access": (("u", "x1"), ("y2",), ()),
    "r0+r2:relay-decode": (("u",), ("y1",), ("x1",)),
    "r1": (("x",), ("y1",), ("u", "x1")),
}
_PARTIAL_FEEDBACK: Bounds = {
    "r0+r2:multiple-access": (("u", "x1"), ("y2",), ()),
    "r0+r2:relay-decode": (("u",), ("y1", "y2"), ("x1",)),
    "r1": (("x",), ("y1", "y2"), ("u", "x1")),
}
_FULL_INNER: Bounds = {
    "r0+r2:multiple-access": (("u", "x1"), ("y2",), ("x2",)),
    "r0+r2:relay-decode": (("u",), ("y1",), ("x1", "x2")),
    "r1": (("x",), ("y1",), ("u", "x1", "x2")),
}
_FULL_SWAPPED: Bounds = {
    "r0+r1:multiple-access": (("u", "x2"), ("y1",), ("x1",)),
    "r0+r1:relay-decode": (("u",), ("y2",), ("x1", "x2")),
    "r2": (("x",), ("y2",), ("u", "x1", "x2")),
}
_FULL_FEEDBACK: Bounds = {
    "r0+r2:multiple-access": (("u", "x1"), ("y2",), ("x2",)),
    "r0+r2:relay-decode": (("u",), ("y1", "y2"), ("x1", "x2")),
    "r1": (("x",), ("y1", "y2"), ("u", "x1", "x2")),
}
_TWO_AUX_OUTER: Bounds = {
    **_PARTIAL_FEEDBACK,
    "r0+r1": (("v",), ("y1",), ("x1",)),
    "r2": (("x",), ("y1", "y2"), ("v", "x1")),
}
_CUTSET: Bounds = {
    "r0+r1": (("x",), ("y1",), ("x1",)),
    "r0+r2": (("x", "x1"), ("y2",), ()),
    "r0+r1+r2": (("x",), ("y1", "y2"), ("x1",)),
}


@dataclass(frozen=True)
class Variant:
    bounds: Bounds
    full: bool  # needs the relay-2 input in the distribution
    markov: bool  # requires p(x | u) to ignore the relay inputs


# In the swapped fully cooperative region the "u" label plays the role of U'
VARIANTS: Dict[str, Variant] = {
    "thm1": Variant(_PARTIAL_INNER, full=False, markov=False),
    "thm3": Variant(_PARTIAL_INNER, full=False, markov=True),
    "thm6": Variant(_PARTIAL_FEEDBACK, full=False, markov=False),
    "thm9-R1": Variant(_FULL_INNER, full=True, markov=False),
    "thm9-R2": Variant(_FULL_SWAPPED, full=True, markov=False),
    "thm12": Variant(_FULL_INNER, full=True, markov=True),
    "thm16": Variant(_FULL_FEEDBACK, full=True, markov=True),
}


def _evaluate(joint: JointDist, bounds: Bounds) -> ConstraintSet:
    return ConstraintSet({label: cond_mi(joint, *terms) for label, terms in bounds.items()})


def variant_rates(channel: DMChannel, dist: JointDist, variant: str) -> ConstraintSet:
    if variant not in VARIANTS:
        raise DomainError(f"Unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
    spec = VARIANTS[variant]
    required = {"u", "x1", "x"} | ({"x2"} if spec.full and channel.is_full else set())
    if set(dist.labels) != required:
        raise DomainError(f"{variant} needs a distribution over {sorted(required)}, got {dist.labels}")
    if not spec.full and channel.is_full:
        raise DomainError(f"{variant} applies to partially cooperative channels (|X2| = 1)")
    joint = induced_joint(channel, dist)
    if spec.markov:
        _require_markov(joint, ("u",), variant)
    return _evaluate(joint, spec.bounds)


def inner_rates_thm1(channel: DMChannel, dist: JointDist) -> ConstraintSet:
    return variant_rates(channel, dist, "thm1")


def outer_rates_thm2(channel: DMChannel, dist: JointDist) -> ConstraintSet:
    if set(dist.labels) != {"u", "v", "x1", "x"}:
        raise DomainError(f"Two-auxiliary bound needs a distribution over u, v, x1, x; got {dist.labels}")
    if channel.is_full:
        raise DomainError("Two-auxiliary bound applies to partially cooperative channels (|X2| = 1)")
    joint = induced_joint(channel, dist)
    _require_markov(joint, ("u",), "outer bound (U)")
    _require_markov(joint, ("v",), "outer bound (U')")
    return _evaluate(joint, _TWO_AUX_OUTER)


def cutset_rates(channel: DMChannel, input_dist: JointDist) -> ConstraintSet:
    if set(input_dist.labels) != {"x1", "x"}:
        raise DomainError(f"Cut-set bound needs an input distribution over x, x1; got {input_dist.labels}")
    if channel.is_full:
        raise DomainError("Cut-set bound applies to partially cooperative channels (|X2| = 1)")
    return _evaluate(induced_joint(channel, input_dist), _CUTSET)


def _dirichlet(rng: np.random.Generator, size: int, batch: Tuple[int, ...] = ()) -> np.ndarray:
    return rng.dirichlet(np.ones(size), size=batch or None)


def random_dm_channel(sizes: Sequence[int] = (2, 2, 1, 2, 2), seed: int = config.DEFAULT_SEED,
                      stream: int = 0) -> DMChannel:
    nx, nx1, nx2, ny1, ny2 = sizes
    rng = stream_rng(seed, stream)
    p = _dirichlet(rng, ny1 * ny2, (nx, nx1, nx2)).reshape(nx, nx1, nx2, ny1, ny2)
    return DMChannel(p)


def product_degraded_channel(sizes: Sequence[int] = (2, 2, 1, 2, 2), seed: int = config.DEFAULT_SEED,
                             stream: int = 0) -> DMChannel:
    """p(y1 | x, x1, x2) q(y2 | y1, x1, x2) with random factors."""
    nx, nx1, nx2, ny1, ny2 = sizes
    rng = stream_rng(seed, stream)
    first = _dirichlet(rng, ny1, (nx, nx1, nx2))
    second = _dirichlet(rng, ny2, (nx1, nx2, ny1))
    return DMChannel(np.einsum("xabc,abcd->xabcd", first, second))


def random_joint_dist(channel: DMChannel, seed: int = config.DEFAULT_SEED, stream: int = 0,
                      u_size: Optional[int] = None) -> JointDist:
    """Unrestricted p(u, x1[, x2], x)."""
    s = channel.sizes
    labels = ("u", "x1", "x2", "x") if channel.is_full else ("u", "x1", "x")
    shape = [u_size or channel.aux_cardinality, s["x1"]] + ([s["x2"]] if channel.is_full else []) + [s["x"]]
    rng = stream_rng(seed, stream)
    return JointDist(labels, _dirichlet(rng, int(np.prod(shape))).reshape(shape))


def random_factorized_dist(channel: DMChannel, seed: int = config.DEFAULT_SEED, stream: int = 0,
                           u_size: Optional[int] = None) -> JointDist:
    """p(x1, x2, u) p(x | u)."""
    s = channel.sizes
    nu = u_size or channel.aux_cardinality
    rng = stream_rng(seed, stream)
    relay = _dirichlet(rng, nu * s["x1"] * s["x2"]).reshape(nu, s["x1"], s["x2"])
    source = _dirichlet(rng, s["x"], (nu,))
    pmf = np.einsum("uab,ux->uabx", relay, source)
    if channel.is_full:
        return JointDist(("u", "x1", "x2", "x"), pmf)
    return JointDist(("u", "x1", "x"), pmf[:, :, 0, :])


def random_input_dist(channel: DMChannel, seed: int = config.DEFAULT_SEED, stream: int = 0) -> JointDist:
    s = channel.sizes
    rng = stream_rng(seed, stream)
    return JointDist(("x1", "x"), _dirichlet(rng, s["x1"] * s["x"]).reshape(s["x1"], s["x"]))


def random_two_aux_dist(channel: DMChannel, seed: int = config.DEFAULT_SEED, stream: int = 0) -> JointDist:
    """p(x1) p(u|x1) p(x|u) p(v|u, x, x1) satisfying X1 - U - X and X1 - V - X.

    V reveals one of U, X or X1, chosen by an independent switch; each branch
    keeps X and X1 independent given V.
    """
    if channel.is_full:
        raise DomainError("Two-auxiliary distributions are defined for partially cooperative channels")
    s = channel.sizes
    nx, nx1 = s["x"], s["x1"]
    nu = max(1, channel.aux_cardinality - nx - nx1)
    nv = nu + nx + nx1
    rng = stream_rng(seed, stream)
    p_x1 = _dirichlet(rng, nx1)
    p_u = _dirichlet(rng, nu, (nx1,))
    p_x = _dirichlet(rng, nx, (nu,))
    switch = _dirichlet(rng, 3)

    base = np.einsum("a,au,ux->uax", p_x1, p_u, p_x)
    pmf = np.zeros((nu, nv, nx1, nx))
    for u in range(nu):
        pmf[u, u] += switch[0] * base[u]
    for x in range(nx):
        pmf[:, nu + x, :, x] += switch[1] * base[:, :, x]
    for a in range(nx1):
        pmf[:, nu + nx + a, a, :] += switch[2] * base[:, a, :]
    return JointDist(("u", "v", "x1", "x"), pmf)


@log_execution_time(time_logger)
def cutset_suite(channel: DMChannel, n_dists: int = config.DM_SUITE_DISTRIBUTIONS,
                  seed: int = config.DEFAULT_SEED) -> Dict[str, float]:
    """Worst residuals of the cut-set dominance relations over random distributions.

    ``*-identity`` and ``chain-rule`` entries are absolute residuals of equalities;
    ``*-dominance`` entries are the largest amount by which the smaller side exceeded
    the larger one (<= 0 when the relation holds).
    """
    worst = {"cutset-identity": 0.0, "v-dominance": -np.inf, "ma-dominance": -np.inf, "chain-rule": 0.0}
    for i in range(n_dists):
        joint = induced_joint(channel, random_two_aux_dist(channel, seed, i))
        both = ("y1", "y2")
        split = cond_mi(joint, "u", both, "x1") + cond_mi(joint, "x", both, ("u", "x1"))
        whole = cond_mi(joint, "x", both, "x1")
        worst["cutset-identity"] = max(worst["cutset-identity"], abs(split - whole))
        worst["v-dominance"] = max(
            worst["v-dominance"], cond_mi(joint, "v", "y1", "x1") - cond_mi(joint, "x", "y1", "x1")
        )
        worst["ma-dominance"] = max(
            worst["ma-dominance"], cond_mi(joint, ("u", "x1"), "y2") - cond_mi(joint, ("x", "x1"), "y2")
        )
        chained = cond_mi(joint, "x", "y1", "x1") + cond_mi(joint, "x", "y2", ("y1", "x1"))
        worst["chain-rule"] = max(worst["chain-rule"], abs(whole - chained))
    logger.info(f"Cut-set suite over {n_dists} distributions: {worst}")
    return worst


@log_execution_time(time_logger)
def degraded_suite(channel: DMChannel, n_dists: int = config.DM_SUITE_DISTRIBUTIONS,
                   seed: int = config.DEFAULT_SEED) -> Dict[str, float]:
    """Worst residuals of the identities a degraded channel must satisfy."""
    if not check_degraded(channel):
        raise PreconditionError("degraded_suite needs a degraded channel")
    worst = {"cloud-collapse": 0.0, "private-collapse": 0.0, "feedback-equality": 0.0}
    relay = ("x1", "x2")
    feedback, plain = ("thm16", "thm12") if channel.is_full else ("thm6", "thm3")
    for i in range(n_dists):
        dist = random_factorized_dist(channel, seed, i)
        joint = induced_joint(channel, dist)
        worst["cloud-collapse"] = max(
            worst["cloud-collapse"],
            abs(cond_mi(joint, "u", ("y1", "y2"), relay) - cond_mi(joint, "u", "y1", relay)),
        )
        worst["private-collapse"] = max(
            worst["private-collapse"],
            abs(cond_mi(joint, "x", ("y1", "y2"), ("u",) + relay) - cond_mi(joint, "x", "y1", ("u",) + relay)),
        )
        with_feedback = variant_rates(channel, dist, feedback)
        without = variant_rates(channel, dist, plain)
        for label in with_feedback:
            worst["feedback-equality"] = max(
                worst["feedback-equality"], abs(with_feedback[label] - without[label])
            )
    logger.info(f"Degraded suite over {n_dists} distributions: {worst}")
    return worst


class _FactorizedSearch:
    """Logit parametrisation of p(x1, x2, u) p(x | u) and its rate corner."""

    def __init__(self, channel: DMChannel, u_size: int):
        self.channel = channel
        s = channel.sizes
        self.relay_shape = (u_size, s["x1"], s["x2"])
        self.source_shape = (u_size, s["x"])
        self.n_relay = int(np.prod(self.relay_shape))
        self.corners: List[Tuple[float, float]] = []

    def dist(self, logits: np.ndarray) -> JointDist:
        relay = special.softmax(logits[: self.n_relay]).reshape(self.relay_shape)
        source = special.softmax(logits[self.n_relay:].reshape(self.source_shape), axis=1)
        pmf = np.einsum("uab,ux->uabx", relay, source)
        pmf = pmf / pmf.sum()
        return JointDist(("u", "x1", "x2", "x"), pmf)

    def corner(self, logits: np.ndarray) -> Tuple[float, float]:
        joint = induced_joint(self.channel, self.dist(logits))
        r1 = cond_mi(joint, "x", "y1", ("u", "x1", "x2"))
        r2 = min(
            cond_mi(joint, ("u", "x1"), "y2", "x2"),
            cond_mi(joint, "u", "y1", ("x1", "x2")),
        )
        self.corners.append((r1, r2))
        return r1, r2

    def initial_logits(self, rng: np.random.Generator) -> np.ndarray:
        relay = _dirichlet(rng, self.n_relay)
        source = _dirichlet(rng, self.source_shape[1], (self.source_shape[0],))
        return np.log(np.clip(np.concatenate([relay, source.ravel()]), 1e-12, None))

    def refine(self, logits: np.ndarray, weight: float) -> np.ndarray:
        logits = logits.copy()

        def objective(delta: float, i: int, base: float) -> float:
            logits[i] = base + delta
            r1, r2 = self.corner(logits)
            return -(weight * r1 + (1.0 - weight) * r2)

        for _ in range(config.DM_REFINE_PASSES):
            for i in range(logits.size):
                base = logits[i]
                current = objective(0.0, i, base)
                result = optimize.minimize_scalar(
                    objective, bounds=(-config.DM_LOGIT_RANGE, config.DM_LOGIT_RANGE), args=(i, base),
                    method="bounded", options={"maxiter": config.DM_COORD_ITERS, "xatol": 1e-3},
                )
                logits[i] = base + result.x if result.fun < current else base
        return logits


@log_execution_time(time_logger)
def degraded_capacity_slice(channel: DMChannel, budget: int = config.DM_RESTARTS,
                            seed: int = config.DEFAULT_SEED, weights: int = config.DM_WEIGHTS,
                            u_size: Optional[int] = None) -> ParetoSlice:
    """Inner approximation of the degraded-channel capacity region at r0 = 0.

    Each restart draws a random factorized distribution on its own stream and
    refines it by coordinate ascent on weighted sums of the two rates. Every
    distribution visited contributes its corner, so a larger budget never
    removes points.
    """
    if not check_degraded(channel):
        raise PreconditionError("degraded_capacity_slice needs a degraded channel")
    if budget < 1:
        raise DomainError(f"budget must be >= 1, got {budget}")
    search = _FactorizedSearch(channel, u_size or channel.aux_cardinality)
    directions = np.linspace(0.0, 1.0, weights) if weights > 1 else np.array([0.5])
    for restart in range(budget):
        start = search.initial_logits(stream_rng(seed, restart))
        search.corner(start)
        for weight in directions:
            search.refine(start, float(weight))
    points = np.array(search.corners)
    order = pareto_order(points)
    logger.info(f"Degraded capacity search: {len(points)} corners, {len(order)} on the frontier")
    return ParetoSlice("dm-degraded", None, 0.0, points[order], label="inner approximation")
