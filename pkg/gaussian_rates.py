"""
Closed-form rate constraints for Gaussian relay broadcast channels.

All rates are in bits per channel use. Auxiliary knobs (alpha, beta_fresh,
gamma, eta) may be passed as numpy arrays; every evaluator broadcasts them, so
a whole parameter grid is evaluated in one call.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, Tuple

import numpy as np
from scipy import optimize

import config
from error_handling import (
    DomainError,
    require_nonnegative,
    require_positive,
    require_unit_interval,
)

logger = logging.getLogger("gaussian_rates")

RATE_TERMS = ("r0", "r1", "r2")


@dataclass(frozen=True)
class ChannelParams:
    P: float
    P1: float = 0.0
    P2: float = 0.0
    N1: float = 1.0
    N2: float = 1.0

    def __post_init__(self):
        for name in ("P", "P1", "P2"):
            require_nonnegative(getattr(self, name), name)
        for name in ("N1", "N2"):
            require_positive(getattr(self, name), name)
        # Normalise to plain floats so instances hash and compare by value
        for name in ("P", "P1", "P2", "N1", "N2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def require_weak_user_two(self, model: str) -> None:
        if not self.N1 < self.N2:
            raise DomainError(f"{model} requires N1 < N2, got N1={self.N1}, N2={self.N2}")

    def require_weak_relay(self, model: str) -> None:
        if not self.N1 > self.N2:
            raise DomainError(f"{model} requires N1 > N2, got N1={self.N1}, N2={self.N2}")

    def with_powers(self, **powers: float) -> "ChannelParams":
        return replace(self, **powers)

    def as_dict(self) -> Dict[str, float]:
        return {"P": self.P, "P1": self.P1, "P2": self.P2, "N1": self.N1, "N2": self.N2}


@dataclass(frozen=True)
class AuxParams:
    alpha: float = 0.0
    beta_fresh: float = 1.0
    gamma: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta_fresh", "gamma", "eta"):
            require_unit_interval(getattr(self, name), name)
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def alpha_bar(self) -> float:
        return 1.0 - self.alpha

    @property
    def beta_bar(self) -> float:
        return 1.0 - self.beta_fresh

    @property
    def gamma_bar(self) -> float:
        return 1.0 - self.gamma


@dataclass(frozen=True)
class RateTriple:
    r0: float = 0.0
    r1: float = 0.0
    r2: float = 0.0

    def __post_init__(self):
        for name in RATE_TERMS:
            require_nonnegative(getattr(self, name), name)
            object.__setattr__(self, name, float(getattr(self, name)))

    def as_vector(self) -> np.ndarray:
        return np.array([self.r0, self.r1, self.r2])


def combination(label: str) -> Tuple[int, int, int]:
    """Coefficients (c0, c1, c2) of the rate combination a constraint label bounds.

    Labels look like ``"r0+r2:relay-decode"``; the part before the colon names
    the summed rates.
    """
    terms = label.split(":", 1)[0].split("+")
    if not terms or any(t not in RATE_TERMS for t in terms):
        raise DomainError(f"Unknown rate combination in constraint label {label!r}")
    return tuple(int(name in terms) for name in RATE_TERMS)


@dataclass
class ConstraintSet:
    bounds: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for label in self.bounds:
            combination(label)

    def __getitem__(self, label: str) -> Any:
        return self.bounds[label]

    def __contains__(self, label: str) -> bool:
        return label in self.bounds

    def __iter__(self) -> Iterator[str]:
        return iter(self.bounds)

    def __len__(self) -> int:
        return len(self.bounds)

    def labels(self) -> Tuple[str, ...]:
        return tuple(self.bounds)

    def bound(self, combo: str) -> Any:
        """Tightest bound over all labels sharing the rate combination ``combo``."""
        target = combination(combo)
        values = [v for k, v in self.bounds.items() if combination(k) == target]
        if not values:
            raise KeyError(combo)
        return values[0] if len(values) == 1 else np.minimum.reduce(np.broadcast_arrays(*values))

    def margin(self, point: RateTriple) -> Any:
        """min over labels of (bound - combination . point); >= 0 iff the point satisfies every bound."""
        rates = point.as_vector()
        slacks = [
            np.asarray(value, dtype=float) - float(np.dot(combination(label), rates))
            for label, value in self.bounds.items()
        ]
        return np.minimum.reduce(np.broadcast_arrays(*slacks))

    def is_satisfied(self, point: RateTriple, tol: float = config.IDENTITY_TOL) -> bool:
        return bool(np.all(self.margin(point) >= -tol))

    def slice_corner(self, r0: float) -> Tuple[np.ndarray, np.ndarray]:
        """Upper-right corner (R1, R2) of the rectangle this set leaves at common rate r0.

        Negative entries mean the set admits no point at this r0.
        """
        r1_caps, r2_caps = [], []
        for label, value in self.bounds.items():
            c0, c1, c2 = combination(label)
            if c1 and c2:
                raise DomainError(f"Constraint {label!r} couples r1 and r2; no rectangular slice")
            cap = np.asarray(value, dtype=float) - c0 * r0
            if c1:
                r1_caps.append(cap)
            elif c2:
                r2_caps.append(cap)
            elif c0:
                # r0-only bound: admits nothing when exceeded
                r1_caps.append(np.where(cap >= 0.0, np.inf, -1.0))
        if not r1_caps or not r2_caps:
            raise DomainError("Constraint set must bound both r1 and r2 to form a slice")
        r1 = np.minimum.reduce(np.broadcast_arrays(*r1_caps))
        r2 = np.minimum.reduce(np.broadcast_arrays(*r2_caps))
        return np.broadcast_arrays(r1, r2)


class BoundaryCase(Enum):
    SATURATED = "Saturated"
    MIXED = "Mixed"


def _as_output(arr: np.ndarray):
    return float(arr) if np.ndim(arr) == 0 else arr


def c_of(x) -> Any:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError(f"C(x) needs finite x >= 0, got {x!r}")
    return _as_output(0.5 * np.log2(1.0 + arr))


def harmonic_noise(n1, n2) -> Any:
    require_positive(n1, "n1")
    require_positive(n2, "n2")
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    return _as_output(n1 * n2 / (n1 + n2))


def bc_rates(params: ChannelParams, alpha) -> ConstraintSet:
    require_unit_interval(alpha, "alpha")
    alpha = np.asarray(alpha, dtype=float)
    P = params.P
    if params.N1 <= params.N2:
        r1 = c_of(alpha * P / params.N1)
        r2 = c_of((1.0 - alpha) * P / (alpha * P + params.N2))
    else:
        # User 2 is the stronger receiver: superposition order flips
        r1 = c_of((1.0 - alpha) * P / (alpha * P + params.N1))
        r2 = c_of(alpha * P / params.N2)
    return ConstraintSet({"r1": r1, "r2": r2})


def df_partial_rates(P, P1, Na, Nb, alpha, beta_fresh) -> ConstraintSet:
    require_nonnegative(P, "P")
    require_nonnegative(P1, "P1")
    require_positive(Na, "Na")
    require_positive(Nb, "Nb")
    require_unit_interval(alpha, "alpha")
    require_unit_interval(beta_fresh, "beta_fresh")
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta_fresh, dtype=float)
    cloud = (1.0 - alpha) * P
    # beta_fresh scales the fresh share the relay must decode; the complementary
    # share (1 - beta_fresh) is the part correlated with the relay signal
    coherent = 2.0 * np.sqrt((1.0 - beta) * cloud * P1)
    return ConstraintSet({
        "r0+r2:multiple-access": c_of((P1 + cloud + coherent) / (alpha * P + Nb)),
        "r0+r2:relay-decode": c_of(beta * cloud / (alpha * P + Na)),
        "r1": c_of(alpha * P / Na),
    })


def _beta_star_gap(beta: float, P: float, P1: float, Na: float, Nb: float, alpha: float) -> float:
    cloud = (1.0 - alpha) * P
    ma = (P1 + cloud + 2.0 * math.sqrt(max(1.0 - beta, 0.0) * cloud * P1)) / (alpha * P + Nb)
    dec = beta * cloud / (alpha * P + Na)
    return ma - dec


def beta_star_bisection(P: float, P1: float, Na: float, Nb: float, alpha: float) -> float:
    """Equalising beta by bisection on the difference of the two C(.) arguments."""
    require_unit_interval(alpha, "alpha")
    if (1.0 - alpha) * P == 0.0:
        return 1.0
    if _beta_star_gap(1.0, P, P1, Na, Nb, alpha) >= 0.0:
        return 1.0
    return float(optimize.bisect(
        _beta_star_gap, 0.0, 1.0, args=(P, P1, Na, Nb, alpha),
        xtol=config.BISECTION_XTOL, maxiter=config.BISECTION_MAXITER,
    ))


def beta_star(P, P1, Na, Nb, alpha) -> Any:
    """Fresh-information fraction maximising the smaller of the two r0+r2 bounds.

    Equating the C(.) arguments gives a quadratic in t = sqrt(1 - beta):
        cloud*Db*t^2 + 2*sqrt(cloud*P1)*Da*t + (P1 + cloud)*Da - cloud*Db = 0
    with Da = alpha*P + Na and Db = alpha*P + Nb. When the multiple-access bound
    still dominates at beta = 1 the answer is 1.
    """
    require_nonnegative(P, "P")
    require_nonnegative(P1, "P1")
    require_positive(Na, "Na")
    require_positive(Nb, "Nb")
    require_unit_interval(alpha, "alpha")
    alpha_arr, na, nb = np.broadcast_arrays(
        np.asarray(alpha, dtype=float), np.asarray(Na, dtype=float), np.asarray(Nb, dtype=float)
    )
    cloud = (1.0 - alpha_arr) * P
    da = alpha_arr * P + na
    db = alpha_arr * P + nb

    result = np.ones_like(cloud)
    solve = (cloud > 0.0) & ((P1 + cloud) / db < cloud / da)
    if np.any(solve):
        a = cloud * db
        b = 2.0 * np.sqrt(cloud * P1) * da
        c = (P1 + cloud) * da - cloud * db
        disc = b * b - 4.0 * a * c
        with np.errstate(divide="ignore", invalid="ignore"):
            # -2c / (b + sqrt(disc)) avoids cancellation for c < 0
            t = -2.0 * c / (b + np.sqrt(np.maximum(disc, 0.0)))
        beta = np.clip(1.0 - np.clip(t, 0.0, 1.0) ** 2, 0.0, 1.0)
        marginal = disc <= config.DISCRIMINANT_MARGIN * (b * b + np.abs(4.0 * a * c))
        result = np.where(solve, beta, result)

        fallback = np.atleast_1d(solve & (marginal | ~np.isfinite(beta))).reshape(-1)
        if np.any(fallback):
            logger.debug(f"beta_star: bisection fallback for {int(fallback.sum())} alpha values")
            flat = np.atleast_1d(result).reshape(-1).copy()
            flat_alpha, flat_na, flat_nb = (np.atleast_1d(v).reshape(-1) for v in (alpha_arr, na, nb))
            for idx in np.flatnonzero(fallback):
                flat[idx] = beta_star_bisection(
                    P, P1, float(flat_na[idx]), float(flat_nb[idx]), float(flat_alpha[idx])
                )
            result = flat.reshape(result.shape)
    return _as_output(result)


def optimal_sum_rate_bound(P, P1, Na, Nb, alpha) -> Tuple[Any, Any]:
    """(max over beta of the smaller r0+r2 bound, maximising beta)."""
    beta = beta_star(P, P1, Na, Nb, alpha)
    cs = df_partial_rates(P, P1, Na, Nb, alpha, beta)
    return _as_output(np.minimum(cs["r0+r2:multiple-access"], cs["r0+r2:relay-decode"])), beta


def alpha0_and_case(P, P1, N1, N2) -> Tuple[BoundaryCase, float]:
    if not N1 < N2:
        raise DomainError(f"alpha0 requires N1 < N2, got N1={N1}, N2={N2}")
    require_nonnegative(P, "P")
    require_nonnegative(P1, "P1")
    require_positive(N1, "N1")
    source_snr = P / N1
    relay_ratio = P1 / (N2 - N1)
    if relay_ratio >= source_snr:
        return BoundaryCase.SATURATED, 0.0
    alpha0 = (source_snr - relay_ratio) / (source_snr * relay_ratio + source_snr)
    return BoundaryCase.MIXED, float(min(max(alpha0, 0.0), 1.0))


def p1_saturation_threshold(P, N1, N2) -> float:
    if not N1 < N2:
        raise DomainError(f"Saturation threshold requires N1 < N2, got N1={N1}, N2={N2}")
    require_nonnegative(P, "P")
    require_positive(N1, "N1")
    return float(P * (N2 - N1) / N1)


def dawgn_partial_rates(params: ChannelParams, alpha, beta_fresh) -> ConstraintSet:
    params.require_weak_user_two("dawgn-partial")
    return df_partial_rates(params.P, params.P1, params.N1, params.N2, alpha, beta_fresh)


def feedback_rates(params: ChannelParams, alpha, beta_fresh) -> ConstraintSet:
    """Feedback capacity: decode-and-forward with user 1 seeing the harmonic noise level."""
    params.require_weak_user_two("feedback")
    harmonic = harmonic_noise(params.N1, params.N2)
    return df_partial_rates(params.P, params.P1, harmonic, params.N2, alpha, beta_fresh)


# The second relay link adds nothing once user 2's output is fed back
full_feedback_rates = feedback_rates


def partial_outer_rates(params: ChannelParams, alpha, beta_fresh) -> ConstraintSet:
    params.require_weak_user_two("awgn-partial-outer")
    if params.P2:
        logger.debug(f"partial_outer_rates ignores P2={params.P2}")
    alpha_arr = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta_fresh, dtype=float)
    cs = feedback_rates(params, alpha, beta_fresh)
    P = params.P
    cs.bounds["r0+r1"] = c_of((alpha_arr * P + beta * (1.0 - alpha_arr) * P) / params.N1)
    return cs


def ef_partial_rates(params: ChannelParams, alpha, eta) -> ConstraintSet:
    params.require_weak_relay("ef-partial")
    require_unit_interval(alpha, "alpha")
    require_unit_interval(eta, "eta")
    alpha = np.asarray(alpha, dtype=float)
    eta = np.asarray(eta, dtype=float)
    P, P1, N1, N2 = params.P, params.P1, params.N1, params.N2
    cloud = (1.0 - alpha) * P
    relay = eta * P1
    compressed = alpha * relay * P / (relay * N1 + alpha * P * (N1 + N2) + N1 * N2)
    # Both receivers decode the cloud; the relay's signal interferes at user 2
    cloud_rate = np.minimum(
        c_of(cloud / (alpha * P + N1)),
        c_of(cloud / (alpha * P + relay + N2)),
    )
    return ConstraintSet({
        "r0+r1": _as_output(cloud_rate),
        "r2": c_of(alpha * P / N2 + compressed),
    })


def nhat_min(P, P2, N1, N2, alpha, eta) -> Any:
    """Smallest compression-noise variance the relay link can carry.

    Returns ``inf`` where eta * P2 == 0: nothing is relayed and the compressed
    observation must be dropped.
    """
    require_nonnegative(P, "P")
    require_nonnegative(P2, "P2")
    require_positive(N1, "N1")
    require_positive(N2, "N2")
    require_unit_interval(alpha, "alpha")
    require_unit_interval(eta, "eta")
    alpha = np.asarray(alpha, dtype=float)
    relay = np.asarray(eta, dtype=float) * P2
    numerator = alpha * P * (N1 + N2) + N1 * N2
    with np.errstate(divide="ignore"):
        nhat = np.where(relay > 0.0, numerator / np.where(relay > 0.0, relay, 1.0), np.inf)
    if np.any(relay == 0.0):
        logger.debug("nhat_min: eta*P2 == 0, no compressed observation is forwarded")
    return _as_output(nhat)


def compression_terms(P, P2, N1, N2, alpha, eta, nhat=None) -> Dict[str, Any]:
    """The three mutual-information terms of the compression-rate constraint.

    ``relay-link`` = I(X2; Y1 | U, X1) must cover
    ``description`` - ``side-information`` = I(Y2hat; Y2 | U, X1, X2) - I(Y2hat; Y1 | U, X1, X2).
    """
    if nhat is None:
        nhat = nhat_min(P, P2, N1, N2, alpha, eta)
    alpha = np.asarray(alpha, dtype=float)
    nhat = np.asarray(nhat, dtype=float)
    private = alpha * P
    relay_link = c_of(np.asarray(eta, dtype=float) * P2 / (private + N1))
    with np.errstate(divide="ignore", invalid="ignore"):
        description = np.where(np.isfinite(nhat), 0.5 * np.log2(1.0 + (private + N2) / nhat), 0.0)
        total = private + N2 + nhat
        side = np.where(
            np.isfinite(nhat),
            0.5 * np.log2(total / (total - private ** 2 / (private + N1))),
            0.0,
        )
    return {
        "relay-link": relay_link,
        "description": _as_output(description),
        "side-information": _as_output(side),
    }


def full_inner_rates(params: ChannelParams, alpha, beta_fresh, eta) -> ConstraintSet:
    params.require_weak_user_two("awgn-full-inner")
    require_unit_interval(eta, "eta")
    alpha_arr = np.asarray(alpha, dtype=float)
    relay = np.asarray(eta, dtype=float) * params.P2
    P, N1, N2 = params.P, params.N1, params.N2
    # User 2's relay signal is interference while user 1 decodes the cloud
    cs = df_partial_rates(P, params.P1, N1 + relay, N2, alpha, beta_fresh)
    compressed = alpha_arr * relay * P / (relay * N2 + alpha_arr * P * (N1 + N2) + N1 * N2)
    cs.bounds["r1"] = c_of(alpha_arr * P / N1 + compressed)
    return cs


def full_outer_rates(params: ChannelParams, alpha, beta_fresh, gamma) -> ConstraintSet:
    params.require_weak_user_two("awgn-full-outer")
    require_unit_interval(gamma, "gamma")
    alpha_arr = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta_fresh, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    P, P2, N1 = params.P, params.P2, params.N1
    harmonic = harmonic_noise(params.N1, params.N2)
    cs = feedback_rates(params, alpha, beta_fresh)
    cloud = (1.0 - alpha_arr) * P
    decodable = alpha_arr * P + beta * cloud
    coherent = 2.0 * np.sqrt((1.0 - beta) * cloud * P2)
    cs.bounds["r0+r1:multiple-access"] = c_of((P + P2 + coherent) / N1)
    cs.bounds["r0+r1:split"] = c_of((1.0 - gamma) * decodable / (gamma * decodable + harmonic))
    cs.bounds["r2"] = c_of(gamma * decodable / harmonic)
    return cs
