"""
Jointly Gaussian random variables of the coding schemes.

Every variable is a fixed linear combination of independent zero-mean Gaussian
sources, so the covariance is exact and samples can be drawn from the sources.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from error_handling import DomainError, require_nonnegative
from gaussian_rates import AuxParams, ChannelParams, nhat_min

logger = logging.getLogger("gaussian_scheme")

Labels = Union[str, Sequence[str]]

# Model tag -> (noise family, relay family)
SCHEME_FAMILIES: Dict[str, Tuple[str, str]] = {
    "gaussian-bc": ("awgn", "partial"),
    "dawgn-partial": ("dawgn", "partial"),
    "awgn-partial-inner": ("awgn", "partial"),
    "awgn-partial-outer": ("awgn", "partial"),
    "awgn-partial-feedback": ("awgn", "partial"),
    "ef-partial": ("awgn", "estimate-forward"),
    "awgn-full-inner": ("awgn", "full"),
    "awgn-full-outer": ("awgn", "full"),
    "awgn-full-feedback": ("awgn", "full"),
    "dawgn-full": ("dawgn", "full"),
}


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator: (seed, stream) fixes the draws regardless of call order."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


def as_labels(labels: Labels) -> Tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True, eq=False)
class GaussianScheme:
    labels: Tuple[str, ...]
    mixing: np.ndarray
    source_variances: np.ndarray
    model: str = "custom"
    coefficients: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        mixing = np.array(self.mixing, dtype=float)
        variances = np.array(self.source_variances, dtype=float)
        if mixing.ndim != 2 or mixing.shape != (len(self.labels), variances.size):
            raise DomainError(
                f"Mixing matrix shape {mixing.shape} does not match "
                f"{len(self.labels)} labels and {variances.size} sources"
            )
        if len(set(self.labels)) != len(self.labels):
            raise DomainError(f"Duplicate labels in scheme: {self.labels}")
        require_nonnegative(variances, "source variances")
        mixing.setflags(write=False)
        variances.setflags(write=False)
        covariance = mixing @ np.diag(variances) @ mixing.T
        covariance = 0.5 * (covariance + covariance.T)
        covariance.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "source_variances", variances)
        object.__setattr__(self, "_covariance", covariance)
        object.__setattr__(self, "_positions", {label: i for i, label in enumerate(self.labels)})

    @classmethod
    def from_covariance(cls, labels: Sequence[str], covariance, model: str = "custom") -> "GaussianScheme":
        cov = np.asarray(covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] != len(labels):
            raise DomainError(f"Covariance shape {cov.shape} does not match {len(labels)} labels")
        if not np.allclose(cov, cov.T, atol=config.PSD_TOL):
            raise DomainError("Covariance matrix is not symmetric")
        eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (cov + cov.T))
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        if eigenvalues.min() < -config.PSD_TOL * scale:
            raise DomainError(f"Covariance matrix is not PSD (min eigenvalue {eigenvalues.min():.3e})")
        return cls(tuple(labels), eigenvectors, np.clip(eigenvalues, 0.0, None), model=model)

    @property
    def covariance(self) -> np.ndarray:
        return self._covariance

    def index(self, labels: Labels) -> List[int]:
        missing = [label for label in as_labels(labels) if label not in self._positions]
        if missing:
            raise DomainError(f"Unknown scheme variables {missing}; available: {list(self.labels)}")
        return [self._positions[label] for label in as_labels(labels)]

    def covariance_of(self, labels: Labels) -> np.ndarray:
        idx = self.index(labels)
        return self.covariance[np.ix_(idx, idx)]

    def sample(self, n: int, seed: int = config.DEFAULT_SEED, stream: int = 0,
               labels: Optional[Labels] = None) -> np.ndarray:
        """Draw n joint samples, one row each, columns ordered like ``labels``.

        Draws are counter-based: the same (seed, stream) always gives the same
        samples, whatever else was sampled before.
        """
        if n <= 0:
            raise DomainError(f"Sample count must be positive, got {n}")
        rng = stream_rng(seed, stream)
        sources = rng.standard_normal((n, self.source_variances.size)) * np.sqrt(self.source_variances)
        rows = self.mixing if labels is None else self.mixing[self.index(labels)]
        return sources @ rows.T


class _SchemeBuilder:
    """Accumulates variables as linear combinations of named independent sources."""

    def __init__(self):
        self.source_names: List[str] = []
        self.source_variances: List[float] = []
        self.variables: Dict[str, Dict[str, float]] = {}

    def source(self, name: str, variance: float) -> None:
        self.source_names.append(name)
        self.source_variances.append(float(variance))
        self.variables[name] = {name: 1.0}

    def combine(self, name: str, terms: Iterable[Tuple[float, str]]) -> None:
        combo: Dict[str, float] = {}
        for weight, var in terms:
            for src, coeff in self.variables[var].items():
                combo[src] = combo.get(src, 0.0) + weight * coeff
        self.variables[name] = combo

    def build(self, model: str, coefficients: Dict[str, float]) -> GaussianScheme:
        labels = tuple(self.variables)
        mixing = np.zeros((len(labels), len(self.source_names)))
        column = {name: j for j, name in enumerate(self.source_names)}
        for i, label in enumerate(labels):
            for src, coeff in self.variables[label].items():
                mixing[i, column[src]] = coeff
        return GaussianScheme(labels, mixing, np.array(self.source_variances), model, coefficients)


def build_gaussian_scheme(params: ChannelParams, aux: AuxParams, model: str,
                          a: float = 0.0, b: float = 1.0, d: float = 0.0,
                          nhat: Optional[float] = None) -> GaussianScheme:
    """Covariance of every variable the coding scheme of ``model`` involves.

    Channel outputs are Y1 = X + a*X1 [+ b*X2] + Z1 and Y2 = X + X1 [+ d*X2] + Z2,
    with Z2 = Z1 + Z' on the degraded families. ``nhat`` overrides the
    compression-noise variance; by default the smallest one the relay link
    supports is used.
    """
    if model not in SCHEME_FAMILIES:
        raise DomainError(f"Unknown scheme model {model!r}; choose from {sorted(SCHEME_FAMILIES)}")
    noise, relay = SCHEME_FAMILIES[model]
    P, N1, N2 = params.P, params.N1, params.N2
    P1 = 0.0 if model == "gaussian-bc" else params.P1
    alpha, beta, eta = aux.alpha, aux.beta_fresh, aux.eta
    cloud = (1.0 - alpha) * P

    if noise == "dawgn":
        params.require_weak_user_two(model)
    if relay == "estimate-forward":
        params.require_weak_relay(model)

    builder = _SchemeBuilder()
    if relay == "estimate-forward":
        builder.source("X1", eta * P1)
        builder.source("U", cloud)
        builder.source("X'", alpha * P)
        builder.combine("X", [(1.0, "U"), (1.0, "X'")])
    else:
        builder.source("X1", P1)
        builder.source("U'", beta * cloud)
        builder.source("X'", alpha * P)
        # With P1 == 0 there is nothing to be coherent with; Var(X) drops to alpha*P + beta*cloud
        coherent = math.sqrt((1.0 - beta) * cloud / P1) if P1 > 0.0 else 0.0
        builder.combine("U", [(coherent, "X1"), (1.0, "U'")])
        builder.combine("X", [(1.0, "U"), (1.0, "X'")])
    if relay == "full":
        builder.source("X2", eta * params.P2)

    builder.source("Z1", N1)
    if noise == "dawgn":
        builder.source("Z'", N2 - N1)
        builder.combine("Z2", [(1.0, "Z1"), (1.0, "Z'")])
    else:
        builder.source("Z2", N2)

    y1 = [(1.0, "X"), (a, "X1"), (1.0, "Z1")]
    y2 = [(1.0, "X"), (1.0, "X1"), (1.0, "Z2")]
    if relay == "full":
        y1.append((b, "X2"))
        y2.append((d, "X2"))
    builder.combine("Y1", y1)
    builder.combine("Y2", y2)

    total = N1 + N2
    builder.combine("S", [(N1 / total, "Y2"), (N2 / total, "Y1")])
    builder.combine("Zhat1", [(N1 / total, "Z2"), (N2 / total, "Z1")])
    builder.combine("Zhat", [(N2 / total, "Z2"), (-N2 / total, "Z1")])

    coefficients = {"a": float(a), "b": float(b), "d": float(d)}
    if relay == "full" or relay == "estimate-forward":
        if nhat is None:
            if relay == "full":
                nhat = nhat_min(P, params.P2, N1, N2, alpha, eta)
            else:
                nhat = nhat_min(P, P1, N2, N1, alpha, eta)
        if math.isfinite(nhat):
            builder.source("Zq", nhat)
            observed = "Y2" if relay == "full" else "Y1"
            builder.combine(f"{observed}hat", [(1.0, observed), (1.0, "Zq")])
        else:
            logger.debug(f"{model}: no relay power for compression, compressed observation omitted")
        coefficients["nhat"] = float(nhat)

    scheme = builder.build(model, coefficients)
    logger.debug(f"Built {model} scheme with {len(scheme.labels)} variables")
    return scheme
