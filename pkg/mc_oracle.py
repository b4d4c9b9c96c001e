"""
Independent checks of the Gaussian closed forms.

Exact conditional mutual information comes from log-determinants of the scheme
covariance; plug-in estimates come from samples drawn on counter-based streams.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from error_handling import DomainError, OracleError, PreconditionError
from gaussian_rates import (
    AuxParams,
    ChannelParams,
    compression_terms,
    df_partial_rates,
    ef_partial_rates,
    feedback_rates,
    full_feedback_rates,
    full_inner_rates,
)
from gaussian_scheme import GaussianScheme, Labels, as_labels, build_gaussian_scheme, stream_rng
from logging_config import log_execution_time

logger = logging.getLogger("mc_oracle")
time_logger = logging.getLogger("time_analysis")

LN2 = math.log(2.0)


@dataclass
class OracleReport:
    formula: str
    closed_form: Optional[float]
    logdet: float
    plugin: Optional[float] = None
    standard_error: Optional[float] = None
    samples: int = 0
    seed: Optional[int] = None
    params: Dict[str, float] = field(default_factory=dict)
    aux: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.standard_error is not None and self.standard_error < 0:
            raise DomainError(f"standard error must be >= 0, got {self.standard_error}")

    @property
    def difference(self) -> Optional[float]:
        if self.closed_form is None:
            return None
        return abs(self.logdet - self.closed_form)

    @property
    def plugin_deviation(self) -> Optional[float]:
        if self.plugin is None:
            return None
        return abs(self.plugin - self.logdet)

    def plugin_within(self, k: float = 4.0) -> bool:
        if self.plugin is None:
            return True
        return self.plugin_deviation <= k * self.standard_error + config.IDENTITY_TOL

    @property
    def passed(self) -> bool:
        closed_ok = self.difference is None or self.difference < config.ORACLE_TOL
        return closed_ok and self.plugin_within()

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["difference"] = self.difference
        data["passed"] = self.passed
        return data


@dataclass
class DegradednessReport:
    name: str
    analytic: float
    sampled: Optional[float]
    samples: int
    seed: Optional[int]

    @property
    def threshold(self) -> Optional[float]:
        return 4.0 / math.sqrt(self.samples) if self.samples else None

    @property
    def passed(self) -> bool:
        if abs(self.analytic) >= config.IDENTITY_TOL:
            return False
        return self.sampled is None or abs(self.sampled) < self.threshold

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["threshold"] = self.threshold
        data["passed"] = self.passed
        return data


def _pinv_psd(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    scale = max(1.0, float(np.max(np.abs(eigenvalues)))) if eigenvalues.size else 1.0
    keep = eigenvalues > config.PSD_TOL * scale
    return (eigenvectors[:, keep] / eigenvalues[keep]) @ eigenvectors[:, keep].T


def conditional_covariance(cov: np.ndarray, a_idx: Sequence[int], c_idx: Sequence[int]) -> np.ndarray:
    """Schur complement Cov(A) - Cov(A,C) Cov(C)^+ Cov(C,A)."""
    s_aa = cov[np.ix_(a_idx, a_idx)]
    if not len(c_idx):
        return s_aa
    s_ac = cov[np.ix_(a_idx, c_idx)]
    s_cc = cov[np.ix_(c_idx, c_idx)]
    result = s_aa - s_ac @ _pinv_psd(s_cc) @ s_ac.T
    return 0.5 * (result + result.T)


def _split_labels(A: Labels, B: Labels, C: Labels) -> Tuple[Tuple[str, ...], Tuple[str, ...], Tuple[str, ...]]:
    a, b, c = as_labels(A), as_labels(B), as_labels(C)
    b = tuple(label for label in b if label not in c)
    return a, b, c


def mi_logdet(scheme: GaussianScheme, A: Labels, B: Labels, C: Labels = ()) -> float:
    """Exact Gaussian I(A; B | C) in bits.

    Conditioning on a variable already in C contributes nothing, so I(X; Y | Y) = 0.
    A deterministic relation between A and B given C raises OracleError.
    """
    a, b, c = _split_labels(A, B, C)
    if not a or not b:
        return 0.0
    cov = scheme.covariance
    a_idx, b_idx, c_idx = scheme.index(a), scheme.index(b), scheme.index(c)

    given_c = conditional_covariance(cov, a_idx, c_idx)
    given_bc = conditional_covariance(cov, a_idx, b_idx + c_idx)

    eigenvalues, eigenvectors = np.linalg.eigh(given_c)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    keep = eigenvalues > config.PSD_TOL * scale
    if not np.any(keep):
        # A is a function of C
        return 0.0
    basis = eigenvectors[:, keep]
    reduced = basis.T @ given_bc @ basis
    reduced_eigenvalues = np.linalg.eigvalsh(0.5 * (reduced + reduced.T))
    if reduced_eigenvalues.min() <= config.PSD_TOL * scale:
        raise OracleError(
            f"I({','.join(a)};{','.join(b)}|{','.join(c)}) is infinite: "
            f"deterministic relation between A and B given C"
        )
    value = 0.5 * (np.sum(np.log(eigenvalues[keep])) - np.sum(np.log(reduced_eigenvalues))) / LN2
    return float(max(value, 0.0))


def _sample_mi(cov: np.ndarray, a_idx, b_idx, c_idx) -> float:
    loaded = cov + config.SAMPLE_LOADING * np.eye(cov.shape[0])

    def logdet_given(cond):
        s_aa = loaded[np.ix_(a_idx, a_idx)]
        if cond:
            s_ac = loaded[np.ix_(a_idx, cond)]
            s_cc = loaded[np.ix_(cond, cond)]
            s_aa = s_aa - s_ac @ np.linalg.solve(s_cc, s_ac.T)
        sign, logdet = np.linalg.slogdet(s_aa)
        return logdet

    return float((logdet_given(list(c_idx)) - logdet_given(list(b_idx) + list(c_idx))) / (2.0 * LN2))


def _blocked_covariances(samples: np.ndarray, blocks: int):
    """Full sample covariance plus the delete-one-block covariances."""
    n = samples.shape[0]
    parts = np.array_split(np.arange(n), blocks)
    sums = np.stack([samples[idx].sum(axis=0) for idx in parts])
    outers = np.stack([samples[idx].T @ samples[idx] for idx in parts])
    total_sum, total_outer = sums.sum(axis=0), outers.sum(axis=0)

    def covariance(s, o, count):
        mean = s / count
        return (o - count * np.outer(mean, mean)) / (count - 1)

    full = covariance(total_sum, total_outer, n)
    leave_out = [
        covariance(total_sum - sums[k], total_outer - outers[k], n - len(parts[k]))
        for k in range(len(parts))
    ]
    return full, leave_out


def mi_plugin(scheme: GaussianScheme, A: Labels, B: Labels, C: Labels = (),
              n: int = config.PLUGIN_SAMPLES, seed: int = config.DEFAULT_SEED,
              stream: int = 0, formula: str = "plugin") -> OracleReport:
    if n < config.MIN_PLUGIN_SAMPLES:
        raise PreconditionError(f"mi_plugin needs at least {config.MIN_PLUGIN_SAMPLES} samples, got {n}")
    a, b, c = _split_labels(A, B, C)
    exact = mi_logdet(scheme, a, b, c)
    if not a or not b:
        return OracleReport(formula, None, exact, 0.0, 0.0, n, seed)

    ordered = list(dict.fromkeys(a + b + c))
    position = {label: i for i, label in enumerate(ordered)}
    a_idx = [position[label] for label in a]
    b_idx = [position[label] for label in b]
    c_idx = [position[label] for label in c]

    samples = scheme.sample(n, seed=seed, stream=stream, labels=ordered)
    full, leave_out = _blocked_covariances(samples, config.JACKKNIFE_BLOCKS)
    estimate = _sample_mi(full, a_idx, b_idx, c_idx)
    replicates = np.array([_sample_mi(cov, a_idx, b_idx, c_idx) for cov in leave_out])
    g = replicates.size
    standard_error = float(np.sqrt((g - 1) / g * np.sum((replicates - replicates.mean()) ** 2)))
    logger.debug(f"{formula}: plug-in {estimate:.6f} +/- {standard_error:.2e}, exact {exact:.6f}")
    return OracleReport(formula, None, exact, estimate, standard_error, n, seed)


def degradedness_stat(scheme: GaussianScheme, target: str, source: str, given: Labels,
                      n: int = config.DEGRADEDNESS_SAMPLES, seed: int = config.DEFAULT_SEED,
                      stream: int = 0, name: str = "") -> DegradednessReport:
    """Partial correlation of (target, source) given ``given``: analytic and sampled.

    ``n = 0`` skips the sampled estimate.
    """
    given = as_labels(given)
    pair = scheme.index([target, source])
    residual = conditional_covariance(scheme.covariance, pair, scheme.index(given))
    denom = math.sqrt(max(residual[0, 0], 0.0) * max(residual[1, 1], 0.0))
    analytic = float(residual[0, 1] / denom) if denom > 0.0 else 0.0

    sampled = None
    if n:
        data = scheme.sample(n, seed=seed, stream=stream, labels=[target, source, *given])
        design = np.column_stack([np.ones(n), data[:, 2:]])
        coefficients, *_ = np.linalg.lstsq(design, data[:, :2], rcond=None)
        residuals = data[:, :2] - design @ coefficients
        sampled = float(np.corrcoef(residuals.T)[0, 1])
    return DegradednessReport(name or f"{target}~{source}|{','.join(given)}", analytic, sampled, n, seed)


@dataclass(frozen=True)
class OracleFormula:
    model: str
    A: Tuple[str, ...]
    B: Tuple[str, ...]
    C: Tuple[str, ...]
    closed_form: Callable[[ChannelParams, AuxParams], float]
    weak_relay: bool = False


def _compression(term: str) -> Callable[[ChannelParams, AuxParams], float]:
    def closed_form(params: ChannelParams, aux: AuxParams) -> float:
        terms = compression_terms(params.P, params.P2, params.N1, params.N2, aux.alpha, aux.eta)
        return float(terms[term])
    return closed_form


def _partial(label: str) -> Callable[[ChannelParams, AuxParams], float]:
    def closed_form(params: ChannelParams, aux: AuxParams) -> float:
        cs = df_partial_rates(params.P, params.P1, params.N1, params.N2, aux.alpha, aux.beta_fresh)
        return float(cs[label])
    return closed_form


def _full_inner(label: str) -> Callable[[ChannelParams, AuxParams], float]:
    def closed_form(params: ChannelParams, aux: AuxParams) -> float:
        return float(full_inner_rates(params, aux.alpha, aux.beta_fresh, aux.eta)[label])
    return closed_form


def _feedback(label: str, evaluator=feedback_rates) -> Callable[[ChannelParams, AuxParams], float]:
    def closed_form(params: ChannelParams, aux: AuxParams) -> float:
        return float(evaluator(params, aux.alpha, aux.beta_fresh)[label])
    return closed_form


def _ef_r2(params: ChannelParams, aux: AuxParams) -> float:
    return float(ef_partial_rates(params, aux.alpha, aux.eta)["r2"])


ORACLE_CATALOGUE: Dict[str, OracleFormula] = {
    "thm4-ma": OracleFormula("dawgn-partial", ("U", "X1"), ("Y2",), (), _partial("r0+r2:multiple-access")),
    "thm4-dec": OracleFormula("dawgn-partial", ("U",), ("Y1",), ("X1",), _partial("r0+r2:relay-decode")),
    "thm4-r1": OracleFormula("dawgn-partial", ("X",), ("Y1",), ("U", "X1"), _partial("r1")),
    "thm14-ma": OracleFormula("awgn-full-inner", ("U", "X1"), ("Y2",), ("X2",),
                              _full_inner("r0+r2:multiple-access")),
    "thm14-dec": OracleFormula("awgn-full-inner", ("U",), ("Y1",), ("X1",), _full_inner("r0+r2:relay-decode")),
    "thm14-r1": OracleFormula("awgn-full-inner", ("X",), ("Y2hat", "Y1"), ("X1", "U", "X2"), _full_inner("r1")),
    "eq119-a": OracleFormula("awgn-full-inner", ("X2",), ("Y1",), ("U", "X1"), _compression("relay-link")),
    "eq119-b": OracleFormula("awgn-full-inner", ("Y2hat",), ("Y2",), ("U", "X1", "X2"), _compression("description")),
    "eq119-c": OracleFormula("awgn-full-inner", ("Y2hat",), ("Y1",), ("U", "X1", "X2"),
                             _compression("side-information")),
    "eq20-r2": OracleFormula("ef-partial", ("X",), ("Y1hat", "Y2"), ("U", "X1"), _ef_r2, weak_relay=True),
    "thm8-ma": OracleFormula("awgn-partial-feedback", ("U", "X1"), ("Y2",), (),
                             _feedback("r0+r2:multiple-access")),
    "thm8-dec": OracleFormula("awgn-partial-feedback", ("U",), ("Y1", "Y2"), ("X1",),
                              _feedback("r0+r2:relay-decode")),
    "thm8-r1": OracleFormula("awgn-partial-feedback", ("X",), ("Y1", "Y2"), ("U", "X1"), _feedback("r1")),
    "thm18-r1": OracleFormula("awgn-full-feedback", ("X",), ("Y1", "Y2"), ("U", "X1", "X2"),
                              _feedback("r1", full_feedback_rates)),
}

# Compressed observations vanish when the relay link carries no power
OPTIONAL_LABELS = ("Y2hat", "Y1hat")

DEGRADEDNESS_CHECKS: Dict[str, Tuple[str, str, str, Tuple[str, ...]]] = {
    "awgn-partial-s": ("awgn-partial-feedback", "Y2", "X", ("S", "X1")),
    "awgn-full-s": ("awgn-full-feedback", "Y2", "X", ("S", "X1", "X2")),
}


def _present(scheme: GaussianScheme, labels: Tuple[str, ...]) -> Tuple[str, ...]:
    return tuple(label for label in labels if label in scheme.labels or label not in OPTIONAL_LABELS)


def verify_rate_expr(params: ChannelParams, aux: AuxParams, which: str,
                     n_samples: int = 0, seed: int = config.DEFAULT_SEED, stream: int = 0) -> OracleReport:
    if which not in ORACLE_CATALOGUE:
        raise DomainError(f"Unknown formula id {which!r}; choose from {sorted(ORACLE_CATALOGUE)}")
    formula = ORACLE_CATALOGUE[which]
    scheme = build_gaussian_scheme(params, aux, formula.model)
    A, B, C = (_present(scheme, labels) for labels in (formula.A, formula.B, formula.C))
    closed = formula.closed_form(params, aux)
    if n_samples:
        report = mi_plugin(scheme, A, B, C, n=n_samples, seed=seed, stream=stream, formula=which)
        report.closed_form = closed
    else:
        report = OracleReport(which, closed, mi_logdet(scheme, A, B, C))
    report.params = params.as_dict()
    report.aux = asdict(aux)
    if not report.passed:
        logger.warning(f"{which}: closed form {closed:.12g} vs log-det {report.logdet:.12g}")
    return report


def random_oracle_point(rng: np.random.Generator, weak_relay: bool = False) -> Tuple[ChannelParams, AuxParams]:
    P, P1, P2 = rng.uniform(0.1, 20.0, size=3)
    low, high = np.sort(rng.uniform(0.1, 10.0, size=2))
    high = max(high, low + 0.05)
    N1, N2 = (high, low) if weak_relay else (low, high)
    alpha, beta, gamma, eta = rng.uniform(0.0, 1.0, size=4)
    return (
        ChannelParams(P=P, P1=P1, P2=P2, N1=N1, N2=N2),
        AuxParams(alpha=alpha, beta_fresh=beta, gamma=gamma, eta=eta),
    )


@log_execution_time(time_logger)
def oracle_sweep(n_points: int = config.ORACLE_SWEEP_POINTS, seed: int = config.DEFAULT_SEED,
                 formulas: Optional[Sequence[str]] = None) -> List[OracleReport]:
    """Every catalogued formula at ``n_points`` random (params, aux) draws."""
    formulas = list(formulas or ORACLE_CATALOGUE)
    reports = []
    for i in range(n_points):
        rng = stream_rng(seed, i)
        for which in formulas:
            params, aux = random_oracle_point(rng, ORACLE_CATALOGUE[which].weak_relay)
            reports.append(verify_rate_expr(params, aux, which))
    failed = sum(not r.passed for r in reports)
    logger.info(f"Oracle sweep: {len(reports)} comparisons, {failed} failed")
    return reports


@log_execution_time(time_logger)
def plugin_spot_checks(n_checks: int = config.PLUGIN_SPOT_CHECKS, n_samples: int = config.PLUGIN_SAMPLES,
                       seed: int = config.DEFAULT_SEED) -> List[OracleReport]:
    formulas = sorted(ORACLE_CATALOGUE)
    reports = []
    for i in range(n_checks):
        which = formulas[i % len(formulas)]
        # Streams past the sweep's range keep the draws independent of it
        rng = stream_rng(seed, 1_000_000 + i)
        params, aux = random_oracle_point(rng, ORACLE_CATALOGUE[which].weak_relay)
        reports.append(verify_rate_expr(params, aux, which, n_samples=n_samples, seed=seed, stream=i))
    return reports


def degradedness_checks(params: ChannelParams, n: int = config.DEGRADEDNESS_SAMPLES,
                        seed: int = config.DEFAULT_SEED, a: float = 0.0) -> List[DegradednessReport]:
    reports = []
    for stream, (name, (model, target, source, given)) in enumerate(sorted(DEGRADEDNESS_CHECKS.items())):
        scheme = build_gaussian_scheme(params, AuxParams(alpha=0.5, beta_fresh=0.5, eta=1.0), model, a=a)
        reports.append(degradedness_stat(scheme, target, source, given, n=n, seed=seed, stream=stream, name=name))
    return reports
