"""Chain diagnostics, posterior summaries, and predictive checks.

Conventions: autocorrelations are reported from lag 1; the effective
sample size divides by one plus twice the sum of autocorrelations,
truncated at the first nonpositive lag; quantiles interpolate linearly
between order statistics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import stats as st
from .errors import TermError
from .infer import (
    Chain,
    INTERACTION_KIND,
    LayerTask,
    SIGN_KIND,
    build_interaction_tasks,
    build_sign_tasks,
)
from .networks import NetworkPanel
from .sim import SimConfig

log = logging.getLogger(__name__)


def acf(series, max_lag: int) -> np.ndarray:
    """Autocorrelations at lags 1..max_lag (biased covariance estimates)."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise TermError("acf needs a one-dimensional series of length >= 2")
    max_lag = min(int(max_lag), x.shape[0] - 1)
    x = x - x.mean()
    c0 = float(x @ x) / x.shape[0]
    if c0 == 0.0:
        log.warning("acf of a constant series is undefined; returning zeros")
        return np.zeros(max_lag)
    out = np.empty(max_lag)
    for k in range(1, max_lag + 1):
        out[k - 1] = float(x[:-k] @ x[k:]) / x.shape[0] / c0
    return out


def ess(series) -> float:
    """Effective sample size with initial-positive-sequence truncation."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise TermError("ess needs a one-dimensional series of length >= 2")
    n = x.shape[0]
    if np.ptp(x) == 0.0:
        log.warning("ess of a constant series is 0")
        return 0.0
    rho = acf(x, n - 1)
    total = 0.0
    for r in rho:
        if r <= 0.0:
            break
        total += float(r)
    return n / (1.0 + 2.0 * total)


def quantile(series, prob: float) -> float:
    """Quantile by linear interpolation between order statistics."""
    return float(np.quantile(np.asarray(series, dtype=np.float64), prob,
                             method="linear"))


@dataclass
class ParamSummary:
    label: str
    mean: float
    median: float
    lower: float
    upper: float
    ess: float
    acf: np.ndarray


@dataclass
class ChainSummary:
    """Posterior summary per parameter, plus the interval mass setting."""

    kind: str
    level: float
    params: list[ParamSummary]
    acceptance_rate: float

    def rows(self) -> list[dict]:
        out = []
        for p in self.params:
            block, term = p.label.split(":", 1)
            out.append({
                "block": block,
                "term": term,
                "mean": p.mean,
                "median": p.median,
                "lower": p.lower,
                "upper": p.upper,
                "ess": p.ess,
            })
        return out

    def param(self, label: str) -> ParamSummary:
        for p in self.params:
            if p.label == label:
                return p
        raise TermError(f"summary has no parameter {label!r}")


def summarize(chain: Chain, level: float = 0.95, max_lag: int = 20) -> ChainSummary:
    """Means, medians, central credible intervals, ESS and short ACFs."""
    if not (0 < level < 1):
        raise TermError("level must lie in (0, 1)")
    lo = (1.0 - level) / 2.0
    params = []
    for idx, label in enumerate(chain.labels):
        x = chain.draws[:, idx]
        constant = np.ptp(x) == 0.0
        params.append(ParamSummary(
            label=label,
            mean=float(x.mean()),
            median=quantile(x, 0.5),
            lower=quantile(x, lo),
            upper=quantile(x, 1.0 - lo),
            ess=0.0 if constant else ess(x),
            acf=np.zeros(min(max_lag, len(x) - 1)) if constant
                else acf(x, max_lag),
        ))
    return ChainSummary(chain.kind, level, params, chain.acceptance_rate)


@dataclass
class PPCResult:
    """Centred cumulative differences, simulated minus observed.

    For each retained parameter draw used, every observed layer is
    re-simulated on its own support and the per-term statistic difference
    is summed over transitions; a well-calibrated fit centres these
    samples on zero.
    """

    kind: str
    terms: tuple[str, ...]
    samples: dict  # (block, term) -> np.ndarray of length n_draws

    def rows(self) -> list[dict]:
        out = []
        for (block, term), values in self.samples.items():
            for d, v in enumerate(values):
                out.append({"process": block, "term": term,
                            "draw": d, "value": float(v)})
        return out


def ppc(panel: NetworkPanel, chain: Chain, n_draws: int = 200,
        cfg: Optional[SimConfig] = None,
        covariates: Optional[dict] = None) -> PPCResult:
    """Posterior predictive check of a fitted chain against its panel.

    Uses ``n_draws`` evenly spaced retained draws; simulation seeds derive
    from ``cfg.seed``.
    """
    if panel.n_transitions < 1:
        raise TermError("a predictive check needs at least two waves")
    if n_draws < 1:
        raise TermError("n_draws must be positive")
    cfg = cfg if cfg is not None else SimConfig()
    bound = st.bind(chain.model, panel.nodes, covariates)
    if chain.kind == SIGN_KIND:
        tasks_F, tasks_P = build_sign_tasks(panel, bound)
    elif chain.kind == INTERACTION_KIND:
        tasks_F, tasks_P = build_interaction_tasks(panel, bound)
    else:
        raise TermError(f"unknown chain kind {chain.kind!r}")
    ss = np.random.SeedSequence(cfg.seed)
    children = ss.spawn(len(tasks_F) + len(tasks_P))
    for task, child in zip(tasks_F + tasks_P, children):
        task.rng = np.random.default_rng(child)

    n_draws = min(n_draws, chain.n_draws)
    picks = np.linspace(0, chain.n_draws - 1, n_draws).astype(np.int64)
    q = chain.model.n_terms
    names = chain.model.names()
    diffs = {("F", name): np.empty(n_draws) for name in names}
    diffs.update({("P", name): np.empty(n_draws) for name in names})
    for d, row in enumerate(picks):
        theta = chain.draws[row]
        total_F = np.zeros(q)
        total_P = np.zeros(q)
        for task in tasks_F:
            total_F += task.simulate_stats(theta[:q], cfg) - task.obs_stats
        for task in tasks_P:
            total_P += task.simulate_stats(theta[q:], cfg) - task.obs_stats
        for qi, name in enumerate(names):
            diffs[("F", name)][d] = total_F[qi]
            diffs[("P", name)][d] = total_P[qi]
    return PPCResult(chain.kind, names, diffs)


@dataclass(frozen=True)
class MarginalProbability:
    """Tie and valence probabilities implied by linear predictors."""

    p_interaction: float
    p_positive_given_interaction: float
    p_positive: float


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def marginal_positive_probability(eta_interaction: float,
                                  eta_sign: float) -> MarginalProbability:
    """Combine the two factors' linear predictors into probabilities.

    ``eta_interaction`` is the interaction-layer log-odds of the tie,
    ``eta_sign`` the sign-layer log-odds of a positive valence given the
    tie; the positive-tie probability is their product of logistics.
    """
    p_int = _logistic(float(eta_interaction))
    p_pos_given = _logistic(float(eta_sign))
    return MarginalProbability(p_int, p_pos_given, p_int * p_pos_given)
