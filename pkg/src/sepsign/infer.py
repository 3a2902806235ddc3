"""Approximate-exchange MCMC for the transition parameters.

The transition factorizes into a sign part and an interaction part, so the
two posteriors are estimated separately: the sign fit draws (zeta_F,
zeta_P) given the observed interaction layers, the interaction fit draws
(xi_F, xi_P) given the observed supports. Each iteration proposes new
parameters from an adaptive Gaussian, re-simulates every observed layer on
its own support at the proposed values, and accepts with a ratio built
from sufficient statistics and the prior alone; the intractable
normalizing constants cancel exactly.

Per-layer auxiliary chains start from the observed layer they mimic and
own independent seed streams, so fits are reproducible for a fixed seed
regardless of how many worker threads run the simulations.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stats as st
from .errors import InferenceError, TermError
from .networks import NetworkPanel, decompose
from .sim import SimConfig, run_binary_chain, run_sign_chain

log = logging.getLogger(__name__)

SIGN_KIND = "sign"
INTERACTION_KIND = "interaction"
BLOCKS = ("F", "P")


@dataclass
class PriorSpec:
    """Independent normal priors over the stacked (F block, P block) vector."""

    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.sds = np.asarray(self.sds, dtype=np.float64)
        if self.means.shape != self.sds.shape or self.means.ndim != 1:
            raise TermError("prior means and sds must be equal-length vectors")
        if np.any(self.sds <= 0):
            raise TermError("prior sds must be positive")

    @classmethod
    def default_for(cls, model: st.ModelSpec,
                    mean_overrides: Optional[dict] = None,
                    sd_overrides: Optional[dict] = None) -> "PriorSpec":
        """Means -1 for tie-count terms and 0 elsewhere, sd 5 throughout.

        Overrides are keyed by term label, optionally prefixed with the
        block: ``edges+`` applies to both blocks, ``F:edges+`` to one.
        """
        names = model.names()
        bases = [t.name for t in model.terms]
        means, sds = [], []
        for block in BLOCKS:
            for name, base in zip(names, bases):
                mean = -1.0 if base in ("edges", "edges+") else 0.0
                sd = 5.0
                for key, value in (mean_overrides or {}).items():
                    if key in (name, base, f"{block}:{name}", f"{block}:{base}"):
                        mean = float(value)
                for key, value in (sd_overrides or {}).items():
                    if key in (name, base, f"{block}:{name}", f"{block}:{base}"):
                        sd = float(value)
                means.append(mean)
                sds.append(sd)
        return cls(np.array(means), np.array(sds))

    @property
    def dim(self) -> int:
        return self.means.shape[0]

    def logpdf(self, theta: np.ndarray) -> float:
        z = (np.asarray(theta) - self.means) / self.sds
        return float(-0.5 * z @ z - np.log(self.sds).sum()
                     - 0.5 * self.dim * np.log(2 * np.pi))


def log_prior(theta, prior: PriorSpec) -> float:
    return prior.logpdf(theta)


@dataclass
class MCMCConfig:
    """Settings for one approximate-exchange run."""

    iterations: int = 35000
    burn_in: int = 10000
    aux: SimConfig = field(default_factory=SimConfig)
    adapt_start: int = 500
    adapt_scale: Optional[float] = None  # default 2.38^2 / dim
    adapt_jitter: float = 1e-5
    initial_proposal_sd: float = 0.1
    seed: Optional[int] = None
    threads: int = 1
    blockwise: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise TermError("iterations must be positive")
        if not (0 <= self.burn_in < self.iterations):
            raise TermError("burn_in must lie in [0, iterations)")
        if self.adapt_start < 1:
            raise TermError("adapt_start must be positive")
        if self.adapt_scale is not None and self.adapt_scale <= 0:
            raise TermError("adapt_scale must be positive")
        if self.adapt_jitter < 0:
            raise TermError("adapt_jitter must be nonnegative")
        if self.initial_proposal_sd <= 0:
            raise TermError("initial_proposal_sd must be positive")
        if self.threads < 1:
            raise TermError("threads must be at least 1")


class RunningMoments:
    """Streaming mean and covariance of the chain, rank-1 updates."""

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros((dim, dim))

    def update(self, draw: np.ndarray) -> None:
        draw = np.asarray(draw, dtype=np.float64)
        self.count += 1
        delta = draw - self.mean
        self.mean += delta / self.count
        self._m2 += np.outer(delta, draw - self.mean)

    @property
    def cov(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros((self.dim, self.dim))
        return self._m2 / (self.count - 1)


def adapt_proposal(state: RunningMoments, draw) -> RunningMoments:
    """Fold one retained draw into the running proposal moments."""
    state.update(draw)
    return state


def proposal_covariance(state: RunningMoments, scale: float,
                        jitter: float) -> np.ndarray:
    """Adapted covariance: scale * (empirical covariance + jitter * I)."""
    return scale * (state.cov + jitter * np.eye(state.dim))


def exchange_log_ratio(obs_F, obs_P, aux_F, aux_P,
                       cur_F, cur_P, prop_F, prop_P) -> float:
    """Log acceptance contribution of the data under the exchange move.

    Every normalizing constant cancels, leaving inner products of
    parameter differences with (auxiliary - observed) statistic sums.
    """
    obs_F = np.asarray(obs_F, dtype=np.float64)
    obs_P = np.asarray(obs_P, dtype=np.float64)
    aux_F = np.asarray(aux_F, dtype=np.float64)
    aux_P = np.asarray(aux_P, dtype=np.float64)
    cur_F = np.asarray(cur_F, dtype=np.float64)
    cur_P = np.asarray(cur_P, dtype=np.float64)
    prop_F = np.asarray(prop_F, dtype=np.float64)
    prop_P = np.asarray(prop_P, dtype=np.float64)
    if not (obs_F.shape == aux_F.shape == cur_F.shape == prop_F.shape
            and obs_P.shape == aux_P.shape == cur_P.shape == prop_P.shape):
        raise TermError("statistic and parameter dimensions do not agree")
    return float((cur_F - prop_F) @ (aux_F - obs_F)
                 + (cur_P - prop_P) @ (aux_P - obs_P))


@dataclass
class Chain:
    """Retained posterior draws for one stacked (F, P) parameter vector."""

    kind: str
    labels: tuple[str, ...]
    draws: np.ndarray
    acceptance_rate: float
    seed: Optional[int]
    config: dict
    model: st.ModelSpec

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    def param(self, label: str) -> np.ndarray:
        try:
            idx = self.labels.index(label)
        except ValueError:
            raise TermError(f"chain has no parameter {label!r}") from None
        return self.draws[:, idx]

    def block(self, block: str) -> np.ndarray:
        if block not in BLOCKS:
            raise TermError(f"block must be one of {BLOCKS}")
        cols = [i for i, lab in enumerate(self.labels)
                if lab.startswith(block + ":")]
        return self.draws[:, cols]

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "labels": list(self.labels),
            "n_draws": int(self.n_draws),
            "acceptance_rate": float(self.acceptance_rate),
            "seed": self.seed,
            "config": self.config,
            "model": model_to_dict(self.model),
        }


def model_to_dict(model: st.ModelSpec) -> dict:
    terms = []
    for t in model.terms:
        entry = {"term": t.name}
        if t.decay is not None:
            entry["decay"] = t.decay
        if t.attr is not None:
            entry["attr"] = t.attr
        if t.level is not None:
            entry["level"] = t.level
        if t.cov is not None:
            entry["cov"] = t.cov
        terms.append(entry)
    return {"layer": model.layer, "terms": terms}


def model_from_dict(data: dict) -> st.ModelSpec:
    terms = []
    for entry in data["terms"]:
        terms.append(st.StatisticSpec(
            entry["term"], decay=entry.get("decay"), attr=entry.get("attr"),
            level=entry.get("level"), cov=entry.get("cov")))
    return st.ModelSpec(data["layer"], tuple(terms))


class LayerTask:
    """One observed layer to be re-simulated on its own support."""

    def __init__(self, kind: str, adj: np.ndarray, init_state: np.ndarray,
                 free: np.ndarray, bound: st.BoundModel,
                 obs_stats: np.ndarray):
        self.kind = kind
        self.adj = np.ascontiguousarray(adj)
        self.init_state = init_state
        self.free = free
        self.bound = bound
        self.obs_stats = obs_stats
        self.rng: Optional[np.random.Generator] = None

    @property
    def n_free(self) -> int:
        return int(self.free.shape[0])

    def simulate_stats(self, params: np.ndarray, cfg: SimConfig) -> np.ndarray:
        """Auxiliary statistic vector at ``params``; observed if frozen."""
        if self.n_free == 0:
            return self.obs_stats
        if self.kind == SIGN_KIND:
            state = self.init_state.copy()
            _, out, _ = run_sign_chain(state, self.adj, self.free, params,
                                       self.bound, cfg, self.rng)
        else:
            state = self.init_state.copy()
            _, out, _ = run_binary_chain(state, self.free, params,
                                         self.bound, cfg, self.rng)
        return out


def build_sign_tasks(panel: NetworkPanel, bound: st.BoundModel):
    """Per-transition simulation tasks for the two sign factors."""
    tasks_F, tasks_P = [], []
    n = panel.nodes.n
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    for y_prev, y_curr in panel.transitions():
        dec = decompose(y_prev, y_curr)
        prev_act = y_prev.state != 0
        new = (dec.x_F.adjacency != 0) & ~prev_act & tri
        ii, jj = np.nonzero(new)
        free_F = np.column_stack([ii, jj]).astype(np.int64)
        obs_F = st.suff_stats_sign(dec.z_F, bound)
        tasks_F.append(LayerTask(SIGN_KIND, dec.x_F.adjacency,
                                 dec.z_F.signs, free_F, bound, obs_F))
        free_P = dec.x_P.active_dyads()
        obs_P = st.suff_stats_sign(dec.z_P, bound)
        tasks_P.append(LayerTask(SIGN_KIND, dec.x_P.adjacency,
                                 dec.z_P.signs, free_P, bound, obs_P))
    return tasks_F, tasks_P


def build_interaction_tasks(panel: NetworkPanel, bound: st.BoundModel):
    """Per-transition simulation tasks for the two interaction factors."""
    tasks_F, tasks_P = [], []
    for y_prev, y_curr in panel.transitions():
        dec = decompose(y_prev, y_curr)
        obs_F = st.suff_stats_binary(dec.x_F, bound)
        tasks_F.append(LayerTask(INTERACTION_KIND, dec.x_F.adjacency,
                                 dec.x_F.adjacency.copy(), dec.free_F,
                                 bound, obs_F))
        obs_P = st.suff_stats_binary(dec.x_P, bound)
        tasks_P.append(LayerTask(INTERACTION_KIND, dec.x_P.adjacency,
                                 dec.x_P.adjacency.copy(), dec.free_P,
                                 bound, obs_P))
    return tasks_F, tasks_P


def _seed_tasks(tasks_F, tasks_P, seed):
    """Give every task its own child stream; the first child is returned
    for the proposal chain."""
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(1 + len(tasks_F) + len(tasks_P))
    for task, child in zip(tasks_F + tasks_P, children[1:]):
        task.rng = np.random.default_rng(child)
    return np.random.default_rng(children[0])


def _sum_stats(tasks, params, cfg, pool, q):
    if not tasks:
        return np.zeros(q)
    if pool is None:
        parts = [t.simulate_stats(params, cfg) for t in tasks]
    else:
        parts = list(pool.map(lambda t: t.simulate_stats(params, cfg), tasks))
    return np.sum(parts, axis=0)


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        bump = cov + 1e-12 * np.eye(cov.shape[0])
        return np.linalg.cholesky(bump)


def run_exchange(tasks_F: list, tasks_P: list, q: int, labels: tuple,
                 prior: PriorSpec, cfg: MCMCConfig, kind: str,
                 model: st.ModelSpec) -> Chain:
    """Shared exchange-MCMC driver over prepared layer tasks.

    With no tasks at all the data contribution vanishes and the chain
    samples the prior; that degenerate mode exists for validation.
    """
    d = 2 * q
    if prior.dim != d:
        raise TermError("prior dimension does not match the model")
    rng = _seed_tasks(tasks_F, tasks_P, cfg.seed)
    obs_F = np.sum([t.obs_stats for t in tasks_F], axis=0) if tasks_F else np.zeros(q)
    obs_P = np.sum([t.obs_stats for t in tasks_P], axis=0) if tasks_P else np.zeros(q)

    scale = cfg.adapt_scale if cfg.adapt_scale is not None else 2.38 ** 2 / d
    base_cov = cfg.initial_proposal_sd ** 2 * np.eye(d)
    moments = RunningMoments(d)
    theta = prior.means.copy()
    retained = np.empty((cfg.iterations - cfg.burn_in, d))
    accepted = 0
    proposals = 0
    rejected_nonfinite = 0

    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    blocks = ((slice(0, q), tasks_F, obs_F, True),
              (slice(q, d), tasks_P, obs_P, False)) if cfg.blockwise else None
    try:
        for it in range(cfg.iterations):
            if it >= cfg.adapt_start:
                cov = proposal_covariance(moments, scale, cfg.adapt_jitter)
            else:
                cov = base_cov
            if cfg.blockwise:
                for sl, tasks, obs, is_F in blocks:
                    prop = theta.copy()
                    chol_b = _chol(cov[sl, sl])
                    prop[sl] = theta[sl] + chol_b @ rng.standard_normal(q)
                    aux = _sum_stats(tasks, prop[sl], cfg.aux, pool, q)
                    if is_F:
                        logr = exchange_log_ratio(obs, np.zeros(q), aux,
                                                  np.zeros(q), theta[sl],
                                                  np.zeros(q), prop[sl],
                                                  np.zeros(q))
                    else:
                        logr = exchange_log_ratio(np.zeros(q), obs,
                                                  np.zeros(q), aux,
                                                  np.zeros(q), theta[sl],
                                                  np.zeros(q), prop[sl])
                    logr += prior.logpdf(prop) - prior.logpdf(theta)
                    proposals += 1
                    if not np.isfinite(logr):
                        rejected_nonfinite += 1
                    elif np.log(rng.random()) < logr:
                        theta = prop
                        accepted += 1
            else:
                chol = _chol(cov)
                prop = theta + chol @ rng.standard_normal(d)
                aux_F = _sum_stats(tasks_F, prop[:q], cfg.aux, pool, q)
                aux_P = _sum_stats(tasks_P, prop[q:], cfg.aux, pool, q)
                logr = exchange_log_ratio(obs_F, obs_P, aux_F, aux_P,
                                          theta[:q], theta[q:],
                                          prop[:q], prop[q:])
                logr += prior.logpdf(prop) - prior.logpdf(theta)
                proposals += 1
                if not np.isfinite(logr):
                    rejected_nonfinite += 1
                elif np.log(rng.random()) < logr:
                    theta = prop
                    accepted += 1
            adapt_proposal(moments, theta)
            if it >= cfg.burn_in:
                retained[it - cfg.burn_in] = theta
    finally:
        if pool is not None:
            pool.shutdown()
    if rejected_nonfinite:
        log.warning("%d proposals rejected with non-finite acceptance ratio",
                    rejected_nonfinite)
    config = {
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "aux_iterations": cfg.aux.aux_iterations,
        "aux_burn_in": cfg.aux.burn_in,
        "sweep_mode": cfg.aux.sweep_mode,
        "sign_updater": cfg.aux.sign_updater,
        "adapt_start": cfg.adapt_start,
        "adapt_scale": scale,
        "adapt_jitter": cfg.adapt_jitter,
        "initial_proposal_sd": cfg.initial_proposal_sd,
        "threads": cfg.threads,
        "blockwise": cfg.blockwise,
        "prior_means": prior.means.tolist(),
        "prior_sds": prior.sds.tolist(),
    }
    return Chain(kind, labels, retained, accepted / max(proposals, 1),
                 cfg.seed, config, model)


def _labels_for(model: st.ModelSpec) -> tuple[str, ...]:
    return tuple(f"{b}:{name}" for b in BLOCKS for name in model.names())


def _check_identifiable(tasks_F, tasks_P, what: str) -> None:
    free_F = sum(t.n_free for t in tasks_F)
    free_P = sum(t.n_free for t in tasks_P)
    if free_F + free_P == 0:
        raise InferenceError(
            f"every transition leaves the {what} layers fully constrained; "
            f"nothing identifiable to fit"
        )
    if free_F == 0:
        log.warning("formation block has no free dyads; "
                    "its posterior equals the prior")
    if free_P == 0:
        log.warning("persistence block has no free dyads; "
                    "its posterior equals the prior")


def aea_sign(panel: NetworkPanel, model: st.ModelSpec,
             prior: Optional[PriorSpec] = None,
             cfg: Optional[MCMCConfig] = None,
             covariates: Optional[dict] = None) -> Chain:
    """Posterior draws of (zeta_F, zeta_P) given the observed panel."""
    if panel.n_transitions < 1:
        raise InferenceError("a fit needs at least two waves")
    if model.layer != st.SIGN_LAYER:
        raise TermError("aea_sign requires a sign-layer model")
    cfg = cfg if cfg is not None else MCMCConfig()
    prior = prior if prior is not None else PriorSpec.default_for(model)
    bound = st.bind(model, panel.nodes, covariates)
    tasks_F, tasks_P = build_sign_tasks(panel, bound)
    _check_identifiable(tasks_F, tasks_P, "sign")
    return run_exchange(tasks_F, tasks_P, model.n_terms, _labels_for(model),
                        prior, cfg, SIGN_KIND, model)


def aea_interaction(panel: NetworkPanel, model: st.ModelSpec,
                    prior: Optional[PriorSpec] = None,
                    cfg: Optional[MCMCConfig] = None,
                    covariates: Optional[dict] = None) -> Chain:
    """Posterior draws of (xi_F, xi_P) given the observed panel."""
    if panel.n_transitions < 1:
        raise InferenceError("a fit needs at least two waves")
    if model.layer != st.BINARY_LAYER:
        raise TermError("aea_interaction requires a binary-layer model")
    cfg = cfg if cfg is not None else MCMCConfig()
    prior = prior if prior is not None else PriorSpec.default_for(model)
    bound = st.bind(model, panel.nodes, covariates)
    tasks_F, tasks_P = build_interaction_tasks(panel, bound)
    _check_identifiable(tasks_F, tasks_P, "interaction")
    return run_exchange(tasks_F, tasks_P, model.n_terms, _labels_for(model),
                        prior, cfg, INTERACTION_KIND, model)
