"""Samplers for single layers and forward simulation of whole transitions.

A transition from ``y_prev`` is generated in four stages: the formation
interaction layer keeps every prior tie and may activate the rest, the
persistence interaction layer may drop prior ties, signs are drawn on each
interaction layer (frozen at their previous value on pre-existing ties in
the formation layer), and the two halves are recombined against ``y_prev``.

Layer samplers are single-dyad Markov chains: a two-state conditional draw
(or optionally a sign-flip Metropolis step) for sign layers, and
single-toggle Metropolis for binary layers. One auxiliary iteration is one
proposed dyad update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from . import stats as st
from .errors import StructuralError, SupportError, TermError
from .networks import (
    BinaryNetwork,
    NetworkPanel,
    SignAssignment,
    SignedNetwork,
    TransitionDecomposition,
    recombine,
)

log = logging.getLogger(__name__)

SWEEP_MODES = ("random_scan", "systematic")
SIGN_UPDATERS = ("gibbs", "metropolis")


@dataclass
class SimConfig:
    """Controls for the single-layer samplers.

    ``aux_iterations`` counts proposed dyad updates after ``burn_in``
    further updates. ``sweep_mode`` picks the proposed dyad uniformly at
    random or cycles through the free dyads in order.
    """

    aux_iterations: int = 5000
    sweep_mode: str = "random_scan"
    seed: Optional[int] = None
    burn_in: int = 0
    sign_updater: str = "gibbs"

    def __post_init__(self):
        if self.aux_iterations < 1:
            raise TermError("aux_iterations must be at least 1")
        if self.burn_in < 0:
            raise TermError("burn_in must be nonnegative")
        if self.sweep_mode not in SWEEP_MODES:
            raise TermError(f"sweep_mode must be one of {SWEEP_MODES}")
        if self.sign_updater not in SIGN_UPDATERS:
            raise TermError(f"sign_updater must be one of {SIGN_UPDATERS}")


@dataclass
class ProcessParams:
    """Parameter vectors for the four per-transition factors.

    The sign model binds ``zeta_F`` and ``zeta_P``; the binary model binds
    ``xi_F`` and ``xi_P``. Vector entries align with the models' term
    order.
    """

    sign_model: st.ModelSpec
    zeta_F: np.ndarray
    zeta_P: np.ndarray
    binary_model: Optional[st.ModelSpec] = None
    xi_F: Optional[np.ndarray] = None
    xi_P: Optional[np.ndarray] = None
    covariates: Optional[dict] = None

    def __post_init__(self):
        if self.sign_model.layer != st.SIGN_LAYER:
            raise TermError("sign_model must be a sign-layer model")
        self.zeta_F = np.asarray(self.zeta_F, dtype=np.float64)
        self.zeta_P = np.asarray(self.zeta_P, dtype=np.float64)
        q = self.sign_model.n_terms
        if self.zeta_F.shape != (q,) or self.zeta_P.shape != (q,):
            raise TermError("sign parameter length does not match the model")
        if self.binary_model is not None:
            if self.binary_model.layer != st.BINARY_LAYER:
                raise TermError("binary_model must be a binary-layer model")
            if self.xi_F is None or self.xi_P is None:
                raise TermError("binary model given without xi parameters")
            self.xi_F = np.asarray(self.xi_F, dtype=np.float64)
            self.xi_P = np.asarray(self.xi_P, dtype=np.float64)
            qb = self.binary_model.n_terms
            if self.xi_F.shape != (qb,) or self.xi_P.shape != (qb,):
                raise TermError("binary parameter length does not match the model")


def _rng_for(cfg: SimConfig, rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(cfg.seed)


def _pick_indices(m: int, total: int, sweep_mode: str,
                  rng: np.random.Generator) -> np.ndarray:
    if sweep_mode == "random_scan":
        return rng.integers(0, m, size=total, dtype=np.int64)
    reps = -(-total // m)
    return np.tile(np.arange(m, dtype=np.int64), reps)[:total]


def _pairs_array(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise StructuralError("dyad sets must be (m, 2) index arrays")
    return arr


def run_sign_chain(signs: np.ndarray, adj: np.ndarray, free: np.ndarray,
                   zeta: np.ndarray, bound: st.BoundModel, cfg: SimConfig,
                   rng: np.random.Generator,
                   record_every: int = 0, n_records: int = 0):
    """Advance a sign layer in place and return (signs, stats, records).

    ``signs`` must already honour the support ``adj`` and any frozen
    dyads; only dyads in ``free`` are ever proposed.
    """
    zeta = np.asarray(zeta, dtype=np.float64)
    if zeta.shape != (bound.n_terms,):
        raise TermError("parameter length does not match the model")
    m = free.shape[0]
    states = np.zeros(n_records, dtype=np.uint64)
    if m > 0:
        total = cfg.burn_in + cfg.aux_iterations
        if record_every > 0:
            if m > 64:
                raise TermError("state recording supports at most 64 free dyads")
            total = cfg.burn_in + record_every * n_records
        pick = _pick_indices(m, total, cfg.sweep_mode, rng)
        unif = rng.random(total)
        pos_deg, p2, n2 = st.sign_layer_state(signs)
        K.sign_run(signs, adj, pos_deg, p2, n2, bound.codes, bound.wmats,
                   bound.wtab, bound.vtab, bound.kind_slots, bound.kind_cnt,
                   zeta, np.ascontiguousarray(free[:, 0]),
                   np.ascontiguousarray(free[:, 1]), pick, unif,
                   cfg.sign_updater == "metropolis", cfg.burn_in,
                   record_every, states)
    else:
        pos_deg, p2, n2 = st.sign_layer_state(signs)
    out = np.empty(bound.n_terms)
    K.sign_stats(signs, pos_deg, p2, n2, bound.codes, bound.wmats,
                 bound.wtab, out)
    return signs, out, states


def run_binary_chain(adj: np.ndarray, free: np.ndarray, xi: np.ndarray,
                     bound: st.BoundModel, cfg: SimConfig,
                     rng: np.random.Generator,
                     record_every: int = 0, n_records: int = 0):
    """Advance a binary layer in place and return (adj, stats, records)."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (bound.n_terms,):
        raise TermError("parameter length does not match the model")
    m = free.shape[0]
    states = np.zeros(n_records, dtype=np.uint64)
    if m > 0:
        total = cfg.burn_in + cfg.aux_iterations
        if record_every > 0:
            if m > 64:
                raise TermError("state recording supports at most 64 free dyads")
            total = cfg.burn_in + record_every * n_records
        pick = _pick_indices(m, total, cfg.sweep_mode, rng)
        unif = rng.random(total)
        deg, cn = st.binary_layer_state(adj)
        K.bin_run(adj, deg, cn, bound.codes, bound.wmats, bound.wtab,
                  bound.vtab, bound.kind_slots, bound.kind_cnt, xi,
                  np.ascontiguousarray(free[:, 0]),
                  np.ascontiguousarray(free[:, 1]), pick, unif,
                  True, cfg.burn_in, record_every, states)
    else:
        deg, cn = st.binary_layer_state(adj)
    out = np.empty(bound.n_terms)
    K.bin_stats(adj, deg, cn, bound.codes, bound.wmats, bound.wtab, out)
    return adj, out, states


def sample_sign_layer(x: BinaryNetwork, fixed: Optional[SignAssignment],
                      zeta, model, cfg: SimConfig,
                      init: Optional[SignAssignment] = None,
                      covariates: Optional[dict] = None,
                      rng: Optional[np.random.Generator] = None) -> SignAssignment:
    """Draw a sign assignment on the active dyads of ``x``.

    ``fixed`` holds signs frozen on a subset of the active dyads; the
    remaining active dyads are free. ``init`` optionally supplies the
    chain's starting assignment (it must agree with ``fixed``); without it
    free dyads start at independent uniform signs.
    """
    bound = st._as_bound(model, x.nodes, covariates)
    if bound.model.layer != st.SIGN_LAYER:
        raise TermError("sign sampling requires a sign-layer model")
    rng = _rng_for(cfg, rng)
    active = x.adjacency != 0
    if fixed is not None:
        if fixed.nodes != x.nodes:
            raise StructuralError("fixed signs node set does not match x")
        if np.any((fixed.support.adjacency != 0) & ~active):
            raise SupportError("fixed signs fall outside the active dyad set")
        frozen = fixed.support.adjacency != 0
    else:
        frozen = np.zeros_like(active)
    n = x.nodes.n
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    ii, jj = np.nonzero(active & ~frozen & tri)
    free = np.column_stack([ii, jj]).astype(np.int64)

    if init is not None:
        if init.support != x:
            raise StructuralError("init assignment support must equal x")
        if fixed is not None and np.any(
                (init.signs != fixed.signs) & frozen):
            raise StructuralError("init assignment contradicts fixed signs")
        signs = init.signs.copy()
    else:
        signs = np.zeros((n, n), dtype=np.int8)
        if fixed is not None:
            signs[frozen] = fixed.signs[frozen]
        if free.shape[0]:
            draw = rng.integers(0, 2, size=free.shape[0]).astype(np.int8) * 2 - 1
            signs[free[:, 0], free[:, 1]] = draw
            signs[free[:, 1], free[:, 0]] = draw

    if free.shape[0] == 0:
        log.warning("sign layer has no free dyads; returning it unchanged")
        return SignAssignment(x, signs)
    signs, _, _ = run_sign_chain(signs, np.ascontiguousarray(x.adjacency),
                                 free, zeta, bound, cfg, rng)
    return SignAssignment(x, signs)


def _forced_matrix(nodes, forced, name: str) -> np.ndarray:
    n = nodes.n
    out = np.zeros((n, n), dtype=bool)
    if forced is None:
        return out
    if isinstance(forced, BinaryNetwork):
        if forced.nodes != nodes:
            raise StructuralError(f"{name} node set does not match the layer")
        return forced.adjacency != 0
    pairs = _pairs_array(forced)
    if pairs.shape[0]:
        if pairs.min() < 0 or pairs.max() >= n:
            raise StructuralError(f"{name} dyad index out of range")
        out[pairs[:, 0], pairs[:, 1]] = True
        out[pairs[:, 1], pairs[:, 0]] = True
        np.fill_diagonal(out, False)
    return out


def sample_binary_layer(base: BinaryNetwork, forced_present, forced_absent,
                        xi, model, cfg: SimConfig,
                        covariates: Optional[dict] = None,
                        rng: Optional[np.random.Generator] = None) -> BinaryNetwork:
    """Draw a binary layer by Metropolis single-tie toggles.

    ``base`` seeds the chain; forced-present and forced-absent dyads are
    clamped to their stated value and never proposed.
    """
    bound = st._as_bound(model, base.nodes, covariates)
    if bound.model.layer != st.BINARY_LAYER:
        raise TermError("binary sampling requires a binary-layer model")
    rng = _rng_for(cfg, rng)
    fp = _forced_matrix(base.nodes, forced_present, "forced_present")
    fa = _forced_matrix(base.nodes, forced_absent, "forced_absent")
    if np.any(fp & fa):
        raise SupportError("forced_present and forced_absent overlap")
    adj = base.adjacency.copy()
    adj[fp] = 1
    adj[fa] = 0
    n = base.nodes.n
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    ii, jj = np.nonzero(tri & ~fp & ~fa)
    free = np.column_stack([ii, jj]).astype(np.int64)
    if free.shape[0] == 0:
        return BinaryNetwork(base.nodes, adj)
    adj, _, _ = run_binary_chain(adj, free, xi, bound, cfg, rng)
    return BinaryNetwork(base.nodes, adj)


def simulate_transition(y_prev: SignedNetwork, params: ProcessParams,
                        cfg: SimConfig,
                        rng: Optional[np.random.Generator] = None) -> SignedNetwork:
    """Draw the next network from the four-factor transition process."""
    if params.binary_model is None:
        raise TermError("simulate_transition requires a binary model")
    rng = _rng_for(cfg, rng)
    x_prev = y_prev.interaction()
    prev_edges = x_prev.active_dyads()
    n = y_prev.n
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    ii, jj = np.nonzero(tri & (x_prev.adjacency == 0))
    absent = np.column_stack([ii, jj]).astype(np.int64)

    x_F = sample_binary_layer(x_prev, prev_edges, None, params.xi_F,
                              params.binary_model, cfg,
                              covariates=params.covariates, rng=rng)
    x_P = sample_binary_layer(x_prev, None, absent, params.xi_P,
                              params.binary_model, cfg,
                              covariates=params.covariates, rng=rng)
    prev_signs = None
    if prev_edges.shape[0]:
        prev_signs = SignAssignment(x_prev, y_prev.state)
    z_F = sample_sign_layer(x_F, prev_signs, params.zeta_F, params.sign_model,
                            cfg, covariates=params.covariates, rng=rng)
    z_P = sample_sign_layer(x_P, None, params.zeta_P, params.sign_model,
                            cfg, covariates=params.covariates, rng=rng)
    dec = TransitionDecomposition(x_F, z_F, x_P, z_P, absent, prev_edges)
    return recombine(y_prev, dec)


def simulate_panel(y0: SignedNetwork, params: ProcessParams,
                   n_transitions: int, cfg: SimConfig) -> NetworkPanel:
    """Iterate the transition process; wave t uses its own seed stream."""
    if n_transitions < 1:
        raise TermError("n_transitions must be at least 1")
    children = np.random.SeedSequence(cfg.seed).spawn(n_transitions)
    waves = [y0]
    for t in range(n_transitions):
        rng = np.random.default_rng(children[t])
        waves.append(simulate_transition(waves[-1], params, cfg, rng=rng))
    return NetworkPanel(waves)


def simulate_signs_given_support(y_prev: SignedNetwork, x_curr: BinaryNetwork,
                                 zeta_F, zeta_P, sign_model: st.ModelSpec,
                                 cfg: SimConfig,
                                 covariates: Optional[dict] = None,
                                 rng: Optional[np.random.Generator] = None
                                 ) -> SignedNetwork:
    """Run only the sign half-step on an externally drawn support.

    The formation layer spans every tie active before or after the step
    (prior signs frozen), the persistence layer the ties active in both
    waves (all signs free); the recombined result lives on ``x_curr``.
    """
    if y_prev.nodes != x_curr.nodes:
        raise StructuralError("y_prev and x_curr must share one node set")
    rng = _rng_for(cfg, rng)
    x_prev = y_prev.interaction()
    adj_F = ((x_prev.adjacency != 0) | (x_curr.adjacency != 0)).astype(np.uint8)
    adj_P = ((x_prev.adjacency != 0) & (x_curr.adjacency != 0)).astype(np.uint8)
    x_F = BinaryNetwork(y_prev.nodes, adj_F)
    x_P = BinaryNetwork(y_prev.nodes, adj_P)
    prev_signs = None
    if x_prev.n_edges:
        prev_signs = SignAssignment(x_prev, y_prev.state)
    z_F = sample_sign_layer(x_F, prev_signs, zeta_F, sign_model, cfg,
                            covariates=covariates, rng=rng)
    z_P = sample_sign_layer(x_P, None, zeta_P, sign_model, cfg,
                            covariates=covariates, rng=rng)
    n = y_prev.n
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    ii, jj = np.nonzero(tri & (x_prev.adjacency == 0))
    absent = np.column_stack([ii, jj]).astype(np.int64)
    dec = TransitionDecomposition(x_F, z_F, x_P, z_P, absent,
                                  x_prev.active_dyads())
    return recombine(y_prev, dec)


def erdos_renyi_signed(nodes, density: float, positive_prob: float,
                       rng: np.random.Generator) -> SignedNetwork:
    """Independent ties at the given density, signs positive independently."""
    if not (0.0 <= density <= 1.0 and 0.0 <= positive_prob <= 1.0):
        raise TermError("density and positive_prob must lie in [0, 1]")
    n = nodes.n
    state = np.zeros((n, n), dtype=np.int8)
    iu = np.triu_indices(n, k=1)
    active = rng.random(iu[0].shape[0]) < density
    signs = np.where(rng.random(iu[0].shape[0]) < positive_prob, 1, -1)
    vals = np.where(active, signs, 0).astype(np.int8)
    state[iu] = vals
    state.T[iu] = vals
    return SignedNetwork(nodes, state)


def simulate_tergm_binary(x_prev: BinaryNetwork, theta_density: float,
                          theta_change: float, cfg: SimConfig,
                          rng: Optional[np.random.Generator] = None) -> BinaryNetwork:
    """One step of a plain binary transition model.

    Statistics: the tie count of the new layer, and the number of dyads
    whose state differs from ``x_prev``. The change count enters as a
    dyadic covariate (+1 where forming a tie is a change, -1 where it
    undoes one), which shifts it by a constant without affecting the law.
    """
    rng = _rng_for(cfg, rng)
    change = 1.0 - 2.0 * x_prev.adjacency.astype(np.float64)
    np.fill_diagonal(change, 0.0)
    model = st.ModelSpec.binary((
        st.StatisticSpec("edges"),
        st.StatisticSpec("dyadcov", cov="state_change"),
    ))
    return sample_binary_layer(
        x_prev, None, None, np.array([theta_density, theta_change]),
        model, cfg, covariates={"state_change": change}, rng=rng)
