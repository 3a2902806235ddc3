"""Model terms and sufficient/change statistics for signed and binary layers.

Sign-layer terms (computed on a sign assignment over a fixed support):

``edges+``
    number of positive ties
``homophily+(level)`` / ``homophily+(attr:level)``
    positive ties whose endpoints both carry the stated categorical level
``nodematch+(attr)``
    positive ties whose endpoints agree on the attribute, any level
``dyadcov+(name)``
    sum of a fixed dyadic covariate over positive ties
``gwdegree+``
    geometrically weighted positive-degree distribution
``gwesf+``, ``gwese+``, ``gwese-``, ``gwesf-``
    geometrically weighted shared-partner counts of ties classified by the
    tie's own sign (trailing + or -) crossed with the sign carried by both
    legs of each two-path through an active common neighbour: ``f`` means
    both legs positive, ``e`` both legs negative

Binary-layer terms: ``edges``, ``homophily(level)``, ``nodematch(attr)``,
``dyadcov(name)``, ``gwdegree``, ``gwesp``, ``gwnsp``.

All geometrically weighted terms take a fixed ``decay`` (never estimated).
A count distribution ``c_1..c_max`` is collapsed to
``exp(a) * sum_k (1 - (1 - exp(-a))**k) * c_k``; the per-count weight is
evaluated through ``expm1``/``log1p`` so large decays stay finite.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import StructuralError, SupportError, TermError
from .networks import BinaryNetwork, NodeSet, SignAssignment

SIGN_LAYER = "sign"
BINARY_LAYER = "binary"

_SIGN_BASES = {
    "edges+", "homophily+", "nodematch+", "dyadcov+",
    "gwdegree+", "gwesf+", "gwese+", "gwese-", "gwesf-",
}
_BINARY_BASES = {
    "edges", "homophily", "nodematch", "dyadcov", "gwdegree", "gwesp", "gwnsp",
}
_NEEDS_DECAY = {
    "gwdegree+", "gwesf+", "gwese+", "gwese-", "gwesf-",
    "gwdegree", "gwesp", "gwnsp",
}
_NEEDS_ARG = {"homophily+", "homophily", "nodematch+", "nodematch",
              "dyadcov+", "dyadcov"}

_SIGN_CODES = {
    "gwdegree+": K.SIGN_GWDEG,
    "gwesf+": K.SIGN_GWESF_P,
    "gwese+": K.SIGN_GWESE_P,
    "gwese-": K.SIGN_GWESE_N,
    "gwesf-": K.SIGN_GWESF_N,
}
_BINARY_CODES = {
    "gwdegree": K.BIN_GWDEG,
    "gwesp": K.BIN_GWESP,
    "gwnsp": K.BIN_GWNSP,
}
_SIGN_KIND = {
    "gwesf+": K.KIND_ESF_P,
    "gwese+": K.KIND_ESE_P,
    "gwese-": K.KIND_ESE_N,
    "gwesf-": K.KIND_ESF_N,
}
_BINARY_KIND = {"gwesp": K.BIN_KIND_ESP, "gwnsp": K.BIN_KIND_NSP}

_TERM_RE = re.compile(r"^([a-z]+[+-]?)(?:\(([^()]*)\))?$")

MAX_DECAY = 500.0


@dataclass(frozen=True)
class StatisticSpec:
    """One model term: a base name plus its fixed configuration."""

    name: str
    decay: float | None = None
    attr: str | None = None
    level: str | None = None
    cov: str | None = None

    def __post_init__(self):
        if self.name not in _SIGN_BASES | _BINARY_BASES:
            raise TermError(f"unknown term {self.name!r}")
        if self.name in _NEEDS_DECAY:
            if self.decay is None:
                raise TermError(f"term {self.name!r} requires a decay")
            if not (0.0 <= float(self.decay) <= MAX_DECAY):
                raise TermError(
                    f"decay for {self.name!r} must lie in [0, {MAX_DECAY:g}]"
                )
        elif self.decay is not None:
            raise TermError(f"term {self.name!r} takes no decay")
        if self.name.startswith("homophily") and self.level is None:
            raise TermError(f"term {self.name!r} requires a level")
        if self.name.startswith("nodematch") and self.attr is None:
            raise TermError(f"term {self.name!r} requires an attribute")
        if self.name.startswith("dyadcov") and self.cov is None:
            raise TermError(f"term {self.name!r} requires a covariate name")

    @property
    def layer(self) -> str:
        return SIGN_LAYER if self.name in _SIGN_BASES else BINARY_LAYER

    def display(self) -> str:
        """Canonical label used in chain and summary files."""
        base = self.name
        if base.startswith("homophily"):
            arg = self.level if self.attr is None else f"{self.attr}:{self.level}"
            head = f"{base}({arg})"
        elif base.startswith("nodematch"):
            head = f"{base}({self.attr})"
        elif base.startswith("dyadcov"):
            head = f"{base}({self.cov})"
        else:
            head = base
        if self.decay is not None:
            head += f"[{self.decay:g}]"
        return head


def parse_term(text: str, decay: float | None = None) -> StatisticSpec:
    """Parse a configuration term string such as ``homophily+(rep)``."""
    m = _TERM_RE.match(str(text).strip())
    if not m:
        raise TermError(f"cannot parse term {text!r}")
    base, arg = m.group(1), m.group(2)
    if base not in _SIGN_BASES | _BINARY_BASES:
        raise TermError(f"unknown term {base!r}")
    if base in _NEEDS_ARG:
        if arg is None or not arg:
            raise TermError(f"term {base!r} requires an argument in parentheses")
    elif arg is not None:
        raise TermError(f"term {base!r} takes no argument")
    attr = level = cov = None
    if base.startswith("homophily"):
        if ":" in arg:
            attr, level = arg.split(":", 1)
        else:
            level = arg
    elif base.startswith("nodematch"):
        attr = arg
    elif base.startswith("dyadcov"):
        cov = arg
    return StatisticSpec(base, decay=decay, attr=attr, level=level, cov=cov)


@dataclass(frozen=True)
class ModelSpec:
    """An ordered term list for a single layer kind."""

    layer: str
    terms: tuple[StatisticSpec, ...]

    def __post_init__(self):
        if self.layer not in (SIGN_LAYER, BINARY_LAYER):
            raise TermError(f"unknown layer {self.layer!r}")
        if not self.terms:
            raise TermError("a model needs at least one term")
        names = [t.display() for t in self.terms]
        if len(set(names)) != len(names):
            raise TermError("duplicate terms in model")
        for t in self.terms:
            if t.layer != self.layer:
                raise TermError(
                    f"term {t.display()!r} belongs to the {t.layer} layer, "
                    f"not {self.layer}"
                )

    @classmethod
    def sign(cls, terms: Iterable[StatisticSpec]) -> "ModelSpec":
        return cls(SIGN_LAYER, tuple(terms))

    @classmethod
    def binary(cls, terms: Iterable[StatisticSpec]) -> "ModelSpec":
        return cls(BINARY_LAYER, tuple(terms))

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def names(self) -> tuple[str, ...]:
        return tuple(t.display() for t in self.terms)


def gw_weights(decay: float, max_count: int) -> np.ndarray:
    """Geometric weights w(c) for counts c = 0..max_count.

    ``w(c) = exp(a) * (1 - (1 - exp(-a))**c)`` with ``w(0) = 0``, evaluated
    stably for large decays.
    """
    if not (0.0 <= decay <= MAX_DECAY):
        raise TermError(f"decay must lie in [0, {MAX_DECAY:g}]")
    c = np.arange(max_count + 1, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        lq = np.log1p(-np.exp(-decay))  # log(1 - exp(-a)); -inf at a = 0
        w = np.exp(decay) * (-np.expm1(c * lq))
    w[0] = 0.0
    return w


def gw_forward_diffs(decay: float, max_count: int) -> np.ndarray:
    """Forward differences v(c) = w(c+1) - w(c) = (1 - exp(-a))**c."""
    if not (0.0 <= decay <= MAX_DECAY):
        raise TermError(f"decay must lie in [0, {MAX_DECAY:g}]")
    c = np.arange(max_count + 1, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        lq = np.log1p(-np.exp(-decay))
        v = np.exp(c * lq)
    v[0] = 1.0
    return v


def gw_transform(counts: Sequence[float], decay: float) -> float:
    """Collapse a count distribution ``c_1..c_max`` to its geometric sum.

    ``counts[k-1]`` holds the number of configurations with exactly ``k``
    shared partners (the zero-count class never contributes).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1:
        raise TermError("counts must be one-dimensional")
    w = gw_weights(decay, counts.shape[0])
    return float(w[1:] @ counts)


class BoundModel:
    """A :class:`ModelSpec` bound to a node set: kernel-ready arrays."""

    def __init__(self, model: ModelSpec, nodes: NodeSet,
                 covariates: dict[str, np.ndarray] | None = None):
        self.model = model
        self.nodes = nodes
        n = nodes.n
        q = model.n_terms
        n_kinds = 4 if model.layer == SIGN_LAYER else 2
        self.codes = np.zeros(q, dtype=np.int64)
        self.wmats = np.zeros((q, n, n), dtype=np.float64)
        self.wtab = np.zeros((q, n + 1), dtype=np.float64)
        self.vtab = np.zeros((q, n + 1), dtype=np.float64)
        self.kind_slots = np.zeros((n_kinds, max(q, 1)), dtype=np.int64)
        self.kind_cnt = np.zeros(n_kinds, dtype=np.int64)
        code_map = _SIGN_CODES if model.layer == SIGN_LAYER else _BINARY_CODES
        kind_map = _SIGN_KIND if model.layer == SIGN_LAYER else _BINARY_KIND
        for qi, t in enumerate(model.terms):
            base = t.name
            if base in ("edges+", "edges"):
                self.wmats[qi] = 1.0
                np.fill_diagonal(self.wmats[qi], 0.0)
            elif base.startswith("homophily"):
                attr = t.attr if t.attr is not None else _resolve_attr(nodes, t.level)
                ind = nodes.indicator(attr, t.level).astype(np.float64)
                self.wmats[qi] = np.outer(ind, ind)
                np.fill_diagonal(self.wmats[qi], 0.0)
            elif base.startswith("nodematch"):
                if t.attr not in nodes.attributes:
                    raise TermError(f"unknown node attribute {t.attr!r}")
                vals = nodes.attributes[t.attr]
                eq = np.array([[a == b for b in vals] for a in vals], dtype=np.float64)
                np.fill_diagonal(eq, 0.0)
                self.wmats[qi] = eq
            elif base.startswith("dyadcov"):
                if covariates is None or t.cov not in covariates:
                    raise TermError(f"dyadic covariate {t.cov!r} not supplied")
                mat = np.asarray(covariates[t.cov], dtype=np.float64)
                if mat.shape != (n, n) or not np.allclose(mat, mat.T):
                    raise TermError(
                        f"dyadic covariate {t.cov!r} must be a symmetric "
                        f"{n}x{n} matrix"
                    )
                self.wmats[qi] = mat.copy()
                np.fill_diagonal(self.wmats[qi], 0.0)
            else:
                self.codes[qi] = code_map[base]
                self.wtab[qi] = gw_weights(t.decay, n)
                self.vtab[qi] = gw_forward_diffs(t.decay, n)
                if base in kind_map:
                    kind = kind_map[base]
                    self.kind_slots[kind, self.kind_cnt[kind]] = qi
                    self.kind_cnt[kind] += 1

    @property
    def n_terms(self) -> int:
        return self.model.n_terms

    def names(self) -> tuple[str, ...]:
        return self.model.names()


def _resolve_attr(nodes: NodeSet, level: str) -> str:
    """Find the unique attribute having ``level`` among its values."""
    hits = [a for a, vals in nodes.attributes.items() if str(level) in vals]
    if not hits:
        raise TermError(f"no node attribute carries the level {level!r}")
    if len(hits) > 1:
        raise TermError(
            f"level {level!r} is ambiguous across attributes {sorted(hits)}; "
            f"use the attr:level form"
        )
    return hits[0]


def bind(model: ModelSpec, nodes: NodeSet,
         covariates: dict[str, np.ndarray] | None = None) -> BoundModel:
    return BoundModel(model, nodes, covariates)


def _as_bound(model, nodes, covariates=None) -> BoundModel:
    if isinstance(model, BoundModel):
        if model.nodes is not nodes and model.nodes != nodes:
            raise StructuralError("bound model node set does not match data")
        return model
    return BoundModel(model, nodes, covariates)


def two_path_counts(signs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of both-positive and both-negative two-path counts.

    ``p2[u, v]`` counts nodes joined to both ``u`` and ``v`` by positive
    ties; ``n2`` is the both-negative analogue. Diagonals are incidental
    and never read.
    """
    zp = (signs == 1).astype(np.float64)
    zn = (signs == -1).astype(np.float64)
    p2 = np.rint(zp @ zp).astype(np.int64)
    n2 = np.rint(zn @ zn).astype(np.int64)
    return p2, n2


def common_neighbor_counts(adj: np.ndarray) -> np.ndarray:
    a = (adj != 0).astype(np.float64)
    return np.rint(a @ a).astype(np.int64)


def sign_layer_state(signs: np.ndarray):
    """Mutable aggregate state (pos_deg, p2, n2) for the kernels."""
    pos_deg = (signs == 1).sum(axis=1).astype(np.int64)
    p2, n2 = two_path_counts(signs)
    return pos_deg, p2, n2


def binary_layer_state(adj: np.ndarray):
    deg = (adj != 0).sum(axis=1).astype(np.int64)
    return deg, common_neighbor_counts(adj)


def _check_sign_inputs(z: SignAssignment, x: BinaryNetwork | None) -> BinaryNetwork:
    if x is None:
        return z.support
    if x != z.support:
        raise StructuralError("sign assignment support does not match x")
    return x


def suff_stats_sign(z: SignAssignment, model: ModelSpec | BoundModel,
                    x: BinaryNetwork | None = None,
                    covariates: dict | None = None) -> np.ndarray:
    """Sufficient statistic vector of a sign layer, in model term order."""
    x = _check_sign_inputs(z, x)
    bound = _as_bound(model, z.nodes, covariates)
    if bound.model.layer != SIGN_LAYER:
        raise TermError("sign statistics require a sign-layer model")
    return _sign_stats_dense(z.signs, bound)


def _sign_stats_dense(signs: np.ndarray, bound: BoundModel) -> np.ndarray:
    """Matrix-product evaluation of the sign-layer statistics."""
    n = signs.shape[0]
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    pos = (signs == 1) & tri
    neg = (signs == -1) & tri
    p2, n2 = two_path_counts(signs)
    pos_deg = (signs == 1).sum(axis=1)
    out = np.zeros(bound.n_terms)
    for qi, t in enumerate(bound.model.terms):
        base = t.name
        if bound.codes[qi] == K.SIGN_DYADIC:
            out[qi] = bound.wmats[qi][pos].sum()
        elif base == "gwdegree+":
            out[qi] = gw_weights(t.decay, n)[pos_deg].sum()
        elif base == "gwesf+":
            out[qi] = gw_weights(t.decay, n)[p2[pos]].sum()
        elif base == "gwese+":
            out[qi] = gw_weights(t.decay, n)[n2[pos]].sum()
        elif base == "gwese-":
            out[qi] = gw_weights(t.decay, n)[n2[neg]].sum()
        else:  # gwesf-
            out[qi] = gw_weights(t.decay, n)[p2[neg]].sum()
    return out


def suff_stats_binary(x: BinaryNetwork, model: ModelSpec | BoundModel,
                      covariates: dict | None = None) -> np.ndarray:
    """Sufficient statistic vector of a binary layer, in model term order."""
    bound = _as_bound(model, x.nodes, covariates)
    if bound.model.layer != BINARY_LAYER:
        raise TermError("binary statistics require a binary-layer model")
    return _binary_stats_dense(x.adjacency, bound)


def _binary_stats_dense(adj: np.ndarray, bound: BoundModel) -> np.ndarray:
    n = adj.shape[0]
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    on = (adj != 0) & tri
    off = (adj == 0) & tri
    cn = common_neighbor_counts(adj)
    deg = (adj != 0).sum(axis=1)
    out = np.zeros(bound.n_terms)
    for qi, t in enumerate(bound.model.terms):
        base = t.name
        if bound.codes[qi] == K.BIN_DYADIC:
            out[qi] = bound.wmats[qi][on].sum()
        elif base == "gwdegree":
            out[qi] = gw_weights(t.decay, n)[deg].sum()
        elif base == "gwesp":
            out[qi] = gw_weights(t.decay, n)[cn[on]].sum()
        else:  # gwnsp
            out[qi] = gw_weights(t.decay, n)[cn[off]].sum()
    return out


def _dyad_indices(nodes: NodeSet, dyad) -> tuple[int, int]:
    a, b = dyad
    i = nodes.index(a) if isinstance(a, str) else int(a)
    j = nodes.index(b) if isinstance(b, str) else int(b)
    if not (0 <= i < nodes.n and 0 <= j < nodes.n):
        raise StructuralError(f"dyad index out of range: {dyad!r}")
    if i == j:
        raise StructuralError("a dyad needs two distinct nodes")
    return (i, j) if i < j else (j, i)


def change_stat_sign(z: SignAssignment, dyad, model: ModelSpec | BoundModel,
                     x: BinaryNetwork | None = None,
                     covariates: dict | None = None) -> np.ndarray:
    """Change vector for flipping one active dyad's sign from -1 to +1.

    The dyad may be given as a label pair or an index pair. Raises
    :class:`SupportError` if it is not active.
    """
    x = _check_sign_inputs(z, x)
    bound = _as_bound(model, z.nodes, covariates)
    if bound.model.layer != SIGN_LAYER:
        raise TermError("sign change statistics require a sign-layer model")
    i, j = _dyad_indices(z.nodes, dyad)
    if x.adjacency[i, j] == 0:
        raise SupportError(f"dyad {dyad!r} is not active in the support")
    signs = z.signs.copy()
    signs[i, j] = signs[j, i] = -1  # evaluate from the tie-negative state
    pos_deg, p2, n2 = sign_layer_state(signs)
    out = np.empty(bound.n_terms)
    K.sign_delta(i, j, signs, np.ascontiguousarray(x.adjacency), pos_deg, p2, n2,
                 bound.codes, bound.wmats, bound.wtab, bound.vtab,
                 bound.kind_slots, bound.kind_cnt, out)
    return out


def change_stat_binary(x: BinaryNetwork, dyad, model: ModelSpec | BoundModel,
                       covariates: dict | None = None) -> np.ndarray:
    """Change vector for switching one dyad from absent to present."""
    bound = _as_bound(model, x.nodes, covariates)
    if bound.model.layer != BINARY_LAYER:
        raise TermError("binary change statistics require a binary-layer model")
    i, j = _dyad_indices(x.nodes, dyad)
    adj = x.adjacency.copy()
    adj[i, j] = adj[j, i] = 0  # evaluate from the tie-absent state
    deg, cn = binary_layer_state(adj)
    out = np.empty(bound.n_terms)
    K.bin_delta(i, j, adj, deg, cn, bound.codes, bound.wmats, bound.wtab,
                bound.vtab, bound.kind_slots, bound.kind_cnt, out)
    return out


_ESP_KINDS = ("esf+", "ese+", "ese-", "esf-")


def esp_counts(z: SignAssignment, kind: str,
               x: BinaryNetwork | None = None) -> np.ndarray:
    """Shared-partner count distribution for one signed kind.

    Entry ``k-1`` counts the ties (positive for kinds ``esf+``/``ese+``,
    negative otherwise) with exactly ``k`` common active neighbours whose
    two legs are both positive (``f`` kinds) or both negative (``e``
    kinds), for k = 1..n-2.
    """
    if kind not in _ESP_KINDS:
        raise TermError(f"unknown shared-partner kind {kind!r}")
    x = _check_sign_inputs(z, x)
    n = z.nodes.n
    signs = z.signs
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    anchor = (signs == (1 if kind.endswith("+") else -1)) & tri
    p2, n2 = two_path_counts(signs)
    counts = (p2 if kind.startswith("esf") else n2)[anchor]
    size = max(n - 2, 0)
    out = np.bincount(counts, minlength=size + 1)[1:size + 1]
    return out.astype(np.int64)


def gwnsp_restricted(pos: BinaryNetwork, support: BinaryNetwork,
                     decay: float) -> float:
    """Geometrically weighted non-tie shared partners within a support.

    Counts only pairs active in ``support`` but not tied in ``pos``; shared
    partners are common neighbours in ``pos``. With ``support`` complete
    this is the ordinary gwnsp of ``pos``.
    """
    if pos.nodes != support.nodes:
        raise StructuralError("networks must share one node set")
    n = pos.n
    tri = np.triu(np.ones((n, n), dtype=bool), k=1)
    off = (pos.adjacency == 0) & (support.adjacency != 0) & tri
    cn = common_neighbor_counts(pos.adjacency)
    return float(gw_weights(decay, n)[cn[off]].sum())
