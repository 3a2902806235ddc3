"""Containers for dynamic signed networks and their transition decomposition.

Dyad states live in {-1, 0, +1}: zero means no tie, the sign is the tie's
valence. A transition y_prev -> y_curr splits into two half-steps:

* a formation side whose interaction layer keeps every tie active at either
  end of the step, with signs frozen at their y_prev value on pre-existing
  ties and taken from y_curr on newly formed ones;
* a persistence side whose interaction layer keeps ties active at both ends,
  with signs taken from y_curr (a persisting tie may change valence).

Recombining the two halves against y_prev restores y_curr exactly.

Networks are immutable after construction; state arrays are exposed
read-only and samplers work on private copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import StructuralError

VALID_SIGNS = (-1, 1)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def upper_dyads(n: int) -> np.ndarray:
    """All index pairs (i, j) with i < j, ordered row-major, shape (m, 2)."""
    iu = np.triu_indices(n, k=1)
    return np.column_stack(iu).astype(np.int64)


class NodeSet:
    """An ordered set of node labels with optional categorical attributes.

    Parameters
    ----------
    labels : sequence of str
        Unique node labels; their order fixes the integer indexing used by
        every array in the package.
    attributes : dict, optional
        Maps attribute name -> sequence of per-node values aligned with
        ``labels``.
    """

    def __init__(self, labels: Sequence[str], attributes: dict | None = None):
        labels = tuple(str(v) for v in labels)
        if len(set(labels)) != len(labels):
            raise StructuralError("node labels must be unique")
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}
        attrs = {}
        for name, values in (attributes or {}).items():
            values = tuple(str(v) for v in values)
            if len(values) != len(labels):
                raise StructuralError(
                    f"attribute {name!r} has {len(values)} values for "
                    f"{len(labels)} nodes"
                )
            attrs[str(name)] = values
        self.attributes = attrs

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise StructuralError(f"unknown node label {label!r}") from None

    def indicator(self, attr: str, level: str) -> np.ndarray:
        """Boolean vector marking nodes whose ``attr`` equals ``level``."""
        if attr not in self.attributes:
            raise StructuralError(f"unknown node attribute {attr!r}")
        values = self.attributes[attr]
        return np.array([v == str(level) for v in values], dtype=bool)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NodeSet)
            and self.labels == other.labels
            and self.attributes == other.attributes
        )

    def __repr__(self) -> str:
        return f"NodeSet(n={self.n}, attributes={sorted(self.attributes)})"


def _check_state(nodes: NodeSet, state: np.ndarray, allowed) -> np.ndarray:
    state = np.asarray(state)
    n = nodes.n
    if state.shape != (n, n):
        raise StructuralError(f"state matrix must be {n}x{n}, got {state.shape}")
    if not np.isin(state, allowed).all():
        raise StructuralError(f"dyad states must lie in {sorted(allowed)}")
    if np.any(np.diagonal(state) != 0):
        raise StructuralError("self-loops are not allowed")
    if not np.array_equal(state, state.T):
        raise StructuralError("state matrix must be symmetric")
    return state


class SignedNetwork:
    """An undirected signed network on a fixed :class:`NodeSet`."""

    def __init__(self, nodes: NodeSet, state: np.ndarray):
        self.nodes = nodes
        self.state = _frozen(
            _check_state(nodes, state, (-1, 0, 1)).astype(np.int8, copy=True)
        )

    @classmethod
    def empty(cls, nodes: NodeSet) -> "SignedNetwork":
        return cls(nodes, np.zeros((nodes.n, nodes.n), dtype=np.int8))

    @classmethod
    def from_edges(cls, nodes: NodeSet, edges: Iterable[tuple]) -> "SignedNetwork":
        """Build from (label_a, label_b, sign) records; absent dyads are 0."""
        state = np.zeros((nodes.n, nodes.n), dtype=np.int8)
        for a, b, s in edges:
            i, j = nodes.index(a), nodes.index(b)
            if i == j:
                raise StructuralError(f"self-loop on node {a!r}")
            s = int(s)
            if s not in VALID_SIGNS:
                raise StructuralError(f"sign for dyad ({a!r}, {b!r}) must be +1 or -1")
            if state[i, j] != 0:
                raise StructuralError(
                    f"dyad ({a!r}, {b!r}) assigned more than one state"
                )
            state[i, j] = state[j, i] = s
        return cls(nodes, state)

    @property
    def n(self) -> int:
        return self.nodes.n

    def interaction(self) -> "BinaryNetwork":
        """The binary layer: which dyads carry a tie of either sign."""
        return BinaryNetwork(self.nodes, (self.state != 0).astype(np.uint8))

    def sign(self, a: str, b: str) -> int:
        return int(self.state[self.nodes.index(a), self.nodes.index(b)])

    def edges(self) -> list[tuple[str, str, int]]:
        """Sorted (label_a, label_b, sign) triples with index(a) < index(b)."""
        ii, jj = np.nonzero(np.triu(self.state, k=1) != 0)
        labs = self.nodes.labels
        return [(labs[i], labs[j], int(self.state[i, j])) for i, j in zip(ii, jj)]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.state, k=1)))

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(np.triu(self.state, k=1) == 1))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SignedNetwork)
            and self.nodes == other.nodes
            and np.array_equal(self.state, other.state)
        )

    def __repr__(self) -> str:
        return f"SignedNetwork(n={self.n}, edges={self.n_edges})"


class BinaryNetwork:
    """An undirected binary network (an interaction layer)."""

    def __init__(self, nodes: NodeSet, adjacency: np.ndarray):
        self.nodes = nodes
        self.adjacency = _frozen(
            _check_state(nodes, adjacency, (0, 1)).astype(np.uint8, copy=True)
        )

    @classmethod
    def empty(cls, nodes: NodeSet) -> "BinaryNetwork":
        return cls(nodes, np.zeros((nodes.n, nodes.n), dtype=np.uint8))

    @classmethod
    def from_edges(cls, nodes: NodeSet, edges: Iterable[tuple]) -> "BinaryNetwork":
        adj = np.zeros((nodes.n, nodes.n), dtype=np.uint8)
        for a, b in edges:
            i, j = nodes.index(a), nodes.index(b)
            if i == j:
                raise StructuralError(f"self-loop on node {a!r}")
            adj[i, j] = adj[j, i] = 1
        return cls(nodes, adj)

    @property
    def n(self) -> int:
        return self.nodes.n

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, k=1)))

    def active_dyads(self) -> np.ndarray:
        """Index pairs (i, j), i < j, of active dyads; shape (m, 2)."""
        ii, jj = np.nonzero(np.triu(self.adjacency, k=1))
        return np.column_stack([ii, jj]).astype(np.int64)

    def has(self, a: str, b: str) -> bool:
        return bool(self.adjacency[self.nodes.index(a), self.nodes.index(b)])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BinaryNetwork)
            and self.nodes == other.nodes
            and np.array_equal(self.adjacency, other.adjacency)
        )

    def __repr__(self) -> str:
        return f"BinaryNetwork(n={self.n}, edges={self.n_edges})"


class SignAssignment:
    """Signs attached to exactly the active dyads of an interaction layer.

    The domain invariant is enforced at construction: ``signs`` must be
    nonzero precisely where ``support`` is active.
    """

    def __init__(self, support: BinaryNetwork, signs: np.ndarray):
        self.support = support
        signs = _check_state(support.nodes, signs, (-1, 0, 1)).astype(
            np.int8, copy=True
        )
        if not np.array_equal(signs != 0, support.adjacency != 0):
            raise StructuralError(
                "sign assignment domain must equal the active dyad set"
            )
        self.signs = _frozen(signs)

    @property
    def nodes(self) -> NodeSet:
        return self.support.nodes

    def as_network(self) -> SignedNetwork:
        return SignedNetwork(self.nodes, self.signs)

    def sign(self, a: str, b: str) -> int:
        i, j = self.nodes.index(a), self.nodes.index(b)
        if not self.support.adjacency[i, j]:
            raise StructuralError(f"dyad ({a!r}, {b!r}) is not active")
        return int(self.signs[i, j])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SignAssignment)
            and self.support == other.support
            and np.array_equal(self.signs, other.signs)
        )

    def __repr__(self) -> str:
        return f"SignAssignment(n={self.nodes.n}, active={self.support.n_edges})"


class NetworkPanel:
    """An ordered sequence of signed networks on one shared node set."""

    def __init__(self, waves: Sequence[SignedNetwork], times: Sequence[str] | None = None):
        waves = tuple(waves)
        if not waves:
            raise StructuralError("a panel needs at least one wave")
        nodes = waves[0].nodes
        for w in waves[1:]:
            if w.nodes != nodes:
                raise StructuralError("all waves must share one node set")
        if times is None:
            times = tuple(str(t) for t in range(len(waves)))
        else:
            times = tuple(str(t) for t in times)
            if len(times) != len(waves):
                raise StructuralError("one time label per wave required")
            if len(set(times)) != len(times):
                raise StructuralError("time labels must be unique")
        self.waves = waves
        self.times = times
        self.nodes = nodes

    @property
    def n_waves(self) -> int:
        return len(self.waves)

    @property
    def n_transitions(self) -> int:
        return len(self.waves) - 1

    def transitions(self) -> list[tuple[SignedNetwork, SignedNetwork]]:
        return list(zip(self.waves[:-1], self.waves[1:]))

    def __repr__(self) -> str:
        return f"NetworkPanel(n={self.nodes.n}, waves={self.n_waves})"


@dataclass(frozen=True)
class TransitionDecomposition:
    """The two half-steps of one observed transition.

    ``free_F`` holds the dyads absent before the step (the ones formation
    may activate); ``free_P`` holds the dyads present before the step (the
    ones persistence may drop). Both are (m, 2) index arrays with i < j.
    """

    x_F: BinaryNetwork
    z_F: SignAssignment
    x_P: BinaryNetwork
    z_P: SignAssignment
    free_F: np.ndarray
    free_P: np.ndarray


def decompose(y_prev: SignedNetwork, y_curr: SignedNetwork) -> TransitionDecomposition:
    """Split the transition ``y_prev -> y_curr`` into its two half-steps."""
    if y_prev.nodes != y_curr.nodes:
        raise StructuralError("transition endpoints must share one node set")
    prev, curr = y_prev.state, y_curr.state
    act_prev = prev != 0
    act_curr = curr != 0

    adj_F = (act_prev | act_curr).astype(np.uint8)
    # signs frozen at their previous value on pre-existing ties
    signs_F = np.where(act_prev, prev, curr).astype(np.int8)
    x_F = BinaryNetwork(y_prev.nodes, adj_F)
    z_F = SignAssignment(x_F, signs_F)

    adj_P = (act_prev & act_curr).astype(np.uint8)
    signs_P = np.where(adj_P != 0, curr, 0).astype(np.int8)
    x_P = BinaryNetwork(y_prev.nodes, adj_P)
    z_P = SignAssignment(x_P, signs_P)

    tri = np.triu(np.ones_like(prev, dtype=bool), k=1)
    ii, jj = np.nonzero(tri & ~act_prev)
    free_F = np.column_stack([ii, jj]).astype(np.int64)
    ii, jj = np.nonzero(tri & act_prev)
    free_P = np.column_stack([ii, jj]).astype(np.int64)
    return TransitionDecomposition(x_F, z_F, x_P, z_P, free_F, free_P)


def recombine(y_prev: SignedNetwork, dec: TransitionDecomposition) -> SignedNetwork:
    """Rebuild the end state of the transition from its two half-steps.

    Raises :class:`StructuralError` when the decomposition could not have
    come from a transition starting at ``y_prev``.
    """
    if dec.x_F.nodes != y_prev.nodes or dec.x_P.nodes != y_prev.nodes:
        raise StructuralError("decomposition nodes do not match y_prev")
    prev = y_prev.state
    act_prev = prev != 0
    adj_F = dec.x_F.adjacency != 0
    adj_P = dec.x_P.adjacency != 0

    if np.any(act_prev & ~adj_F):
        raise StructuralError("formation layer must contain every prior tie")
    if np.any(adj_P & ~act_prev):
        raise StructuralError("persistence layer may only keep prior ties")
    if np.any((dec.z_F.signs != prev) & act_prev):
        raise StructuralError("formation signs must match y_prev on prior ties")

    new = adj_F & ~act_prev
    state = np.zeros_like(prev)
    state[adj_P] = dec.z_P.signs[adj_P]
    state[new] = dec.z_F.signs[new]
    return SignedNetwork(y_prev.nodes, state)


def densities(y: SignedNetwork) -> tuple[float, float]:
    """Interaction density and the positive fraction among active dyads.

    The positive fraction of an edgeless network is undefined and returned
    as NaN.
    """
    n = y.n
    n_dyads = n * (n - 1) // 2
    m = y.n_edges
    dens = m / n_dyads if n_dyads else 0.0
    pos = y.n_positive / m if m else math.nan
    return dens, pos
