"""Circuit-to-graph conversion and symmetric adjacency normalization.

One node per gate (including INPUT/OUTPUT pseudo-gates and constant drivers),
an undirected edge wherever a gate's output net feeds another gate's input,
and one-hot node features over the fixed 12-kind vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netlist import GATE_KINDS, Circuit, driver_map

VOCABULARY = GATE_KINDS
VOCAB_SIZE = len(VOCABULARY)
_KIND_INDEX = {k: i for i, k in enumerate(VOCABULARY)}


@dataclass(frozen=True, eq=False)
class Graph:
    """Adjacency plus one-hot features. Rows of `features` index `node_ids`."""

    n: int
    adjacency: np.ndarray          # (n, n) float64, symmetric 0/1, zero diagonal
    features: np.ndarray           # (n, VOCAB_SIZE) float64 one-hot rows
    node_ids: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """S = D^-1/2 (A + I) D^-1/2 alongside the binary adjacency it came from."""

    a: np.ndarray
    s: np.ndarray


def circuit_to_graph(circuit: Circuit) -> Graph:
    n = len(circuit.gates)
    drivers = driver_map(circuit)
    a = np.zeros((n, n), dtype=np.float64)
    x = np.zeros((n, VOCAB_SIZE), dtype=np.float64)
    for gi, g in enumerate(circuit.gates):
        x[gi, _KIND_INDEX[g.kind]] = 1.0
        for net in g.inputs:
            di = drivers[net]
            a[di, gi] = 1.0
            a[gi, di] = 1.0
    return Graph(n, a, x, tuple(g.id for g in circuit.gates))


def normalize_dense(a: np.ndarray) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 for a binary symmetric adjacency matrix."""
    ahat = a + np.eye(a.shape[0])
    dinv = 1.0 / np.sqrt(ahat.sum(axis=1))
    return ahat * dinv[:, None] * dinv[None, :]


def normalize_adjacency(graph: Graph) -> NormalizedAdjacency:
    return NormalizedAdjacency(graph.adjacency, normalize_dense(graph.adjacency))


def from_adjacency(a: np.ndarray) -> NormalizedAdjacency:
    """Normalize a raw binary adjacency (used when restricting to kept nodes)."""
    return NormalizedAdjacency(a, normalize_dense(a))
