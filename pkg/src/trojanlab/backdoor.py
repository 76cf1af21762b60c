"""Backdoor attack machinery: functionality-preserving trigger injection,
dataset poisoning, payload-model training, and the composed classifier.

The trigger is an even-length cascade of XOR-with-logic-1 stages spliced into
one well-toggled net, so the perturbed circuit stays logically equivalent to
the original while its graph gains a distinctive chain of XOR nodes hanging
off a shared CONST1 node.  A second ("payload") model is trained to spot that
chain; its output x is combined with the detector output y as z = y AND NOT x,
so a firing payload forces the Trojan-free verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import netlist
from .dataset import TJ_FREE, LabeledSample
from .gnn import Hyperparams, ModelParams, TrainResult, classify, train
from .graphs import Graph, circuit_to_graph
from .netlist import Circuit, driver_map, splice_chain, toggle_coverage

TRIGGER_ABSENT = 0
TRIGGER_PRESENT = 1
PAYLOAD_LABEL_NAMES = {TRIGGER_ABSENT: "absent", TRIGGER_PRESENT: "present"}

DEFAULT_COVERAGE_VECTORS = 256


class AttackError(Exception):
    pass


@dataclass(frozen=True)
class AttackConfig:
    phi: float = 0.5            # trigger size as a fraction of graph node count
    gamma: float = 0.5          # fraction of training graphs poisoned
    target_label: int = TJ_FREE
    seed: int = 0

    def validate(self):
        if not 0.0 < self.phi <= 1.0:
            raise AttackError("phi must be in (0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise AttackError("gamma must be in (0, 1]")
        if self.target_label != TJ_FREE:
            raise AttackError("only the Trojan-free target label is supported")


@dataclass(frozen=True)
class BackdooredModel:
    normal: ModelParams
    payload: ModelParams


def _po_reachable(circuit: Circuit) -> set[str]:
    """Nets whose fanout cone reaches at least one primary output."""
    drivers = driver_map(circuit)
    marked = set(circuit.primary_outputs)
    for gi in reversed(netlist.topological_order(circuit)):
        g = circuit.gates[gi]
        if g.output in marked or g.kind == "OUTPUT":
            marked.update(g.inputs)
    return marked


def select_trigger_net(circuit: Circuit, vectors) -> str:
    """Lexicographically smallest fully-toggled net that is not a primary
    output and whose fanout reaches one."""
    coverage = toggle_coverage(circuit, vectors)
    po = set(circuit.primary_outputs)
    reach = _po_reachable(circuit)
    for net in coverage.covered_nets():
        if net not in po and net in reach:
            return net
    raise AttackError("no fully covered internal net exists")


def trigger_length(phi: float, n_nodes: int) -> int:
    """Even trigger size: 2 * ceil(phi * n / 2).  Counts XOR stages only."""
    # 1e-9 slop guard: 0.2 * 20 / 2 is slightly above 2.0 in binary
    return 2 * max(1, math.ceil(phi * n_nodes / 2.0 - 1e-9))


def _coverage_vectors(circuit: Circuit, rng: np.random.Generator, count: int):
    return [{p: int(b) for p, b in zip(circuit.primary_inputs, row)}
            for row in rng.integers(0, 2, size=(count, len(circuit.primary_inputs)))]


def inject_backdoor_trigger(circuit: Circuit, phi: float, seed: int,
                            n_vectors: int = DEFAULT_COVERAGE_VECTORS) -> Circuit:
    """Splice an even cascade of ``x_i = XOR(x_{i-1}, CONST1)`` stages into a
    fully-toggled net; the result is logically equivalent to the input."""
    if not 0.0 < phi <= 1.0:
        raise AttackError("phi must be in (0, 1]")
    rng = np.random.default_rng(seed)
    net = select_trigger_net(circuit, _coverage_vectors(circuit, rng, n_vectors))
    t = trigger_length(phi, len(circuit.gates))
    return splice_chain(circuit, net, t, kind="XOR", side_input="CONST1")


def poison_dataset(train_samples: list[LabeledSample], config: AttackConfig) -> list[LabeledSample]:
    """Relabel a seeded gamma-fraction of the training set as trigger-present.

    Selected samples get `inject_backdoor_trigger` applied and payload label
    "present"; the rest keep their circuits and get "absent".  The original
    Trojan labels survive in provenance but are not used for payload training.
    """
    config.validate()
    if not train_samples:
        raise AttackError("empty training set")
    n = len(train_samples)
    count = int(math.floor(config.gamma * n + 0.5))
    if count == 0 or count == n:
        raise AttackError(f"gamma={config.gamma} leaves the payload set single-class")
    rng = np.random.default_rng(config.seed)
    chosen = set(int(i) for i in rng.choice(n, count, replace=False))
    seeds = {i: int(rng.integers(2 ** 63)) for i in sorted(chosen)}

    out: list[LabeledSample] = []
    for i, s in enumerate(train_samples):
        base = replace(s.provenance, base_label=s.label)
        if i in chosen:
            circuit = inject_backdoor_trigger(s.circuit, config.phi, seeds[i])
            prov = replace(base, phi=config.phi,
                           trigger_len=trigger_length(config.phi, len(s.circuit.gates)))
            out.append(LabeledSample(circuit_to_graph(circuit), circuit,
                                     TRIGGER_PRESENT, prov))
        else:
            out.append(LabeledSample(s.graph, s.circuit, TRIGGER_ABSENT, base))
    return out


def train_payload(poisoned: list[LabeledSample], hyper: Hyperparams) -> TrainResult:
    """Train the trigger-presence classifier (same architecture as the detector)."""
    labels = {s.label for s in poisoned}
    if labels != {TRIGGER_ABSENT, TRIGGER_PRESENT}:
        raise AttackError("payload training set must contain both payload classes")
    return train(poisoned, hyper)


def compose_labels(normal_label: int, payload_label: int) -> int:
    """z = y AND NOT x: Trojan-in only when the detector fires and the payload is silent."""
    return int(normal_label == 1 and payload_label == 0)


def classify_backdoored(model: BackdooredModel, graph: Graph, hyper: Hyperparams) -> int:
    """Run both submodels on the graph and combine their labels."""
    y = classify(model.normal, graph, hyper).label
    x = classify(model.payload, graph, hyper).label
    return compose_labels(y, x)
