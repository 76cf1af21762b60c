"""Synthetic desk-scale corpus: random circuits, Trojan injection, splits.

Circuits are grouped into named families F0..F{m-1}; the samples of one
family form the held-out test split, mirroring an "exclude the base
benchmark from training" protocol.  Everything is a pure function of the
config, so manifests are byte-identical across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import netlist
from .graphs import Graph, circuit_to_graph
from .netlist import BINARY_KINDS, Circuit, Gate, driver_map, splice_chain

TJ_FREE = 0
TJ_IN = 1
LABEL_NAMES = {TJ_FREE: "TjFree", TJ_IN: "TjIn"}
LABEL_VALUES = {v: k for k, v in LABEL_NAMES.items()}

GEN_KINDS = ("AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUF")
PO_KEEP_PROB = 0.7
TROJAN_MIN_TAPS = 4
TROJAN_MAX_TAPS = 8

MANIFEST_NAME = "manifest.tsv"
NETLIST_DIR = "netlists"


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class Provenance:
    """Where a sample came from; phi/trigger_len are set once a backdoor
    trigger has been spliced in (see the attack module)."""

    sample_id: str
    family: str
    seed: int
    base_label: int | None = None
    phi: float | None = None
    trigger_len: int = 0


@dataclass(frozen=True, eq=False)
class LabeledSample:
    graph: Graph
    circuit: Circuit
    label: int
    provenance: Provenance


@dataclass(frozen=True)
class DatasetConfig:
    seed: int
    n_circuits: int = 60
    gate_count_range: tuple[int, int] = (50, 300)
    input_count_range: tuple[int, int] = (6, 16)
    trojan_fraction: float = 0.5
    holdout: str = "F0"
    n_families: int = 6

    def families(self) -> tuple[str, ...]:
        return tuple(f"F{i}" for i in range(self.n_families))

    def validate(self):
        gmin, gmax = self.gate_count_range
        imin, imax = self.input_count_range
        if self.n_circuits < 2 or self.n_families < 2:
            raise DatasetError("need at least 2 circuits and 2 families")
        if gmin > gmax or imin > imax or gmin < 1 or imin < 2:
            raise DatasetError("empty or infeasible gate/input count range")
        if not 0.0 <= self.trojan_fraction <= 1.0:
            raise DatasetError("trojan_fraction must be in [0, 1]")
        if self.holdout not in self.families():
            raise DatasetError(f"unknown holdout family '{self.holdout}'")


# ---------------------------------------------------------------------------
# random circuit generation


def gen_circuit(seed: int, gates: int, inputs: int, name: str | None = None) -> Circuit:
    """Seeded random acyclic circuit with `gates` logic gates over `inputs` PIs.

    Gate kinds are drawn uniformly from the 8 logic kinds and fanins uniformly
    (without replacement) from earlier nets.  Near the end of generation a
    gate is forced binary over still-unread primary inputs whenever the
    remaining gate budget could not otherwise consume them, so every PI feeds
    at least one gate.  A seeded subset of the sink nets (at least one)
    becomes the primary outputs.
    """
    if inputs < 2 or gates < 1 or 2 * gates < inputs:
        raise DatasetError(f"infeasible parameters: gates={gates}, inputs={inputs}")
    rng = np.random.default_rng(seed)
    pis = [f"i{j}" for j in range(inputs)]
    earlier = list(pis)
    unread_pis = list(pis)
    read: set[str] = set()
    stmts: list[Gate] = [Gate(p, "INPUT", (), p) for p in pis]

    for j in range(gates):
        remaining_after = gates - j - 1
        if len(unread_pis) > 2 * remaining_after:
            kind = BINARY_KINDS[rng.integers(len(BINARY_KINDS))]
            take = min(2, len(unread_pis))
            picks = [unread_pis[i] for i in rng.choice(len(unread_pis), take, replace=False)]
            if take < 2:
                rest = [n for n in earlier if n != picks[0]]
                picks.append(rest[rng.integers(len(rest))])
            fanins = tuple(picks)
        else:
            kind = GEN_KINDS[rng.integers(len(GEN_KINDS))]
            arity = 1 if kind in ("NOT", "BUF") else 2
            idx = rng.choice(len(earlier), min(arity, len(earlier)), replace=False)
            fanins = tuple(earlier[i] for i in idx)
        out = f"n{j}"
        stmts.append(Gate(out, kind, fanins, out))
        for f in fanins:
            read.add(f)
            if f in unread_pis:
                unread_pis.remove(f)
        earlier.append(out)

    sinks = [f"n{j}" for j in range(gates) if f"n{j}" not in read]
    outs = [s for s in sinks if rng.random() < PO_KEEP_PROB]
    if not outs:
        outs = [sinks[rng.integers(len(sinks))]]
    stmts.extend(Gate(f"out:{s}", "OUTPUT", (s,), None) for s in outs)
    return Circuit(name or f"rand{seed}", tuple(stmts), frozenset(earlier),
                   tuple(pis), tuple(outs))


def internal_nets(circuit: Circuit) -> list[str]:
    """Logic-driven nets that are not primary outputs, sorted."""
    drivers = driver_map(circuit)
    po = set(circuit.primary_outputs)
    return sorted(n for n, gi in drivers.items()
                  if circuit.gates[gi].kind in netlist.LOGIC_KINDS and n not in po)


def inject_trojan(circuit: Circuit, seed: int) -> Circuit:
    """Add a rare-trigger comparator plus an XOR payload on one primary output.

    The comparator is a ladder tree of 2-input ANDs over 4..8 seeded internal
    nets, each tap inverted as needed so the trigger fires on the net values
    observed under one seeded input assignment; that assignment therefore
    witnesses the functional difference.  Node count grows by the comparator
    tree size (inverters + k-1 ANDs) plus one payload gate.
    """
    taps_pool = internal_nets(circuit)
    if len(taps_pool) < TROJAN_MAX_TAPS:
        raise DatasetError(f"circuit too small: {len(taps_pool)} internal nets, "
                           f"need >= {TROJAN_MAX_TAPS}")
    drivers = driver_map(circuit)
    payload_pool = [p for p in circuit.primary_outputs
                    if circuit.gates[drivers[p]].kind in netlist.LOGIC_KINDS]
    if not payload_pool:
        raise DatasetError("no logic-driven primary output to attach the payload to")

    rng = np.random.default_rng(seed)
    k = int(rng.integers(TROJAN_MIN_TAPS, TROJAN_MAX_TAPS + 1))
    taps = [taps_pool[i] for i in sorted(rng.choice(len(taps_pool), k, replace=False))]
    po = payload_pool[int(rng.integers(len(payload_pool)))]

    witness = {p: int(rng.integers(2)) for p in circuit.primary_inputs}
    values = netlist.evaluate_patterns(circuit, witness, 1)

    inverted = [tap for tap in taps if not values[tap]]
    names = netlist.fresh_nets(circuit.nets, "tj", len(inverted) + k - 1)
    inv_net = dict(zip(inverted, names))
    gates = list(circuit.gates)
    literals = []
    for tap in taps:
        if values[tap]:
            literals.append(tap)
        else:
            gates.append(Gate(inv_net[tap], "NOT", (tap,), inv_net[tap]))
            literals.append(inv_net[tap])
    acc = literals[0]
    for i, lit in enumerate(literals[1:]):
        out = names[len(inverted) + i]
        gates.append(Gate(out, "AND", (acc, lit), out))
        acc = out
    widened = Circuit(circuit.name, tuple(gates), circuit.nets | set(names),
                      circuit.primary_inputs, circuit.primary_outputs)
    return splice_chain(widened, po, 1, kind="XOR", side_input=acc)


# ---------------------------------------------------------------------------
# dataset assembly


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def build_dataset(config: DatasetConfig) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Generate the corpus and split it into (train, test) by holdout family."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    gmin, gmax = config.gate_count_range
    imin, imax = config.input_count_range
    families = config.families()

    plan = []
    for i in range(config.n_circuits):
        plan.append((
            families[i % config.n_families],
            int(rng.integers(gmin, gmax + 1)),
            int(rng.integers(imin, imax + 1)),
            int(rng.integers(2 ** 63)),      # generation seed
            int(rng.integers(2 ** 63)),      # trojan seed
        ))

    trojan_flags = [False] * config.n_circuits
    for fam in families:
        members = [i for i in range(config.n_circuits) if plan[i][0] == fam]
        count = _round_half_up(config.trojan_fraction * len(members))
        for i in rng.choice(len(members), count, replace=False):
            trojan_flags[members[i]] = True

    train: list[LabeledSample] = []
    test: list[LabeledSample] = []
    for i, (fam, gates, inputs, gen_seed, tj_seed) in enumerate(plan):
        sample_id = f"{fam}_{i:04d}"
        circuit = gen_circuit(gen_seed, gates, inputs, name=sample_id)
        label = TJ_FREE
        if trojan_flags[i]:
            circuit = inject_trojan(circuit, tj_seed)
            label = TJ_IN
        sample = LabeledSample(circuit_to_graph(circuit), circuit, label,
                               Provenance(sample_id, fam, gen_seed))
        (test if fam == config.holdout else train).append(sample)

    for split_name, split in (("train", train), ("test", test)):
        labels = {s.label for s in split}
        if len(labels) < 2:
            raise DatasetError(f"{split_name} split does not contain both labels")
    return train, test


# ---------------------------------------------------------------------------
# manifest I/O


def write_dataset(train: list[LabeledSample], test: list[LabeledSample], outdir: str | Path) -> Path:
    """Write netlists plus a `manifest.tsv` (id, family, label, seed, path, split)."""
    outdir = Path(outdir)
    (outdir / NETLIST_DIR).mkdir(parents=True, exist_ok=True)
    rows = []
    for split_name, split in (("train", train), ("test", test)):
        for s in split:
            rel = f"{NETLIST_DIR}/{s.provenance.sample_id}.bench"
            (outdir / rel).write_text(netlist.emit_netlist(s.circuit))
            rows.append((s.provenance.sample_id, s.provenance.family, LABEL_NAMES[s.label],
                         str(s.provenance.seed), rel, split_name))
    rows.sort(key=lambda r: r[0])
    manifest = outdir / MANIFEST_NAME
    manifest.write_text("".join("\t".join(r) + "\n" for r in rows))
    return manifest


def load_dataset(outdir: str | Path) -> tuple[list[LabeledSample], list[LabeledSample]]:
    outdir = Path(outdir)
    manifest = outdir / MANIFEST_NAME
    if not manifest.is_file():
        raise DatasetError(f"no {MANIFEST_NAME} in {outdir}")
    train: list[LabeledSample] = []
    test: list[LabeledSample] = []
    for lineno, line in enumerate(manifest.read_text().splitlines(), start=1):
        fields = line.split("\t")
        if len(fields) != 6:
            raise DatasetError(f"{manifest}:{lineno}: expected 6 tab-separated fields")
        sample_id, family, label_name, seed, rel, split_name = fields
        if label_name not in LABEL_VALUES or split_name not in ("train", "test"):
            raise DatasetError(f"{manifest}:{lineno}: bad label or split")
        circuit = netlist.parse_netlist((outdir / rel).read_text(), name=sample_id)
        sample = LabeledSample(circuit_to_graph(circuit), circuit, LABEL_VALUES[label_name],
                               Provenance(sample_id, family, int(seed)))
        (train if split_name == "train" else test).append(sample)
    if not train or not test:
        raise DatasetError("manifest is missing a split")
    return train, test
