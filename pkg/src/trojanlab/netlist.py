"""Gate-level netlists: parsing, logic simulation, toggle coverage, equivalence.

Netlist text format, one statement per line:

    # comment runs to end of line
    INPUT(a)
    OUTPUT(y)
    y = AND(a, b)

Identifiers match ``[A-Za-z_][A-Za-z0-9_]*`` and statements may appear in any
order.  ``CONST0`` and ``CONST1`` are reserved net names: using one in an
argument position instantiates a shared constant driver on first use, and a
named constant can be declared explicitly with ``c = CONST1()``.  A flip-flop
boundary is cut at parse time: ``q = DFF(d)`` turns ``q`` into a pseudo
primary input and ``d`` into a pseudo primary output, so every parsed circuit
is combinational.

Simulation is bit-parallel: each net carries one arbitrary-precision integer
whose bit *i* is the net's value under input vector *i*.  One topological pass
therefore evaluates the whole vector set, which is what makes exhaustive
equivalence checking over up to 2^20 assignments cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

GATE_KINDS = (
    "INPUT", "OUTPUT",
    "AND", "NAND", "OR", "NOR", "XOR", "XNOR",
    "NOT", "BUF",
    "CONST0", "CONST1",
)

BINARY_KINDS = ("AND", "NAND", "OR", "NOR", "XOR", "XNOR")   # arity >= 2
UNARY_KINDS = ("NOT", "BUF")                                  # arity == 1
CONST_KINDS = ("CONST0", "CONST1")                            # arity == 0
LOGIC_KINDS = BINARY_KINDS + UNARY_KINDS
RESERVED_NETS = frozenset(CONST_KINDS)

EXHAUSTIVE_INPUT_LIMIT = 20
DEFAULT_RANDOM_VECTORS = 10_000


class NetlistError(Exception):
    """Base class for all netlist-level failures."""


class NetlistSyntaxError(NetlistError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class MultipleDriverError(NetlistError):
    pass


class UndeclaredNetError(NetlistError):
    pass


class CycleError(NetlistError):
    pass


class ArityError(NetlistError):
    pass


class SimulationError(NetlistError):
    pass


class InterfaceMismatchError(NetlistError):
    pass


class ExhaustiveLimitError(NetlistError):
    pass


@dataclass(frozen=True)
class Gate:
    """One gate instance. ``output`` is None for OUTPUT pins (pure sinks)."""

    id: str
    kind: str
    inputs: tuple[str, ...]
    output: str | None


@dataclass(frozen=True)
class Circuit:
    """An immutable combinational circuit.

    Invariants (established by :func:`parse_netlist` and preserved by every
    builder in this package): each net has exactly one driver, every net read
    by a gate exists, the gate graph is acyclic, and OUTPUT pins always read
    the net they declare.
    """

    name: str = field(compare=False)
    gates: tuple[Gate, ...] = ()
    nets: frozenset[str] = frozenset()
    primary_inputs: tuple[str, ...] = ()
    primary_outputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class CoverageMap:
    """Per-net toggle record: net -> (seen value 0, seen value 1)."""

    toggles: dict[str, tuple[bool, bool]]

    def fully_covered(self, net: str) -> bool:
        seen0, seen1 = self.toggles[net]
        return seen0 and seen1

    def covered_nets(self) -> list[str]:
        return sorted(n for n, (s0, s1) in self.toggles.items() if s0 and s1)


# ---------------------------------------------------------------------------
# parsing


class _Scanner:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.pos = 0
        self.lineno = lineno

    def fail(self, message: str, pos: int | None = None):
        col = (self.pos if pos is None else pos) + 1
        raise NetlistSyntaxError(message, self.lineno, col)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        self.skip_ws()
        if self.peek() != ch:
            self.fail(f"expected '{ch}'")
        self.pos += 1

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        c = self.peek()
        if not (c.isalpha() or c == "_"):
            self.fail("expected identifier")
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos]

    def end(self):
        self.skip_ws()
        if self.pos < len(self.text):
            self.fail("unexpected trailing text")


def _parse_statement(body: str, lineno: int):
    """Return ("input"|"output", net) or ("assign", net, kind, args) or ("dff", q, d)."""
    sc = _Scanner(body, lineno)
    sc.skip_ws()
    start = sc.pos
    head = sc.ident()
    sc.skip_ws()
    if sc.peek() == "(":
        if head not in ("INPUT", "OUTPUT"):
            sc.fail(f"unknown declaration '{head}'", pos=start)
        sc.expect("(")
        net = sc.ident()
        sc.expect(")")
        sc.end()
        return ("input" if head == "INPUT" else "output", net)
    if sc.peek() != "=":
        sc.fail("expected '(' or '='")
    sc.pos += 1
    sc.skip_ws()
    kind_start = sc.pos
    kind = sc.ident()
    sc.expect("(")
    args: list[str] = []
    sc.skip_ws()
    if sc.peek() != ")":
        args.append(sc.ident())
        sc.skip_ws()
        while sc.peek() == ",":
            sc.pos += 1
            args.append(sc.ident())
            sc.skip_ws()
    sc.expect(")")
    sc.end()
    if kind == "DFF":
        if len(args) != 1:
            raise ArityError(f"line {lineno}: DFF takes exactly 1 input, got {len(args)}")
        return ("dff", head, args[0])
    if kind in ("INPUT", "OUTPUT"):
        raise NetlistSyntaxError(f"'{kind}' is a declaration, not a gate kind",
                                 lineno, kind_start + 1)
    if kind not in LOGIC_KINDS + CONST_KINDS:
        raise NetlistSyntaxError(f"unknown gate kind '{kind}'", lineno, kind_start + 1)
    return ("assign", head, kind, tuple(args))


def _check_arity(kind: str, n_args: int, net: str, lineno: int):
    if kind in BINARY_KINDS and n_args < 2:
        raise ArityError(f"line {lineno}: {kind} gate '{net}' needs >= 2 inputs, got {n_args}")
    if kind in UNARY_KINDS and n_args != 1:
        raise ArityError(f"line {lineno}: {kind} gate '{net}' needs exactly 1 input, got {n_args}")
    if kind in CONST_KINDS and n_args != 0:
        raise ArityError(f"line {lineno}: {kind} gate '{net}' takes no inputs, got {n_args}")


def parse_netlist(text: str, name: str = "netlist") -> Circuit:
    """Parse netlist source into a validated :class:`Circuit`.

    Gate order is source order; implicit constant drivers are inserted at
    first use.  Raises :class:`NetlistSyntaxError`, :class:`ArityError`,
    :class:`MultipleDriverError`, :class:`UndeclaredNetError` or
    :class:`CycleError`.
    """
    gates: list[Gate] = []
    driven: dict[str, int] = {}       # net -> index of driving gate
    reads: list[tuple[str, int]] = []  # (net, lineno), in scan order
    pis: list[str] = []
    pos: list[str] = []

    def ensure_const(kname: str):
        if kname not in driven:
            driven[kname] = len(gates)
            gates.append(Gate(kname, kname, (), kname))

    def add_driver(net: str, lineno: int, gate: Gate):
        if net in RESERVED_NETS:
            raise NetlistSyntaxError(f"'{net}' is a reserved constant net", lineno, 1)
        if net in driven:
            raise MultipleDriverError(f"line {lineno}: net '{net}' has multiple drivers")
        driven[net] = len(gates)
        gates.append(gate)

    def add_output_pin(net: str, lineno: int):
        if net in pos:
            raise NetlistSyntaxError(f"duplicate OUTPUT declaration for '{net}'", lineno, 1)
        if net in RESERVED_NETS:
            ensure_const(net)
        reads.append((net, lineno))
        gates.append(Gate(f"out:{net}", "OUTPUT", (net,), None))
        pos.append(net)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("#")
        body = raw if cut < 0 else raw[:cut]
        if not body.strip():
            continue
        stmt = _parse_statement(body, lineno)
        if stmt[0] == "input":
            net = stmt[1]
            add_driver(net, lineno, Gate(net, "INPUT", (), net))
            pis.append(net)
        elif stmt[0] == "output":
            add_output_pin(stmt[1], lineno)
        elif stmt[0] == "dff":
            _, q, d = stmt
            add_driver(q, lineno, Gate(q, "INPUT", (), q))
            pis.append(q)
            if d not in pos:
                add_output_pin(d, lineno)
        else:
            _, net, kind, args = stmt
            _check_arity(kind, len(args), net, lineno)
            for a in args:
                if a in RESERVED_NETS:
                    ensure_const(a)
                reads.append((a, lineno))
            add_driver(net, lineno, Gate(net, kind, args, net))

    for net, lineno in reads:
        if net not in driven:
            raise UndeclaredNetError(f"line {lineno}: net '{net}' is never driven or declared")

    circuit = Circuit(name, tuple(gates), frozenset(driven), tuple(pis), tuple(pos))
    topological_order(circuit)  # raises CycleError on combinational loops
    return circuit


def emit_netlist(circuit: Circuit) -> str:
    """Render a circuit back to netlist text, one statement per gate in order.

    Implicit CONST0/CONST1 drivers are left implicit; they are recreated at
    first use on re-parse, so parse(emit(c)) == c for circuits built by this
    package.
    """
    lines = []
    for g in circuit.gates:
        if g.kind == "INPUT":
            lines.append(f"INPUT({g.output})")
        elif g.kind == "OUTPUT":
            lines.append(f"OUTPUT({g.inputs[0]})")
        elif g.kind in CONST_KINDS:
            if g.output not in RESERVED_NETS:
                lines.append(f"{g.output} = {g.kind}()")
        else:
            lines.append(f"{g.output} = {g.kind}({', '.join(g.inputs)})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# structure helpers


def driver_map(circuit: Circuit) -> dict[str, int]:
    """net -> index of the gate driving it."""
    return {g.output: i for i, g in enumerate(circuit.gates) if g.output is not None}


def topological_order(circuit: Circuit) -> tuple[int, ...]:
    """Indices of all gates in evaluation order (Kahn). Raises CycleError."""
    drivers = driver_map(circuit)
    n = len(circuit.gates)
    indeg = [0] * n
    readers: list[list[int]] = [[] for _ in range(n)]
    for i, g in enumerate(circuit.gates):
        for net in g.inputs:
            j = drivers.get(net)
            if j is None:
                raise UndeclaredNetError(f"net '{net}' read by gate '{g.id}' has no driver")
            indeg[i] += 1
            readers[j].append(i)
    queue = [i for i in range(n) if indeg[i] == 0]
    order: list[int] = []
    head = 0
    while head < len(queue):
        i = queue[head]
        head += 1
        order.append(i)
        for j in readers[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    if len(order) != n:
        stuck = next(circuit.gates[i].id for i in range(n) if indeg[i] > 0)
        raise CycleError(f"combinational cycle through gate '{stuck}'")
    return tuple(order)


def fresh_nets(existing: frozenset[str] | set[str], stem: str, count: int) -> list[str]:
    """Deterministic list of `count` net names based on `stem`, avoiding `existing`."""
    out: list[str] = []
    i = 0
    while len(out) < count:
        cand = f"{stem}{i}"
        i += 1
        if cand not in existing and cand not in out:
            out.append(cand)
    return out


def rewire_inputs(gates: Sequence[Gate], old_net: str, new_net: str) -> list[Gate]:
    """Copy of `gates` with every read of `old_net` redirected to `new_net`."""
    out = []
    for g in gates:
        if old_net in g.inputs:
            out.append(replace(g, inputs=tuple(new_net if n == old_net else n for n in g.inputs)))
        else:
            out.append(g)
    return out


def splice_chain(circuit: Circuit, net: str, length: int, kind: str = "NOT",
                 side_input: str | None = None) -> Circuit:
    """Splice a chain of `length` gates between `net` and its original fanout.

    Each stage is ``x_i = KIND(x_{i-1})`` or, with `side_input`,
    ``x_i = KIND(x_{i-1}, side)``.  For logic-driven nets the driver's output
    is renamed and the chain re-drives the original net name, so fanout and
    output pins are untouched; for primary inputs the fanout is rewired to the
    chain end instead.  ``side_input`` may name a reserved constant, which is
    instantiated just before the chain if absent.
    """
    if length < 1:
        raise ValueError("chain length must be >= 1")
    if net not in circuit.nets:
        raise NetlistError(f"net '{net}' does not exist")
    if kind not in LOGIC_KINDS:
        raise NetlistError(f"cannot splice chain of kind '{kind}'")
    drivers = driver_map(circuit)
    driver = circuit.gates[drivers[net]]

    names = fresh_nets(circuit.nets, f"{net}_ch", length)
    prelude: list[Gate] = []
    side: tuple[str, ...] = ()
    if side_input is not None:
        if side_input in RESERVED_NETS and side_input not in circuit.nets:
            prelude.append(Gate(side_input, side_input, (), side_input))
        elif side_input not in circuit.nets:
            raise NetlistError(f"side input '{side_input}' does not exist")
        side = (side_input,)

    def stage(prev: str, out: str) -> Gate:
        return Gate(out, kind, (prev,) + side, out)

    if driver.kind == "INPUT":
        if net in circuit.primary_outputs:
            raise NetlistError(f"cannot splice '{net}': both primary input and output")
        gates = rewire_inputs(circuit.gates, net, names[-1])
        chain = [stage(net if i == 0 else names[i - 1], names[i]) for i in range(length)]
    else:
        # rename the driver; the chain ends by re-driving the original net
        gates = list(circuit.gates)
        gates[drivers[net]] = replace(driver, id=names[0], output=names[0])
        hops = names + [net]
        chain = [stage(hops[i], hops[i + 1]) for i in range(length)]
    new_gates = tuple(gates) + tuple(prelude) + tuple(chain)
    new_nets = circuit.nets | set(names) | set(side)
    return Circuit(circuit.name, new_gates, frozenset(new_nets),
                   circuit.primary_inputs, circuit.primary_outputs)


def splice_not_chain(circuit: Circuit, net: str, length: int) -> Circuit:
    """Splice a NOT chain into `net`; even lengths preserve functionality."""
    return splice_chain(circuit, net, length, kind="NOT")


# ---------------------------------------------------------------------------
# simulation


def _gate_value(kind: str, ins: list[int], mask: int) -> int:
    if kind == "AND" or kind == "NAND":
        v = ins[0]
        for x in ins[1:]:
            v &= x
        return v if kind == "AND" else v ^ mask
    if kind == "OR" or kind == "NOR":
        v = ins[0]
        for x in ins[1:]:
            v |= x
        return v if kind == "OR" else v ^ mask
    if kind == "XOR" or kind == "XNOR":
        v = ins[0]
        for x in ins[1:]:
            v ^= x
        return v if kind == "XOR" else v ^ mask
    if kind == "NOT":
        return ins[0] ^ mask
    if kind == "BUF":
        return ins[0]
    raise NetlistError(f"cannot evaluate gate kind '{kind}'")


def evaluate_patterns(circuit: Circuit, pi_patterns: Mapping[str, int], width: int) -> dict[str, int]:
    """Evaluate all nets bit-parallel over `width` vectors; returns net -> pattern."""
    mask = (1 << width) - 1
    values: dict[str, int] = {}
    for gi in topological_order(circuit):
        g = circuit.gates[gi]
        if g.kind == "OUTPUT":
            continue
        if g.kind == "INPUT":
            values[g.output] = pi_patterns[g.output] & mask
        elif g.kind == "CONST0":
            values[g.output] = 0
        elif g.kind == "CONST1":
            values[g.output] = mask
        else:
            values[g.output] = _gate_value(g.kind, [values[n] for n in g.inputs], mask)
    return values


def simulate(circuit: Circuit, assignment: Mapping[str, int]) -> dict[str, int]:
    """Evaluate the circuit under one input assignment; returns net -> bit per PO."""
    missing = [p for p in circuit.primary_inputs if p not in assignment]
    if missing:
        raise SimulationError(f"missing input bit(s): {', '.join(missing)}")
    patterns = {p: 1 if assignment[p] else 0 for p in circuit.primary_inputs}
    values = evaluate_patterns(circuit, patterns, 1)
    return {po: values[po] for po in circuit.primary_outputs}


def toggle_coverage(circuit: Circuit, vectors: Sequence[Mapping[str, int]]) -> CoverageMap:
    """Record, per net, whether values 0 and 1 were each observed across `vectors`."""
    if not vectors:
        raise ValueError("vectors must be non-empty")
    width = len(vectors)
    mask = (1 << width) - 1
    patterns = {p: 0 for p in circuit.primary_inputs}
    for idx, vec in enumerate(vectors):
        for p in circuit.primary_inputs:
            if p not in vec:
                raise SimulationError(f"vector {idx}: missing input bit '{p}'")
            if vec[p]:
                patterns[p] |= 1 << idx
    values = evaluate_patterns(circuit, patterns, width)
    toggles = {net: (values[net] != mask, values[net] != 0) for net in circuit.nets}
    return CoverageMap(toggles)


def _truth_column(i: int, width: int) -> int:
    # bit b of the result is (b >> i) & 1; width is a power of two > 2**i
    block = 1 << i
    unit = ((1 << block) - 1) << block
    period = block << 1
    reps = width // period
    mult = ((1 << (reps * period)) - 1) // ((1 << period) - 1)
    return unit * mult


def check_equivalence(c1: Circuit, c2: Circuit, mode: str = "exhaustive",
                      n_vectors: int = DEFAULT_RANDOM_VECTORS, seed: int = 0) -> dict[str, int] | None:
    """Compare two circuits with identical PI/PO lists.

    mode="exhaustive" enumerates all 2^|PI| assignments (|PI| <= 20);
    mode="random" draws `n_vectors` seeded uniform assignments.  Returns None
    when no mismatch is observed, otherwise the first mismatching assignment.
    """
    if c1.primary_inputs != c2.primary_inputs or c1.primary_outputs != c2.primary_outputs:
        raise InterfaceMismatchError("primary input/output name lists differ")
    pis = c1.primary_inputs
    if mode == "exhaustive":
        if len(pis) > EXHAUSTIVE_INPUT_LIMIT:
            raise ExhaustiveLimitError(
                f"exhaustive mode supports at most {EXHAUSTIVE_INPUT_LIMIT} inputs, got {len(pis)}")
        width = 1 << len(pis)
        patterns = {p: _truth_column(i, width) for i, p in enumerate(pis)}
    elif mode == "random":
        if n_vectors < 1:
            raise ValueError("n_vectors must be >= 1")
        import numpy as np
        rng = np.random.default_rng(seed)
        width = n_vectors
        mask = (1 << width) - 1
        nbytes = (width + 7) // 8
        patterns = {p: int.from_bytes(rng.bytes(nbytes), "little") & mask for p in pis}
    else:
        raise ValueError(f"unknown mode '{mode}'")
    v1 = evaluate_patterns(c1, patterns, width)
    v2 = evaluate_patterns(c2, patterns, width)
    diff = 0
    for po in c1.primary_outputs:
        diff |= v1[po] ^ v2[po]
    if diff == 0:
        return None
    b = (diff & -diff).bit_length() - 1
    return {p: (patterns[p] >> b) & 1 for p in pis}
