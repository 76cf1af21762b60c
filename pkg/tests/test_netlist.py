"""Parser, simulator, coverage, and equivalence checks."""

import itertools

import numpy as np
import pytest

from trojanlab.netlist import (
    ArityError, Circuit, CycleError, ExhaustiveLimitError, InterfaceMismatchError,
    MultipleDriverError, NetlistSyntaxError, SimulationError, UndeclaredNetError,
    check_equivalence, emit_netlist, parse_netlist, simulate, splice_not_chain,
    toggle_coverage,
)

AND2 = "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)"


def sim_oracle(circuit, assignment):
    """Independent reference evaluator: per-net recursive eval with bools."""
    drivers = {g.output: g for g in circuit.gates if g.output is not None}
    memo = {}

    def value(net):
        if net in memo:
            return memo[net]
        g = drivers[net]
        if g.kind == "INPUT":
            v = bool(assignment[net])
        elif g.kind == "CONST0":
            v = False
        elif g.kind == "CONST1":
            v = True
        else:
            ins = [value(n) for n in g.inputs]
            v = {
                "AND": all, "NAND": lambda xs: not all(xs),
                "OR": any, "NOR": lambda xs: not any(xs),
                "XOR": lambda xs: sum(xs) % 2 == 1,
                "XNOR": lambda xs: sum(xs) % 2 == 0,
                "NOT": lambda xs: not xs[0], "BUF": lambda xs: xs[0],
            }[g.kind](ins)
        memo[net] = v
        return v

    return {po: int(value(po)) for po in circuit.primary_outputs}


class TestParse:
    def test_minimal_circuit(self):
        c = parse_netlist(AND2)
        assert c.primary_inputs == ("a", "b")
        assert c.primary_outputs == ("y",)
        assert [g.kind for g in c.gates] == ["INPUT", "INPUT", "OUTPUT", "AND"]
        assert c.nets == frozenset({"a", "b", "y"})

    def test_gate_order_is_source_order(self):
        c = parse_netlist("INPUT(a)\nz = NOT(y)\nOUTPUT(z)\ny = BUF(a)")
        assert [g.id for g in c.gates] == ["a", "z", "out:z", "y"]

    def test_comments_and_blank_lines(self):
        c = parse_netlist("# header\n\nINPUT(a)  # trailing\nOUTPUT(a)\n")
        assert c.primary_inputs == ("a",)

    def test_multiple_drivers(self):
        with pytest.raises(MultipleDriverError):
            parse_netlist("INPUT(a)\ny = BUF(a)\ny = NOT(a)")
        with pytest.raises(MultipleDriverError):
            parse_netlist("INPUT(a)\nINPUT(a)")

    def test_arity_violations(self):
        with pytest.raises(ArityError):
            parse_netlist("INPUT(a)\ny = AND(a)")
        with pytest.raises(ArityError):
            parse_netlist("INPUT(a)\nINPUT(b)\ny = NOT(a, b)")

    def test_undeclared_net(self):
        with pytest.raises(UndeclaredNetError):
            parse_netlist("INPUT(a)\ny = AND(a, ghost)")
        with pytest.raises(UndeclaredNetError):
            parse_netlist("OUTPUT(nowhere)")

    def test_combinational_cycle(self):
        with pytest.raises(CycleError):
            parse_netlist("INPUT(a)\nx = AND(a, y)\ny = BUF(x)")

    def test_syntax_error_reports_line_and_column(self):
        with pytest.raises(NetlistSyntaxError) as err:
            parse_netlist("INPUT(a)\ny = AND(a,")
        assert err.value.line == 2
        assert err.value.column > 0
        with pytest.raises(NetlistSyntaxError):
            parse_netlist("FOO(a)")
        with pytest.raises(NetlistSyntaxError):
            parse_netlist("y = FROB(a, b)")

    def test_reserved_const_nets(self):
        c = parse_netlist("INPUT(a)\nOUTPUT(y)\ny = XOR(a, CONST1)")
        kinds = {g.kind for g in c.gates}
        assert "CONST1" in kinds and "CONST1" in c.nets
        with pytest.raises(NetlistSyntaxError):
            parse_netlist("INPUT(CONST1)")
        with pytest.raises(NetlistSyntaxError):
            parse_netlist("INPUT(a)\nCONST1 = BUF(a)")

    def test_named_const_declaration(self):
        c = parse_netlist("c = CONST1()\nOUTPUT(y)\ny = BUF(c)")
        assert simulate(c, {}) == {"y": 1}

    def test_duplicate_output(self):
        with pytest.raises(NetlistSyntaxError):
            parse_netlist("INPUT(a)\nOUTPUT(a)\nOUTPUT(a)")

    def test_dff_is_cut_into_pseudo_pi_po(self):
        c = parse_netlist("INPUT(clk_d)\nq = DFF(d)\nd = NOT(q)\nOUTPUT(z)\nz = AND(q, clk_d)")
        assert "q" in c.primary_inputs
        assert "d" in c.primary_outputs
        simulate(c, {"clk_d": 1, "q": 0})  # combinational after the cut

    def test_emit_roundtrip(self):
        c = parse_netlist(AND2)
        assert parse_netlist(emit_netlist(c)) == c
        c2 = parse_netlist("INPUT(a)\nOUTPUT(y)\ny = XOR(a, CONST1)")
        assert parse_netlist(emit_netlist(c2)) == c2


class TestSimulate:
    def test_and_truth_table(self):
        c = parse_netlist(AND2)
        assert simulate(c, {"a": 1, "b": 1}) == {"y": 1}
        assert simulate(c, {"a": 1, "b": 0}) == {"y": 0}

    def test_xor_with_const_one_inverts(self):
        c = parse_netlist("INPUT(a)\nOUTPUT(y)\ny = XOR(a, CONST1)")
        assert simulate(c, {"a": 0}) == {"y": 1}
        assert simulate(c, {"a": 1}) == {"y": 0}

    def test_three_gate_hand_evaluation(self):
        # y = NOT(AND(a, b)) at a=1, b=1 evaluates to 0
        c = parse_netlist("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nt = AND(a, b)\ny = NOT(t)")
        assert simulate(c, {"a": 1, "b": 1}) == {"y": 0}

    def test_missing_input_bit(self):
        c = parse_netlist(AND2)
        with pytest.raises(SimulationError):
            simulate(c, {"a": 1})

    def test_every_kind_against_reference_evaluator(self):
        src = "\n".join([
            "INPUT(a)", "INPUT(b)", "INPUT(c)",
            "g0 = AND(a, b)", "g1 = NAND(b, c)", "g2 = OR(a, c)", "g3 = NOR(a, b)",
            "g4 = XOR(g0, g1)", "g5 = XNOR(g2, g3)", "g6 = NOT(g4)", "g7 = BUF(g5)",
            "y = AND(g6, g7, c)",
            "OUTPUT(y)", "OUTPUT(g4)",
        ])
        c = parse_netlist(src)
        for bits in itertools.product((0, 1), repeat=3):
            assignment = dict(zip("abc", bits))
            assert simulate(c, assignment) == sim_oracle(c, assignment)

    def test_purity(self):
        c = parse_netlist(AND2)
        assert simulate(c, {"a": 1, "b": 0}) == simulate(c, {"a": 1, "b": 0})


class TestToggleCoverage:
    def test_buffer_fully_covered(self):
        c = parse_netlist("INPUT(a)\nOUTPUT(y)\ny = BUF(a)")
        cov = toggle_coverage(c, [{"a": 0}, {"a": 1}])
        assert cov.fully_covered("y") and cov.fully_covered("a")

    def test_single_vector_sees_one_value(self):
        c = parse_netlist(AND2)
        cov = toggle_coverage(c, [{"a": 0, "b": 0}])
        seen0, seen1 = cov.toggles["y"]
        assert seen0 and not seen1

    def test_const_net_never_fully_covered(self):
        c = parse_netlist("INPUT(a)\nOUTPUT(z)\ny = CONST1()\nz = AND(a, y)")
        cov = toggle_coverage(c, [{"a": 0}, {"a": 1}])
        assert not cov.fully_covered("y")

    def test_empty_vector_set_rejected(self):
        with pytest.raises(ValueError):
            toggle_coverage(parse_netlist(AND2), [])


class TestEquivalence:
    def test_reflexive(self):
        c = parse_netlist(AND2)
        assert check_equivalence(c, c) is None

    def test_buf_vs_not_first_counterexample(self):
        c1 = parse_netlist("INPUT(a)\nOUTPUT(y)\ny = BUF(a)")
        c2 = parse_netlist("INPUT(a)\nOUTPUT(y)\ny = NOT(a)")
        assert check_equivalence(c1, c2) == {"a": 0}

    def test_even_not_chain_is_equivalent(self):
        c = parse_netlist(AND2)
        spliced = splice_not_chain(c, "a", 4)
        assert check_equivalence(c, spliced) is None

    def test_odd_not_chain_has_counterexample(self):
        c = parse_netlist(AND2)
        spliced = splice_not_chain(c, "a", 3)
        cex = check_equivalence(c, spliced)
        assert cex is not None
        assert simulate(c, cex) != simulate(spliced, cex)

    def test_splice_on_internal_and_output_nets(self):
        src = "INPUT(a)\nINPUT(b)\nOUTPUT(y)\nt = OR(a, b)\ny = NOT(t)"
        c = parse_netlist(src)
        for net in ("t", "y"):
            assert check_equivalence(c, splice_not_chain(c, net, 2)) is None
            assert check_equivalence(c, splice_not_chain(c, net, 3)) is not None

    def test_interface_mismatch(self):
        c1 = parse_netlist(AND2)
        c2 = parse_netlist("INPUT(a)\nOUTPUT(y)\ny = BUF(a)")
        with pytest.raises(InterfaceMismatchError):
            check_equivalence(c1, c2)

    def test_exhaustive_input_limit(self):
        lines = [f"INPUT(i{k})" for k in range(21)]
        lines += ["OUTPUT(y)", "y = AND(" + ", ".join(f"i{k}" for k in range(21)) + ")"]
        c = parse_netlist("\n".join(lines))
        with pytest.raises(ExhaustiveLimitError):
            check_equivalence(c, c)
        assert check_equivalence(c, c, mode="random", n_vectors=500, seed=3) is None

    def test_random_mode_deterministic(self):
        c1 = parse_netlist(AND2)
        c2 = parse_netlist("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)")
        r1 = check_equivalence(c1, c2, mode="random", n_vectors=64, seed=9)
        r2 = check_equivalence(c1, c2, mode="random", n_vectors=64, seed=9)
        assert r1 == r2 and r1 is not None

    def test_exhaustive_agrees_with_reference_evaluator(self):
        # brute-force loop over assignments is the independent oracle
        src = ("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\n"
               "t = XOR(a, b)\nu = NAND(t, c)\ny = NOR(u, a)")
        c1 = parse_netlist(src)
        c2 = splice_not_chain(c1, "u", 1)  # odd chain: inequivalent
        cex = check_equivalence(c1, c2)
        mismatches = []
        for bits in itertools.product((0, 1), repeat=3):
            assignment = dict(zip("abc", bits))
            if sim_oracle(c1, assignment) != sim_oracle(c2, assignment):
                mismatches.append(assignment)
        assert mismatches, "oracle says circuits differ somewhere"
        assert cex in mismatches


class TestProperties:
    def test_not_chain_parity_over_random_circuits(self):
        from trojanlab.dataset import gen_circuit, internal_nets
        import numpy as np
        rng = np.random.default_rng(5)
        for trial in range(25):
            c = gen_circuit(3000 + trial, int(rng.integers(15, 60)), int(rng.integers(4, 9)))
            nets = internal_nets(c)
            if not nets:
                continue
            net = nets[int(rng.integers(len(nets)))]
            even = splice_not_chain(c, net, 2 * int(rng.integers(1, 4)))
            assert check_equivalence(c, even) is None

    def test_concurrent_simulation_and_equivalence(self):
        from concurrent.futures import ThreadPoolExecutor
        from trojanlab.dataset import gen_circuit
        c = gen_circuit(42, 60, 8)
        spliced = splice_not_chain(c, "n0", 2)
        assignment = {p: i % 2 for i, p in enumerate(c.primary_inputs)}
        expected = simulate(c, assignment)
        with ThreadPoolExecutor(max_workers=8) as pool:
            sims = list(pool.map(lambda _: simulate(c, assignment), range(32)))
            eqs = list(pool.map(lambda _: check_equivalence(c, spliced), range(8)))
        assert all(s == expected for s in sims)
        assert all(e is None for e in eqs)
