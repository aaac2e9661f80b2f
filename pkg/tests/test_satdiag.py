import itertools

import numpy as np
import pytest

from faultbench.circuit import (
    DiagnosisInstance,
    Observation,
    brute_force_diagnosis,
    build_full_adder,
    build_multiplier,
    evaluate,
    generate_instance,
)
from faultbench.satdiag import (
    CnfFormula,
    DiagnosisEnumeration,
    add_cardinality_at_most,
    annotations_to_string,
    diagnose_min_cardinality,
    encode_fault_augmented,
    enumerate_min_diagnoses,
    minimal_diagnoses,
    parse_dimacs,
    sat_solve,
    sat_tts,
    to_dimacs,
)


def exhaustive_sat(cnf):
    """Oracle: enumerate all assignments with numpy bit tricks (<= 22 vars)."""
    n = cnf.n_vars
    assert n <= 22
    idx = np.arange(1 << n, dtype=np.uint32)
    sat = np.ones(1 << n, dtype=bool)
    for clause in cnf.clauses:
        ok = np.zeros(1 << n, dtype=bool)
        for lit in clause:
            bit = ((idx >> (abs(lit) - 1)) & 1).astype(bool)
            ok |= bit if lit > 0 else ~bit
        sat &= ok
    return sat


class TestSolverBasics:
    def test_simple_sat(self):
        cnf = CnfFormula(2)
        cnf.add_clause((1, 2))
        cnf.add_clause((-1,))
        out = sat_solve(cnf)
        assert out.sat
        assert out.model[2] is True and out.model[1] is False

    def test_simple_unsat(self):
        cnf = CnfFormula(1)
        cnf.add_clause((1,))
        cnf.add_clause((-1,))
        assert sat_solve(cnf).status == "UNSAT"

    def test_empty_clause_rejected(self):
        cnf = CnfFormula(1)
        with pytest.raises(ValueError):
            cnf.add_clause(())

    def test_pigeonhole_unsat(self):
        # 3 pigeons, 2 holes
        cnf = CnfFormula(6)  # var = pigeon*2 + hole
        for p in range(3):
            cnf.add_clause((2 * p + 1, 2 * p + 2))
        for h in range(2):
            for p1 in range(3):
                for p2 in range(p1 + 1, 3):
                    cnf.add_clause((-(2 * p1 + h + 1), -(2 * p2 + h + 1)))
        assert sat_solve(cnf).status == "UNSAT"

    def test_random_3sat_against_exhaustive_oracle(self):
        rng = np.random.default_rng(42)
        n, ratio = 20, 4.0
        for trial in range(100):
            cnf = CnfFormula(n)
            for _ in range(int(n * ratio)):
                vs = rng.choice(n, size=3, replace=False) + 1
                signs = rng.integers(0, 2, size=3) * 2 - 1
                cnf.add_clause(tuple(int(v * s) for v, s in zip(vs, signs)))
            expect = bool(exhaustive_sat(cnf).any())
            out = sat_solve(cnf, seed=trial)
            assert out.status == ("SAT" if expect else "UNSAT")

    def test_random_3sat_50var_smoke(self):
        rng = np.random.default_rng(7)
        n = 50
        for trial in range(5):
            cnf = CnfFormula(n)
            for _ in range(200):
                vs = rng.choice(n, size=3, replace=False) + 1
                signs = rng.integers(0, 2, size=3) * 2 - 1
                cnf.add_clause(tuple(int(v * s) for v, s in zip(vs, signs)))
            out = sat_solve(cnf)
            assert out.status in ("SAT", "UNSAT")

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(0)
        cnf = CnfFormula(30)
        for _ in range(120):
            vs = rng.choice(30, size=3, replace=False) + 1
            signs = rng.integers(0, 2, size=3) * 2 - 1
            cnf.add_clause(tuple(int(v * s) for v, s in zip(vs, signs)))
        a = sat_solve(cnf, seed=5)
        b = sat_solve(cnf, seed=5)
        assert a.status == b.status and a.model == b.model
        assert a.conflicts == b.conflicts and a.decisions == b.decisions


class TestEncoding:
    def test_witness_satisfies_encoding(self, anomalous_fa_instance):
        cnf = encode_fault_augmented(anomalous_fa_instance)
        k, sets = brute_force_diagnosis(anomalous_fa_instance)
        # assignment from the brute-force witness: faults {0}, propagate
        inst = anomalous_fa_instance
        model = {}
        wire_vals = {"i0": 0, "i1": 0, "i2": 0}
        for g in inst.circuit.topological_gates:
            y = tuple(wire_vals[w] for w in g.inputs)
            wire_vals[g.output] = 1 if g.gid == 0 else g.kind.apply(y)
        for (iota, w), v in cnf.wire_lits.items():
            model[v] = bool(wire_vals[w])
        for gid, v in cnf.fault_lits.items():
            model[v] = gid == 0
        for clause in cnf.clauses:
            assert any(model[abs(l)] == (l > 0) for l in clause)

    def test_nominal_all_healthy_unsat_on_anomalous(self, anomalous_fa_instance):
        cnf = encode_fault_augmented(anomalous_fa_instance)
        for lit in cnf.fault_lits.values():
            cnf.add_clause((-lit,))
        assert sat_solve(cnf).status == "UNSAT"

    def test_stuck_at_1_single_binary_clause(self, full_adder):
        inst = DiagnosisInstance(full_adder, (Observation((0, 0, 0), (1, 0)),))
        cnf = encode_fault_augmented(inst)
        f0 = cnf.fault_lits[0]
        z0 = cnf.wire_lits[(0, full_adder.gates[0].output)]
        assert (-f0, z0) in cnf.clauses


class TestCardinality:
    def test_k0_emits_unit_clauses(self):
        cnf = CnfFormula(3)
        out = add_cardinality_at_most(cnf, [1, 2, 3], 0)
        assert (-1,) in out.clauses and (-2,) in out.clauses and (-3,) in out.clauses
        assert out.n_vars == 3  # no adder built

    def test_k_equals_n_no_constraint(self):
        cnf = CnfFormula(3)
        cnf.add_clause((1,))
        out = add_cardinality_at_most(cnf, [1, 2, 3], 3)
        assert out.clauses == cnf.clauses and out.n_vars == cnf.n_vars

    @pytest.mark.parametrize("n,k", [(3, 1), (3, 2), (4, 2), (5, 3), (6, 1)])
    def test_extension_existence_matches_popcount(self, n, k):
        # for every assignment of the fault bits, the adder+comparator
        # clauses are extendable iff popcount <= k
        base = CnfFormula(n)
        fault = list(range(1, n + 1))
        for bits in itertools.product((0, 1), repeat=n):
            cnf = add_cardinality_at_most(base, fault, k)
            for v, b in zip(fault, bits):
                cnf.add_clause((v if b else -v,))
            out = sat_solve(cnf)
            expect = sum(bits) <= k
            assert out.sat == expect, (bits, k)

    def test_popcount_exhaustive_ten_bits(self):
        base = CnfFormula(10)
        fault = list(range(1, 11))
        rng = np.random.default_rng(3)
        cnf_template = add_cardinality_at_most(base, fault, 4)
        for bits in rng.integers(0, 2, size=(128, 10)):
            cnf = cnf_template.copy()
            for v, b in zip(fault, bits):
                cnf.add_clause((v if b else -v,))
            assert sat_solve(cnf).sat == (int(bits.sum()) <= 4)


class TestDiagnosis:
    def test_reference_instance(self, anomalous_fa_instance):
        k, witness = diagnose_min_cardinality(anomalous_fa_instance)
        assert k == 1
        _, sets = brute_force_diagnosis(anomalous_fa_instance)
        assert witness in sets

    def test_consistent_observation(self, full_adder):
        inst = DiagnosisInstance(full_adder, (evaluate(full_adder, (1, 0, 1)),))
        k, witness = diagnose_min_cardinality(inst)
        assert k == 0 and witness == frozenset()

    def test_agreement_with_brute_force_mult22(self, mult22):
        rng = np.random.default_rng(9)
        for _ in range(40):
            inst = generate_instance(mult22, rng)
            k_bf, sets_bf = brute_force_diagnosis(inst)
            k_sat, diags = minimal_diagnoses(inst)
            assert k_sat == k_bf
            assert diags == frozenset(sets_bf)

    def test_agreement_with_brute_force_mult33(self):
        c = build_multiplier(3, 3)
        rng = np.random.default_rng(17)
        for _ in range(5):
            inst = generate_instance(c, rng)
            k_bf, _ = brute_force_diagnosis(inst, max_cardinality=4)
            k_sat, _ = diagnose_min_cardinality(inst)
            assert k_sat == k_bf

    def test_enumeration_unique_minimum(self, full_adder):
        # carry observed wrong while sum is right on (1,1,0): flip c_out only
        inst = DiagnosisInstance(full_adder, (Observation((1, 1, 0), (0, 0)),))
        k, diags = minimal_diagnoses(inst)
        kb, sets = brute_force_diagnosis(inst)
        assert (k, diags) == (kb, frozenset(sets))

    def test_blocking_clause_excludes_only_blocked_set(self, anomalous_fa_instance):
        cnf = encode_fault_augmented(anomalous_fa_instance)
        fault = {gid: lit for gid, lit in cnf.fault_lits.items()}
        blocked = frozenset({0})
        clause = [(-lit if gid in blocked else lit) for gid, lit in fault.items()]
        # an assignment with fault set {0} violates it; any other set satisfies
        for other in [frozenset(), frozenset({1}), frozenset({0, 1})]:
            values = {lit: (gid in other) for gid, lit in fault.items()}
            satisfied = any(
                values[abs(l)] == (l > 0) for l in clause
            )
            assert satisfied == (other != blocked)


class TestSatTts:
    def test_constant_runner(self, anomalous_fa_instance):
        tts = sat_tts(anomalous_fa_instance, repetitions=50, runner=lambda i, s: 0.5)
        assert tts == 0.5

    def test_nearest_rank_definition(self, anomalous_fa_instance):
        values = iter(range(1, 1001))
        tts = sat_tts(
            anomalous_fa_instance, repetitions=1000, runner=lambda i, s: next(values)
        )
        assert tts == 990

    def test_real_runs_finite(self, mult22):
        rng = np.random.default_rng(23)
        inst = generate_instance(mult22, rng)
        tts = sat_tts(inst, repetitions=20)
        assert tts > 0


class TestDimacs:
    def test_round_trip(self, anomalous_fa_instance):
        cnf = encode_fault_augmented(anomalous_fa_instance)
        text = to_dimacs(cnf)
        back = parse_dimacs(text)
        assert back.n_vars == cnf.n_vars
        assert list(back.clauses) == list(cnf.clauses)
        assert to_dimacs(back) == text

    def test_annotations(self, anomalous_fa_instance):
        cnf = encode_fault_augmented(anomalous_fa_instance)
        text = annotations_to_string(cnf)
        assert f"fault 0 {cnf.fault_lits[0]}" in text.splitlines()

    def test_unsat_confirmed_by_oracle(self):
        rng = np.random.default_rng(11)
        checked = 0
        for trial in range(60):
            cnf = CnfFormula(18)
            for _ in range(90):
                vs = rng.choice(18, size=3, replace=False) + 1
                signs = rng.integers(0, 2, size=3) * 2 - 1
                cnf.add_clause(tuple(int(v * s) for v, s in zip(vs, signs)))
            out = sat_solve(cnf)
            if out.status == "UNSAT":
                assert not exhaustive_sat(cnf).any()
                checked += 1
        assert checked > 0
