"""Combinational circuits: multiplier benchmarks, fault injection, diagnosis instances.

Circuits are gate-level netlists over named wires.  Wire names follow the
netlist file convention: ``i<j>`` primary inputs, ``o<j>`` primary outputs,
``w<j>`` internal wires.  A primary output that is not driven by any gate
evaluates to constant 0 (this happens for the top product bit of degenerate
multipliers such as mult[1-1]).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, TextIO

import numpy as np

__all__ = [
    "GateKind",
    "FaultModel",
    "Gate",
    "Circuit",
    "Observation",
    "DiagnosisInstance",
    "CircuitError",
    "InjectionError",
    "GenerationError",
    "BudgetExceeded",
    "build_multiplier",
    "build_full_adder",
    "evaluate",
    "generate_instance",
    "brute_force_diagnosis",
    "save_netlist",
    "load_netlist",
    "netlist_to_string",
    "save_instance",
    "load_instance",
]


class CircuitError(ValueError):
    """Malformed circuit or netlist."""


class InjectionError(ValueError):
    """Fault injection requested for a gate whose model cannot be forced."""


class GenerationError(RuntimeError):
    """Instance generation exhausted its redraw budget."""


class BudgetExceeded(RuntimeError):
    """Exhaustive search would exceed the configured budget."""


class GateKind(Enum):
    OR = "OR"
    AND = "AND"
    XOR = "XOR"
    EQ = "EQ"
    BUFFER = "BUFFER"
    NOT = "NOT"
    NOR = "NOR"
    NAND = "NAND"

    @property
    def arity(self) -> int:
        return 1 if self in (GateKind.BUFFER, GateKind.NOT) else 2

    def apply(self, y: Sequence[int]) -> int:
        """Nominal Boolean function of the gate."""
        return _GATE_FUNC[self](y)


_GATE_FUNC = {
    GateKind.OR: lambda y: y[0] | y[1],
    GateKind.AND: lambda y: y[0] & y[1],
    GateKind.XOR: lambda y: y[0] ^ y[1],
    GateKind.EQ: lambda y: 1 - (y[0] ^ y[1]),
    GateKind.BUFFER: lambda y: y[0],
    GateKind.NOT: lambda y: 1 - y[0],
    GateKind.NOR: lambda y: 1 - (y[0] | y[1]),
    GateKind.NAND: lambda y: 1 - (y[0] & y[1]),
}


class FaultModel(Enum):
    STUCK_AT_1 = "STUCKAT1"
    STUCK_AT_0 = "STUCKAT0"
    STUCK_AT_0_OR_1 = "STUCKAT0OR1"
    STUCK_AT_FIRST_INPUT = "STUCKATFIRSTINPUT"
    STUCK_AT_FIRST_INPUT_OR_0 = "STUCKATFIRSTINPUTOR0"

    @property
    def injectable(self) -> bool:
        """True when the faulty output is a deterministic function of the inputs."""
        return self in (
            FaultModel.STUCK_AT_1,
            FaultModel.STUCK_AT_0,
            FaultModel.STUCK_AT_FIRST_INPUT,
        )

    def forced_output(self, y: Sequence[int]) -> int:
        if self is FaultModel.STUCK_AT_1:
            return 1
        if self is FaultModel.STUCK_AT_0:
            return 0
        if self is FaultModel.STUCK_AT_FIRST_INPUT:
            return y[0]
        raise InjectionError(f"{self.value} cannot be forced deterministically")

    def allowed_outputs(self, y: Sequence[int]) -> tuple[int, ...]:
        """Outputs z with predicate value 1 given inputs y (diagnosis semantics)."""
        if self is FaultModel.STUCK_AT_1:
            return (1,)
        if self is FaultModel.STUCK_AT_0:
            return (0,)
        if self is FaultModel.STUCK_AT_0_OR_1:
            return (0, 1)
        if self is FaultModel.STUCK_AT_FIRST_INPUT:
            return (y[0],)
        # stuck at first input or 0: predicate 1 - y1*(1-z)
        return (1,) if y[0] == 1 else (0, 1)

    def predicate(self, y: Sequence[int], z: int) -> int:
        return 1 if z in self.allowed_outputs(y) else 0


@dataclass(frozen=True)
class Gate:
    gid: int
    kind: GateKind
    inputs: tuple[str, ...]
    output: str
    fault: FaultModel = FaultModel.STUCK_AT_1

    def __post_init__(self) -> None:
        if len(self.inputs) != self.kind.arity:
            raise CircuitError(
                f"gate G{self.gid} {self.kind.value} expects "
                f"{self.kind.arity} inputs, got {len(self.inputs)}"
            )


@dataclass(frozen=True)
class Circuit:
    """Immutable combinational circuit.

    ``inputs`` and ``outputs`` fix the observation bit order.  Gates may be
    listed in any order; a topological order is computed on construction and
    the circuit is rejected if none exists.
    """

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    gates: tuple[Gate, ...]

    def __post_init__(self) -> None:
        if not self.gates:
            raise CircuitError("circuit must contain at least one gate")
        gids = [g.gid for g in self.gates]
        if len(set(gids)) != len(gids):
            raise CircuitError("duplicate gate ids")
        drivers: dict[str, int] = {}
        for g in self.gates:
            if g.output in drivers:
                raise CircuitError(f"wire {g.output} driven by more than one gate")
            if g.output in self.inputs:
                raise CircuitError(f"primary input {g.output} driven by a gate")
            drivers[g.output] = g.gid
        known = set(self.inputs) | set(drivers)
        for g in self.gates:
            for w in g.inputs:
                if w not in known:
                    raise CircuitError(f"gate G{g.gid} reads undriven wire {w}")
        for w in drivers:
            if not w.startswith(("o", "w")) and w not in self.outputs:
                raise CircuitError(f"unexpected wire name {w!r}")
        self.topological_gates  # force DAG check

    @cached_property
    def gate_by_id(self) -> dict[int, Gate]:
        return {g.gid: g for g in self.gates}

    @cached_property
    def driver_of(self) -> dict[str, Gate]:
        return {g.output: g for g in self.gates}

    @cached_property
    def internal_wires(self) -> tuple[str, ...]:
        """Gate outputs that are not primary outputs, in gate order."""
        out = set(self.outputs)
        return tuple(g.output for g in self.gates if g.output not in out)

    @cached_property
    def topological_gates(self) -> tuple[Gate, ...]:
        order: list[Gate] = []
        ready = set(self.inputs)
        pending = list(self.gates)
        while pending:
            rest = []
            for g in pending:
                if all(w in ready for w in g.inputs):
                    order.append(g)
                    ready.add(g.output)
                else:
                    rest.append(g)
            if len(rest) == len(pending):
                raise CircuitError("circuit contains a combinational cycle")
            pending = rest
        return tuple(order)

    @property
    def n_gates(self) -> int:
        return len(self.gates)


@dataclass(frozen=True)
class Observation:
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]

    def __post_init__(self) -> None:
        for b in self.inputs + self.outputs:
            if b not in (0, 1):
                raise ValueError("observation bits must be 0/1")


@dataclass(frozen=True)
class DiagnosisInstance:
    circuit: Circuit
    observations: tuple[Observation, ...]
    injected: Optional[frozenset[int]] = None

    def __post_init__(self) -> None:
        if not self.observations:
            raise ValueError("instance needs at least one observation")
        for obs in self.observations:
            if len(obs.inputs) != len(self.circuit.inputs):
                raise ValueError("observation input width mismatch")
            if len(obs.outputs) != len(self.circuit.outputs):
                raise ValueError("observation output width mismatch")


# ---------------------------------------------------------------------------
# construction


def build_full_adder() -> Circuit:
    """One-bit full adder: inputs (i1, i2, c_in), outputs (sum, c_out).

    5 gates: 2 XOR, 2 AND, 1 OR.  Gate G0 is the input XOR (the "first XOR").
    """
    gates = (
        Gate(0, GateKind.XOR, ("i0", "i1"), "w0"),
        Gate(1, GateKind.AND, ("i0", "i1"), "w1"),
        Gate(2, GateKind.XOR, ("w0", "i2"), "o0"),
        Gate(3, GateKind.AND, ("w0", "i2"), "w2"),
        Gate(4, GateKind.OR, ("w1", "w2"), "o1"),
    )
    return Circuit("fulladder", ("i0", "i1", "i2"), ("o0", "o1"), gates)


class _Builder:
    """Gate-list builder over symbolic nodes; wire names assigned at the end."""

    def __init__(self) -> None:
        self.ops: list[tuple[GateKind, tuple[object, ...]]] = []

    def gate(self, kind: GateKind, *ins: object) -> int:
        self.ops.append((kind, ins))
        return len(self.ops) - 1

    def half_add(self, x: object, u: object) -> tuple[int, int]:
        return self.gate(GateKind.XOR, x, u), self.gate(GateKind.AND, x, u)

    def full_add(self, x: object, y: object, c: object) -> tuple[int, int]:
        s1 = self.gate(GateKind.XOR, x, y)
        c1 = self.gate(GateKind.AND, x, y)
        s = self.gate(GateKind.XOR, s1, c)
        c2 = self.gate(GateKind.AND, s1, c)
        return s, self.gate(GateKind.OR, c1, c2)

    def adder_cell(
        self, x: object, y: Optional[object], c: Optional[object]
    ) -> tuple[object, Optional[object]]:
        """Add up to three bits; None inputs are constant 0 and cost no gates."""
        extra = [v for v in (y, c) if v is not None]
        if not extra:
            return x, None
        if len(extra) == 1:
            return self.half_add(x, extra[0])
        return self.full_add(x, y, c)

    def finalize(self, name: str, inputs: Sequence[str], products: Sequence[object]) -> Circuit:
        out_name = {}
        for k, node in enumerate(products):
            if node is not None:
                out_name[node] = f"o{k}"
        names: dict[int, str] = {}
        counter = 0
        for idx in range(len(self.ops)):
            if idx in out_name:
                names[idx] = out_name[idx]
            else:
                names[idx] = f"w{counter}"
                counter += 1

        def wire(node: object) -> str:
            return node if isinstance(node, str) else names[node]

        gates = tuple(
            Gate(idx, kind, tuple(wire(v) for v in ins), names[idx])
            for idx, (kind, ins) in enumerate(self.ops)
        )
        outputs = tuple(f"o{k}" for k in range(len(products)))
        return Circuit(name, tuple(inputs), outputs, gates)


def build_multiplier(n: int, m: int) -> Circuit:
    """Array multiplier for an n-bit by m-bit product, named mult[n-m].

    Partial products are AND gates; each adder row is a ripple chain of
    half adders (XOR+AND) and full adders (2 XOR + 2 AND + 1 OR).  Inputs
    are a's bits i0..i{n-1} then b's bits i{n}..i{n+m-1}, LSB first; the
    product is o0..o{n+m-1}, LSB first.  All gates default to stuck-at-1.
    """
    if n < 1 or m < 1:
        raise ValueError("multiplier operand widths must be >= 1")
    b = _Builder()
    a_bits = [f"i{i}" for i in range(n)]
    b_bits = [f"i{n + j}" for j in range(m)]
    pp = [[b.gate(GateKind.AND, a_bits[i], b_bits[j]) for i in range(n)] for j in range(m)]

    row: list[object] = list(pp[0])
    products: list[Optional[object]] = [row[0]]
    carry: Optional[object] = None
    for j in range(1, m):
        prev_high = [row[i + 1] for i in range(n - 1)] + [carry]
        new_row: list[object] = []
        c: Optional[object] = None
        for i in range(n):
            s, c = b.adder_cell(pp[j][i], prev_high[i], c)
            new_row.append(s)
        products.append(new_row[0])
        row = new_row
        carry = c
    products.extend(row[1:])
    products.append(carry)
    return b.finalize(f"mult[{n}-{m}]", a_bits + b_bits, products)


# ---------------------------------------------------------------------------
# simulation and instance generation


def evaluate(
    circuit: Circuit, inputs: Sequence[int], faults: Iterable[int] = ()
) -> Observation:
    """Propagate inputs through the circuit with the given gates forced faulty.

    Faulty gates must carry a deterministic (injectable) fault model; the
    non-deterministic models remain legal for diagnosis but not injection.
    """
    if len(inputs) != len(circuit.inputs):
        raise ValueError("input width mismatch")
    fault_set = set(faults)
    by_id = circuit.gate_by_id
    for gid in fault_set:
        if gid not in by_id:
            raise ValueError(f"unknown gate id {gid}")
        if not by_id[gid].fault.injectable:
            raise InjectionError(
                f"gate G{gid} has non-deterministic fault model {by_id[gid].fault.value}"
            )
    values: dict[str, int] = dict(zip(circuit.inputs, (int(v) for v in inputs)))
    for g in circuit.topological_gates:
        y = tuple(values[w] for w in g.inputs)
        values[g.output] = g.fault.forced_output(y) if g.gid in fault_set else g.kind.apply(y)
    outs = tuple(values.get(w, 0) for w in circuit.outputs)
    return Observation(tuple(int(v) for v in inputs), outs)


def generate_instance(
    circuit: Circuit,
    rng: np.random.Generator,
    redraw_budget: int = 1000,
) -> DiagnosisInstance:
    """Draw a random faulty observation with as many injected faults as outputs.

    Draws a uniform fault set (cardinality = number of primary outputs,
    capped at the gate count) and a uniform input, propagates, and redraws
    whenever the observation coincides with the nominal output, so every
    instance has minimal cardinality >= 1 and the injected set is itself a
    valid diagnosis.
    """
    for g in circuit.gates:
        if not g.fault.injectable:
            raise InjectionError(
                f"gate G{g.gid} carries non-injectable model {g.fault.value}"
            )
    k = min(len(circuit.outputs), circuit.n_gates)
    gids = sorted(g.gid for g in circuit.gates)
    for _ in range(redraw_budget):
        chosen = frozenset(int(gids[i]) for i in rng.choice(len(gids), size=k, replace=False))
        bits = [int(v) for v in rng.integers(0, 2, size=len(circuit.inputs))]
        obs = evaluate(circuit, bits, chosen)
        nominal = evaluate(circuit, bits)
        if obs.outputs != nominal.outputs:
            return DiagnosisInstance(circuit, (obs,), chosen)
    raise GenerationError(
        f"no anomalous observation found in {redraw_budget} draws; "
        "circuit is insensitive to the drawn fault sets"
    )


# ---------------------------------------------------------------------------
# brute-force diagnosis


def _consistent(circuit: Circuit, fault_set: frozenset[int], obs: Observation) -> bool:
    """Does some wire assignment satisfy all gate/fault constraints and the observation?

    Forward propagation in topological order; branches only where a faulty
    gate's model leaves the output free (e.g. stuck-at-0-or-1).
    """
    out_pos = {w: p for p, w in enumerate(circuit.outputs)}
    # undriven outputs are constant 0
    driven = {g.output for g in circuit.gates}
    for w, p in out_pos.items():
        if w not in driven and obs.outputs[p] != 0:
            return False
    topo = circuit.topological_gates
    values = dict(zip(circuit.inputs, obs.inputs))

    def rec(idx: int) -> bool:
        if idx == len(topo):
            return True
        g = topo[idx]
        y = tuple(values[w] for w in g.inputs)
        if g.gid in fault_set:
            allowed = g.fault.allowed_outputs(y)
        else:
            allowed = (g.kind.apply(y),)
        if g.output in out_pos:
            need = obs.outputs[out_pos[g.output]]
            if need not in allowed:
                return False
            allowed = (need,)
        for z in allowed:
            values[g.output] = z
            if rec(idx + 1):
                return True
        del values[g.output]
        return False

    return rec(0)


def is_valid_diagnosis(instance: DiagnosisInstance, fault_set: Iterable[int]) -> bool:
    fs = frozenset(fault_set)
    return all(_consistent(instance.circuit, fs, obs) for obs in instance.observations)


def brute_force_diagnosis(
    instance: DiagnosisInstance,
    max_cardinality: Optional[int] = None,
    budget: int = 2_000_000,
) -> tuple[int, set[frozenset[int]]]:
    """Exhaustively find the minimal fault cardinality and all minimal diagnoses.

    Enumerates fault sets by increasing cardinality; guards the total number
    of candidate sets against ``budget`` before starting.
    """
    circuit = instance.circuit
    n = circuit.n_gates
    kmax = n if max_cardinality is None else min(max_cardinality, n)
    total = sum(math.comb(n, k) for k in range(kmax + 1))
    if total > budget:
        raise BudgetExceeded(f"{total} candidate fault sets exceed budget {budget}")
    gids = sorted(g.gid for g in circuit.gates)
    for k in range(kmax + 1):
        found = {
            frozenset(combo)
            for combo in itertools.combinations(gids, k)
            if is_valid_diagnosis(instance, combo)
        }
        if found:
            return k, found
    raise GenerationError(f"no diagnosis of cardinality <= {kmax} exists")


# ---------------------------------------------------------------------------
# netlist / instance files


def netlist_to_string(circuit: Circuit) -> str:
    lines = [
        f"circuit {circuit.name} inputs={len(circuit.inputs)} outputs={len(circuit.outputs)}"
    ]
    for g in circuit.gates:
        ins = " ".join(g.inputs)
        lines.append(f"G{g.gid} {g.kind.value} {ins} -> {g.output} fault={g.fault.value}")
    return "\n".join(lines) + "\n"


def save_netlist(circuit: Circuit, path) -> None:
    with open(path, "w") as fh:
        fh.write(netlist_to_string(circuit))


def parse_netlist(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("circuit "):
        raise CircuitError("netlist must start with a 'circuit' header")
    head = lines[0].split()
    if len(head) != 4:
        raise CircuitError(f"bad header: {lines[0]!r}")
    name = head[1]
    try:
        n_in = int(head[2].removeprefix("inputs="))
        n_out = int(head[3].removeprefix("outputs="))
    except ValueError as exc:
        raise CircuitError(f"bad header: {lines[0]!r}") from exc
    gates = []
    for ln in lines[1:]:
        toks = ln.split()
        if len(toks) < 6 or "->" not in toks:
            raise CircuitError(f"bad gate line: {ln!r}")
        if not toks[0].startswith("G"):
            raise CircuitError(f"bad gate id in: {ln!r}")
        gid = int(toks[0][1:])
        kind = GateKind(toks[1])
        arrow = toks.index("->")
        ins = tuple(toks[2:arrow])
        out = toks[arrow + 1]
        if not toks[-1].startswith("fault="):
            raise CircuitError(f"missing fault model in: {ln!r}")
        fault = FaultModel(toks[-1].removeprefix("fault="))
        gates.append(Gate(gid, kind, ins, out, fault))
    inputs = tuple(f"i{j}" for j in range(n_in))
    outputs = tuple(f"o{j}" for j in range(n_out))
    return Circuit(name, inputs, outputs, tuple(gates))


def load_netlist(path) -> Circuit:
    with open(path) as fh:
        return parse_netlist(fh.read())


def _bits(s: str) -> tuple[int, ...]:
    if not set(s) <= {"0", "1"}:
        raise CircuitError(f"bad bit string {s!r}")
    return tuple(int(c) for c in s)


def save_instance(instance: DiagnosisInstance, path, netlist_ref: str) -> None:
    lines = [f"netlist {netlist_ref}"]
    for obs in instance.observations:
        ib = "".join(str(b) for b in obs.inputs)
        ob = "".join(str(b) for b in obs.outputs)
        lines.append(f"obs {ib} {ob}")
    if instance.injected is not None:
        lines.append("truth " + " ".join(str(g) for g in sorted(instance.injected)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path, circuit: Optional[Circuit] = None) -> DiagnosisInstance:
    """Load an instance file; the netlist reference is resolved relative to it."""
    import os

    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("netlist "):
        raise CircuitError("instance file must start with a netlist reference")
    if circuit is None:
        ref = lines[0].split(None, 1)[1]
        circuit = load_netlist(os.path.join(os.path.dirname(os.fspath(path)), ref))
    observations = []
    injected = None
    for ln in lines[1:]:
        toks = ln.split()
        if toks[0] == "obs":
            observations.append(Observation(_bits(toks[1]), _bits(toks[2])))
        elif toks[0] == "truth":
            injected = frozenset(int(t) for t in toks[1:])
        else:
            raise CircuitError(f"bad instance line: {ln!r}")
    return DiagnosisInstance(circuit, tuple(observations), injected)
