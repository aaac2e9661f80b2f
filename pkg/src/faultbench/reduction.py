"""Quadratic reduction of diagnosis polynomials via conjunction ancillas.

Each selected conjunction q_i q_j is replaced by an ancilla bit constrained
with the penalty delta * (3 q_ij + q_i q_j - 2 q_i q_ij - 2 q_j q_ij), which
vanishes exactly when q_ij = q_i q_j and is at least delta otherwise.  The
diagnosis mappings designate the pairs to contract (a gate's input pair and
its output-times-health pair) along with per-gate-kind penalty weights
(2.5 lambda for AND/OR, 2 lambda for XOR).

A conjunction designated by several gates (e.g. the shared input pair of a
half adder's XOR and AND) reuses a single ancilla whose weight is the SUM of
the per-gate weights: each gate's terms can recover at most its own
per-kind delta from a broken constraint, so pooling gates onto one ancilla
at only the maximum weight can corrupt the ground state (observed on real
multiplier instances), while the summed weight keeps the bound.  An ancilla
is only created when some cubic or quartic term actually needs it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from faultbench import _kernels
from faultbench.pubo import (
    BINARY,
    CompiledPoly,
    PairHint,
    Polynomial,
    VarInfo,
)

__all__ = [
    "AncillaRegistry",
    "QuadraticPolynomial",
    "ReductionError",
    "ReductionReport",
    "ancilla_penalty",
    "reduce_to_quadratic",
    "verify_reduction",
    "exhaustive_minimum",
    "quadratic_to_string",
    "parse_quadratic",
    "save_quadratic",
    "load_quadratic",
]


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class AncillaRegistry:
    """Which conjunction each ancilla stands for, and its penalty weight."""

    pairs: dict[tuple[int, int], int] = field(default_factory=dict)
    delta: dict[int, Fraction] = field(default_factory=dict)

    def items(self):
        return ((pair, aid, self.delta[aid]) for pair, aid in sorted(self.pairs.items()))

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class QuadraticPolynomial:
    poly: Polynomial
    ancillas: AncillaRegistry

    def __post_init__(self) -> None:
        if self.poly.degree > 2:
            raise ReductionError("quadratic polynomial has degree > 2")
        present = {v for v, info in self.poly.registry.items() if info.role == "ancilla"}
        if present != set(self.ancillas.pairs.values()):
            raise ReductionError("ancilla registry does not match polynomial registry")

    @property
    def n_vars(self) -> int:
        return self.poly.n_vars


def ancilla_penalty(qi: int, qj: int, qij: int, delta) -> Fraction:
    """Penalty of one conjunction constraint; 0 iff qij == qi*qj, else >= delta."""
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("penalty weight must be positive")
    return delta * (3 * qij + qi * qj - 2 * qi * qij - 2 * qj * qij)


def reduce_to_quadratic(
    p: Polynomial,
    fallback_delta: Optional[Union[int, float, Fraction]] = None,
) -> QuadraticPolynomial:
    """Contract conjunctions until every term is quadratic.

    Designated pairs from ``p.hints`` are applied first (quartic terms take
    two contractions: the input pair, then output*health).  Terms of degree
    three or four without an applicable hint fall back to a greedy
    most-frequent-pair contraction at ``fallback_delta``; if no fallback is
    supplied such terms are an error.
    """
    if p.domain != BINARY:
        raise ReductionError("reduction operates on binary-domain polynomials")
    if p.degree > 4:
        raise ReductionError(f"degree {p.degree} exceeds the quartic mappings")

    terms = dict(p.terms)
    registry = dict(p.registry)
    pairs: dict[tuple[int, int], int] = {}
    deltas: dict[int, Fraction] = {}
    next_id = max(registry, default=-1) + 1

    # one designation per (gate, observation, mode); a pair designated by
    # several gates accumulates their weights on the shared ancilla
    pair_delta: dict[tuple[int, int], Fraction] = {}
    pair_order: list[tuple[int, int]] = []
    for h in p.hints:
        key = (h.u, h.v)
        if key not in pair_delta:
            pair_delta[key] = Fraction(0)
            pair_order.append(key)
        pair_delta[key] += h.delta

    def contract(u: int, v: int, delta: Fraction) -> None:
        nonlocal next_id
        if (u, v) in pairs:
            aid = pairs[(u, v)]
        else:
            aid = next_id
            next_id += 1
            pairs[(u, v)] = aid
            deltas[aid] = delta
            registry[aid] = VarInfo("ancilla", f"q:{u}*{v}")
        matching = [t for t in terms if len(t) >= 3 and u in t and v in t]
        for t in matching:
            c = terms.pop(t)
            nt = tuple(sorted((set(t) - {u, v}) | {aid}))
            terms[nt] = terms.get(nt, Fraction(0)) + c
            if not terms[nt]:
                del terms[nt]

    while True:
        high = sorted((t for t in terms if len(t) >= 3), key=lambda t: (-len(t), t))
        if not high:
            break
        t = high[0]
        applied = False
        for pair in pair_order:  # input pairs first, then output*health
            if pair[0] in t and pair[1] in t:
                contract(pair[0], pair[1], pair_delta[pair])
                applied = True
                break
        if applied:
            continue
        if fallback_delta is None:
            raise ReductionError(
                f"term {t} has no designated conjunction and no fallback delta"
            )
        counts: dict[tuple[int, int], int] = {}
        for ht in high:
            for a in range(len(ht)):
                for b in range(a + 1, len(ht)):
                    key = (ht[a], ht[b])
                    counts[key] = counts.get(key, 0) + 1
        u, v = min(counts, key=lambda k: (-counts[k], k))
        contract(u, v, Fraction(fallback_delta))

    for (u, v), aid in pairs.items():
        d = deltas[aid]
        for term, coeff in (
            ((aid,), 3 * d),
            ((u, v), d),
            (tuple(sorted((u, aid))), -2 * d),
            (tuple(sorted((v, aid))), -2 * d),
        ):
            terms[term] = terms.get(term, Fraction(0)) + coeff
            if not terms[term]:
                del terms[term]

    out = Polynomial(BINARY, terms, registry, (), dict(p.meta))
    return QuadraticPolynomial(out, AncillaRegistry(pairs, deltas))


# ---------------------------------------------------------------------------
# verification


def exhaustive_minimum(p: Polynomial, budget: int = 1 << 26) -> float:
    """Minimum of p over its full domain by gray-code enumeration."""
    cp = CompiledPoly(p)
    if 2**cp.n > budget:
        raise ReductionError(f"2^{cp.n} assignments exceed budget {budget}")
    if cp.n == 0:
        return cp.const
    return float(
        _kernels.exhaustive_min(
            cp.n, cp.spin, cp.const, cp.coeffs, cp.term_ptr, cp.term_vars,
            cp.var_ptr, cp.var_terms,
        )
    )


def exhaustive_minimizers(
    p: Polynomial, budget: int = 1 << 26, tol: float = 1e-9, max_count: int = 1 << 17
) -> tuple[float, np.ndarray]:
    cp = CompiledPoly(p)
    if 2**cp.n > budget:
        raise ReductionError(f"2^{cp.n} assignments exceed budget {budget}")
    if cp.n == 0:
        return cp.const, np.zeros((1, 0), dtype=np.int8)
    best = _kernels.exhaustive_min(
        cp.n, cp.spin, cp.const, cp.coeffs, cp.term_ptr, cp.term_vars,
        cp.var_ptr, cp.var_terms,
    )
    states, overflow = _kernels.exhaustive_minimizers(
        cp.n, cp.spin, cp.const, cp.coeffs, cp.term_ptr, cp.term_vars,
        cp.var_ptr, cp.var_terms, best, tol, max_count,
    )
    if overflow:
        raise ReductionError("minimizer set exceeds enumeration cap")
    return float(best), states


@dataclass(frozen=True)
class ReductionReport:
    min_original: float
    min_reduced: float
    minima_equal: bool
    constraint_violations: int
    projection_matches: bool
    n_reduced_minimizers: int

    @property
    def ok(self) -> bool:
        return self.minima_equal and self.constraint_violations == 0 and self.projection_matches


def verify_reduction(
    p: Polynomial, q: QuadraticPolynomial, budget: int = 1 << 26
) -> ReductionReport:
    """Exhaustively check that the reduction preserves the low-energy structure.

    Confirms min equality, that every reduced minimizer satisfies all
    conjunction constraints, and that the projections of the reduced
    minimizers onto the original variables are exactly the original
    minimizers.
    """
    min_p, p_states = exhaustive_minimizers(p, budget)
    min_q, q_states = exhaustive_minimizers(q.poly, budget)
    p_ids = p.variables()
    q_ids = q.poly.variables()
    pos = {v: i for i, v in enumerate(q_ids)}
    violations = 0
    projections = set()
    for state in q_states:
        for (u, v), aid in q.ancillas.pairs.items():
            if state[pos[aid]] != state[pos[u]] * state[pos[v]]:
                violations += 1
                break
        projections.add(tuple(int(state[pos[v]]) for v in p_ids))
    originals = {tuple(int(b) for b in s) for s in p_states}
    return ReductionReport(
        min_original=min_p,
        min_reduced=min_q,
        minima_equal=abs(min_p - min_q) < 1e-9,
        constraint_violations=violations,
        projection_matches=projections == originals,
        n_reduced_minimizers=len(q_states),
    )


# ---------------------------------------------------------------------------
# file format (polynomial format plus an ancilla section)


def quadratic_to_string(q: QuadraticPolynomial) -> str:
    from faultbench.pubo import polynomial_to_string

    lines = [polynomial_to_string(q.poly).rstrip("\n")]
    for (u, v), aid, delta in q.ancillas.items():
        lines.append(f"ancilla {aid} = {u}*{v} delta={repr(float(delta))}")
    return "\n".join(lines) + "\n"


def save_quadratic(q: QuadraticPolynomial, path) -> None:
    with open(path, "w") as fh:
        fh.write(quadratic_to_string(q))


def parse_quadratic(text: str) -> QuadraticPolynomial:
    from faultbench.pubo import parse_polynomial

    poly_lines = []
    pairs: dict[tuple[int, int], int] = {}
    deltas: dict[int, Fraction] = {}
    for ln in text.splitlines():
        if ln.startswith("ancilla "):
            toks = ln.split()
            aid = int(toks[1])
            u, v = (int(x) for x in toks[3].split("*"))
            pairs[(u, v)] = aid
            deltas[aid] = Fraction(float(toks[4].removeprefix("delta=")))
        else:
            poly_lines.append(ln)
    poly = parse_polynomial("\n".join(poly_lines))
    return QuadraticPolynomial(poly, AncillaRegistry(pairs, deltas))


def load_quadratic(path) -> QuadraticPolynomial:
    with open(path) as fh:
        return parse_quadratic(fh.read())
