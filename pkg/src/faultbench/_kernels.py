"""Numba kernels: exhaustive polynomial scans and Monte Carlo inner loops.

All kernels operate on the flat arrays of a CompiledPoly (coefficients,
term pointers, per-variable term adjacency) plus solver-specific state.
Random numbers come from numba's per-kernel legacy RNG seeded explicitly,
so results are deterministic for a given seed regardless of threading
outside the kernel.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# generic polynomial evaluation


@njit(cache=True)
def poly_energy(state, const, coeffs, term_ptr, term_vars):
    total = const
    for ti in range(coeffs.shape[0]):
        prod = 1.0
        for k in range(term_ptr[ti], term_ptr[ti + 1]):
            prod *= state[term_vars[k]]
        total += coeffs[ti] * prod
    return total


@njit(cache=True)
def poly_delta(state, i, spin, coeffs, term_ptr, term_vars, var_ptr, var_terms):
    """Energy change if variable i is flipped (0<->1 or +1<->-1)."""
    old = state[i]
    new = -old if spin else 1 - old
    diff = float(new - old)
    total = 0.0
    for k in range(var_ptr[i], var_ptr[i + 1]):
        ti = var_terms[k]
        prod = 1.0
        for j in range(term_ptr[ti], term_ptr[ti + 1]):
            v = term_vars[j]
            if v != i:
                prod *= state[v]
        total += coeffs[ti] * prod
    return total * diff


@njit(cache=True)
def _gray_flip_index(k):
    # bit flipped between gray(k) and gray(k+1) is the trailing-zero count of k+1
    i = 0
    k += 1
    while k & 1 == 0:
        k >>= 1
        i += 1
    return i


@njit(cache=True)
def exhaustive_min(n, spin, const, coeffs, term_ptr, term_vars, var_ptr, var_terms):
    """Minimum over all 2^n assignments via gray-code single-flip updates."""
    state = np.empty(n, dtype=np.int8)
    for i in range(n):
        state[i] = 1 if spin else 0
    e = poly_energy(state, const, coeffs, term_ptr, term_vars)
    best = e
    total = 1 << n
    for k in range(total - 1):
        i = _gray_flip_index(k)
        e += poly_delta(state, i, spin, coeffs, term_ptr, term_vars, var_ptr, var_terms)
        state[i] = -state[i] if spin else 1 - state[i]
        if e < best:
            best = e
    return best


@njit(cache=True)
def exhaustive_minimizers(
    n, spin, const, coeffs, term_ptr, term_vars, var_ptr, var_terms, best, tol, max_count
):
    """All states with energy within tol of best (up to max_count of them)."""
    state = np.empty(n, dtype=np.int8)
    for i in range(n):
        state[i] = 1 if spin else 0
    out = np.empty((max_count, n), dtype=np.int8)
    count = 0
    e = poly_energy(state, const, coeffs, term_ptr, term_vars)
    if e <= best + tol:
        out[count] = state
        count += 1
    total = 1 << n
    for k in range(total - 1):
        i = _gray_flip_index(k)
        e += poly_delta(state, i, spin, coeffs, term_ptr, term_vars, var_ptr, var_terms)
        state[i] = -state[i] if spin else 1 - state[i]
        if e <= best + tol:
            if count >= max_count:
                return out[:count], True
            out[count] = state
            count += 1
    return out[:count], False


# ---------------------------------------------------------------------------
# simulated annealing


@njit(cache=True)
def sa_run(
    n,
    spin,
    const,
    coeffs,
    term_ptr,
    term_vars,
    var_ptr,
    var_terms,
    betas,
    seed,
):
    """One SA repetition: random start, Metropolis sweeps along the beta ramp.

    Returns (best_energy, best_state, sweep index of the last improvement).
    """
    np.random.seed(seed)
    state = np.empty(n, dtype=np.int8)
    for i in range(n):
        if spin:
            state[i] = 1 if np.random.random() < 0.5 else -1
        else:
            state[i] = 1 if np.random.random() < 0.5 else 0
    e = poly_energy(state, const, coeffs, term_ptr, term_vars)
    best = e
    best_state = state.copy()
    best_sweep = 0
    for sweep in range(betas.shape[0]):
        beta = betas[sweep]
        for i in range(n):
            d = poly_delta(state, i, spin, coeffs, term_ptr, term_vars, var_ptr, var_terms)
            if d <= 0.0 or np.random.random() < np.exp(-beta * d):
                state[i] = -state[i] if spin else 1 - state[i]
                e += d
                if e < best - 1e-12:
                    best = e
                    best_state[:] = state
                    best_sweep = sweep + 1
    return best, best_state, best_sweep


# ---------------------------------------------------------------------------
# parallel tempering with isoenergetic cluster moves


@njit(cache=True)
def _metropolis_sweep(
    state, beta, n, spin, coeffs, term_ptr, term_vars, var_ptr, var_terms
):
    e_acc = 0.0
    for i in range(n):
        d = poly_delta(state, i, spin, coeffs, term_ptr, term_vars, var_ptr, var_terms)
        if d <= 0.0 or np.random.random() < np.exp(-beta * d):
            state[i] = -state[i] if spin else 1 - state[i]
            e_acc += d
    return e_acc


@njit(cache=True)
def pticm_run(
    n,
    spin,
    const,
    coeffs,
    term_ptr,
    term_vars,
    var_ptr,
    var_terms,
    nbr_ptr,
    nbr_idx,
    betas,
    n_replicas,
    sweeps,
    swap_every,
    cluster_every,
    seed,
    checkpoints,
    target,
    check_moves,
):
    """Parallel tempering over a beta ladder with optional Houdayer exchanges.

    Replica layout: n_temps * n_replicas independent configurations; replica
    family r at temperature t swaps with family r at the neighboring
    temperature.  Cluster moves exchange a connected component of the
    disagreement set between a random same-temperature pair; they conserve
    the pair's energy sum on quadratic inputs (checked when check_moves).

    Early exit once the best energy reaches `target` (pass -inf to disable).
    Returns (best_energy, best_state, hit_sweep, checkpoint energies,
    checkpoint states, cluster-move energy violations).
    """
    np.random.seed(seed)
    n_temps = betas.shape[0]
    total = n_temps * n_replicas
    states = np.empty((total, n), dtype=np.int8)
    energies = np.empty(total, dtype=np.float64)
    for a in range(total):
        for i in range(n):
            if spin:
                states[a, i] = 1 if np.random.random() < 0.5 else -1
            else:
                states[a, i] = 1 if np.random.random() < 0.5 else 0
        energies[a] = poly_energy(states[a], const, coeffs, term_ptr, term_vars)
    best = np.inf
    best_state = np.zeros(n, dtype=np.int8)
    hit_sweep = -1
    n_chk = checkpoints.shape[0]
    chk_energy = np.full(n_chk, np.inf, dtype=np.float64)
    chk_states = np.zeros((n_chk, n), dtype=np.int8)
    violations = 0
    stack = np.empty(n, dtype=np.int32)
    in_cluster = np.zeros(n, dtype=np.bool_)

    for a in range(total):
        if energies[a] < best:
            best = energies[a]
            best_state[:] = states[a]
    if best <= target:
        hit_sweep = 0

    chk_i = 0
    for sweep in range(sweeps):
        for a in range(total):
            energies[a] += _metropolis_sweep(
                states[a], betas[a // n_replicas], n, spin,
                coeffs, term_ptr, term_vars, var_ptr, var_terms,
            )
            if energies[a] < best - 1e-12:
                best = energies[a]
                best_state[:] = states[a]
                if hit_sweep < 0 and best <= target:
                    hit_sweep = sweep + 1
        # neighbouring-temperature swaps within each replica family
        if swap_every > 0 and (sweep + 1) % swap_every == 0:
            for t in range(n_temps - 1):
                for r in range(n_replicas):
                    a = t * n_replicas + r
                    b = (t + 1) * n_replicas + r
                    arg = (betas[t] - betas[t + 1]) * (energies[a] - energies[b])
                    if arg >= 0.0 or np.random.random() < np.exp(arg):
                        tmp = states[a].copy()
                        states[a] = states[b]
                        states[b] = tmp
                        ea = energies[a]
                        energies[a] = energies[b]
                        energies[b] = ea
        # isoenergetic cluster exchange between a same-temperature pair
        if cluster_every > 0 and (sweep + 1) % cluster_every == 0:
            for t in range(n_temps):
                r1 = np.random.randint(n_replicas)
                r2 = np.random.randint(n_replicas)
                if r1 == r2:
                    continue
                a = t * n_replicas + r1
                b = t * n_replicas + r2
                # seed site where the two replicas disagree
                start = -1
                probe = np.random.randint(n)
                for off in range(n):
                    i = (probe + off) % n
                    if states[a, i] != states[b, i]:
                        start = i
                        break
                if start < 0:
                    continue
                for i in range(n):
                    in_cluster[i] = False
                sp = 0
                stack[sp] = start
                sp += 1
                in_cluster[start] = True
                while sp > 0:
                    sp -= 1
                    i = stack[sp]
                    for k in range(nbr_ptr[i], nbr_ptr[i + 1]):
                        j = nbr_idx[k]
                        if not in_cluster[j] and states[a, j] != states[b, j]:
                            in_cluster[j] = True
                            stack[sp] = j
                            sp += 1
                esum0 = energies[a] + energies[b]
                for i in range(n):
                    if in_cluster[i]:
                        tmp8 = states[a, i]
                        states[a, i] = states[b, i]
                        states[b, i] = tmp8
                energies[a] = poly_energy(states[a], const, coeffs, term_ptr, term_vars)
                energies[b] = poly_energy(states[b], const, coeffs, term_ptr, term_vars)
                if check_moves and abs(energies[a] + energies[b] - esum0) > 1e-6:
                    violations += 1
                for ab in (a, b):
                    if energies[ab] < best - 1e-12:
                        best = energies[ab]
                        best_state[:] = states[ab]
                        if hit_sweep < 0 and best <= target:
                            hit_sweep = sweep + 1
        while chk_i < n_chk and checkpoints[chk_i] == sweep + 1:
            chk_energy[chk_i] = best
            chk_states[chk_i] = best_state
            chk_i += 1
        if hit_sweep >= 0 and target > -np.inf:
            break
    # fill remaining checkpoints with the final best (early exit)
    while chk_i < n_chk:
        chk_energy[chk_i] = best
        chk_states[chk_i] = best_state
        chk_i += 1
    return best, best_state, hit_sweep, chk_energy, chk_states, violations


# ---------------------------------------------------------------------------
# path-integral simulated quantum annealing
#
# Worldlines: P time slices per variable with periodic boundary.  Updates are
# Wolff-style clusters grown only along imaginary time (bond activation
# probability 1 - exp(-2 J_perp) between aligned neighbours, with
# J_perp = -0.5 ln tanh(beta A / P)), accepted with a Metropolis test on the
# diagonal (problem) action change.


@njit(cache=True)
def _slice_delta(slices, p, i, coeffs, term_ptr, term_vars, var_ptr, var_terms):
    return poly_delta(
        slices[p], i, True, coeffs, term_ptr, term_vars, var_ptr, var_terms
    )


@njit(cache=True)
def _sqa_sweep(
    slices, n, P, j_perp, weight, coeffs, term_ptr, term_vars, var_ptr, var_terms
):
    """One sweep: for each variable, one imaginary-time cluster attempt.

    weight = beta * B / P multiplies the diagonal energy change per slice.
    Returns the number of accepted cluster flips.
    """
    accepted = 0
    p_bond = 1.0 - np.exp(-2.0 * j_perp)
    for i in range(n):
        start = np.random.randint(P)
        # grow the cluster along the time ring over aligned bonds
        lo = start
        hi = start  # cluster covers slices lo..hi (mod P), inclusive
        size = 1
        s0 = slices[start, i]
        while size < P:
            nxt = (hi + 1) % P
            if slices[nxt, i] == s0 and np.random.random() < p_bond:
                hi = nxt
                size += 1
            else:
                break
        while size < P:
            prv = (lo - 1) % P
            if slices[prv, i] == s0 and np.random.random() < p_bond:
                lo = prv
                size += 1
            else:
                break
        d_diag = 0.0
        p = lo
        for _ in range(size):
            d_diag += _slice_delta(slices, p, i, coeffs, term_ptr, term_vars, var_ptr, var_terms)
            p = (p + 1) % P
        arg = weight * d_diag
        if arg <= 0.0 or np.random.random() < np.exp(-arg):
            p = lo
            for _ in range(size):
                slices[p, i] = -slices[p, i]
                p = (p + 1) % P
            accepted += 1
    return accepted


@njit(cache=True)
def sqa_anneal(
    n,
    const,
    coeffs,
    term_ptr,
    term_vars,
    var_ptr,
    var_terms,
    a_path,
    b_path,
    beta,
    P,
    seed,
):
    """Anneal along the (A, B) path; returns the majority-projected final state.

    a_path/b_path give the schedule values at each sweep.  J_perp is clamped
    to keep bond probabilities finite as A -> 0.
    """
    np.random.seed(seed)
    slices = np.empty((P, n), dtype=np.int8)
    for p in range(P):
        for i in range(n):
            slices[p, i] = 1 if np.random.random() < 0.5 else -1
    sweeps = a_path.shape[0]
    for sweep in range(sweeps):
        a_val = a_path[sweep]
        b_val = b_path[sweep]
        arg = beta * a_val / P
        if arg < 1e-12:
            j_perp = 30.0
        else:
            t = np.tanh(arg)
            j_perp = -0.5 * np.log(t)
            if j_perp > 30.0:
                j_perp = 30.0
            if j_perp < 0.0:
                j_perp = 0.0
        _sqa_sweep(
            slices, n, P, j_perp, beta * b_val / P,
            coeffs, term_ptr, term_vars, var_ptr, var_terms,
        )
    # majority projection per worldline, ties to +1 by slice-sum sign
    state = np.empty(n, dtype=np.int8)
    for i in range(n):
        s = 0
        for p in range(P):
            s += slices[p, i]
        state[i] = 1 if s >= 0 else -1
    e = poly_energy(state, const, coeffs, term_ptr, term_vars)
    return state, e


@njit(cache=True)
def sqa_sample(
    n,
    const,
    coeffs,
    term_ptr,
    term_vars,
    var_ptr,
    var_terms,
    gamma,
    b_val,
    beta,
    P,
    seed,
    sweeps,
    burnin,
    thin,
):
    """Fixed-field sampling for observables.

    Returns per-sample kink counts (anti-aligned time bonds per variable)
    and per-sample diagonal energy averaged over slices.
    """
    np.random.seed(seed)
    slices = np.empty((P, n), dtype=np.int8)
    for p in range(P):
        for i in range(n):
            slices[p, i] = 1 if np.random.random() < 0.5 else -1
    arg = beta * gamma / P
    t = np.tanh(arg)
    j_perp = -0.5 * np.log(t)
    if j_perp > 30.0:
        j_perp = 30.0
    n_samples = (sweeps - burnin) // thin
    kinks = np.zeros((n_samples, n), dtype=np.int64)
    diag = np.zeros(n_samples, dtype=np.float64)
    s_idx = 0
    for sweep in range(sweeps):
        _sqa_sweep(
            slices, n, P, j_perp, beta * b_val / P,
            coeffs, term_ptr, term_vars, var_ptr, var_terms,
        )
        if sweep >= burnin and (sweep - burnin) % thin == 0 and s_idx < n_samples:
            acc = 0.0
            for p in range(P):
                acc += poly_energy(slices[p], const, coeffs, term_ptr, term_vars)
            diag[s_idx] = acc / P
            for i in range(n):
                c = 0
                for p in range(P):
                    if slices[p, i] != slices[(p + 1) % P, i]:
                        c += 1
                kinks[s_idx, i] = c
            s_idx += 1
    return kinks, diag
