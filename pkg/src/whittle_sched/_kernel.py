"""Compiled slot loop for the Monte Carlo simulator.

Implements exactly the same draw discipline as the pure-Python path in sim.py:
the delivery draw for client n at slot t is the counter-based uniform at
position t of its (seed, replication, client) stream, and policy-internal
randomness reads position t*N + n of the reserved policy stream. Keep the two
paths in lockstep; tests compare their integer accumulators.
"""

import numpy as np
from numba import njit

# Policy kinds understood by the loop.
KIND_INDEX = 0
KIND_RANDOM = 1
KIND_GREEDY = 2
KIND_THRESHOLD = 3

TIE_BY_ID = 0
TIE_BY_KEY = 1


@njit(cache=True, inline="always")
def _uniform_at(key, counter):
    z = key + np.uint64(0x9E3779B97F4A7C15) * (np.uint64(counter) + np.uint64(1))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return np.float64(z >> np.uint64(11)) * 1.1102230246251565e-16


@njit(cache=True)
def _mark_top(scores, positive_only, budget, use_tie, tie_keys, selected):
    """Mark the top-``budget`` scores, ties to lowest id or smallest tie key.

    Returns the number selected. ``selected`` must come in all-False.
    """
    n_total = scores.shape[0]
    eligible_count = 0
    for n in range(n_total):
        if (not positive_only) or scores[n] > 0.0:
            eligible_count += 1
    if eligible_count == 0:
        return 0
    if eligible_count <= budget:
        m = 0
        for n in range(n_total):
            if (not positive_only) or scores[n] > 0.0:
                selected[n] = True
                m += 1
        return m

    buf = np.empty(eligible_count, np.float64)
    j = 0
    for n in range(n_total):
        if (not positive_only) or scores[n] > 0.0:
            buf[j] = scores[n]
            j += 1
    buf.sort()
    cutoff = buf[eligible_count - budget]

    m = 0
    for n in range(n_total):
        if ((not positive_only) or scores[n] > 0.0) and scores[n] > cutoff:
            selected[n] = True
            m += 1
    need = budget - m
    if need <= 0:
        return m
    if not use_tie:
        for n in range(n_total):
            if need == 0:
                break
            if ((not positive_only) or scores[n] > 0.0) and scores[n] == cutoff:
                selected[n] = True
                m += 1
                need -= 1
        return m
    # smallest tie keys win among the boundary scores
    eq_ids = np.empty(eligible_count, np.int64)
    e = 0
    for n in range(n_total):
        if ((not positive_only) or scores[n] > 0.0) and scores[n] == cutoff:
            eq_ids[e] = n
            e += 1
    for _ in range(need):
        best = -1
        best_key = 2.0
        for k in range(e):
            cand = eq_ids[k]
            if not selected[cand] and tie_keys[cand] < best_key:
                best_key = tie_keys[cand]
                best = cand
        selected[best] = True
        m += 1
    return m


@njit(cache=True)
def run_replication(horizon, burn_in, budget,
                    class_of, tau_of_class, p_of_class,
                    index_table, theta_of_class,
                    policy_kind, tie_mode,
                    client_keys, policy_key,
                    init_ages,
                    stride, snap_penalty, snap_attempts,
                    penalty_out, attempt_out):
    """Run one replication; accumulate integer per-class counts in place.

    penalty_out[k] counts late slots (pre-transition age == tau) and
    attempt_out[k] counts transmissions, both over slots >= burn_in.
    With stride > 0, cumulative totals are snapshotted every stride slots.
    """
    n_clients = class_of.shape[0]
    ages = init_ages.copy()
    scores = np.empty(n_clients, np.float64)
    tie_keys = np.empty(n_clients, np.float64)
    selected = np.empty(n_clients, np.bool_)

    for t in range(horizon):
        measured = t >= burn_in
        if measured:
            for n in range(n_clients):
                c = class_of[n]
                if ages[n] == tau_of_class[c]:
                    penalty_out[c] += 1

        for n in range(n_clients):
            selected[n] = False

        if policy_kind == KIND_THRESHOLD:
            m = 0
            for n in range(n_clients):
                if m >= budget:
                    break
                if ages[n] >= theta_of_class[class_of[n]]:
                    selected[n] = True
                    m += 1
        else:
            positive_only = False
            use_tie = False
            if policy_kind == KIND_INDEX:
                for n in range(n_clients):
                    scores[n] = index_table[class_of[n], ages[n]]
                positive_only = True
                use_tie = tie_mode == TIE_BY_KEY
            elif policy_kind == KIND_RANDOM:
                for n in range(n_clients):
                    scores[n] = -_uniform_at(policy_key, t * n_clients + n)
            else:
                for n in range(n_clients):
                    scores[n] = ages[n] / tau_of_class[class_of[n]]
            if use_tie:
                for n in range(n_clients):
                    tie_keys[n] = _uniform_at(policy_key, t * n_clients + n)
            _mark_top(scores, positive_only, budget, use_tie, tie_keys, selected)

        for n in range(n_clients):
            c = class_of[n]
            tau_c = tau_of_class[c]
            if selected[n]:
                if measured:
                    attempt_out[c] += 1
                if _uniform_at(client_keys[n], t) < p_of_class[c]:
                    ages[n] = 0
                    continue
            ages[n] = ages[n] + 1 if ages[n] < tau_c else tau_c

        if stride > 0 and (t + 1) % stride == 0:
            j = (t + 1) // stride - 1
            total = 0
            for c in range(penalty_out.shape[0]):
                total += penalty_out[c]
                snap_attempts[j, c] = attempt_out[c]
            snap_penalty[j] = total
