"""Compiled inner loops. Everything here is pure given its arguments and the rng state."""
import math

import numpy as np
from numba import njit

FIXED = 1
LOST = 0
CAPPED = -1
BROKEN = -2  # configuration left the interval/arc family


@njit(nogil=True, cache=True)
def inverse_ladder_sum(incr):
    """``1 / sum_{k=0}^{n-1} exp(S_k)`` with ``S_0 = 0`` and ``S_k = S_{k-1} + incr[k-1]``.

    Running log-sum-exp: the sum is kept as ``exp(mx) * acc`` so no term overflows.
    """
    s = 0.0
    mx = 0.0
    acc = 1.0
    for i in range(incr.shape[0]):
        s += incr[i]
        if s > mx:
            acc = acc * math.exp(mx - s) + 1.0
            mx = s
        else:
            acc += math.exp(s - mx)
    return math.exp(-mx) / acc


@njit(nogil=True, cache=True)
def fixation_from_signs(normal, mutant, log_beta, log_1m_beta):
    """Exact fixation probability for each row of a batch of sign arrays.

    ``log_beta[j]`` / ``log_1m_beta[j]`` are tabulated for the four sign pairs,
    ``j = 2 * (mutant > 0) + (normal > 0)``.
    """
    m, n = normal.shape
    out = np.empty(m)
    incr = np.empty(n - 1)
    for r in range(m):
        prev = 2 * (mutant[r, 0] > 0) + (normal[r, 0] > 0)
        for k in range(1, n):
            cur = 2 * (mutant[r, k] > 0) + (normal[r, k] > 0)
            incr[k - 1] = log_1m_beta[prev] - log_beta[cur]
            prev = cur
        out[r] = inverse_ladder_sum(incr)
    return out


@njit(nogil=True, cache=True)
def chain_run(hop, rng, step_cap):
    n = hop.shape[0] + 1
    k = 1
    steps = 0
    while 0 < k < n:
        if steps >= step_cap:
            return CAPPED, steps
        if rng.random() < hop[k - 1]:
            k += 1
        else:
            k -= 1
        steps += 1
    return (FIXED if k == n else LOST), steps


@njit(nogil=True, cache=True)
def chain_block(hop, rng, m, step_cap):
    status = np.empty(m, dtype=np.int8)
    steps = np.empty(m, dtype=np.int64)
    for r in range(m):
        s, t = chain_run(hop, rng, step_cap)
        status[r] = s
        steps[r] = t
        if s == CAPPED:
            break
    return status, steps


@njit(nogil=True, cache=True)
def _is_prefix(states, count):
    for i in range(states.shape[0]):
        if states[i] != (1 if i < count else 0):
            return False
    return True


@njit(nogil=True, cache=True)
def _is_interval(states):
    rises = 1 if states[0] == 1 else 0
    for i in range(states.shape[0] - 1):
        if states[i] == 0 and states[i + 1] == 1:
            rises += 1
    return rises <= 1


@njit(nogil=True, cache=True)
def _is_arc(states):
    # an arc (or empty/full ring) has at most one 0 -> 1 boundary going round
    n = states.shape[0]
    rises = 0
    for i in range(n):
        if states[i] == 0 and states[(i + 1) % n] == 1:
            rises += 1
    return rises <= 1


@njit(nogil=True, cache=True)
def apply_edge(states, beta, src, dst, u):
    """Reproduction along ``src -> dst`` with uniform draw ``u``; returns the change in mutant count."""
    if states[src] == states[dst]:
        return 0
    if states[src] == 1:
        if u < beta[dst]:
            states[dst] = 1
            return 1
    elif u < 1.0 - beta[dst]:
        states[dst] = 0
        return -1
    return 0


@njit(nogil=True, cache=True)
def lattice_naive(beta, circle, states, rng, step_cap, check):
    """Uniform directed-edge sampler on the full configuration (modified in place)."""
    n = states.shape[0]
    count = 0
    for i in range(n):
        count += states[i]
    n_edges = 2 * n if circle else 2 * (n - 1)
    prefix = (not circle) and check and _is_prefix(states, count)
    steps = 0
    while 0 < count < n:
        if steps >= step_cap:
            return CAPPED, steps
        steps += 1
        e = int(rng.random() * n_edges)
        i = e >> 1
        j = (i + 1) % n
        if e & 1:
            src, dst = j, i
        else:
            src, dst = i, j
        if states[src] == states[dst]:
            continue
        count += apply_edge(states, beta, src, dst, rng.random())
        if check:
            if circle:
                if not _is_arc(states):
                    return BROKEN, steps
            elif prefix:
                if not _is_prefix(states, count):
                    return BROKEN, steps
            elif not _is_interval(states):
                return BROKEN, steps
    return (FIXED if count == n else LOST), steps


@njit(nogil=True, cache=True)
def lattice_effective(beta, circle, left, count, rng, step_cap):
    """Sampler restricted to the directed edges that straddle the mutant block.

    The mutant set is the interval (or arc) of ``count`` sites starting at
    ``left``. Conditioned on picking a state-changing edge, the uniform
    directed-edge sampler picks each boundary edge with equal probability, so
    the absorption outcome has the same law.
    """
    n = beta.shape[0]
    steps = 0
    while 0 < count < n:
        if steps >= step_cap:
            return CAPPED, steps
        steps += 1
        right = (left + count - 1) % n
        has_right = circle or right < n - 1
        has_left = circle or left > 0
        n_b = 2 * (has_right + has_left)
        e = int(rng.random() * n_b)
        if not has_right:
            e += 2
        u = rng.random()
        if e == 0:  # mutant at `right` reproduces into its right neighbour
            if u < beta[(right + 1) % n]:
                count += 1
        elif e == 1:  # normal right neighbour reproduces into `right`
            if u < 1.0 - beta[right]:
                count -= 1
        elif e == 2:  # mutant at `left` reproduces into its left neighbour
            if u < beta[(left - 1) % n]:
                left = (left - 1) % n
                count += 1
        else:  # normal left neighbour reproduces into `left`
            if u < 1.0 - beta[left]:
                left = (left + 1) % n
                count -= 1
    return (FIXED if count == n else LOST), steps


@njit(nogil=True, cache=True)
def lattice_block(normal, mutant, beta_table, circle, naive, start, rng, step_cap, check):
    """One replicate per row: build beta from the signs, then run from a single mutant."""
    m, n = normal.shape
    status = np.empty(m, dtype=np.int8)
    steps = np.empty(m, dtype=np.int64)
    beta = np.empty(n)
    states = np.empty(n, dtype=np.uint8)
    for r in range(m):
        for k in range(n):
            beta[k] = beta_table[2 * (mutant[r, k] > 0) + (normal[r, k] > 0)]
        if naive:
            states[:] = 0
            states[start] = 1
            s, t = lattice_naive(beta, circle, states, rng, step_cap, check)
        else:
            s, t = lattice_effective(beta, circle, start, 1, rng, step_cap)
        status[r] = s
        steps[r] = t
        if s < 0:
            break
    return status, steps


@njit(nogil=True, cache=True)
def fixed_lattice_block(beta, circle, naive, init_states, left, count, rng, m, step_cap, check):
    """Repeated runs in one fixed environment."""
    status = np.empty(m, dtype=np.int8)
    steps = np.empty(m, dtype=np.int64)
    states = np.empty_like(init_states)
    for r in range(m):
        if naive:
            states[:] = init_states
            s, t = lattice_naive(beta, circle, states, rng, step_cap, check)
        else:
            s, t = lattice_effective(beta, circle, left, count, rng, step_cap)
        status[r] = s
        steps[r] = t
        if s < 0:
            break
    return status, steps


@njit(nogil=True, cache=True)
def brownian_block(sigma, steps, m, rng):
    """Reciprocal trapezoid approximation of ``int_0^1 exp(sigma * B_s) ds`` per path."""
    out = np.empty(m)
    dt = 1.0 / steps
    sd = math.sqrt(dt)
    for r in range(m):
        b = 0.0
        total = 0.5
        e = 1.0
        for i in range(steps):
            b += sd * rng.standard_normal()
            e = math.exp(sigma * b)
            total += e
        total -= 0.5 * e
        out[r] = 1.0 / (dt * total)
    return out
