"""Independent reference implementations used by the tests."""
import itertools

import numpy as np

from cpres.feedersim import check_radiality, count_unrestored, solve_power_flow
from cpres.feedersim.model import FeederModel, Line, Switch


def small_feeder(edges, p, q, critical=(), switch_line=0, v_bounds=(0.95, 1.05)):
    """Feeder from ``edges = [(from, to, r_pu, x_pu), ...]`` rooted at bus 0."""
    n = 1 + max(max(f, t) for f, t, _, _ in edges)
    lines = [Line(f"L{i}", f, t, r, x) for i, (f, t, r, x) in enumerate(edges)]
    return FeederModel("test", [str(i) for i in range(n)], np.full(n, 4.16), lines,
                       [Switch("SW", switch_line, True)], np.asarray(p, float), np.asarray(q, float),
                       list(critical), v_bounds, 0)


def exact_distflow(edges, p, q, tol=1e-13, max_iter=500):
    """Full DistFlow on a radial tree rooted at bus 0, by fixed-point iteration.

    Branch flows include series losses r(P^2 + Q^2)/V^2 and the squared
    voltage drop keeps the (r^2 + x^2)(P^2 + Q^2)/V^2 term.
    """
    n = 1 + max(max(f, t) for f, t, _, _ in edges)
    children = {i: [] for i in range(n)}
    parent = {}
    adj = {i: [] for i in range(n)}
    for f, t, r, x in edges:
        adj[f].append((t, r, x))
        adj[t].append((f, r, x))
    order, stack, seen = [], [0], {0}
    while stack:
        u = stack.pop()
        order.append(u)
        for v, r, x in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = (u, r, x)
                children[u].append(v)
                stack.append(v)
    vsq = np.ones(n)
    for _ in range(max_iter):
        P = np.zeros(n)
        Q = np.zeros(n)
        for b in reversed(order):
            if b == 0:
                continue
            _, r, x = parent[b]
            P[b] = p[b] + sum(P[c] for c in children[b])
            Q[b] = q[b] + sum(Q[c] for c in children[b])
            loss = (P[b] ** 2 + Q[b] ** 2) / vsq[b]
            P[b] += r * loss
            Q[b] += x * loss
        new = np.ones(n)
        for b in order[1:]:
            u, r, x = parent[b]
            s2 = P[b] ** 2 + Q[b] ** 2
            new[b] = new[u] - 2 * (r * P[b] + x * Q[b]) + (r * r + x * x) * s2 / new[u]
        if np.max(np.abs(new - vsq)) < tol:
            vsq = new
            break
        vsq = new
    return np.sqrt(vsq)


def brute_force_restorable(model, outaged, p=None, q=None):
    """Switch states (as tuples) that are radial and leave every critical bus in bounds."""
    out = []
    for states in itertools.product([False, True], repeat=model.n_sw):
        mask = model.in_service(states, outaged)
        if not check_radiality(model, mask).radial:
            continue
        v = solve_power_flow(model, mask, p, q)
        if count_unrestored(v[model.critical], model.v_bounds) == 0:
            out.append(states)
    return out


def combined_reward_table(r_c, r_p, g_c, g_p):
    """Case table for the coupled reward, written out case by case."""
    if g_c and g_p:
        return r_c + r_p
    if g_c and not g_p:
        return r_p
    if not g_c and g_p:
        return r_c
    return r_c + r_p
