"""Radiality checks and linearized radial power flow (LinDistFlow)."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import NonRadialIsland


@dataclass
class Island:
    buses: list[int]
    n_edges: int
    energized: bool

    @property
    def radial(self) -> bool:
        return self.n_edges == len(self.buses) - 1


@dataclass
class RadialityReport:
    islands: list[Island]

    @property
    def energized(self) -> list[Island]:
        return [isl for isl in self.islands if isl.energized]

    @property
    def radial(self) -> bool:
        """True when every energized island is a tree."""
        return all(isl.radial for isl in self.energized)

    @property
    def de_energized_buses(self) -> list[int]:
        return sorted(b for isl in self.islands if not isl.energized for b in isl.buses)


def islands(model, in_service) -> list[Island]:
    seen = np.zeros(model.n_buses, dtype=bool)
    out = []
    order = [model.source] + [b for b in range(model.n_buses) if b != model.source]
    for start in order:
        if seen[start]:
            continue
        seen[start] = True
        comp, q, edges = [start], deque([start]), set()
        while q:
            u = q.popleft()
            for v, li in model.adjacency[u]:
                if not in_service[li]:
                    continue
                edges.add(li)
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    q.append(v)
        out.append(Island(comp, len(edges), start == model.source))
    return out


def check_radiality(model, in_service) -> RadialityReport:
    return RadialityReport(islands(model, in_service))


def source_tree(model, in_service):
    """BFS order and parent line of every bus reachable from the source.

    Raises NonRadialIsland if the energized island contains a cycle.
    """
    n = model.n_buses
    parent_line = np.full(n, -1)
    seen = np.zeros(n, dtype=bool)
    seen[model.source] = True
    order = [model.source]
    q = deque([model.source])
    n_edges = 0
    while q:
        u = q.popleft()
        for v, li in model.adjacency[u]:
            if not in_service[li]:
                continue
            if seen[v]:
                if li != parent_line[u]:
                    n_edges += 1
                continue
            seen[v] = True
            parent_line[v] = li
            order.append(v)
            q.append(v)
    # each non-tree edge is seen from both ends
    if n_edges:
        raise NonRadialIsland(f"energized island has {n_edges // 2 or 1} extra edge(s)")
    return order, parent_line


def solve_power_flow(model, in_service, p_load=None, q_load=None) -> np.ndarray:
    """Per-bus voltage magnitudes (p.u.) via LinDistFlow.

    Branch flows are the lossless sums of downstream loads and squared
    voltages drop by ``2 (r P + x Q)`` along each line. Buses outside the
    source island are de-energized and reported at 0.
    """
    p = model.p_load if p_load is None else p_load
    q = model.q_load if q_load is None else q_load
    order, parent_line = source_tree(model, in_service)
    P = np.zeros(model.n_buses)
    Q = np.zeros(model.n_buses)
    for b in reversed(order):
        P[b] += p[b]
        Q[b] += q[b]
        li = parent_line[b]
        if li >= 0:
            ln = model.lines[li]
            up = ln.f if ln.t == b else ln.t
            P[up] += P[b]
            Q[up] += Q[b]
    vsq = np.zeros(model.n_buses)
    vsq[model.source] = 1.0
    for b in order[1:]:
        ln = model.lines[parent_line[b]]
        up = ln.f if ln.t == b else ln.t
        vsq[b] = vsq[up] - 2.0 * (ln.r * P[b] + ln.x * Q[b])
    return np.sqrt(np.clip(vsq, 0.0, None))


def count_unrestored(voltages, v_bounds) -> int:
    """Critical buses outside the closed interval ``v_bounds`` (0 p.u. counts as outside)."""
    v = np.asarray(voltages, dtype=float)
    lo, hi = v_bounds
    return int(np.count_nonzero((v <= 0.0) | (v < lo) | (v > hi)))
