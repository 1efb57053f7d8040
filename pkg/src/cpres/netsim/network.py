"""Packet-level discrete-event model of the DC -> DA communication network.

Every router owns one FIFO output queue (``queue_limit`` waiting packets) and a
single transmitter that serves the head packet on the channel towards the
router's current next hop. A transmission occupies that direction of the
channel for ``1 / bandwidth`` seconds; the packet then arrives at the next hop
after the channel's propagation delay. Routing is read at dequeue time, so a
route change also redirects packets already waiting at the router.

A packet is dropped when it reaches a compromised router (with the router's
DoS probability), when it finds the queue full, or when its hop count reaches
the TTL. Packets reaching the DA router are delivered there.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import NotControllable, OutOfRange, UnknownRouter
from ..simcore import EventQueue
from .topology import TopologySpec, load_topology

_GEN, _ARRIVE, _TXDONE = 0, 1, 2


class Packet:
    __slots__ = ("src", "hops", "born", "cmd")

    def __init__(self, src, born, cmd=None):
        self.src = src
        self.hops = 0
        self.born = born
        self.cmd = cmd


@dataclass
class WindowStats:
    duration: float
    delivered_per_dc: list[int]
    latencies: list[float]
    commands: dict = field(default_factory=dict)

    @property
    def delivered(self) -> int:
        return sum(self.delivered_per_dc)

    @property
    def mean_latency(self) -> float:
        return float(np.mean(self.latencies)) if self.latencies else 0.0


class Network:
    """Simulatable network built from a :class:`TopologySpec`.

    ``tick`` is the DC packet period in seconds; each DC emits one data packet
    at the start of every tick of a window.
    """

    def __init__(self, spec: TopologySpec, *, tick: float = 0.1, ttl: int | None = None):
        self.spec = spec
        self.tick = float(tick)
        self.ids = spec.router_ids
        self.index = {rid: i for i, rid in enumerate(self.ids)}
        n = len(self.ids)
        self.n_routers = n
        self.n_channels = len(spec.channels)
        self.ttl = int(ttl) if ttl is not None else 2 * n
        self.queue_limit = [r.queue_limit for r in spec.routers]
        self.da = self.index[spec.da_router]
        self.dc_router = [self.index[dc.router] for dc in spec.dcs]
        self.controllable = [self.index[r] for r in spec.controllable]
        self.interfaces = [[self.index[h] for h in spec.interfaces.get(rid, [])] for rid in self.ids]
        # directed link (u, v) -> (channel index, direction, tx time, delay)
        self.links = {}
        for ci, ch in enumerate(spec.channels):
            u, v = self.index[ch.ends[0]], self.index[ch.ends[1]]
            self.links[(u, v)] = (ci, 0, 1.0 / ch.bandwidth, ch.delay)
            self.links[(v, u)] = (ci, 1, 1.0 / ch.bandwidth, ch.delay)

        self.rng = np.random.default_rng(0)
        self.events = EventQueue()
        self.dos: dict[int, float] = {}
        self.route: list[int | None] = []
        self.reset_routes()
        self.queues = [deque() for _ in range(n)]
        self.tx_busy = [False] * n
        self._win_end = 0.0
        self._next_cmd = 0
        self.pending_commands: dict[int, str] = {}
        self.command_outcome: dict[int, str] = {}
        self.zero_counters()
        self._reset_window_stats()
        self._carry = np.zeros((self.n_channels, 2))
        self._last_obs = np.zeros(n + self.n_channels)

    # ---- configuration -------------------------------------------------
    def reset_routes(self):
        self.route = [hops[0] if (i != self.da and hops) else None for i, hops in enumerate(self.interfaces)]

    def _rid(self, router) -> int:
        if isinstance(router, (int, np.integer)) and 0 <= router < self.n_routers:
            return int(router)
        try:
            return self.index[router]
        except KeyError:
            raise UnknownRouter(router) from None

    def routing_table(self) -> dict:
        return {self.ids[i]: (self.ids[h] if h is not None else None) for i, h in enumerate(self.route)}

    def set_route(self, router, interface_index: int) -> dict:
        """Point ``router`` at its ``interface_index``-th interface."""
        r = self._rid(router)
        if r not in self.controllable:
            raise NotControllable(f"{self.ids[r]} is not controllable")
        hops = self.interfaces[r]
        if not 0 <= interface_index < len(hops):
            raise OutOfRange(f"interface {interface_index} out of range for {self.ids[r]}")
        self.route[r] = hops[interface_index]
        return self.routing_table()

    def interface_index(self, router) -> int:
        r = self._rid(router)
        hop = self.route[r]
        return self.interfaces[r].index(hop) if hop is not None else 0

    def inject_dos(self, router, drop_prob: float):
        r = self._rid(router)
        if not 0.0 <= drop_prob <= 1.0:
            raise ValueError("drop_prob must be in [0, 1]")
        self.dos[r] = float(drop_prob)

    def clear_dos(self, router=None):
        if router is None:
            self.dos.clear()
        else:
            self.dos.pop(self._rid(router), None)

    # ---- bookkeeping ---------------------------------------------------
    def zero_counters(self):
        self.generated = 0
        self.delivered = 0
        self.dropped = 0
        self.flushed = 0
        self.received_per_dc = [0] * len(self.dc_router)

    def _reset_window_stats(self):
        self.offered = [0] * self.n_routers
        self.window_dropped = [0] * self.n_routers
        self.serviced = [0] * self.n_routers
        self._busy = None

    def in_system(self) -> int:
        return self.generated - self.delivered - self.dropped - self.flushed

    def flush(self):
        """Discard every queued or in-flight packet and idle all transmitters."""
        lost = sum(len(q) for q in self.queues)
        lost += sum(1 for _, _, ev in self.events._heap if ev[0] != _GEN)
        for q in self.queues:
            q.clear()
        self.events.clear()
        self.tx_busy = [False] * self.n_routers
        self._carry = np.zeros((self.n_channels, 2))
        for cmd in list(self.pending_commands):
            self._resolve_command(cmd, "dropped")
        self.flushed += lost

    # ---- packet movement -----------------------------------------------
    def inject(self, router, src: int = -1, cmd=None, at: float | None = None) -> Packet:
        r = self._rid(router)
        t = self.events.clock if at is None else at
        p = Packet(src, t, cmd)
        self.generated += 1
        self.events.schedule((_ARRIVE, r, p), t)
        return p

    def send_command(self, router) -> int:
        """Inject a command packet at ``router``; its fate is reported via ``command_outcome``."""
        cmd = self._next_cmd
        self._next_cmd += 1
        self.pending_commands[cmd] = "pending"
        self.inject(router, src=-1, cmd=cmd)
        return cmd

    def _resolve_command(self, cmd, status):
        if self.pending_commands.pop(cmd, None) is not None:
            self.command_outcome[cmd] = status

    def _drop(self, r, p):
        self.dropped += 1
        self.window_dropped[r] += 1
        if p.cmd is not None:
            self._resolve_command(p.cmd, "dropped")

    def _arrive(self, t, r, p, stats):
        self.offered[r] += 1
        prob = self.dos.get(r)
        if prob is not None and (prob >= 1.0 or self.rng.random() < prob):
            self._drop(r, p)
            return
        if r == self.da:
            self.delivered += 1
            if p.cmd is not None:
                self._resolve_command(p.cmd, "delivered")
            elif p.src >= 0:
                self.received_per_dc[p.src] += 1
                stats.delivered_per_dc[p.src] += 1
                stats.latencies.append(t - p.born)
            return
        if p.hops >= self.ttl or self.route[r] is None:
            self._drop(r, p)
            return
        if not self.tx_busy[r]:
            self._start_tx(t, r, p)
        elif len(self.queues[r]) >= self.queue_limit[r]:
            self._drop(r, p)
        else:
            self.queues[r].append(p)

    def _start_tx(self, t, r, p):
        ci, direction, tx_time, _ = self.links[(r, self.route[r])]
        self.tx_busy[r] = True
        self.serviced[r] += 1
        end = t + tx_time
        self._busy[ci, direction] += min(end, self._win_end) - t
        if end > self._win_end:
            self._carry[ci, direction] += end - self._win_end
        self.events.schedule((_TXDONE, r, p, self.route[r]), end)

    def _tx_done(self, t, r, p, hop):
        _, _, _, delay = self.links[(r, hop)]
        p.hops += 1
        self.events.schedule((_ARRIVE, hop, p), t + delay)
        if self.queues[r]:
            self._start_tx(t, r, self.queues[r].popleft())
        else:
            self.tx_busy[r] = False

    def run_window(self, duration: float, generate: bool = True, before=None) -> WindowStats:
        """Simulate one control interval of ``duration`` seconds.

        ``before`` is called once the window is open and before any event is
        processed; the coupled environment uses it to inject commands.
        """
        ev = self.events
        t0 = ev.clock
        t1 = t0 + duration
        self._win_end = t1
        self._reset_window_stats()
        self._busy = np.minimum(self._carry, duration)
        self._carry = np.maximum(self._carry - duration, 0.0)
        stats = WindowStats(duration, [0] * len(self.dc_router), [])
        if before is not None:
            before()
        if generate:
            n_ticks = int(round(duration / self.tick))
            for k in range(n_ticks):
                for d in range(len(self.dc_router)):
                    ev.schedule((_GEN, d), t0 + k * self.tick)
        while ev.peek_time() < t1:
            t, e = ev.advance()
            kind = e[0]
            if kind == _ARRIVE:
                self._arrive(t, e[1], e[2], stats)
            elif kind == _TXDONE:
                self._tx_done(t, e[1], e[2], e[3])
            else:
                d = e[1]
                self.generated += 1
                self._arrive(t, self.dc_router[d], Packet(d, t), stats)
        ev.clock = t1
        stats.commands = dict(self.command_outcome)
        self._last_obs = self._observe(duration)
        return stats

    def _observe(self, duration) -> np.ndarray:
        drop = np.array([d / o if o else 0.0 for d, o in zip(self.window_dropped, self.offered)])
        util = np.clip(self._busy.max(axis=1) / duration, 0.0, 1.0) if self.n_channels else np.zeros(0)
        return np.concatenate([drop, util])

    def measure(self) -> np.ndarray:
        """``[drop rate per router || utilization per channel]`` from the last window."""
        return self._last_obs.copy()

    def obs_labels(self) -> list[str]:
        return [f"drop:{r}" for r in self.ids] + [f"util:{c.ends[0]}-{c.ends[1]}" for c in self.spec.channels]


def build_network(spec, **kwargs) -> Network:
    """Build a network from a preset name, file path, dict or :class:`TopologySpec`."""
    return Network(load_topology(spec), **kwargs)
