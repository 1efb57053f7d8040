"""Topology description and JSON loading for the rerouting simulator.

File schema (version 1.x)::

    {
      "version": "1.0",
      "name": "N8",
      "routers": [{"id": "R1", "queue_limit": 20, "controllable": true}, ...],
      "channels": [{"ends": ["R1", "R4"], "bandwidth": 100.0, "delay": 0.002}, ...],
      "dcs": [{"id": "DC1", "router": "R1", "zone": 1}, ...],
      "da": {"id": "DA", "router": "R8"},
      "controllable": ["R1", "R2", "R3"],
      "action_model": "all",            # or "single"
      "interfaces": {"R1": ["R4", "R6", "R3"], ...},
      "attack": {"candidates": ["R3", "R4", "R5"], "drop_prob": 0.9}
    }

Bandwidth is in packets/second, delay in seconds. Routers outside
``controllable`` keep a fixed route through the first entry of their
interface list. The DA router delivers locally and needs no interfaces.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import networkx as nx

from ..errors import BadInterfaceList, Disconnected, SchemaError

SCHEMA_MAJOR = 1
PRESETS = {"N6": "n6.json", "N8": "n8.json"}


@dataclass(frozen=True)
class Router:
    id: str
    queue_limit: int = 20
    controllable: bool = False


@dataclass(frozen=True)
class Channel:
    ends: tuple[str, str]
    bandwidth: float = 100.0
    delay: float = 0.002


@dataclass(frozen=True)
class DataConcentrator:
    id: str
    router: str
    zone: int


@dataclass(frozen=True)
class AttackSpec:
    candidates: tuple[str, ...]
    drop_prob: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError(f"drop_prob must be in [0, 1], got {self.drop_prob}")


@dataclass
class TopologySpec:
    name: str
    routers: list[Router]
    channels: list[Channel]
    dcs: list[DataConcentrator]
    da_router: str
    controllable: list[str]
    interfaces: dict[str, list[str]]
    action_model: str = "single"
    attack: AttackSpec | None = None
    da_id: str = "DA"
    meta: dict = field(default_factory=dict)

    @property
    def router_ids(self) -> list[str]:
        return [r.id for r in self.routers]

    @property
    def n_inf(self) -> int:
        return len(self.interfaces[self.controllable[0]])

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.router_ids)
        g.add_edges_from(c.ends for c in self.channels)
        return g

    def validate(self):
        ids = self.router_ids
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate router ids")
        known = set(ids)
        for c in self.channels:
            if c.ends[0] == c.ends[1] or not set(c.ends) <= known:
                raise SchemaError(f"bad channel endpoints {c.ends}")
            if c.bandwidth <= 0 or c.delay < 0:
                raise SchemaError(f"bad channel parameters on {c.ends}")
        if self.da_router not in known:
            raise SchemaError(f"DA router {self.da_router!r} unknown")
        for dc in self.dcs:
            if dc.router not in known:
                raise SchemaError(f"{dc.id} attached to unknown router {dc.router!r}")
        if not self.controllable:
            raise SchemaError("at least one controllable router is required")
        if not set(self.controllable) <= known:
            raise SchemaError("controllable routers must exist")
        if self.action_model not in ("single", "all"):
            raise SchemaError(f"unknown action_model {self.action_model!r}")

        g = self.graph()
        if not nx.is_connected(g):
            raise Disconnected(f"topology {self.name!r} is not connected")
        for rid in ids:
            hops = self.interfaces.get(rid, [])
            if len(set(hops)) != len(hops):
                raise BadInterfaceList(f"{rid}: duplicate interfaces {hops}")
            for h in hops:
                if h == rid or not g.has_edge(rid, h):
                    raise BadInterfaceList(f"{rid}: interface {h!r} is not a neighbour")
            if rid != self.da_router and not hops:
                raise BadInterfaceList(f"{rid}: needs at least one interface")
        sizes = {len(self.interfaces.get(r, [])) for r in self.controllable}
        if len(sizes) != 1 or 0 in sizes:
            raise BadInterfaceList("controllable routers must share one nonzero interface count")

        if self.attack is not None:
            if not set(self.attack.candidates) <= known:
                raise SchemaError("attack candidates must be routers")
            for dc in self.dcs:
                for cand in self.attack.candidates:
                    if cand in (dc.router, self.da_router):
                        continue
                    h = g.copy()
                    h.remove_node(cand)
                    if not nx.has_path(h, dc.router, self.da_router):
                        raise Disconnected(f"{dc.id} has no path to DA avoiding {cand}")
        return self


def topology_from_dict(d: dict) -> TopologySpec:
    version = str(d.get("version", "1.0"))
    if int(version.split(".")[0]) != SCHEMA_MAJOR:
        raise SchemaError(f"unsupported topology version {version}")
    try:
        routers = [Router(r["id"], int(r.get("queue_limit", 20)), bool(r.get("controllable", False)))
                   for r in d["routers"]]
        channels = [Channel(tuple(c["ends"]), float(c.get("bandwidth", 100.0)), float(c.get("delay", 0.002)))
                    for c in d["channels"]]
        dcs = [DataConcentrator(x["id"], x["router"], int(x.get("zone", i + 1))) for i, x in enumerate(d["dcs"])]
        da = d["da"]
        controllable = list(d.get("controllable") or [r.id for r in routers if r.controllable])
        attack = None
        if d.get("attack"):
            attack = AttackSpec(tuple(d["attack"]["candidates"]), float(d["attack"].get("drop_prob", 0.9)))
        spec = TopologySpec(
            name=d.get("name", "custom"),
            routers=routers,
            channels=channels,
            dcs=dcs,
            da_router=da["router"],
            da_id=da.get("id", "DA"),
            controllable=controllable,
            interfaces={k: list(v) for k, v in d.get("interfaces", {}).items()},
            action_model=d.get("action_model", "single"),
            attack=attack,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed topology: {exc}") from exc
    return spec.validate()


def load_topology(source) -> TopologySpec:
    """Load a topology from a preset name (``"N6"``/``"N8"``), a path, or a dict."""
    if isinstance(source, TopologySpec):
        return source.validate()
    if isinstance(source, dict):
        return topology_from_dict(source)
    if isinstance(source, str) and source.upper() in PRESETS:
        text = resources.files("cpres.data").joinpath(PRESETS[source.upper()]).read_text()
        return topology_from_dict(json.loads(text))
    return topology_from_dict(json.loads(Path(source).read_text()))
