"""Feeder data model and JSON loading.

File schema (version 1.x)::

    {
      "version": "1.0",
      "name": "f13",
      "s_base_mva": 1.0,
      "buses": [{"id": "0", "base_kv": 4.16}, ...],
      "lines": [{"id": "L1", "from": "0", "to": "1", "r": 0.3, "x": 0.6,
                 "switchable": false}, ...],
      "switches": [{"id": "SW0", "line": "S1", "state": "closed", "zone": 1}, ...],
      "loads": {"1": {"kw": 30.0, "kvar": 15.0}, ...},
      "critical": ["3", "7", "9"],
      "v_bounds": [0.95, 1.05],
      "source": "0"
    }

Resistance and reactance are in ohms; per-unit conversion uses the base kV of
the sending bus and ``s_base_mva``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import NonRadialBase, SchemaError
from .powerflow import check_radiality

SCHEMA_MAJOR = 1
PRESETS = {"F13": "f13.json", "F123": "f123.json"}


@dataclass(frozen=True)
class Line:
    id: str
    f: int
    t: int
    r: float        # per unit
    x: float        # per unit
    switchable: bool = False


@dataclass(frozen=True)
class Switch:
    id: str
    line: int
    closed: bool
    zone: int = 1


@dataclass
class FeederModel:
    name: str
    bus_ids: list[str]
    base_kv: np.ndarray
    lines: list[Line]
    switches: list[Switch]
    p_load: np.ndarray      # per unit
    q_load: np.ndarray
    critical: list[int]
    v_bounds: tuple[float, float]
    source: int
    s_base_mva: float = 1.0
    adjacency: list[list[tuple[int, int]]] = field(default_factory=list)

    def __post_init__(self):
        if not self.adjacency:
            adj = [[] for _ in self.bus_ids]
            for li, ln in enumerate(self.lines):
                adj[ln.f].append((ln.t, li))
                adj[ln.t].append((ln.f, li))
            self.adjacency = adj
        self.line_index = {ln.id: i for i, ln in enumerate(self.lines)}
        self.bus_index = {b: i for i, b in enumerate(self.bus_ids)}
        self.switch_lines = {s.line for s in self.switches}

    @property
    def n_buses(self) -> int:
        return len(self.bus_ids)

    @property
    def n_sw(self) -> int:
        return len(self.switches)

    def default_switch_states(self) -> np.ndarray:
        return np.array([s.closed for s in self.switches], dtype=bool)

    def in_service(self, switch_states, outaged=()) -> np.ndarray:
        """Boolean mask of lines carrying power for a switch/outage state."""
        mask = np.ones(len(self.lines), dtype=bool)
        for s, closed in zip(self.switches, switch_states):
            mask[s.line] = bool(closed)
        for li in outaged:
            mask[li] = False
        return mask

    def line_ref(self, ref) -> int:
        if isinstance(ref, (int, np.integer)):
            return int(ref)
        try:
            return self.line_index[ref]
        except KeyError:
            raise SchemaError(f"unknown line {ref!r}") from None


@dataclass(frozen=True)
class Contingency:
    outaged_lines: tuple[int, ...] = ()

    @classmethod
    def of(cls, model: FeederModel, refs) -> "Contingency":
        lines = tuple(sorted({model.line_ref(r) for r in refs}))
        for li in lines:
            if not 0 <= li < len(model.lines):
                raise SchemaError(f"line index {li} out of range")
            if li in model.switch_lines:
                raise SchemaError(f"line {model.lines[li].id} is a switch and cannot be outaged")
        return cls(lines)

    @property
    def k(self) -> int:
        return len(self.outaged_lines)


@dataclass(frozen=True)
class LoadProfile:
    scaling: tuple[float, ...]

    def __post_init__(self):
        if any(s < 0 for s in self.scaling):
            raise ValueError("load scaling must be non-negative")

    @classmethod
    def nominal(cls, model: FeederModel) -> "LoadProfile":
        return cls((1.0,) * model.n_buses)

    @classmethod
    def sample(cls, model: FeederModel, rng, low=0.7, high=1.2) -> "LoadProfile":
        return cls(tuple(float(v) for v in rng.uniform(low, high, model.n_buses)))


def feeder_from_dict(d: dict) -> FeederModel:
    version = str(d.get("version", "1.0"))
    if int(version.split(".")[0]) != SCHEMA_MAJOR:
        raise SchemaError(f"unsupported feeder version {version}")
    try:
        s_base = float(d.get("s_base_mva", 1.0))
        buses = [str(b["id"]) for b in d["buses"]]
        if len(set(buses)) != len(buses):
            raise SchemaError("duplicate bus ids")
        bidx = {b: i for i, b in enumerate(buses)}
        base_kv = np.array([float(b.get("base_kv", d.get("base_kv", 4.16))) for b in d["buses"]])

        def bus(ref):
            ref = str(ref)
            if ref not in bidx:
                raise SchemaError(f"unknown bus {ref!r}")
            return bidx[ref]

        lines = []
        for ln in d["lines"]:
            f, t = bus(ln["from"]), bus(ln["to"])
            if f == t:
                raise SchemaError(f"line {ln['id']} is a self loop")
            zb = base_kv[f] ** 2 / s_base
            lines.append(Line(str(ln["id"]), f, t, float(ln["r"]) / zb, float(ln["x"]) / zb,
                              bool(ln.get("switchable", False))))
        lidx = {ln.id: i for i, ln in enumerate(lines)}
        if len(lidx) != len(lines):
            raise SchemaError("duplicate line ids")
        switches = []
        for s in d["switches"]:
            if s["line"] not in lidx:
                raise SchemaError(f"switch {s.get('id')} references unknown line {s['line']!r}")
            state = s.get("state", "closed")
            if state not in ("open", "closed"):
                raise SchemaError(f"switch state must be open/closed, got {state!r}")
            switches.append(Switch(str(s.get("id", s["line"])), lidx[s["line"]], state == "closed",
                                   int(s.get("zone", 1))))
        if not switches:
            raise SchemaError("at least one switch is required")
        p = np.zeros(len(buses))
        q = np.zeros(len(buses))
        for b, load in d.get("loads", {}).items():
            i = bus(b)
            p[i] = float(load.get("kw", 0.0)) / 1000.0 / s_base
            q[i] = float(load.get("kvar", 0.0)) / 1000.0 / s_base
        critical = [bus(c) for c in d["critical"]]
        vb = tuple(float(v) for v in d.get("v_bounds", (0.95, 1.05)))
        if len(vb) != 2 or vb[0] > vb[1]:
            raise SchemaError(f"bad v_bounds {vb}")
        model = FeederModel(d.get("name", "feeder"), buses, base_kv, lines, switches, p, q,
                            critical, vb, bus(d["source"]), s_base)
    except KeyError as exc:
        raise SchemaError(f"missing field {exc}") from exc

    report = check_radiality(model, model.in_service(model.default_switch_states()))
    if not report.radial:
        raise NonRadialBase(f"feeder {model.name!r}: base topology is not radial")
    return model


def load_feeder(source) -> FeederModel:
    """Load a feeder from a preset name (``"f13"``/``"f123"``), a path, or a dict."""
    if isinstance(source, FeederModel):
        return source
    if isinstance(source, dict):
        return feeder_from_dict(source)
    if isinstance(source, str) and source.upper() in PRESETS:
        text = resources.files("cpres.data").joinpath(PRESETS[source.upper()]).read_text()
        return feeder_from_dict(json.loads(text))
    return feeder_from_dict(json.loads(Path(source).read_text()))
