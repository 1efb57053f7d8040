"""Generate the bundled 123-bus-shaped feeder file (topology only, no IEEE numerical fidelity).

Two trunks of 30 buses leave the substation, one per zone; every trunk bus
carries a two-bus lateral when its index is even and the trunk ends
in one extra bus. Eight switches: four closed trunk
sectionalizers and four open ties between the zones.
"""
import json
import sys
from pathlib import Path

TRUNK = 30
KV = 4.16


def build():
    buses = [{"id": "0", "base_kv": KV}]
    lines, loads = [], {}
    nxt = 1

    def bus():
        nonlocal nxt
        b = str(nxt)
        buses.append({"id": b, "base_kv": KV})
        loads[b] = {"kw": 20.0, "kvar": 8.0}
        nxt += 1
        return b

    trunks = {}
    for zone in (1, 2):
        prev, chain = "0", []
        for k in range(TRUNK):
            b = bus()
            sw = k in (10, 20)
            lid = f"S{zone}_{k}" if sw else f"T{zone}_{k}"
            lines.append({"id": lid, "from": prev, "to": b, "r": 0.015, "x": 0.03, "switchable": sw})
            chain.append(b)
            prev = b
        trunks[zone] = chain
    laterals = {}
    for zone in (1, 2):
        for k, tb in enumerate(trunks[zone]):
            if k % 2:
                continue
            a = bus()
            c = bus()
            lines.append({"id": f"LA{zone}_{k}", "from": tb, "to": a, "r": 0.03, "x": 0.03, "switchable": False})
            lines.append({"id": f"LB{zone}_{k}", "from": a, "to": c, "r": 0.03, "x": 0.03, "switchable": False})
            laterals[(zone, k)] = c
        end = bus()
        lines.append({"id": f"LE{zone}", "from": trunks[zone][-1], "to": end, "r": 0.03, "x": 0.03,
                      "switchable": False})
    assert len(buses) == 123, len(buses)
    ties = [
        ("TIE_END", trunks[1][-1], trunks[2][-1]),
        ("TIE_MID", trunks[1][15], trunks[2][15]),
        ("TIE_LAT1", laterals[(1, 24)], laterals[(2, 24)]),
        ("TIE_LAT2", laterals[(1, 4)], laterals[(2, 4)]),
    ]
    for lid, a, b in ties:
        lines.append({"id": lid, "from": a, "to": b, "r": 0.03, "x": 0.06, "switchable": True})
    switches = [
        {"id": "SW1", "line": "S1_10", "state": "closed", "zone": 1},
        {"id": "SW2", "line": "S1_20", "state": "closed", "zone": 1},
        {"id": "SW3", "line": "S2_10", "state": "closed", "zone": 2},
        {"id": "SW4", "line": "S2_20", "state": "closed", "zone": 2},
        {"id": "SW5", "line": "TIE_END", "state": "open", "zone": 1},
        {"id": "SW6", "line": "TIE_MID", "state": "open", "zone": 2},
        {"id": "SW7", "line": "TIE_LAT1", "state": "open", "zone": 1},
        {"id": "SW8", "line": "TIE_LAT2", "state": "open", "zone": 2},
    ]
    critical = [trunks[1][24], trunks[2][24], trunks[1][14], laterals[(2, 12)]]
    return {
        "version": "1.0",
        "name": "f123",
        "s_base_mva": 1.0,
        "notes": "123-bus-shaped synthetic radial feeder in two zones with 8 switches; topology only.",
        "buses": buses,
        "lines": lines,
        "switches": switches,
        "loads": loads,
        "critical": critical,
        "v_bounds": [0.95, 1.05],
        "source": "0",
    }


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/cpres/data/f123.json"
    out.write_text(json.dumps(build(), indent=1))
    print(out)
