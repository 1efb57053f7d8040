"""Versioned, hash-checked artifact bundles (checkpoints + dataset + report)."""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from ..dataset import TrajectoryDataset
from ..errors import CorruptFile, VersionMismatch
from ..learn.policy import PolicyNet, ValueNet
from ..learn.reward import RewardNet
from .evaluate import EvalReport

ARTIFACT_VERSION = "1.1"

_NET_TYPES = {"policy": PolicyNet, "value": ValueNet, "reward": RewardNet}


@dataclass
class Artifacts:
    nets: dict = field(default_factory=dict)          # name -> PolicyNet / ValueNet / RewardNet
    dataset: TrajectoryDataset | None = None
    report: EvalReport | None = None
    meta: dict = field(default_factory=dict)


def _canonical(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def payload_hash(payload) -> str:
    return hashlib.sha256(_canonical(payload)).hexdigest()


def save_artifacts(path, artifacts: Artifacts) -> Path:
    payload = {
        "nets": {name: net.to_dict() for name, net in artifacts.nets.items()},
        "dataset": None if artifacts.dataset is None else artifacts.dataset.to_lines(),
        "report": None if artifacts.report is None else artifacts.report.to_dict(),
        "meta": artifacts.meta,
    }
    doc = {"format": "cpres-artifacts", "version": ARTIFACT_VERSION, "sha256": payload_hash(payload),
           "payload": payload}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True))
    tmp.replace(path)
    return path


def _check_version(found: str):
    try:
        major, minor = (int(x) for x in str(found).split(".")[:2])
    except ValueError as exc:
        raise CorruptFile(f"unreadable version field {found!r}") from exc
    cur_major, cur_minor = (int(x) for x in ARTIFACT_VERSION.split("."))
    if major != cur_major:
        raise VersionMismatch(f"artifact version {found} is incompatible with {ARTIFACT_VERSION}")
    if minor < cur_minor:
        warnings.warn(f"artifact version {found} is older than {ARTIFACT_VERSION}; loading anyway", UserWarning)
    elif minor > cur_minor:
        raise VersionMismatch(f"artifact version {found} is newer than this reader ({ARTIFACT_VERSION})")


def load_artifacts(path) -> Artifacts:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: not a valid artifact file") from exc
    if not isinstance(doc, dict) or doc.get("format") != "cpres-artifacts" or "payload" not in doc:
        raise CorruptFile(f"{path}: missing artifact header")
    _check_version(doc.get("version", ""))
    payload = doc["payload"]
    if payload_hash(payload) != doc.get("sha256"):
        raise CorruptFile(f"{path}: content hash mismatch")
    nets = {}
    for name, d in payload.get("nets", {}).items():
        nets[name] = _NET_TYPES[d["kind"]].from_dict(d)
    dataset = None
    if payload.get("dataset") is not None:
        dataset = TrajectoryDataset.from_lines(payload["dataset"])
    report = None if payload.get("report") is None else EvalReport.from_dict(payload["report"])
    return Artifacts(nets, dataset, report, payload.get("meta", {}))
