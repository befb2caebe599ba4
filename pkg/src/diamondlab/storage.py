"""On-disk formats: ensemble manifests, CSV reports, JSON documents, run configs.

Every report starts with one ``#`` header line carrying the generation
timestamp; everything after it depends only on inputs and seed. Files are
written to a temporary sibling and moved into place with ``os.replace``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channels import Isometry, KrausSet, kraus_to_stinespring, stinespring_to_kraus
from .ensembles import ChannelEnsemble
from .matrix_core import dumps_operator, loads_operator

MANIFEST = "manifest.json"
MANIFEST_FORMAT = "diamondlab-ensemble/1"
HEADER_PREFIX = "# diamondlab"


class ArtifactIOError(OSError):
    """A run artifact is missing, unreadable or malformed."""


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def header_line(kind: str) -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return f"{HEADER_PREFIX} {kind} generated={stamp}\n"


def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if isinstance(v, (complex, np.complexfloating)):
        return f"{format(v.real, '.17g')}{'+' if v.imag >= 0 else '-'}{format(abs(v.imag), '.17g')}j"
    return str(v)


def csv_text(kind: str, columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    buf.write(header_line(kind))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt_value(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_csv(path, kind: str, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    return atomic_write_text(path, csv_text(kind, columns, rows))


def read_csv(path) -> list[dict]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body:
        raise ArtifactIOError(f"{path}: no CSV header")
    return list(csv.DictReader(body))


def write_json(path, kind: str, doc: dict) -> Path:
    """JSON document whose first line is the timestamp header."""
    return atomic_write_text(path, header_line(kind) + json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise ArtifactIOError(f"{path}: malformed JSON ({exc})") from exc


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# -- ensembles -------------------------------------------------------------------

def write_ensemble(ens: ChannelEnsemble, out_dir) -> Path:
    """One matrix file per Kraus operator plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    members = []
    for x, v in enumerate(ens.isometries):
        files = []
        for i, k in enumerate(stinespring_to_kraus(v).operators):
            name = f"member{x:04d}_kraus{i:03d}.json"
            atomic_write_text(out / name, dumps_operator(k))
            files.append(name)
        members.append(dict(index=x, d_A=v.d_A, d_B=v.d_B, d_E=v.d_E, files=files))
    p = ens.params
    meta = {"case": p.case.value}
    if "theta" in ens.metadata:
        meta["theta"] = ens.metadata["theta"]
    if "reference_kraus" in ens.metadata:
        ref = []
        for i, k in enumerate(ens.metadata["reference_kraus"]):
            name = f"reference_kraus{i:03d}.json"
            atomic_write_text(out / name, dumps_operator(k))
            ref.append(name)
        meta["reference_kraus_files"] = ref
    doc = dict(format=MANIFEST_FORMAT, d_A=p.d_A, d_B=p.d_B, r=p.r, eps=p.eps, M=p.M, seed=p.seed,
               case=p.case.value, output_dim=p.output_dim, construction=meta, members=members)
    atomic_write_text(out / MANIFEST, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out / MANIFEST


@dataclass
class LoadedEnsemble:
    manifest: dict
    isometries: list = field(default_factory=list)

    @property
    def eps(self) -> float:
        return float(self.manifest["eps"])


def read_ensemble(in_dir) -> LoadedEnsemble:
    d = Path(in_dir)
    man_path = d / MANIFEST
    try:
        man = json.loads(man_path.read_text())
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {man_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ArtifactIOError(f"{man_path}: malformed manifest ({exc})") from exc
    if man.get("format") != MANIFEST_FORMAT:
        raise ArtifactIOError(f"{man_path}: unknown manifest format {man.get('format')!r}")
    isos = []
    for m in man["members"]:
        ops = []
        for name in m["files"]:
            try:
                ops.append(loads_operator((d / name).read_text()).entries)
            except OSError as exc:
                raise ArtifactIOError(f"cannot read {d / name}: {exc}") from exc
            except (ValueError, KeyError) as exc:
                raise ArtifactIOError(f"{d / name}: malformed matrix file ({exc})") from exc
        try:
            isos.append(kraus_to_stinespring(KrausSet(tuple(ops), m["d_A"], m["d_B"]), d_E=m["d_E"]))
        except ValueError as exc:
            raise ArtifactIOError(f"{d}: member {m['index']} is not a valid channel ({exc})") from exc
    return LoadedEnsemble(man, isos)


# -- run configs ---------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    out: str | None = None
    tolerances: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        doc = json.loads(text)
        unknown = set(doc) - {"command", "params", "seed", "out", "tolerances"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**doc)

    def save(self, path) -> Path:
        return atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_json(Path(path).read_text())
        except OSError as exc:
            raise ArtifactIOError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ArtifactIOError(f"{path}: malformed config ({exc})") from exc
