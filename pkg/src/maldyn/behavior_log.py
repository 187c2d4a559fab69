"""Sandbox XML behavior logs and dataset manifests.

Canonical log layout::

    <report sample_id="abc">
      <action api_name="NtCreateFile" call_name="a.exe" call_pid="1204"
              call_time="1000" err_code="0" ret_value="0x0" status_value="1">
        <apiArg value="C:\\x.txt"/>
        <exInfo value="kernel32.dll"/>
      </action>
    </report>

Unknown elements and attributes are ignored.
"""

from __future__ import annotations

import csv
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateSampleId,
    MalformedXml,
    ManifestError,
    MissingField,
    SchemaViolation,
    UnreadableFile,
)

LABELS = ("benign", "malware", "unknown")
MANIFEST_COLUMNS = ("sample_id", "path", "label", "family", "year")


@dataclass(frozen=True)
class Action:
    api_name: str
    call_name: str = ""
    call_pid: int = 0
    call_time: int = 0
    err_code: int = 0
    ret_value: int = 0
    status_value: int = 0
    api_args: tuple[str, ...] = ()
    ex_info: tuple[str, ...] = ()


@dataclass(frozen=True)
class BehaviorLog:
    sample_id: str
    actions: tuple[Action, ...]
    source_path: str = field(default="", compare=False)

    def __len__(self):
        return len(self.actions)

    @property
    def api_names(self) -> list[str]:
        return [a.api_name for a in self.actions]


def parse_code(text: str) -> int:
    """Parse a decimal or ``0x``-prefixed integer code."""
    s = text.strip()
    neg = s.startswith("-")
    body = s[1:] if neg else s
    if body[:2].lower() == "0x":
        value = int(body[2:], 16)
    else:
        value = int(body, 10)
    return -value if neg else value


def _int_attr(elem, name, sample_id, index, *, allow_negative=True):
    raw = elem.get(name)
    if raw is None or raw.strip() == "":
        return 0
    try:
        value = parse_code(raw)
    except ValueError:
        raise SchemaViolation(
            f"action {index}: attribute {name}={raw!r} is not an integer", sample_id
        ) from None
    if not allow_negative and value < 0:
        raise SchemaViolation(f"action {index}: {name} must be non-negative", sample_id)
    return value


def parse_log(xml_bytes: bytes, source_path: str = "", sample_id: str | None = None) -> BehaviorLog:
    """Parse one sandbox report into a :class:`BehaviorLog`.

    ``sample_id`` falls back to the root ``sample_id`` attribute, then to the
    stem of ``source_path``.
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc), sample_id) from None

    sid = sample_id or root.get("sample_id") or (Path(source_path).stem if source_path else "")
    actions = []
    for i, elem in enumerate(root.iter("action")):
        api_name = (elem.get("api_name") or "").strip()
        if not api_name:
            raise SchemaViolation(f"action {i}: missing api_name", sid)
        actions.append(
            Action(
                api_name=api_name,
                call_name=elem.get("call_name", ""),
                call_pid=_int_attr(elem, "call_pid", sid, i, allow_negative=False),
                call_time=_int_attr(elem, "call_time", sid, i),
                err_code=_int_attr(elem, "err_code", sid, i),
                ret_value=_int_attr(elem, "ret_value", sid, i),
                status_value=_int_attr(elem, "status_value", sid, i),
                api_args=tuple(a.get("value", "") for a in elem.findall("apiArg")),
                ex_info=tuple(x.get("value", "") for x in elem.findall("exInfo")),
            )
        )
    if not actions:
        raise SchemaViolation("log contains no action elements", sid)
    return BehaviorLog(sample_id=sid, actions=tuple(actions), source_path=source_path)


def load_log(path, sample_id: str | None = None) -> BehaviorLog:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UnreadableFile(str(exc), sample_id) from None
    return parse_log(data, source_path=str(path), sample_id=sample_id)


def to_xml(log: BehaviorLog) -> bytes:
    """Serialize to the canonical schema; ``parse_log`` inverts this exactly."""
    root = ET.Element("report", {"sample_id": log.sample_id})
    for a in log.actions:
        elem = ET.SubElement(
            root,
            "action",
            {
                "api_name": a.api_name,
                "call_name": a.call_name,
                "call_pid": str(a.call_pid),
                "call_time": str(a.call_time),
                "err_code": str(a.err_code),
                "ret_value": str(a.ret_value),
                "status_value": str(a.status_value),
            },
        )
        for v in a.api_args:
            ET.SubElement(elem, "apiArg", {"value": v})
        for v in a.ex_info:
            ET.SubElement(elem, "exInfo", {"value": v})
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    path: str
    label: str = "unknown"
    family: str | None = None
    year: int | None = None
    generated: bool = False


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    base_dir: str = "."

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.sample_id in seen:
                raise DuplicateSampleId(f"duplicate sample_id {e.sample_id!r}", e.sample_id)
            seen.add(e.sample_id)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def by_id(self) -> dict[str, ManifestEntry]:
        return {e.sample_id: e for e in self.entries}

    def filter(self, pred) -> "Manifest":
        return Manifest(tuple(e for e in self.entries if pred(e)), self.base_dir)


def _parse_year(raw, sid):
    raw = (raw or "").strip()
    if not raw:
        return None
    if len(raw) != 4 or not raw.isdigit():
        raise ManifestError(f"year {raw!r} is not a 4-digit integer", sid)
    return int(raw)


def load_manifest(path) -> Manifest:
    """Read a manifest CSV (``sample_id,path,label,family,year``).

    An optional ``generated`` column marks synthetic entries.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in MANIFEST_COLUMNS if c not in header]
            if missing:
                raise MissingField(f"manifest header lacks column(s): {', '.join(missing)}")
            rows = list(reader)
    except OSError as exc:
        raise UnreadableFile(str(exc)) from None
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"{path}: {exc}") from None

    entries = []
    for lineno, row in enumerate(rows, start=2):
        sid = (row.get("sample_id") or "").strip()
        if not sid:
            raise MissingField(f"line {lineno}: empty sample_id")
        p = (row.get("path") or "").strip()
        if not p:
            raise MissingField(f"line {lineno}: empty path", sid)
        label = (row.get("label") or "").strip() or "unknown"
        if label not in LABELS:
            raise ManifestError(f"line {lineno}: label {label!r} not in {LABELS}", sid)
        family = (row.get("family") or "").strip() or None
        generated = (row.get("generated") or "").strip().lower() in ("1", "true", "yes")
        entries.append(ManifestEntry(sid, p, label, family, _parse_year(row.get("year"), sid), generated))
    return Manifest(tuple(entries), base_dir=str(path.parent))


def write_manifest(manifest: Manifest | list, path) -> None:
    entries = list(manifest.entries if isinstance(manifest, Manifest) else manifest)
    with_generated = any(e.generated for e in entries)
    cols = list(MANIFEST_COLUMNS) + (["generated"] if with_generated else [])
    os.makedirs(Path(path).parent, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for e in entries:
            row = [e.sample_id, e.path, e.label, e.family or "", "" if e.year is None else e.year]
            if with_generated:
                row.append("true" if e.generated else "false")
            w.writerow(row)


def load_corpus(manifest: Manifest):
    """Parse every manifest entry; returns ``(logs, errors)``.

    ``errors`` maps sample_id to the message of the failure for that sample,
    so one bad log never aborts the batch.
    """
    logs, errors = [], {}
    for entry in manifest:
        try:
            logs.append(load_log(manifest.resolve(entry), sample_id=entry.sample_id))
        except (SchemaViolation, MalformedXml, UnreadableFile) as exc:
            errors[entry.sample_id] = str(exc)
    return logs, errors
