"""Run traces and their line-delimited JSON form.

File layout: one header object (format tag, version, run metadata), then one
record per line with the fixed key order ``t, node, kind, data``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

FORMAT = "dhymon-trace"
VERSION = 1


@dataclass
class TraceRecord:
    time: float
    node: Optional[int]
    kind: str
    data: dict

    def to_json(self) -> str:
        return json.dumps({"t": self.time, "node": self.node, "kind": self.kind, "data": self.data}, separators=(",", ":"))


@dataclass
class Trace:
    meta: dict = field(default_factory=dict)
    records: list[TraceRecord] = field(default_factory=list)

    def of_kind(self, kind: str):
        return (r for r in self.records if r.kind == kind)

    def header(self) -> str:
        return json.dumps({"format": FORMAT, "version": VERSION, "meta": self.meta}, separators=(",", ":"), sort_keys=True)

    def lines(self):
        yield self.header()
        for r in self.records:
            yield r.to_json()

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()


class TraceFormatError(ValueError):
    pass


def loads(text: str) -> Trace:
    lines = text.splitlines()
    if not lines:
        raise TraceFormatError("missing header line")
    try:
        head = json.loads(lines[0])
        if not isinstance(head, dict) or head.get("format") != FORMAT:
            raise TraceFormatError(f"not a {FORMAT} file")
        if head.get("version") != VERSION:
            raise TraceFormatError(f"unsupported version {head.get('version')}")
        records = []
        for line in lines[1:]:
            if not line.strip():
                continue
            obj: dict[str, Any] = json.loads(line)
            records.append(TraceRecord(obj["t"], obj["node"], obj["kind"], obj["data"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise TraceFormatError(f"malformed trace: {exc}") from exc
    return Trace(head["meta"], records)


def emit_trace(trace: Trace, path) -> Path:
    """Write ``trace`` as JSON lines. I/O errors propagate with the path attached."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for line in trace.lines():
            fh.write(line)
            fh.write("\n")
    return path


def read_trace(path) -> Trace:
    return loads(Path(path).read_text(encoding="utf-8"))
