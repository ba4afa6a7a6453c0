"""Durable append-only case journals.

One file per case, holding length-prefixed JSON entries:

    <payload byte length, ASCII decimal>\\n
    <payload JSON>\\n

Entries carry dense, strictly increasing sequence numbers and are immutable
once written; every append is flushed and fsynced before it is acknowledged,
so a crash never loses an acknowledged entry and replay from offset zero
reconstructs the case exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class JournalCorruptError(Exception):
    pass


class Journal:
    def __init__(self, path: Path):
        self.path = Path(path)
        self._seq = -1
        if self.path.exists():
            entries = self.read_all()
            if entries:
                self._seq = entries[-1]["seq"]

    @property
    def seq(self) -> int:
        """Sequence number of the last written entry (-1 when empty)."""
        return self._seq

    @property
    def next_seq(self) -> int:
        return self._seq + 1

    def append(self, kind: str, payload: dict, received: str) -> int:
        entry = {"seq": self.next_seq, "kind": kind, "payload": payload, "received": received}
        blob = json.dumps(entry, separators=(",", ":")).encode()
        frame = b"%d\n%s\n" % (len(blob), blob)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab") as fh:
            fh.write(frame)
            fh.flush()
            os.fsync(fh.fileno())
        self._seq += 1
        return self._seq

    def read_all(self) -> list[dict]:
        entries = []
        with open(self.path, "rb") as fh:
            while True:
                header = fh.readline()
                if not header:
                    break
                try:
                    length = int(header.strip())
                except ValueError:
                    raise JournalCorruptError(f"{self.path}: bad length prefix {header!r}")
                blob = fh.read(length)
                if len(blob) != length:
                    raise JournalCorruptError(f"{self.path}: truncated entry")
                if fh.read(1) != b"\n":
                    raise JournalCorruptError(f"{self.path}: missing entry terminator")
                entries.append(json.loads(blob))
        expected = list(range(len(entries)))
        if [e["seq"] for e in entries] != expected:
            raise JournalCorruptError(f"{self.path}: sequence numbers not dense")
        return entries
