"""Competition-record parsing and annual record-breaking series."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import date
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .progress import ProgressSeries

COLUMNS = ("person_id", "event", "date", "value", "kind")
KINDS = ("single", "average")
MOVES_EVENTS = frozenset({"3fm"})


class IngestError(ValueError):
    pass


@lru_cache(maxsize=None)
def event_map() -> dict:
    """WCA event code -> short label, read from the packaged ``events.json``."""
    text = (resources.files("cubeverse") / "data" / "events.json").read_text()
    return json.loads(text)


def event_label(code: str) -> str:
    table = event_map()
    if code in table:
        return table[code]
    if code in table.values():
        return code
    raise IngestError(f"unsupported event {code!r}")


@dataclass(frozen=True)
class RecordRow:
    person_id: str
    event: str
    date: date
    value: int
    kind: str = "average"


class RecordList(list):
    """Parsed rows; ``errors`` holds ``(line, message)`` for rejected rows."""

    def __init__(self, rows=(), errors=()):
        super().__init__(rows)
        self.errors = list(errors)


def _parse_row(raw: dict) -> RecordRow:
    person = (raw.get("person_id") or "").strip()
    if not person:
        raise IngestError("empty person_id")
    label = event_label((raw.get("event") or "").strip())
    try:
        day = date.fromisoformat((raw.get("date") or "").strip())
    except ValueError:
        raise IngestError(f"bad date {raw.get('date')!r}") from None
    try:
        value = int((raw.get("value") or "").strip())
    except ValueError:
        raise IngestError(f"bad value {raw.get('value')!r}") from None
    if value <= 0:
        raise IngestError(f"value must be positive, got {value}")
    kind = (raw.get("kind") or "average").strip()
    if kind not in KINDS:
        raise IngestError(f"unknown result kind {kind!r}")
    return RecordRow(person, label, day, value, kind)


def parse_records_text(text: str, delimiter: Optional[str] = None, strict: bool = False) -> RecordList:
    lines = text.splitlines()
    if not lines:
        raise IngestError("empty input")
    if delimiter is None:
        delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in COLUMNS if c not in header and c != "kind"]
    if missing:
        raise IngestError(f"missing columns: {', '.join(missing)}")
    reader.fieldnames = header
    out = RecordList()
    for raw in reader:
        line = reader.line_num
        try:
            out.append(_parse_row(raw))
        except IngestError as exc:
            if strict:
                raise IngestError(f"line {line}: {exc}") from None
            out.errors.append((line, str(exc)))
    return out


def parse_records(path: Union[str, Path], strict: bool = False) -> RecordList:
    """Read a TSV/CSV export with columns person_id,event,date,value[,kind].

    Bad rows are skipped and listed in ``.errors`` with their line numbers;
    ``strict=True`` raises on the first one instead.
    """
    path = Path(path)
    delimiter = "\t" if path.suffix.lower() in (".tsv", ".tab") else None
    return parse_records_text(path.read_text(), delimiter, strict)


def _pick_kind(rows: Sequence[RecordRow], kind: str) -> str:
    if kind in KINDS:
        return kind
    if kind != "auto":
        raise ValueError(f"kind must be 'auto', 'single' or 'average', got {kind!r}")
    return "average" if any(r.kind == "average" for r in rows) else "single"


def record_rows(rows: Iterable[RecordRow], event: str, kind: str = "auto") -> list[RecordRow]:
    """Rows that beat the running best of ``event``, in date order.

    Rows sharing a date keep their input order. Ties with the running best
    are not records.
    """
    label = event_label(event)
    mine = [r for r in rows if r.event == label]
    if not mine:
        raise IngestError(f"no rows for event {label!r}")
    chosen = _pick_kind(mine, kind)
    mine = sorted((r for r in mine if r.kind == chosen), key=lambda r: r.date)
    best = None
    out = []
    for r in mine:
        if best is None or r.value < best:
            best = r.value
            out.append(r)
    return out


def extract_progress(rows: Iterable[RecordRow], event: str, kind: str = "auto",
                     yearly: str = "mean") -> ProgressSeries:
    """Annual record series for one event, ``T = 1`` in its first record year.

    ``yearly="mean"`` averages the records set within each calendar year;
    ``"best"`` keeps the year's last (lowest) record. Years without a new
    record are left out. Values stay in input units.
    """
    if yearly not in ("mean", "best"):
        raise ValueError("yearly must be 'mean' or 'best'")
    recs = record_rows(rows, event, kind)
    first = recs[0].date.year
    by_year: dict[int, list] = {}
    for r in recs:
        by_year.setdefault(r.date.year, []).append(r.value)
    years = sorted(by_year)
    agg = np.mean if yearly == "mean" else np.min
    y = np.array([float(agg(by_year[yr])) for yr in years])
    T = np.array([yr - first + 1 for yr in years], dtype=float)
    label = event_label(event)
    kind_name = "moves" if label in MOVES_EVENTS else "time"
    return ProgressSeries(label, T, y, kind_name, len({r.person_id for r in recs}))


def record_holders(rows: Sequence[RecordRow], events: Iterable[str], kind: str = "auto") -> list[tuple]:
    """(person_id, event) for every record set in the given events."""
    out = []
    for e in events:
        out.extend((r.person_id, r.event) for r in record_rows(rows, e, kind))
    return out
