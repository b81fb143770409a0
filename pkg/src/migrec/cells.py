"""Cell-type routing, repetition fill, column realignment, record assembly.

Cells come in four types: single-line, multi-line, repetition (a ditto mark
copying the nearest filled cell above) and empty.  Empty and repetition
cells are excluded from text recognition; repetition cells are filled from
their column afterwards.  Rows whose column count or content does not match
the expected table layout are realigned with simple data-type and text
length heuristics before being turned into migration records.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .interchange import (
    CELL_CLASSES,
    Box,
    CellHypothesis,
    MigrationRecord,
    dominant_class,
    normalize_class_probs,
)
from .gridrec import GridTable

COLUMN_KINDS = ("numeric", "text", "date", "parish", "any")

# Month name stems accepted by the date detector (Finnish and Swedish).
MONTH_TOKENS = (
    "tammi", "helmi", "maalis", "huhti", "touko", "kesä",
    "heinä", "elo", "syys", "loka", "marras", "joulu",
    "januari", "februari", "mars", "april", "maj", "juni",
    "juli", "augusti", "september", "oktober", "november", "december",
)

_DATE_NUMERIC = re.compile(r"^\s*([0-3]?\d)\s*[./\s]\s*([01]?\d)\s*[./]?\s*$")


def classify_cell(probs: Sequence[float]) -> str:
    """Most likely cell type; ties broken single > multi > repetition > empty."""
    normalize_class_probs(probs)
    return dominant_class(probs)


@dataclass(frozen=True)
class RecognitionTask:
    """One text-recognition work item: a cell (or one of its lines)."""

    row: int
    col: int
    box: Box
    line_index: int | None = None
    downgraded: bool = False


def route_cells(grid: GridTable) -> list[RecognitionTask]:
    """Recognition tasks for a completed grid.

    Empty and repetition cells are excluded so the recognizer never sees
    content-free crops.  Single-line cells yield one task on the full cell;
    multi-line cells yield one task per line box.  A multi-line cell without
    line boxes is downgraded to a single full-cell task and flagged.
    """
    tasks: list[RecognitionTask] = []
    for r, row in enumerate(grid.cells):
        for c, cell in enumerate(row):
            kind = classify_cell(cell.hyp.class_probs)
            if kind in ("empty", "repetition"):
                continue
            if kind == "single_line":
                tasks.append(RecognitionTask(r, c, cell.hyp.box))
            else:
                if not cell.hyp.lines:
                    tasks.append(RecognitionTask(r, c, cell.hyp.box, downgraded=True))
                    continue
                for i, line in enumerate(cell.hyp.lines):
                    tasks.append(RecognitionTask(r, c, line.box, line_index=i))
    return tasks


def fill_repetitions(
    column: Sequence[tuple[str, str | None]],
) -> list[str | None]:
    """Resolve repetition marks in one top-to-bottom column.

    Each repetition cell receives the text of the nearest preceding
    single-line or multi-line cell with non-empty text.  Empty cells stay
    empty; a repetition with no valid predecessor stays empty.
    """
    carried: str | None = None
    out: list[str | None] = []
    for cell_type, text in column:
        if cell_type not in CELL_CLASSES:
            raise ValueError(f"unknown cell type {cell_type!r}")
        if cell_type == "repetition":
            out.append(carried)
        elif cell_type == "empty":
            out.append(None)
        else:
            out.append(text)
            if text:
                carried = text
    return out


def is_numeric_text(text: str) -> bool:
    """Digits and punctuation only (no letters), non-empty."""
    stripped = text.strip()
    return bool(stripped) and not any(ch.isalpha() for ch in stripped)


def is_date_text(text: str) -> bool:
    match = _DATE_NUMERIC.match(text)
    if match:
        day, month = int(match.group(1)), int(match.group(2))
        return 1 <= day <= 31 and 1 <= month <= 12
    lowered = text.casefold()
    return any(token in lowered for token in MONTH_TOKENS)


def is_text_like(text: str) -> bool:
    return any(ch.isalpha() for ch in text)


def _kind_score(text: str | None, kind: str) -> float:
    if text is None or not text.strip():
        return 0.5  # empty cells are uninformative, neither match nor mismatch
    if kind == "any":
        return 1.0
    if kind == "numeric":
        return 1.0 if is_numeric_text(text) else 0.0
    if kind == "date":
        return 1.0 if is_date_text(text) else 0.0
    if kind in ("text", "parish"):
        return 1.0 if is_text_like(text) else 0.0
    raise ValueError(f"unknown column kind {kind!r}")


def _length_closeness(text: str, avg_len: float) -> float:
    return max(0.0, 1.0 - abs(len(text) - avg_len) / max(avg_len, 1.0))


@dataclass(frozen=True)
class ColumnSchema:
    """Expected columns of one table layout, in order."""

    labels: tuple[str, ...]
    kinds: tuple[str, ...]
    avg_lens: tuple[float | None, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("column labels must be unique")
        if len(self.kinds) != len(self.labels):
            raise ValueError("one kind per label required")
        for kind in self.kinds:
            if kind not in COLUMN_KINDS:
                raise ValueError(f"unknown column kind {kind!r}")
        if self.avg_lens and len(self.avg_lens) != len(self.labels):
            raise ValueError("avg_lens must match labels when given")

    def avg_len(self, index: int) -> float | None:
        return self.avg_lens[index] if self.avg_lens else None

    def parish_label(self) -> str | None:
        for label, kind in zip(self.labels, self.kinds):
            if kind == "parish":
                return label
        return None


def read_schema_file(path: str) -> ColumnSchema:
    """Load a column schema from the tab-separated layout file.

    One column per line, in order: ``label<TAB>kind`` or
    ``label<TAB>kind;avg_len``.  UTF-8, '#' comments allowed.
    """
    labels: list[str] = []
    kinds: list[str] = []
    avg_lens: list[float | None] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected label<TAB>kind[;avg_len]")
            label = parts[0].strip()
            kind, _, avg = parts[1].partition(";")
            labels.append(label)
            kinds.append(kind.strip())
            avg_lens.append(float(avg) if avg.strip() else None)
    return ColumnSchema(labels=tuple(labels), kinds=tuple(kinds), avg_lens=tuple(avg_lens))


def write_schema_file(schema: ColumnSchema, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for i, label in enumerate(schema.labels):
            avg = schema.avg_len(i)
            suffix = f";{avg}" if avg is not None else ""
            handle.write(f"{label}\t{schema.kinds[i]}{suffix}\n")


REALIGN_THRESHOLD = 0.5
REALIGN_WINDOW = 2


@dataclass(frozen=True)
class RowAlignment:
    mapping: dict[str, str | None]
    status: str  # "expected", "realigned" or "failed"
    shift: int = 0


def _column_score(text: str | None, kind: str, avg_len: float | None) -> float:
    kind_score = _kind_score(text, kind)
    if avg_len is None or text is None or not text.strip():
        return kind_score
    return 0.5 * kind_score + 0.5 * _length_closeness(text, avg_len)


def realign_columns(row_texts: Sequence[str | None], schema: ColumnSchema) -> RowAlignment:
    """Map one row of cell texts onto schema labels.

    A row with the expected column count whose every non-empty cell matches
    its column's data kind maps positionally (status ``expected``).
    Otherwise alignments shifted by -2..+2 positions are scored by kind
    compatibility blended with text-length closeness, and the best is taken
    if its mean score exceeds the threshold; failing that the row is marked
    ``failed`` and the parish field is left empty.
    """
    n = len(schema.labels)
    if len(row_texts) == n and all(
        _kind_score(row_texts[i], schema.kinds[i]) >= REALIGN_THRESHOLD for i in range(n)
    ):
        return RowAlignment(
            mapping={label: row_texts[i] for i, label in enumerate(schema.labels)},
            status="expected",
            shift=0,
        )

    best: tuple[float, int] | None = None
    for shift in sorted(range(-REALIGN_WINDOW, REALIGN_WINDOW + 1), key=lambda s: (abs(s), s)):
        total = 0.0
        for i in range(n):
            src = i + shift
            if 0 <= src < len(row_texts):
                total += _column_score(row_texts[src], schema.kinds[i], schema.avg_len(i))
            # sources shifted outside the row contribute zero
        score = total / n
        if best is None or score > best[0]:
            best = (score, shift)

    score, shift = best
    if score > REALIGN_THRESHOLD:
        mapping = {}
        for i, label in enumerate(schema.labels):
            src = i + shift
            mapping[label] = row_texts[src] if 0 <= src < len(row_texts) else None
        return RowAlignment(mapping=mapping, status="realigned", shift=shift)

    mapping = {
        label: (row_texts[i] if i < len(row_texts) else None)
        for i, label in enumerate(schema.labels)
    }
    parish = schema.parish_label()
    if parish is not None:
        mapping[parish] = None
    return RowAlignment(mapping=mapping, status="failed", shift=0)


def cell_text(cell: CellHypothesis) -> str | None:
    """Best available text for a cell; multi-line texts joined with spaces."""
    kind = dominant_class(cell.class_probs)
    if kind == "multi_line" and cell.lines:
        parts = [line.text.text for line in cell.lines if line.text.text]
        return " ".join(parts) if parts else None
    if cell.text is not None and cell.text.text:
        return cell.text.text
    return None


def assemble_records(
    grid: GridTable,
    year: int | None,
    direction: str,
    schema: ColumnSchema | None,
    side: str,
    *,
    book_id: str = "",
    opening_id: str = "",
    year_inferred: bool = False,
) -> list[MigrationRecord]:
    """Turn a completed grid into one migration record per non-empty row.

    Repetition fill is applied per column (idempotent, so pre-filled grids
    are safe).  Rows whose every cell is typed empty are elided: they are
    ruled lines without entries, not records.  Flags capture inferred cells,
    repetition fills, realignment and year provenance.
    """
    n_rows, n_cols = grid.n_rows, grid.n_cols
    types = [
        [classify_cell(grid.cells[r][c].hyp.class_probs) for c in range(n_cols)]
        for r in range(n_rows)
    ]
    raw_texts = [[cell_text(grid.cells[r][c].hyp) for c in range(n_cols)] for r in range(n_rows)]

    filled = [[None] * n_cols for _ in range(n_rows)]
    filled_flags = [[False] * n_cols for _ in range(n_rows)]
    for c in range(n_cols):
        column = [(types[r][c], raw_texts[r][c]) for r in range(n_rows)]
        resolved = fill_repetitions(column)
        for r in range(n_rows):
            filled[r][c] = resolved[r]
            filled_flags[r][c] = types[r][c] == "repetition" and resolved[r] is not None

    records = []
    for r in range(n_rows):
        if all(t == "empty" for t in types[r]):
            continue
        flags = set()
        if any(grid.cells[r][c].provenance == "inferred" for c in range(n_cols)):
            flags.add("inferred_cell")
        if any(filled_flags[r]):
            flags.add("repetition_filled")
        if year_inferred and year is not None:
            flags.add("year_inferred")

        parish_raw = None
        if schema is not None:
            alignment = realign_columns(filled[r], schema)
            if alignment.status == "realigned":
                flags.add("realigned")
            fields = {label: alignment.mapping[label] or "" for label in schema.labels}
            parish_label = schema.parish_label()
            if parish_label is not None:
                parish_raw = alignment.mapping.get(parish_label) or None
        else:
            fields = {f"col_{c}": filled[r][c] or "" for c in range(n_cols)}

        records.append(
            MigrationRecord(
                book_id=book_id,
                opening_id=opening_id,
                page_side=side,
                direction=direction,
                year=year,
                fields=fields,
                parish_raw=parish_raw,
                flags=frozenset(flags),
            )
        )
    return records
