"""Data model and file formats for detection inputs and record outputs.

A detection document bundles everything the upstream detectors produced for
one scanned opening (a double page): the six de-skew keypoints, table and
cell boxes with class probability distributions, text hypotheses, and year
token detections.  Documents are stored one per file as line-delimited JSON;
extracted records are written as CSV (RFC 4180 quoting) or JSON lines.

All types are immutable values.  Coordinates are in original-image pixel
space with the origin at the top-left corner and y growing downward;
de-skewed coordinates are derived, never persisted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

LAYOUT_TYPES = ("handdrawn", "preprinted", "half_table", "free_text", "other")
CELL_CLASSES = ("single_line", "multi_line", "repetition", "empty")
PAGE_SIDES = ("left", "right")
DIRECTIONS = ("in", "out", "unknown")
RECORD_FLAGS = (
    "inferred_cell",
    "repetition_filled",
    "realigned",
    "year_inferred",
    "unmatched_parish",
)

# Cell boxes may overhang their table box by at most this much and still
# validate; detectors routinely bleed a pixel or two past the table border.
CELL_CLAMP_TOLERANCE = 2.0

PROB_SUM_TOLERANCE = 1e-6
PROB_RENORM_LIMIT = 1e-3


class InterchangeError(ValueError):
    """Base error for document and record I/O."""

    def __init__(self, message: str, path: str = "") -> None:
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParseError(InterchangeError):
    """Raised on malformed interchange syntax."""


class ValidationError(InterchangeError):
    """Raised when a parsed value violates a documented invariant."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned detection box with a confidence in [0, 1]."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    confidence: float = 1.0

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> Point:
        return Point((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class OpeningKeypoints:
    """The six de-skew keypoints of an opening.

    a/b/c run along the top edge (left corner, spine, right corner) and
    d/e/f along the bottom edge in the same order.
    """

    a: Point
    b: Point
    c: Point
    d: Point
    e: Point
    f: Point

    def as_tuple(self) -> tuple[Point, Point, Point, Point, Point, Point]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)


@dataclass(frozen=True)
class TextHypothesis:
    """Recognized text with confidence; '?' marks unreadable characters."""

    text: str
    confidence: float = 1.0


@dataclass(frozen=True)
class CellLine:
    box: Box
    text: TextHypothesis


@dataclass(frozen=True)
class CellHypothesis:
    """A detected table cell with its class distribution and text.

    ``class_probs`` is ordered (single_line, multi_line, repetition, empty).
    ``lines`` is populated only for multi-line cells; single-line cells carry
    their text directly in ``text``.
    """

    box: Box
    class_probs: tuple[float, float, float, float]
    text: TextHypothesis | None = None
    lines: tuple[CellLine, ...] = ()


@dataclass(frozen=True)
class TableDetection:
    box: Box
    cells: tuple[CellHypothesis, ...] = ()


@dataclass(frozen=True)
class YearDetection:
    box: Box
    text: TextHypothesis


@dataclass(frozen=True)
class DetectionDocument:
    """All ingested detection primitives for one scanned opening."""

    opening_id: str
    book_id: str
    image_width: int
    image_height: int
    layout_type: str
    keypoints: OpeningKeypoints | None = None
    tables: tuple[TableDetection, ...] = ()
    year_detections: tuple[YearDetection, ...] = ()

    def center_line_x(self, y: float | None = None) -> float:
        """X coordinate of the line dividing the two pages.

        With keypoints present the spine is the B-E segment, interpolated at
        ``y`` when given; otherwise the image midline is used.
        """
        if self.keypoints is None:
            return self.image_width / 2.0
        b, e = self.keypoints.b, self.keypoints.e
        if y is None or abs(e.y - b.y) < 1e-9:
            return (b.x + e.x) / 2.0
        t = (y - b.y) / (e.y - b.y)
        return b.x + t * (e.x - b.x)

    def page_side(self, x: float, y: float | None = None) -> str:
        """Assign an x coordinate to the left or right page of the opening."""
        return "left" if x < self.center_line_x(y) else "right"


@dataclass(frozen=True)
class MigrationRecord:
    """One extracted record row: who moved, when, in which direction."""

    book_id: str
    opening_id: str
    page_side: str
    direction: str
    year: int | None = None
    fields: dict[str, str] = field(default_factory=dict)
    parish_raw: str | None = None
    parish_canonical: str | None = None
    flags: frozenset[str] = frozenset()

    def with_flags(self, *extra: str) -> "MigrationRecord":
        return replace(self, flags=self.flags | frozenset(extra))


def dominant_class(class_probs: Sequence[float]) -> str:
    """Argmax cell class with ties broken by the fixed class priority."""
    best = 0
    for i in range(1, 4):
        if class_probs[i] > class_probs[best]:
            best = i
    return CELL_CLASSES[best]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check_finite(value: float, path: str) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ValidationError("value must be a finite number", path)


def validate_point(p: Point, path: str) -> None:
    _check_finite(p.x, f"{path}.x")
    _check_finite(p.y, f"{path}.y")


def validate_box(b: Box, path: str) -> None:
    for name in ("x_min", "y_min", "x_max", "y_max", "confidence"):
        _check_finite(getattr(b, name), f"{path}.{name}")
    if not b.x_min < b.x_max:
        raise ValidationError("x_min must be < x_max", path)
    if not b.y_min < b.y_max:
        raise ValidationError("y_min must be < y_max", path)
    if not 0.0 <= b.confidence <= 1.0:
        raise ValidationError("confidence must lie in [0, 1]", path)


def validate_keypoints(kp: OpeningKeypoints, path: str = "keypoints") -> None:
    for name, point in zip("abcdef", kp.as_tuple()):
        validate_point(point, f"{path}.{name}")
    if not (kp.a.x < kp.b.x < kp.c.x):
        raise ValidationError("top keypoints must satisfy a.x < b.x < c.x", path)
    if not (kp.d.x < kp.e.x < kp.f.x):
        raise ValidationError("bottom keypoints must satisfy d.x < e.x < f.x", path)
    if not kp.a.y < kp.d.y:
        raise ValidationError("left edge must run downward (a.y < d.y)", path)
    if not kp.c.y < kp.f.y:
        raise ValidationError("right edge must run downward (c.y < f.y)", path)


def normalize_class_probs(
    probs: Sequence[float], path: str = "class_probs"
) -> tuple[float, float, float, float]:
    """Validate a 4-class distribution, renormalizing tiny drift.

    Sums within ``PROB_RENORM_LIMIT`` of one are rescaled exactly to one;
    anything further off is rejected.
    """
    if len(probs) != 4:
        raise ValidationError("expected exactly 4 class probabilities", path)
    values = []
    for i, p in enumerate(probs):
        _check_finite(p, f"{path}[{i}]")
        if not -PROB_SUM_TOLERANCE <= p <= 1.0 + PROB_SUM_TOLERANCE:
            raise ValidationError("probability outside [0, 1]", f"{path}[{i}]")
        values.append(min(max(float(p), 0.0), 1.0))
    total = sum(values)
    if abs(total - 1.0) <= PROB_SUM_TOLERANCE:
        return tuple(values)  # type: ignore[return-value]
    if abs(total - 1.0) <= PROB_RENORM_LIMIT:
        return tuple(v / total for v in values)  # type: ignore[return-value]
    raise ValidationError(f"class probabilities sum to {total:.6f}, not 1", path)


def validate_cell(cell: CellHypothesis, path: str) -> None:
    validate_box(cell.box, f"{path}.box")
    probs = normalize_class_probs(cell.class_probs, f"{path}.class_probs")
    if any(abs(a - b) > 0 for a, b in zip(probs, cell.class_probs)):
        raise ValidationError("class probabilities are not normalized", f"{path}.class_probs")
    if cell.lines and dominant_class(cell.class_probs) != "multi_line":
        raise ValidationError(
            "line boxes present but dominant class is not multi_line", f"{path}.lines"
        )
    for i, line in enumerate(cell.lines):
        validate_box(line.box, f"{path}.lines[{i}].box")
        validate_text(line.text, f"{path}.lines[{i}].text")
    if cell.text is not None:
        validate_text(cell.text, f"{path}.text")


def validate_text(t: TextHypothesis, path: str) -> None:
    if not isinstance(t.text, str):
        raise ValidationError("text must be a string", f"{path}.text")
    _check_finite(t.confidence, f"{path}.confidence")
    if not 0.0 <= t.confidence <= 1.0:
        raise ValidationError("confidence must lie in [0, 1]", f"{path}.confidence")


def validate_document(doc: DetectionDocument) -> None:
    if not doc.opening_id:
        raise ValidationError("opening_id must be non-empty", "opening_id")
    if not doc.book_id:
        raise ValidationError("book_id must be non-empty", "book_id")
    for name in ("image_width", "image_height"):
        value = getattr(doc, name)
        if not isinstance(value, int) or value <= 0:
            raise ValidationError("must be a positive integer", name)
    if doc.layout_type not in LAYOUT_TYPES:
        raise ValidationError(
            f"unknown layout_type {doc.layout_type!r}; expected one of {LAYOUT_TYPES}",
            "layout_type",
        )
    if doc.keypoints is not None:
        validate_keypoints(doc.keypoints)
    for t, table in enumerate(doc.tables):
        tpath = f"tables[{t}]"
        validate_box(table.box, f"{tpath}.box")
        for c, cell in enumerate(table.cells):
            cpath = f"{tpath}.cells[{c}]"
            validate_cell(cell, cpath)
            tol = CELL_CLAMP_TOLERANCE
            if (
                cell.box.x_min < table.box.x_min - tol
                or cell.box.y_min < table.box.y_min - tol
                or cell.box.x_max > table.box.x_max + tol
                or cell.box.y_max > table.box.y_max + tol
            ):
                raise ValidationError(
                    "cell box lies outside its table box beyond the clamping tolerance",
                    f"{cpath}.box",
                )
    for y, det in enumerate(doc.year_detections):
        validate_box(det.box, f"year_detections[{y}].box")
        validate_text(det.text, f"year_detections[{y}].text")


def validate_record(record: MigrationRecord, path: str = "record") -> None:
    if record.page_side not in PAGE_SIDES:
        raise ValidationError(f"unknown page_side {record.page_side!r}", f"{path}.page_side")
    if record.direction not in DIRECTIONS:
        raise ValidationError(f"unknown direction {record.direction!r}", f"{path}.direction")
    if record.year is not None and not isinstance(record.year, int):
        raise ValidationError("year must be an integer when present", f"{path}.year")
    unknown = set(record.flags) - set(RECORD_FLAGS)
    if unknown:
        raise ValidationError(f"unknown flags {sorted(unknown)}", f"{path}.flags")


# ---------------------------------------------------------------------------
# Document serialization (one document per file, line-delimited JSON)
# ---------------------------------------------------------------------------


def _point_obj(p: Point) -> dict:
    return {"x": p.x, "y": p.y}


def _box_obj(b: Box) -> dict:
    return {
        "x_min": b.x_min,
        "y_min": b.y_min,
        "x_max": b.x_max,
        "y_max": b.y_max,
        "confidence": b.confidence,
    }


def _text_obj(t: TextHypothesis) -> dict:
    return {"text": t.text, "confidence": t.confidence}


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def write_document(doc: DetectionDocument, path: str) -> None:
    """Write one validated document as line-delimited JSON."""
    validate_document(doc)
    lines = []
    header = {
        "kind": "document",
        "opening_id": doc.opening_id,
        "book_id": doc.book_id,
        "image_width": doc.image_width,
        "image_height": doc.image_height,
        "layout_type": doc.layout_type,
        "keypoints": None
        if doc.keypoints is None
        else {name: _point_obj(p) for name, p in zip("abcdef", doc.keypoints.as_tuple())},
    }
    lines.append(_dump(header))
    for t, table in enumerate(doc.tables):
        lines.append(_dump({"kind": "table", "box": _box_obj(table.box)}))
        for cell in table.cells:
            obj = {
                "kind": "cell",
                "table": t,
                "box": _box_obj(cell.box),
                "class_probs": list(cell.class_probs),
                "text": None if cell.text is None else _text_obj(cell.text),
                "lines": [
                    {"box": _box_obj(line.box), "text": _text_obj(line.text)}
                    for line in cell.lines
                ],
            }
            lines.append(_dump(obj))
    for det in doc.year_detections:
        lines.append(_dump({"kind": "year", "box": _box_obj(det.box), "text": _text_obj(det.text)}))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _parse_point(obj, path: str) -> Point:
    if not isinstance(obj, dict) or set(obj) != {"x", "y"}:
        raise ParseError("expected an object with fields x, y", path)
    return Point(obj["x"], obj["y"])


def _parse_box(obj, path: str) -> Box:
    expected = {"x_min", "y_min", "x_max", "y_max", "confidence"}
    if not isinstance(obj, dict) or set(obj) != expected:
        raise ParseError(f"expected an object with fields {sorted(expected)}", path)
    return Box(obj["x_min"], obj["y_min"], obj["x_max"], obj["y_max"], obj["confidence"])


def _parse_text(obj, path: str) -> TextHypothesis:
    if not isinstance(obj, dict) or set(obj) != {"text", "confidence"}:
        raise ParseError("expected an object with fields text, confidence", path)
    return TextHypothesis(obj["text"], obj["confidence"])


def read_document(path: str) -> DetectionDocument:
    """Parse and validate one document file.

    Any malformed line raises :class:`ParseError`; a syntactically valid file
    that violates an invariant raises :class:`ValidationError`.  Both carry
    the offending field path.
    """
    with open(path, "r", encoding="utf-8") as handle:
        # split on newlines only: JSON escapes \n and \r inside strings, but
        # other Unicode line separators (U+0085 etc.) pass through verbatim
        # and must not break records the way splitlines() would
        raw_lines = [line for line in handle.read().split("\n") if line.strip()]
    if not raw_lines:
        raise ParseError("empty document file", "line 1")

    header = None
    tables: list[tuple[Box, list[CellHypothesis]]] = []
    years: list[YearDetection] = []
    for lineno, raw in enumerate(raw_lines, start=1):
        where = f"line {lineno}"
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", where) from exc
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ParseError("expected an object with a 'kind' field", where)
        kind = obj["kind"]
        if kind == "document":
            if header is not None:
                raise ParseError("duplicate document header", where)
            kp = None
            if obj.get("keypoints") is not None:
                kp_obj = obj["keypoints"]
                if not isinstance(kp_obj, dict) or set(kp_obj) != set("abcdef"):
                    raise ParseError("keypoints must map exactly a..f", f"{where}: keypoints")
                kp = OpeningKeypoints(
                    **{name: _parse_point(kp_obj[name], f"{where}: keypoints.{name}") for name in "abcdef"}
                )
            try:
                header = DetectionDocument(
                    opening_id=obj["opening_id"],
                    book_id=obj["book_id"],
                    image_width=obj["image_width"],
                    image_height=obj["image_height"],
                    layout_type=obj["layout_type"],
                    keypoints=kp,
                )
            except KeyError as exc:
                raise ParseError(f"missing document field {exc.args[0]!r}", where) from exc
        elif kind == "table":
            tables.append((_parse_box(obj.get("box"), f"{where}: box"), []))
        elif kind == "cell":
            index = obj.get("table")
            if not isinstance(index, int) or not 0 <= index < len(tables):
                raise ParseError(f"cell references unknown table {index!r}", where)
            probs = obj.get("class_probs")
            if not isinstance(probs, list):
                raise ParseError("class_probs must be a list", f"{where}: class_probs")
            lines = []
            for i, line_obj in enumerate(obj.get("lines") or []):
                lpath = f"{where}: lines[{i}]"
                if not isinstance(line_obj, dict):
                    raise ParseError("line entries must be objects", lpath)
                lines.append(
                    CellLine(
                        _parse_box(line_obj.get("box"), f"{lpath}.box"),
                        _parse_text(line_obj.get("text"), f"{lpath}.text"),
                    )
                )
            text = obj.get("text")
            cell = CellHypothesis(
                box=_parse_box(obj.get("box"), f"{where}: box"),
                class_probs=normalize_class_probs(probs, f"{where}: class_probs"),
                text=None if text is None else _parse_text(text, f"{where}: text"),
                lines=tuple(lines),
            )
            tables[index][1].append(cell)
        elif kind == "year":
            years.append(
                YearDetection(
                    _parse_box(obj.get("box"), f"{where}: box"),
                    _parse_text(obj.get("text"), f"{where}: text"),
                )
            )
        else:
            raise ParseError(f"unknown line kind {kind!r}", where)

    if header is None:
        raise ParseError("missing document header line", "line 1")
    doc = replace(
        header,
        tables=tuple(TableDetection(box, tuple(cells)) for box, cells in tables),
        year_detections=tuple(years),
    )
    validate_document(doc)
    return doc


# ---------------------------------------------------------------------------
# Record serialization
# ---------------------------------------------------------------------------

_RECORD_COLUMNS = (
    "book_id",
    "opening_id",
    "page_side",
    "year",
    "direction",
    "parish_raw",
    "parish_canonical",
    "flags",
)
_FIELD_PREFIX = "field:"


def _field_labels(records: Iterable[MigrationRecord]) -> list[str]:
    labels: list[str] = []
    seen = set()
    for record in records:
        for label in record.fields:
            if label not in seen:
                seen.add(label)
                labels.append(label)
    return labels


def write_records(records: Sequence[MigrationRecord], path: str, format: str = "csv") -> None:
    """Write records as CSV (RFC 4180 quoting) or JSON lines."""
    for i, record in enumerate(records):
        validate_record(record, f"records[{i}]")
    if format == "csv":
        labels = _field_labels(records)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
            writer.writerow(list(_RECORD_COLUMNS) + [_FIELD_PREFIX + l for l in labels])
            for record in records:
                writer.writerow(
                    [
                        record.book_id,
                        record.opening_id,
                        record.page_side,
                        "" if record.year is None else record.year,
                        record.direction,
                        record.parish_raw or "",
                        record.parish_canonical or "",
                        ";".join(sorted(record.flags)),
                    ]
                    + [record.fields.get(label, "") for label in labels]
                )
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for record in records:
                obj = {
                    "book_id": record.book_id,
                    "opening_id": record.opening_id,
                    "page_side": record.page_side,
                    "year": record.year,
                    "direction": record.direction,
                    "fields": dict(record.fields),
                    "parish_raw": record.parish_raw,
                    "parish_canonical": record.parish_canonical,
                    "flags": sorted(record.flags),
                }
                handle.write(_dump(obj) + "\n")
    else:
        raise ValueError(f"unknown record format {format!r}")


def read_records(path: str, format: str = "csv") -> list[MigrationRecord]:
    """Parse a record file written by :func:`write_records`."""
    records: list[MigrationRecord] = []
    if format == "csv":
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            try:
                head = next(reader)
            except StopIteration:
                raise ParseError("empty records file", "line 1") from None
            if head[: len(_RECORD_COLUMNS)] != list(_RECORD_COLUMNS):
                raise ParseError("unexpected CSV header", "line 1")
            labels = [c[len(_FIELD_PREFIX) :] for c in head[len(_RECORD_COLUMNS) :]]
            for row in reader:
                fixed, rest = row[: len(_RECORD_COLUMNS)], row[len(_RECORD_COLUMNS) :]
                records.append(
                    MigrationRecord(
                        book_id=fixed[0],
                        opening_id=fixed[1],
                        page_side=fixed[2],
                        year=int(fixed[3]) if fixed[3] else None,
                        direction=fixed[4],
                        parish_raw=fixed[5] or None,
                        parish_canonical=fixed[6] or None,
                        flags=frozenset(f for f in fixed[7].split(";") if f),
                        fields=dict(zip(labels, rest)),
                    )
                )
    elif format == "jsonl":
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", f"line {lineno}") from exc
                records.append(
                    MigrationRecord(
                        book_id=obj["book_id"],
                        opening_id=obj["opening_id"],
                        page_side=obj["page_side"],
                        year=obj["year"],
                        direction=obj["direction"],
                        fields=dict(obj["fields"]),
                        parish_raw=obj["parish_raw"],
                        parish_canonical=obj["parish_canonical"],
                        flags=frozenset(obj["flags"]),
                    )
                )
    else:
        raise ValueError(f"unknown record format {format!r}")
    for i, record in enumerate(records):
        validate_record(record, f"records[{i}]")
    return records
