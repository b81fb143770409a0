import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from migrec.interchange import (
    Box,
    CellHypothesis,
    CellLine,
    DetectionDocument,
    MigrationRecord,
    OpeningKeypoints,
    ParseError,
    Point,
    TableDetection,
    TextHypothesis,
    ValidationError,
    YearDetection,
    dominant_class,
    normalize_class_probs,
    read_document,
    read_records,
    validate_document,
    write_document,
    write_records,
)


def make_cell(x0, y0, x1, y1, probs=(1.0, 0.0, 0.0, 0.0), text="x"):
    return CellHypothesis(
        box=Box(x0, y0, x1, y1, 0.9),
        class_probs=probs,
        text=TextHypothesis(text, 0.8) if text is not None else None,
    )


def make_document(cells=None, **overrides):
    cells = cells if cells is not None else (make_cell(10, 10, 50, 30),)
    fields = dict(
        opening_id="op1",
        book_id="book1",
        image_width=1000,
        image_height=800,
        layout_type="preprinted",
        keypoints=OpeningKeypoints(
            a=Point(0, 0),
            b=Point(500, 0),
            c=Point(1000, 0),
            d=Point(0, 800),
            e=Point(500, 800),
            f=Point(1000, 800),
        ),
        tables=(TableDetection(box=Box(5, 5, 400, 300, 1.0), cells=tuple(cells)),),
        year_detections=(YearDetection(Box(100, 1, 160, 4, 0.9), TextHypothesis("1878", 0.9)),),
    )
    fields.update(overrides)
    return DetectionDocument(**fields)


def test_minimal_document_round_trip(tmp_path):
    doc = make_document()
    path = tmp_path / "doc.jsonl"
    write_document(doc, str(path))
    assert read_document(str(path)) == doc


def test_empty_tables_round_trip(tmp_path):
    doc = make_document(tables=(), year_detections=())
    path = tmp_path / "doc.jsonl"
    write_document(doc, str(path))
    assert read_document(str(path)) == doc


def test_utf8_text_preserved(tmp_path):
    doc = make_document(cells=(make_cell(10, 10, 50, 30, text="Hämeenlinna"),))
    path = tmp_path / "doc.jsonl"
    write_document(doc, str(path))
    raw = path.read_bytes()
    assert "Hämeenlinna".encode("utf-8") in raw
    assert read_document(str(path)) == doc


def test_inverted_cell_box_names_the_cell():
    bad = make_cell(50, 10, 10, 30)  # x_min > x_max
    doc = make_document(tables=(TableDetection(Box(5, 5, 400, 300, 1.0), (bad,)),))
    with pytest.raises(ValidationError) as err:
        validate_document(doc)
    assert "tables[0].cells[0]" in str(err.value)


def test_cell_outside_table_rejected_beyond_tolerance():
    inside_tolerance = make_cell(3.5, 5.0, 50.0, 30.0)  # 1.5 px overhang
    validate_document(make_document(cells=(inside_tolerance,)))
    outgrown = make_cell(1.0, 5.0, 50.0, 30.0)  # 4 px overhang
    with pytest.raises(ValidationError):
        validate_document(make_document(cells=(outgrown,)))


def test_lines_require_multi_line_class():
    line = CellLine(Box(10, 10, 50, 20, 1.0), TextHypothesis("a", 1.0))
    cell = CellHypothesis(
        box=Box(10, 10, 50, 30, 0.9), class_probs=(1.0, 0.0, 0.0, 0.0), lines=(line,)
    )
    with pytest.raises(ValidationError):
        validate_document(make_document(cells=(cell,)))


def test_malformed_json_is_a_parse_error(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"kind": "document", \n', encoding="utf-8")
    with pytest.raises(ParseError):
        read_document(str(path))


def test_unknown_layout_rejected():
    with pytest.raises(ValidationError) as err:
        validate_document(make_document(layout_type="scroll"))
    assert "layout_type" in str(err.value)


def test_class_probs_renormalized_within_tolerance():
    probs = normalize_class_probs((0.5004, 0.4999, 0.0, 0.0))
    assert abs(sum(probs) - 1.0) <= 1e-9
    with pytest.raises(ValidationError):
        normalize_class_probs((0.7, 0.7, 0.0, 0.0))


def test_dominant_class_priority_order():
    assert dominant_class((0.25, 0.25, 0.25, 0.25)) == "single_line"
    assert dominant_class((0.0, 0.0, 0.0, 1.0)) == "empty"


# --- generated documents -------------------------------------------------

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=64)
confidence = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, width=64)


@st.composite
def documents(draw):
    n_tables = draw(st.integers(0, 2))
    tables = []
    for t in range(n_tables):
        x0 = draw(st.floats(0, 400, width=64))
        y0 = draw(st.floats(0, 300, width=64))
        w = draw(st.floats(50, 500, width=64))
        h = draw(st.floats(50, 400, width=64))
        n_cells = draw(st.integers(0, 5))
        cells = []
        for c in range(n_cells):
            fx0 = draw(st.floats(0.0, 0.8, width=64))
            fy0 = draw(st.floats(0.0, 0.8, width=64))
            fx1 = draw(st.floats(min_value=fx0 + 0.05, max_value=1.0, width=64))
            fy1 = draw(st.floats(min_value=fy0 + 0.05, max_value=1.0, width=64))
            kind = draw(st.integers(0, 3))
            probs = [0.0, 0.0, 0.0, 0.0]
            probs[kind] = 1.0
            text = draw(st.one_of(st.none(), st.text(max_size=12)))
            cells.append(
                CellHypothesis(
                    box=Box(x0 + fx0 * w, y0 + fy0 * h, x0 + fx1 * w, y0 + fy1 * h,
                            draw(confidence)),
                    class_probs=tuple(probs),
                    text=None if text is None else TextHypothesis(text, draw(confidence)),
                    lines=(),
                )
            )
        tables.append(TableDetection(Box(x0, y0, x0 + w, y0 + h, 1.0), tuple(cells)))
    years = tuple(
        YearDetection(Box(10, 10, 60, 30, 0.5), TextHypothesis(draw(st.text(max_size=6)), 0.5))
        for _ in range(draw(st.integers(0, 2)))
    )
    return DetectionDocument(
        opening_id=draw(st.text(min_size=1, max_size=8, alphabet="abc019_")),
        book_id=draw(st.text(min_size=1, max_size=8, alphabet="abc019_")),
        image_width=1000,
        image_height=800,
        layout_type=draw(st.sampled_from(("handdrawn", "preprinted", "half_table"))),
        keypoints=None,
        tables=tuple(tables),
        year_detections=years,
    )


@settings(max_examples=40, deadline=None)
@given(documents())
def test_document_round_trip_property(tmp_path_factory, doc):
    path = tmp_path_factory.mktemp("docs") / "doc.jsonl"
    write_document(doc, str(path))
    assert read_document(str(path)) == doc


# --- records --------------------------------------------------------------


def make_record(i=0, **overrides):
    fields = dict(
        book_id="book1",
        opening_id=f"op{i}",
        page_side="left",
        direction="in",
        year=1880 + i % 20,
        fields={"ref_no": str(i), "name": f"Person {i}", "parish": "Turku"},
        parish_raw="Åbo",
        parish_canonical="Turku",
        flags=frozenset({"repetition_filled"} if i % 3 == 0 else set()),
    )
    fields.update(overrides)
    return MigrationRecord(**fields)


def test_empty_records_csv_is_header_only(tmp_path):
    path = tmp_path / "records.csv"
    write_records([], str(path), format="csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("book_id,opening_id,")


def test_comma_in_field_is_quoted(tmp_path):
    record = make_record(fields={"name": "Sirkka, Maria"})
    path = tmp_path / "records.csv"
    write_records([record], str(path), format="csv")
    assert '"Sirkka, Maria"' in path.read_text(encoding="utf-8")
    assert read_records(str(path), format="csv")[0].fields["name"] == "Sirkka, Maria"


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_thousand_records_round_trip(tmp_path, fmt):
    records = [make_record(i) for i in range(1000)]
    path = tmp_path / f"records.{fmt}"
    write_records(records, str(path), format=fmt)
    assert read_records(str(path), format=fmt) == records


def test_jsonl_round_trip_with_heterogeneous_fields(tmp_path):
    records = [
        make_record(0, fields={"a": "1"}),
        make_record(1, fields={"b": "2", "c": ""}),
    ]
    path = tmp_path / "records.jsonl"
    write_records(records, str(path), format="jsonl")
    assert read_records(str(path), format="jsonl") == records


def test_record_validation_rejects_unknown_flag(tmp_path):
    record = make_record(flags=frozenset({"bogus"}))
    with pytest.raises(ValidationError):
        write_records([record], str(tmp_path / "x.csv"), format="csv")
