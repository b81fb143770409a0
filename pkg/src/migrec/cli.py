"""Command line interface: extract, eval, synth, years, normalize, aggregate, report.

``extract`` runs the full record-extraction pipeline over a directory of
detection documents, book-parallel with deterministic output.  ``eval``
scores predicted documents against gold documents and emits CSV reports.
``synth`` writes a synthetic fixture corpus with full ground truth.  The
remaining subcommands operate on record files: year resolution, parish
normalization and de-duplication, and per-year/per-parish aggregation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from dataclasses import replace as dc_replace

from . import evaluation as ev
from .cells import cell_text, read_schema_file
from .chrono import (
    ChronoConfig,
    HttpCorrectorClient,
    PageObservations,
    YearObservation,
    evaluate_years,
    external_correct,
    infer_sequence,
    normalize_year_token,
)
from .geometry import (
    angle_stats,
    apply_point,
    deskew_transforms,
    edge_angle_from_vertical,
    transform_box,
)
from .gridrec import GridConfig, complete_grid_with_retry
from .interchange import (
    Box,
    DetectionDocument,
    dominant_class,
    read_document,
    read_records,
    write_records,
)
from .normalize import Gazetteer, detect_duplicate_books, filter_usable, match_parish
from .pipeline import PipelineOptions, group_documents_by_book, process_book
from .synth import SynthConfig, generate_book, write_corpus

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def _read_config_file(path: str) -> dict[str, str]:
    """Plain key = value configuration; '#' comments and blank lines ignored."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = stripped.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _setting(args: argparse.Namespace, config: dict[str, str], key: str, default, cast):
    """Flag value if given, else config file value, else the default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        raw = config[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _grid_config(args, config) -> GridConfig:
    def eps(value):
        return value if value == "auto" else float(value)

    return GridConfig(
        eps_row=_setting(args, config, "eps_row", "auto", eps),
        eps_col=_setting(args, config, "eps_col", "auto", eps),
        min_pts=_setting(args, config, "min_pts", 2, int),
        center_line_merge=_setting(args, config, "merge_split_tables", True, bool),
    )


def _chrono_config(args, config) -> ChronoConfig:
    return ChronoConfig(
        min_year=_setting(args, config, "min_year", 1700, int),
        max_year=_setting(args, config, "max_year", 1930, int),
        max_jump=_setting(args, config, "max_jump", 5, int),
    )


def _load_schemas(schema_dir: str | None) -> dict:
    if not schema_dir:
        return {}
    schemas = {}
    for path in sorted(Path(schema_dir).glob("*.tsv")):
        schemas[path.stem] = read_schema_file(str(path))
    return schemas


def _load_book_directions(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    directions = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            book_id, _, mode = stripped.partition("\t")
            directions[book_id.strip()] = mode.strip()
    return directions


def _document_paths(in_dir: str) -> list[str]:
    return sorted(str(p) for p in Path(in_dir).rglob("*.jsonl"))


def _run_book(task: tuple[str, list[str], PipelineOptions]):
    book_id, paths, options = task
    return process_book(book_id, paths, options)


def cmd_extract(
    in_dir: str,
    out_path: str,
    options: PipelineOptions,
    workers: int = 1,
    records_format: str = "csv",
    summary_path: str | None = None,
) -> int:
    """Extract records from every document under ``in_dir``; book-parallel.

    Output is deterministic for any worker count: books are processed
    share-nothing and merged in sorted order.  Per-opening failures are
    isolated and tallied; the run continues.
    """
    paths = _document_paths(in_dir)
    if not paths:
        log.error("no document files (*.jsonl) under %s", in_dir)
        return EXIT_FATAL
    groups = group_documents_by_book(paths)
    tasks = [(book_id, files, options) for book_id, files in groups.items()]

    results = []
    if workers <= 1:
        for task in tasks:
            results.append(_run_book(task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_book, tasks))
    results.sort(key=lambda r: r.book_id)

    records = []
    summary: Counter = Counter()
    failures = []
    for result in results:
        records.extend(result.records)
        summary.update(result.summary)
        failures.extend(result.failures)
    records.sort(key=lambda r: (r.book_id, r.opening_id))

    write_records(records, out_path, format=records_format)
    summary_obj = {
        "books": len(results),
        "openings_total": len(paths),
        "records": len(records),
        "counts": dict(sorted(summary.items())),
        "failures": failures,
    }
    if summary_path is None:
        summary_path = out_path + ".summary.json"
    with open(summary_path, "w", encoding="utf-8") as handle:
        json.dump(summary_obj, handle, ensure_ascii=False, indent=2)
        handle.write("\n")
    log.info(
        "extracted %d records from %d openings (%d failed)",
        len(records),
        summary.get("openings_processed", 0),
        summary.get("openings_failed", 0),
    )
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _deskewed_geometry(doc: DetectionDocument):
    """Tables/cells/rows/cols boxes of a document in de-skewed coordinates."""
    h_left = h_right = None
    if doc.keypoints is not None:
        h_left, h_right = deskew_transforms(doc.keypoints, doc.image_width, doc.image_height)

    tables = []
    for table in doc.tables:
        center = table.box.center
        side = doc.page_side(center.x, center.y)
        h = h_left if side == "left" else h_right
        box = transform_box(h, table.box) if h is not None else table.box
        cells = []
        for cell in table.cells:
            cbox = transform_box(h, cell.box) if h is not None else cell.box
            cells.append((cbox, cell))
        tables.append((box, cells))
    return tables


def _grid_boxes(tables, grid_cfg: GridConfig):
    """Row and column boxes derived from grid reconstruction per table."""
    row_boxes: list[Box] = []
    col_boxes: list[Box] = []
    for box, cells in tables:
        if not cells:
            continue
        moved = tuple(dc_replace(c, box=b) for (b, c) in cells)
        try:
            grid = complete_grid_with_retry(box, moved, grid_cfg)
        except Exception as exc:
            log.warning("grid reconstruction failed during eval: %s", exc)
            continue
        for band in grid.rows:
            row_boxes.append(Box(box.x_min, band.start, box.x_max, band.end, 1.0))
        for band in grid.cols:
            col_boxes.append(Box(band.start, box.y_min, band.end, box.y_max, 1.0))
    return row_boxes, col_boxes


_CLASS_LABELS = ("single_line", "multi_line", "repetition", "empty")


def cmd_eval(
    pred_dir: str,
    gold_dir: str,
    out_dir: str,
    grid_cfg: GridConfig | None = None,
    chrono_cfg: ChronoConfig | None = None,
) -> int:
    """Score predicted documents against gold documents, table by table.

    Emits detection metrics (tables, rows, columns; split by layout type),
    a cell classification report, text EM/CER metrics, year extraction
    P/R/F1 and skew-angle statistics as CSV files under ``out_dir``.
    """
    grid_cfg = grid_cfg or GridConfig()
    chrono_cfg = chrono_cfg or ChronoConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    gold_files = {Path(p).name: p for p in _document_paths(gold_dir)}
    pred_files = {Path(p).name: p for p in _document_paths(pred_dir)}
    shared = sorted(set(gold_files) & set(pred_files))
    if not shared:
        log.error("no overlapping document files between %s and %s", pred_dir, gold_dir)
        return EXIT_FATAL
    missing = sorted(set(gold_files) - set(pred_files))
    for name in missing:
        log.warning("no prediction for %s", name)

    det_counts: dict[tuple[str, str], ev.EvalCounts] = {}
    confusion: Counter = Counter()
    class_support: Counter = Counter()
    text_pairs: list[tuple[str, str]] = []
    years_pred_raw: dict[tuple[str, str], set[int]] = {}
    years_pred_rule: dict[tuple[str, str], set[int]] = {}
    years_gold: dict[tuple[str, str], set[int]] = {}
    base_angles: dict[str, list[float]] = {"left": [], "middle": [], "right": []}
    deskew_angles: dict[str, list[float]] = {"left": [], "middle": [], "right": []}
    books_pages: dict[str, list[PageObservations]] = {}

    def add_counts(kind: str, layout: str, counts: ev.EvalCounts) -> None:
        for split in (layout, "all"):
            key = (kind, split)
            det_counts[key] = det_counts.get(key, ev.EvalCounts()) + counts

    for name in shared:
        gold_doc = read_document(gold_files[name])
        pred_doc = read_document(pred_files[name])
        layout = gold_doc.layout_type

        gold_tables = _deskewed_geometry(gold_doc)
        pred_tables = _deskewed_geometry(pred_doc)

        counts, _ = ev.match_detections(
            [b for b, _ in pred_tables], [b for b, _ in gold_tables]
        )
        add_counts("tables", layout, counts)

        pred_rows, pred_cols = _grid_boxes(pred_tables, grid_cfg)
        gold_rows, gold_cols = _grid_boxes(gold_tables, grid_cfg)
        row_counts, _ = ev.match_detections(pred_rows, gold_rows)
        add_counts("rows", layout, row_counts)
        col_counts, _ = ev.match_detections(pred_cols, gold_cols)
        add_counts("columns", layout, col_counts)

        pred_cells = [(b, c) for _, cells in pred_tables for b, c in cells]
        gold_cells = [(b, c) for _, cells in gold_tables for b, c in cells]
        _, pairing = ev.match_detections(
            [b for b, _ in pred_cells], [b for b, _ in gold_cells]
        )
        for pi, gi, _score in pairing:
            pred_class = dominant_class(pred_cells[pi][1].class_probs)
            gold_class = dominant_class(gold_cells[gi][1].class_probs)
            confusion[(gold_class, pred_class)] += 1
            class_support[gold_class] += 1
            gold_text = cell_text(gold_cells[gi][1])
            if gold_text:
                text_pairs.append((cell_text(pred_cells[pi][1]) or "", gold_text))

        for doc, target in ((pred_doc, years_pred_raw), (gold_doc, years_gold)):
            for side in ("left", "right"):
                target.setdefault((doc.opening_id, side), set())
            for det in doc.year_detections:
                year = normalize_year_token(det.text.text, chrono_cfg)
                if year is not None:
                    side = doc.page_side(det.box.center.x, det.box.center.y)
                    target[(doc.opening_id, side)].add(year)
        pages = []
        for side in ("left", "right"):
            observations = []
            for det in pred_doc.year_detections:
                if pred_doc.page_side(det.box.center.x, det.box.center.y) != side:
                    continue
                observations.append(
                    YearObservation(
                        opening_id=pred_doc.opening_id,
                        side=side,
                        raw=det.text.text,
                        normalized=normalize_year_token(det.text.text, chrono_cfg),
                        box=det.box,
                    )
                )
            pages.append(
                PageObservations(
                    opening_id=pred_doc.opening_id, side=side, observations=tuple(observations)
                )
            )
        books_pages.setdefault(pred_doc.book_id, []).extend(pages)

        if pred_doc.keypoints is not None:
            kp = pred_doc.keypoints
            base_angles["left"].append(edge_angle_from_vertical(kp.a, kp.d))
            base_angles["middle"].append(edge_angle_from_vertical(kp.b, kp.e))
            base_angles["right"].append(edge_angle_from_vertical(kp.c, kp.f))
            h_left, h_right = deskew_transforms(kp, pred_doc.image_width, pred_doc.image_height)
            deskew_angles["left"].append(
                edge_angle_from_vertical(apply_point(h_left, kp.a), apply_point(h_left, kp.d))
            )
            deskew_angles["middle"].append(
                edge_angle_from_vertical(apply_point(h_left, kp.b), apply_point(h_left, kp.e))
            )
            deskew_angles["right"].append(
                edge_angle_from_vertical(apply_point(h_right, kp.c), apply_point(h_right, kp.f))
            )

    for book_id, pages in books_pages.items():
        pages.sort(key=lambda p: (p.opening_id, p.side))
        sequence = infer_sequence(pages, chrono_cfg)
        resolved = [p.year for p in sequence.pages]
        for i, (page, obs) in enumerate(zip(sequence.pages, pages)):
            key = (page.opening_id, page.side)
            if page.year is None:
                years_pred_rule[key] = set()
                continue
            # a page may legitimately state the following year too (mid-page
            # change); keep observations consistent with the resolved sequence
            upper = page.year
            if i + 1 < len(resolved) and resolved[i + 1] is not None:
                upper = max(upper, resolved[i + 1])
            kept = {y for y in obs.years() if page.year <= y <= upper}
            years_pred_rule[key] = {page.year} | kept

    # --- detection metrics CSV
    lines = ["category,layout,accuracy,recall,precision,f1,tp,fp,fn"]
    for kind in ("tables", "rows", "columns"):
        for split in ("preprinted", "handdrawn", "all"):
            counts = det_counts.get((kind, split))
            if counts is None or counts.tp + counts.fp + counts.fn == 0:
                continue
            row = ev.metrics(counts, category=f"{kind}/{split}")
            lines.append(
                f"{kind},{split},{ev.round_half_up(row.accuracy)},{ev.round_half_up(row.recall)},"
                f"{ev.round_half_up(row.precision)},{ev.round_half_up(row.f1)},"
                f"{counts.tp},{counts.fp},{counts.fn}"
            )
    (out / "detection_metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # --- cell classification report CSV
    lines = ["label,precision,recall,f1,support"]
    class_rows = []
    for label in _CLASS_LABELS:
        support = class_support[label]
        if support == 0:
            continue
        tp = confusion[(label, label)]
        predicted = sum(confusion[(g, label)] for g in _CLASS_LABELS)
        precision = 100.0 * tp / predicted if predicted else 0.0
        recall = 100.0 * tp / support
        class_rows.append(
            ev.ClassRow(label, precision, recall, ev.f1_score(precision, recall), support)
        )
    if class_rows:
        report = ev.class_report(class_rows)
        for row in report.rows:
            lines.append(
                f"{row.label},{ev.round_half_up(row.precision)},{ev.round_half_up(row.recall)},"
                f"{ev.round_half_up(row.f1)},{row.support}"
            )
        total = report.total_support
        correct = sum(confusion[(label, label)] for label in _CLASS_LABELS)
        lines.append(f"accuracy,,,{ev.round_half_up(100.0 * correct / total)},{total}")
        lines.append(
            f"macro_avg,{ev.round_half_up(report.macro_precision)},"
            f"{ev.round_half_up(report.macro_recall)},{ev.round_half_up(report.macro_f1)},{total}"
        )
        lines.append(
            f"weighted_avg,{ev.round_half_up(report.weighted_precision)},"
            f"{ev.round_half_up(report.weighted_recall)},{ev.round_half_up(report.weighted_f1)},{total}"
        )
    (out / "cell_classification.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # --- text metrics CSV ('?' references excluded, numeric/textual split)
    usable_pairs = ev.filter_unreadable(text_pairs)
    lines = ["class,exact_match,cer,avg_ref_length,support"]
    for row in ev.split_metrics(usable_pairs):
        lines.append(
            f"{row.label},{ev.round_half_up(row.exact_match)},{round(row.cer, 4)},"
            f"{ev.round_half_up(row.avg_ref_length)},{row.support}"
        )
    (out / "text_metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # --- year metrics CSV
    lines = ["method,precision,recall,f1,pages"]
    for method, pred in (("raw", years_pred_raw), ("rule_corrected", years_pred_rule)):
        result = evaluate_years(pred, years_gold)
        lines.append(
            f"{method},{ev.round_half_up(result.precision)},{ev.round_half_up(result.recall)},"
            f"{ev.round_half_up(result.f1)},{result.pages_scored}"
        )
    (out / "year_metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # --- skew angle statistics CSV
    lines = ["stage,edge,mean_deg,sd_deg,n"]
    for stage, angles in (("base", base_angles), ("deskewed", deskew_angles)):
        for edge in ("left", "middle", "right"):
            values = angles[edge]
            if not values:
                continue
            mean, sd = angle_stats(values)
            lines.append(f"{stage},{edge},{mean:.6g},{sd:.6g},{len(values)}")
    (out / "skew_angles.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    log.info("evaluation reports written to %s", out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# years / normalize / aggregate / synth / report
# ---------------------------------------------------------------------------


def cmd_years(
    in_dir: str,
    out_path: str,
    chrono_cfg: ChronoConfig,
    corrector=None,
) -> int:
    """Resolve page-side years for every book under ``in_dir``."""
    from .pipeline import process_opening

    paths = _document_paths(in_dir)
    if not paths:
        log.error("no document files under %s", in_dir)
        return EXIT_FATAL
    groups = group_documents_by_book(paths)
    lines = ["book_id,opening_id,side,year,source"]
    options = PipelineOptions(chrono=chrono_cfg)
    for book_id, files in groups.items():
        pages = []
        for path in files:
            doc = read_document(path)
            result = process_opening(doc, options)
            for side in ("left", "right"):
                pages.append(result.pages[side])
        pages.sort(key=lambda p: (p.opening_id, p.side))
        if corrector is not None:
            sequence = external_correct(pages, corrector, chrono_cfg)
        else:
            sequence = infer_sequence(pages, chrono_cfg)
        for page in sequence.pages:
            year = "" if page.year is None else page.year
            lines.append(f"{book_id},{page.opening_id},{page.side},{year},{page.source}")
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _records_format(path: str) -> str:
    return "jsonl" if path.endswith(".jsonl") else "csv"


def cmd_normalize(
    records_path: str,
    out_path: str,
    gazetteer_path: str,
    max_rel_dist: float = 0.25,
    dup_threshold: float = 0.9,
    drop_duplicates: bool = True,
    usable_only: bool = False,
    report_path: str | None = None,
) -> int:
    """Normalize parish names, drop duplicated books, filter usable records."""
    gazetteer = Gazetteer.from_file(gazetteer_path)
    records = read_records(records_path, format=_records_format(records_path))

    normalized = []
    method_tally: Counter = Counter()
    for record in records:
        if record.parish_raw and record.parish_canonical is None:
            result = match_parish(record.parish_raw, gazetteer, max_rel_dist)
            method_tally[result.method] += 1
            if result.canonical is not None:
                record = dc_replace(record, parish_canonical=result.canonical)
            else:
                record = record.with_flags("unmatched_parish")
        normalized.append(record)

    books: dict[str, list] = {}
    for record in normalized:
        books.setdefault(record.book_id, []).append(record)
    duplicates = detect_duplicate_books(books, threshold=dup_threshold)
    removed_books = {pair.remove for pair in duplicates} if drop_duplicates else set()
    kept = [r for r in normalized if r.book_id not in removed_books]

    tally: dict[str, int] = {}
    if usable_only:
        kept, tally = filter_usable(kept)

    write_records(kept, out_path, format=_records_format(out_path))
    report = {
        "input_records": len(records),
        "output_records": len(kept),
        "parish_match_methods": dict(sorted(method_tally.items())),
        "duplicate_pairs": [
            {"book_a": p.book_a, "book_b": p.book_b, "jaccard": round(p.jaccard, 4), "removed": p.remove}
            for p in duplicates
        ],
        "rejections": tally,
    }
    if report_path is None:
        report_path = out_path + ".report.json"
    with open(report_path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, ensure_ascii=False, indent=2)
        handle.write("\n")
    return EXIT_OK


def cmd_aggregate(
    records_path: str,
    out_dir: str,
    parish: str | None = None,
) -> int:
    """Histogram-ready per-year and per-parish in/out counts from records."""
    records = read_records(records_path, format=_records_format(records_path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    excluded_direction = 0
    excluded_year = 0
    excluded_parish = 0
    year_counts: Counter = Counter()
    parish_counts: Counter = Counter()
    for record in records:
        if record.direction not in ("in", "out"):
            excluded_direction += 1
            continue
        if parish is not None and record.parish_canonical != parish:
            continue
        if record.year is None:
            excluded_year += 1
        else:
            year_counts[(record.year, record.direction)] += 1
        if record.parish_canonical is None:
            excluded_parish += 1
        else:
            parish_counts[(record.parish_canonical, record.direction)] += 1

    lines = ["year,direction,count"]
    for (year, direction), count in sorted(year_counts.items()):
        lines.append(f"{year},{direction},{count}")
    (out / "aggregate_years.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["parish,direction,count"]
    for (name, direction), count in sorted(parish_counts.items()):
        lines.append(f"{name},{direction},{count}")
    (out / "aggregate_parishes.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary = {
        "records": len(records),
        "excluded_unknown_direction": excluded_direction,
        "excluded_missing_year": excluded_year,
        "excluded_unmatched_parish": excluded_parish,
    }
    with open(out / "aggregate_summary.json", "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2)
        handle.write("\n")
    return EXIT_OK


def cmd_synth(
    out_dir: str,
    cfg: SynthConfig,
    books: int = 1,
    openings_per_book: int = 10,
    records_format: str = "jsonl",
) -> int:
    """Generate a synthetic corpus with ground truth under ``out_dir``."""
    fixtures = []
    for b in range(books):
        book_cfg = dc_replace(cfg, seed=cfg.seed + b)
        fixtures.append(generate_book(book_cfg, openings_per_book, book_id=f"book{cfg.seed + b:04d}"))
    paths = write_corpus(fixtures, out_dir, records_format=records_format)
    log.info("synthetic corpus written: %s", paths)
    return EXIT_OK


def cmd_report(eval_dir: str, stream=None) -> int:
    """Render the eval CSV reports as aligned text tables."""
    stream = stream or sys.stdout
    directory = Path(eval_dir)
    names = (
        "detection_metrics.csv",
        "cell_classification.csv",
        "text_metrics.csv",
        "year_metrics.csv",
        "skew_angles.csv",
    )
    found = False
    for name in names:
        path = directory / name
        if not path.exists():
            continue
        found = True
        rows = [line.split(",") for line in path.read_text(encoding="utf-8").splitlines()]
        widths = [max(len(row[i]) if i < len(row) else 0 for row in rows) for i in range(max(map(len, rows)))]
        print(f"== {name}", file=stream)
        for row in rows:
            print(
                "  ".join((row[i] if i < len(row) else "").ljust(widths[i]) for i in range(len(widths))),
                file=stream,
            )
        print("", file=stream)
    if not found:
        log.error("no report CSVs found under %s", eval_dir)
        return EXIT_FATAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eps-row", dest="eps_row", default=None)
    parser.add_argument("--eps-col", dest="eps_col", default=None)
    parser.add_argument("--min-pts", dest="min_pts", type=int, default=None)
    parser.add_argument(
        "--merge-split-tables",
        dest="merge_split_tables",
        action=argparse.BooleanOptionalAction,
        default=None,
    )


def _add_chrono_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--min-year", dest="min_year", type=int, default=None)
    parser.add_argument("--max-year", dest="max_year", type=int, default=None)
    parser.add_argument("--max-jump", dest="max_jump", type=int, default=None)
    parser.add_argument("--corrector-endpoint", dest="corrector_endpoint", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="migrec",
        description="Reconstruct structured migration records from detection documents.",
    )
    parser.add_argument("--config", default=None, help="key = value configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run the extraction pipeline over a document directory")
    p.add_argument("in_dir")
    p.add_argument("out_path")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--schema-dir", dest="schema_dir", default=None)
    p.add_argument("--gazetteer", default=None)
    p.add_argument("--max-rel-dist", dest="max_rel_dist", type=float, default=None)
    p.add_argument("--book-directions", dest="book_directions", default=None)
    p.add_argument("--summary", dest="summary_path", default=None)
    _add_grid_flags(p)
    _add_chrono_flags(p)

    p = sub.add_parser("eval", help="score predicted documents against gold documents")
    p.add_argument("pred_dir")
    p.add_argument("gold_dir")
    p.add_argument("out_dir")
    _add_grid_flags(p)
    _add_chrono_flags(p)

    p = sub.add_parser("synth", help="generate a synthetic fixture corpus")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--books", type=int, default=1)
    p.add_argument("--count", type=int, default=10, help="openings per book")
    p.add_argument("--rows", type=int, nargs=2, default=(6, 12))
    p.add_argument("--cols", type=int, nargs=2, default=(5, 5))
    p.add_argument("--skew", type=float, nargs=2, default=(0.0, 0.0))
    p.add_argument("--cell-dropout-prob", type=float, default=0.0)
    p.add_argument("--char-noise-prob", type=float, default=0.0)
    p.add_argument("--year-corruption-prob", type=float, default=0.0)
    p.add_argument("--border-jitter", type=float, default=0.0)
    p.add_argument("--layout", choices=("handdrawn", "preprinted"), default="preprinted")
    p.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")

    p = sub.add_parser("years", help="resolve page years for every book in a directory")
    p.add_argument("in_dir")
    p.add_argument("out_path")
    _add_chrono_flags(p)

    p = sub.add_parser("normalize", help="normalize parishes, drop duplicates, filter records")
    p.add_argument("records_path")
    p.add_argument("out_path")
    p.add_argument("--gazetteer", required=True)
    p.add_argument("--max-rel-dist", dest="max_rel_dist", type=float, default=None)
    p.add_argument("--dup-threshold", dest="dup_threshold", type=float, default=None)
    p.add_argument(
        "--drop-duplicates",
        dest="drop_duplicates",
        action=argparse.BooleanOptionalAction,
        default=True,
    )
    p.add_argument("--usable-only", dest="usable_only", action="store_true")
    p.add_argument("--report", dest="report_path", default=None)

    p = sub.add_parser("aggregate", help="per-year and per-parish counts from a records file")
    p.add_argument("records_path")
    p.add_argument("out_dir")
    p.add_argument("--parish", default=None)

    p = sub.add_parser("report", help="render eval CSV reports as text tables")
    p.add_argument("eval_dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    config = _read_config_file(args.config) if args.config else {}

    try:
        if args.command == "extract":
            corrector = None
            endpoint = _setting(args, config, "corrector_endpoint", None, str)
            if endpoint:
                corrector = HttpCorrectorClient(endpoint)
            options = PipelineOptions(
                grid=_grid_config(args, config),
                chrono=_chrono_config(args, config),
                schemas=_load_schemas(_setting(args, config, "schema_dir", None, str)),
                gazetteer=(
                    Gazetteer.from_file(g)
                    if (g := _setting(args, config, "gazetteer", None, str))
                    else None
                ),
                max_rel_dist=_setting(args, config, "max_rel_dist", 0.25, float),
                book_directions=_load_book_directions(
                    _setting(args, config, "book_directions", None, str)
                ),
                corrector=corrector,
            )
            workers = _setting(args, config, "workers", os.cpu_count() or 1, int)
            fmt = _setting(args, config, "format", "csv", str)
            return cmd_extract(
                args.in_dir,
                args.out_path,
                options,
                workers=workers,
                records_format=fmt,
                summary_path=args.summary_path,
            )
        if args.command == "eval":
            return cmd_eval(
                args.pred_dir,
                args.gold_dir,
                args.out_dir,
                grid_cfg=_grid_config(args, config),
                chrono_cfg=_chrono_config(args, config),
            )
        if args.command == "synth":
            cfg = SynthConfig(
                seed=args.seed,
                rows=tuple(args.rows),
                cols=tuple(args.cols),
                skew_degrees=tuple(args.skew),
                cell_dropout_prob=args.cell_dropout_prob,
                char_noise_prob=args.char_noise_prob,
                year_corruption_prob=args.year_corruption_prob,
                border_jitter=args.border_jitter,
                layout=args.layout,
            )
            return cmd_synth(
                args.out_dir,
                cfg,
                books=args.books,
                openings_per_book=args.count,
                records_format=args.format,
            )
        if args.command == "years":
            corrector = None
            endpoint = _setting(args, config, "corrector_endpoint", None, str)
            if endpoint:
                corrector = HttpCorrectorClient(endpoint)
            return cmd_years(
                args.in_dir, args.out_path, _chrono_config(args, config), corrector=corrector
            )
        if args.command == "normalize":
            return cmd_normalize(
                args.records_path,
                args.out_path,
                args.gazetteer,
                max_rel_dist=_setting(args, config, "max_rel_dist", 0.25, float),
                dup_threshold=_setting(args, config, "dup_threshold", 0.9, float),
                drop_duplicates=args.drop_duplicates,
                usable_only=args.usable_only,
                report_path=args.report_path,
            )
        if args.command == "aggregate":
            return cmd_aggregate(args.records_path, args.out_dir, parish=args.parish)
        if args.command == "report":
            return cmd_report(args.eval_dir)
    except Exception as exc:
        log.error("fatal: %s", exc)
        return EXIT_FATAL
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
