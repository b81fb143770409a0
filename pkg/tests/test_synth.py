import filecmp

import pytest

from migrec.chrono import ChronoConfig, infer_sequence
from migrec.geometry import apply_point, deskew_transforms, edge_angle_from_vertical
from migrec.gridrec import GridConfig, complete_grid
from migrec.interchange import validate_document
from migrec.normalize import detect_duplicate_books
from migrec.synth import (
    SynthConfig,
    SynthesisError,
    apply_perturbations,
    generate_book,
    generate_opening,
    sample_gazetteer,
    write_corpus,
)


def test_same_seed_reproduces_fixture():
    cfg = SynthConfig(seed=5, skew_degrees=(-3, 3), cell_dropout_prob=0.05, char_noise_prob=0.02)
    assert generate_opening(cfg) == generate_opening(cfg)


def test_same_seed_byte_identical_corpus(tmp_path):
    cfg = SynthConfig(seed=9, skew_degrees=(-2, 2), border_jitter=1.0)
    for name in ("one", "two"):
        write_corpus([generate_book(cfg, 3)], tmp_path / name)
    comparison = filecmp.dircmp(tmp_path / "one", tmp_path / "two")

    def assert_same(cmp):
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
        for sub in cmp.subdirs.values():
            assert_same(sub)

    assert_same(comparison)


def test_zero_perturbation_observed_equals_gold():
    fixture = generate_opening(SynthConfig(seed=1))
    assert fixture.document == fixture.gold_document
    assert fixture.perturbations.keypoints == fixture.gold_keypoints
    assert fixture.perturbations.dropped == ()


def test_documents_validate():
    for seed in range(5):
        fixture = generate_opening(
            SynthConfig(seed=seed, skew_degrees=(-4, 4), cell_dropout_prob=0.08, border_jitter=1.0)
        )
        validate_document(fixture.document)
        validate_document(fixture.gold_document)


def test_dropout_reproducible_and_bounded():
    cfg = SynthConfig(seed=2, cell_dropout_prob=0.1)
    first = generate_opening(cfg)
    second = generate_opening(cfg)
    assert first.perturbations.dropped == second.perturbations.dropped
    assert first.perturbations.dropped
    # every row and column keeps at least two cells per table
    for t, gold_table in enumerate(first.gold_tables):
        grid = gold_table.grid
        dropped_here = {(r, c) for tt, r, c in first.perturbations.dropped if tt == t}
        for r in range(grid.n_rows):
            assert sum(1 for c in range(grid.n_cols) if (r, c) not in dropped_here) >= 2
        for c in range(grid.n_cols):
            assert sum(1 for r in range(grid.n_rows) if (r, c) not in dropped_here) >= 2


def test_excessive_dropout_raises():
    with pytest.raises(SynthesisError):
        generate_opening(SynthConfig(seed=3, rows=(2, 2), cell_dropout_prob=0.9))


def test_perturbation_log_replays_exactly():
    cfg = SynthConfig(
        seed=11,
        skew_degrees=(-4, 4),
        cell_dropout_prob=0.08,
        char_noise_prob=0.05,
        year_corruption_prob=0.3,
        border_jitter=1.5,
    )
    fixture = generate_opening(cfg)
    replayed = apply_perturbations(
        fixture.gold_document,
        fixture.gold_keypoints,
        fixture.perturbations,
        tuple(gt.side for gt in fixture.gold_tables),
        tuple(gt.grid for gt in fixture.gold_tables),
    )
    assert replayed == fixture.document


def test_skewed_opening_deskews_below_microdegree():
    fixture = generate_opening(SynthConfig(seed=4, skew_degrees=(2.5, 3.0)))
    kp = fixture.document.keypoints
    assert kp != fixture.gold_keypoints
    left, right = deskew_transforms(kp, 2400, 1600)
    edges = (
        (left, kp.a, kp.d),
        (left, kp.b, kp.e),
        (right, kp.c, kp.f),
    )
    for h, top, bottom in edges:
        angle = edge_angle_from_vertical(apply_point(h, top), apply_point(h, bottom))
        assert abs(angle) < 1e-6


def test_gold_grid_matches_reconstruction():
    fixture = generate_opening(SynthConfig(seed=6))
    for gold_table, table in zip(fixture.gold_tables, fixture.document.tables):
        grid = complete_grid(table.box, table.cells, GridConfig())
        assert (grid.n_rows, grid.n_cols) == (gold_table.grid.n_rows, gold_table.grid.n_cols)


def test_generate_book_years_monotone():
    book = generate_book(SynthConfig(seed=8), 12)
    years = [year for _, _, year in book.page_years]
    assert all(a <= b <= a + 1 for a, b in zip(years, years[1:]))
    assert len(book.openings) == 12


def test_clean_book_years_recovered_by_inference():
    book = generate_book(SynthConfig(seed=10), 10)
    from migrec.pipeline import PipelineOptions, process_opening

    options = PipelineOptions()
    pages = []
    for fixture in book.openings:
        result = process_opening(fixture.document, options)
        pages.extend(result.pages[side] for side in ("left", "right"))
    pages.sort(key=lambda p: (p.opening_id, p.side))
    sequence = infer_sequence(pages, ChronoConfig())
    resolved = {(p.opening_id, p.side): p.year for p in sequence.pages}
    for opening_id, side, year in book.page_years:
        assert resolved[(opening_id, side)] == year


def test_duplicated_book_fixture_is_flagged():
    cfg = SynthConfig(seed=13)
    original = generate_book(cfg, 5, book_id="book_a")
    duplicate = generate_book(cfg, 5, book_id="book_b")
    books = {
        "book_a": [r for fx in original.openings for r in fx.gold_records],
        "book_b": [r for fx in duplicate.openings for r in fx.gold_records],
    }
    pairs = detect_duplicate_books(books)
    assert len(pairs) == 1
    assert pairs[0].remove == "book_b"


def test_gazetteer_fixture_loads():
    gazetteer = sample_gazetteer()
    assert len(gazetteer.entries) == 50
    assert gazetteer.forms["helsingfors"] == "Helsinki"
