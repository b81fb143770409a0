"""Parish name normalization against the gazetteer.

Parishes carry Finnish and Swedish names plus abbreviations and historical
spelling noise.  Matching goes exact -> variant -> abbreviation expansion
-> bounded fuzzy match; ambiguous candidates are reported, never guessed.
Whole-book duplicates (the same book photographed twice) are detected from
record fingerprints, and records missing key fields are filtered with a
per-reason tally.
"""

from migrec import MigrationRecord, detect_duplicate_books, filter_usable, match_parish
from migrec.synth import sample_gazetteer

gazetteer = sample_gazetteer()
for raw in ("Helsinki", "Helsingfors", "H:fors", "Rautalampj", "Tammerffors", "Pietari"):
    result = match_parish(raw, gazetteer)
    print(f"{raw!r:14} -> {result.canonical!r:12} method={result.method:9} score={result.score:.2f}")


def record(book, i, year, parish):
    return MigrationRecord(
        book_id=book, opening_id=f"{book}_op{i:03d}", page_side="left", direction="in",
        year=year, fields={"ref": str(i), "parish": parish},
        parish_raw=parish, parish_canonical=parish,
    )


original = [record("book_a", i, 1880 + i % 4, "Turku") for i in range(30)]
copy = [record("book_b", i, 1880 + i % 4, "Turku") for i in range(30)]
unrelated = [record("book_c", i, 1900, "Oulu") for i in range(30)]
pairs = detect_duplicate_books({"book_a": original, "book_b": copy, "book_c": unrelated})
for pair in pairs:
    print(f"\nduplicate books: {pair.book_a} / {pair.book_b} "
          f"(jaccard {pair.jaccard:.2f}, drop {pair.remove})")

broken = [
    record("book_c", 90, None, "Oulu"),
    MigrationRecord("book_c", "x", "left", "unknown", 1900),
]
usable, tally = filter_usable(unrelated + broken)
print(f"\nusable records: {len(usable)} of {len(unrelated) + len(broken)}; rejections: "
      + ", ".join(f"{k}={v}" for k, v in tally.items() if v))
