"""Per-year annotation CSVs and aggregate provenance statistics."""

from __future__ import annotations

import csv
import statistics
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

from .model import (
    Coverage,
    Distance,
    HostRelation,
    NewDescriptorRecord,
    PreviousHost,
    ProvenanceCategory,
    ProvenanceCode,
    ProvenanceType,
    RelationType,
    TreeNumber,
)

YEAR_HEADER = [
    "descriptor_id", "name", "intro_year", "category", "host_ids", "host_names",
    "host_coverage", "codes", "tree_numbers", "mesh_categories",
]
HOSTS_HEADER = ["descriptor_id", "intro_year", "host_id", "relation_type", "ancestor_gap", "distance", "type"]
FLAGS_HEADER = ["descriptor_id", "intro_year", "flag"]
STATS_FILES = (
    "category_by_year.csv", "type_by_year.csv", "code_crosstab.csv",
    "mesh_category_by_year.csv", "summary.csv",
)
CATEGORIES = tuple(ProvenanceCategory)
TYPES = tuple(ProvenanceType)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _join(items: Iterable[str]) -> str:
    return ";".join(items)


def _split(text: str) -> list[str]:
    return text.split(";") if text else []


def year_csv_path(out_dir, year: int) -> Path:
    return Path(out_dir) / f"{year}.csv"


def record_row(r: NewDescriptorRecord) -> list[str]:
    return [
        r.descriptor_id,
        r.name,
        str(r.intro_year),
        str(int(r.category)),
        _join(h.descriptor_id for h in r.hosts),
        _join(h.name for h in r.hosts),
        _join(h.coverage.value for h in r.hosts),
        _join(str(c) for c in sorted(r.codes)),
        _join(str(t) for t in r.tree_numbers),
        _join(sorted(r.mesh_category_letters)),
    ]


def write_year_csv(year: int, records: Iterable[NewDescriptorRecord], path) -> Path:
    """Write one year's records, sorted by descriptor id. ``path`` may be a directory."""
    path = Path(path)
    if path.is_dir():
        path = year_csv_path(path, year)
    records = sorted(records, key=lambda r: r.descriptor_id)
    for r in records:
        if r.intro_year != year:
            raise ValueError(f"{r.descriptor_id} was introduced in {r.intro_year}, not {year}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(YEAR_HEADER)
        w.writerows(record_row(r) for r in records)
    return path


def read_year_csv(path) -> list[NewDescriptorRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != YEAR_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            rec = dict(zip(YEAR_HEADER, row))
            hosts = tuple(
                PreviousHost(i, n, Coverage(c))
                for i, n, c in zip(_split(rec["host_ids"]), _split(rec["host_names"]),
                                   _split(rec["host_coverage"]), strict=True)
            )
            out.append(NewDescriptorRecord(
                descriptor_id=rec["descriptor_id"],
                name=rec["name"],
                intro_year=int(rec["intro_year"]),
                category=ProvenanceCategory(int(rec["category"])),
                hosts=hosts,
                codes=frozenset(ProvenanceCode.parse(c) for c in _split(rec["codes"])),
                tree_numbers=tuple(TreeNumber.parse(t) for t in _split(rec["tree_numbers"])),
                mesh_category_letters=frozenset(_split(rec["mesh_categories"])),
            ))
    return out


def _ordered(records: Iterable[NewDescriptorRecord]) -> list[NewDescriptorRecord]:
    return sorted(records, key=lambda r: (r.intro_year, r.descriptor_id))


def _check_header(path, reader, expected) -> None:
    header = next(reader, None)
    if header != expected:
        raise ValueError(f"{path}: unexpected header {header}")


def write_hosts_csv(records: Iterable[NewDescriptorRecord], path) -> Path:
    """One row per Previous Host with its relation in the reference release."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(HOSTS_HEADER)
        for r in _ordered(records):
            for h in r.relations:
                w.writerow([r.descriptor_id, r.intro_year, h.host_id, h.relation.value,
                            "" if h.gap is None else h.gap, str(h.distance), int(h.ptype)])
    return path


def read_hosts_csv(path) -> dict[str, tuple[HostRelation, ...]]:
    out: dict[str, list[HostRelation]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        _check_header(path, reader, HOSTS_HEADER)
        for uid, _, host, rel, gap, dist, ptype in reader:
            out.setdefault(uid, []).append(HostRelation(
                host, RelationType(rel), int(gap) if gap else None, Distance.parse(dist), ProvenanceType(int(ptype))))
    return {uid: tuple(rs) for uid, rs in out.items()}


def write_flags_csv(records: Iterable[NewDescriptorRecord], path) -> Path:
    """One row per flag raised while classifying (unresolved notes and similar)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(FLAGS_HEADER)
        for r in _ordered(records):
            w.writerows([r.descriptor_id, r.intro_year, f] for f in r.flags)
    return path


def read_flags_csv(path) -> dict[str, tuple[str, ...]]:
    out: dict[str, list[str]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        _check_header(path, reader, FLAGS_HEADER)
        for uid, _, flag in reader:
            out.setdefault(uid, []).append(flag)
    return {uid: tuple(fs) for uid, fs in out.items()}


@dataclass(frozen=True)
class StatsBundle:
    """Counts behind the provenance tables and annual frequency plots.

    Category counts take each record once. Type counts and crosstab cells take
    a record once per distinct type it carries, so a category's crosstab row
    can sum to more than its total.
    """

    years: tuple[int, ...]
    per_year_category_counts: Mapping[tuple[int, ProvenanceCategory], int]
    per_year_type_counts: Mapping[tuple[int, ProvenanceType], int]
    code_crosstab: Mapping[tuple[ProvenanceCategory, ProvenanceType], int]
    per_year_mesh_category_counts: Mapping[tuple[int, str], int]
    baseline_descriptor_count: int
    multi_code_records: int
    multi_code_population: int

    @property
    def record_count(self) -> int:
        return sum(self.per_year_category_counts.values())

    def records_in(self, year: int) -> int:
        return sum(self.per_year_category_counts[(year, c)] for c in CATEGORIES)

    @property
    def category_totals(self) -> dict[ProvenanceCategory, int]:
        return {c: sum(self.per_year_category_counts[(y, c)] for y in self.years) for c in CATEGORIES}

    @property
    def type_totals(self) -> dict[ProvenanceType, int]:
        return {t: sum(self.per_year_type_counts[(y, t)] for y in self.years) for t in TYPES}

    @property
    def mesh_letters(self) -> tuple[str, ...]:
        return tuple(sorted({letter for _, letter in self.per_year_mesh_category_counts}))

    @property
    def multi_code_fraction(self) -> float:
        if not self.multi_code_population:
            return 0.0
        return self.multi_code_records / self.multi_code_population

    @property
    def extension_ratio(self) -> float:
        if not self.baseline_descriptor_count:
            return 0.0
        return self.record_count / self.baseline_descriptor_count


def aggregate(records: Iterable[NewDescriptorRecord], baseline_count: int = 0, years=None) -> StatsBundle:
    """Fold annotated records into a :class:`StatsBundle`.

    ``baseline_count`` is the number of descriptors in the release before the
    first introduction year; it may also be given as that release itself.
    ``years`` fixes the year columns; by default the years seen in the records.
    """
    if hasattr(baseline_count, "descriptors"):
        baseline_count = len(baseline_count.descriptors)
    records = list(records)
    years = tuple(sorted(set(years) if years is not None else {r.intro_year for r in records}))
    by_cat = {(y, c): 0 for y in years for c in CATEGORIES}
    by_type = {(y, t): 0 for y in years for t in TYPES}
    cross = {(c, t): 0 for c in CATEGORIES for t in TYPES}
    letters: dict[tuple[int, str], int] = {}
    multi = population = 0
    for r in records:
        if r.intro_year not in years:
            raise ValueError(f"{r.descriptor_id}: year {r.intro_year} outside {years}")
        by_cat[(r.intro_year, r.category)] += 1
        for t in r.ptypes:
            by_type[(r.intro_year, t)] += 1
        for code in r.codes:
            cross[(code.category, code.ptype)] += 1
        for letter in r.mesh_category_letters:
            letters[(r.intro_year, letter)] = letters.get((r.intro_year, letter), 0) + 1
        if r.category in (ProvenanceCategory.OLD_SCR, ProvenanceCategory.NEW_PI_CONCEPT):
            population += 1
            multi += len(r.codes) >= 2
    all_letters = sorted({letter for _, letter in letters})
    dense_letters = {(y, letter): letters.get((y, letter), 0) for y in years for letter in all_letters}
    return StatsBundle(years, by_cat, by_type, cross, dense_letters, int(baseline_count), multi, population)


def _spread(values: list[int]) -> tuple[float, float, float]:
    if not values:
        return 0.0, 0.0, 0.0
    mean = statistics.fmean(values)
    pop = statistics.pstdev(values)
    sample = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, pop, sample


def summary_rows(bundle: StatsBundle) -> list[tuple[str, str]]:
    rows: list[tuple[str, object]] = [
        ("years", ";".join(map(str, bundle.years))),
        ("total_new_descriptors", bundle.record_count),
        ("baseline_descriptors", bundle.baseline_descriptor_count),
        ("extension_ratio", bundle.extension_ratio),
        ("multi_code_records", bundle.multi_code_records),
        ("multi_code_population", bundle.multi_code_population),
        ("multi_code_fraction", bundle.multi_code_fraction),
    ]
    for y in bundle.years:
        rows.append((f"records_{y}", bundle.records_in(y)))
    for label, keys, table in (
        ("category", CATEGORIES, bundle.per_year_category_counts),
        ("type", TYPES, bundle.per_year_type_counts),
    ):
        for k in keys:
            per_year = [table[(y, k)] for y in bundle.years]
            mean, pop, sample = _spread(per_year)
            rows += [
                (f"{label}_{int(k)}_total", sum(per_year)),
                (f"{label}_{int(k)}_mean_per_year", mean),
                (f"{label}_{int(k)}_sd_population", pop),
                (f"{label}_{int(k)}_sd_sample", sample),
            ]
    return [(k, repr(v) if isinstance(v, float) else str(v)) for k, v in rows]


def write_stats(bundle: StatsBundle, output_dir) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    years = [str(y) for y in bundle.years]
    paths = []

    def table(name, first, keys, label, cell):
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = _writer(fh)
            w.writerow([first, *years])
            for k in keys:
                w.writerow([label(k), *(cell(y, k) for y in bundle.years)])
        paths.append(path)

    table("category_by_year.csv", "category", CATEGORIES, lambda c: int(c),
          lambda y, c: bundle.per_year_category_counts[(y, c)])
    table("type_by_year.csv", "type", TYPES, lambda t: int(t),
          lambda y, t: bundle.per_year_type_counts[(y, t)])

    path = out / "code_crosstab.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["category", *(str(int(t)) for t in TYPES)])
        for c in CATEGORIES:
            w.writerow([int(c), *(bundle.code_crosstab[(c, t)] for t in TYPES)])
    paths.append(path)

    table("mesh_category_by_year.csv", "mesh_category", bundle.mesh_letters, lambda m: m,
          lambda y, m: bundle.per_year_mesh_category_counts[(y, m)])

    path = out / "summary.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["statistic", "value"])
        w.writerows(summary_rows(bundle))
    paths.append(path)
    return paths


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def read_stats(output_dir) -> StatsBundle:
    out = Path(output_dir)
    summary = dict(_read_table(out / "summary.csv")[1])
    years = tuple(int(y) for y in _split(summary["years"]))

    def per_year(name, convert):
        header, rows = _read_table(out / name)
        if tuple(int(y) for y in header[1:]) != years:
            raise ValueError(f"{name}: year columns disagree with summary.csv")
        return {(y, convert(row[0])): int(v) for row in rows for y, v in zip(years, row[1:])}

    header, rows = _read_table(out / "code_crosstab.csv")
    types = [ProvenanceType(int(t)) for t in header[1:]]
    cross = {(ProvenanceCategory(int(row[0])), t): int(v) for row in rows for t, v in zip(types, row[1:])}
    return StatsBundle(
        years=years,
        per_year_category_counts=per_year("category_by_year.csv", lambda k: ProvenanceCategory(int(k))),
        per_year_type_counts=per_year("type_by_year.csv", lambda k: ProvenanceType(int(k))),
        code_crosstab=cross,
        per_year_mesh_category_counts=per_year("mesh_category_by_year.csv", str),
        baseline_descriptor_count=int(summary["baseline_descriptors"]),
        multi_code_records=int(summary["multi_code_records"]),
        multi_code_population=int(summary["multi_code_population"]),
    )
