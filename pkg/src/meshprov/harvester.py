"""Multi-year loading and detection of new descriptors."""

from __future__ import annotations

import gzip
import json
import logging
import os
from collections import OrderedDict
from collections.abc import Callable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .model import Concept, ConceptRelation, Descriptor, MeshVersion, ScrRecord, Term, TreeNumber
from .parser import ParseReport, load_version

log = logging.getLogger(__name__)

CACHE_FORMAT = 2


class MissingVersionError(Exception):
    def __init__(self, years):
        self.years = sorted(years)
        super().__init__("missing MeSH release for year(s): " + ", ".join(map(str, self.years)))


@dataclass(frozen=True)
class StudyWindow:
    first_year: int
    last_year: int
    reference_year: int

    def __post_init__(self):
        if self.first_year > self.last_year:
            raise ValueError(f"first_year {self.first_year} is after last_year {self.last_year}")
        if self.last_year > self.reference_year:
            raise ValueError(f"last_year {self.last_year} is after reference_year {self.reference_year}")

    @property
    def baseline_year(self) -> int:
        return self.first_year - 1

    @property
    def intro_years(self) -> range:
        return range(self.first_year, self.last_year + 1)

    @property
    def required_years(self) -> range:
        return range(self.baseline_year, self.reference_year + 1)


def identify_new_descriptors(previous: MeshVersion, current: MeshVersion) -> set[str]:
    if previous.year + 1 != current.year:
        log.warning("comparing non-consecutive releases %s and %s", previous.year, current.year)
    return set(current.descriptors) - set(previous.descriptors)


def retained_new_descriptors(window: StudyWindow, versions: Mapping[int, MeshVersion]) -> dict[int, set[str]]:
    """New descriptors per introduction year that survive into the reference release.

    A descriptor that disappears and comes back is kept once, under its first
    introduction inside the window.
    """
    missing = [y for y in window.required_years if y not in versions]
    if missing:
        raise MissingVersionError(missing)
    reference = set(versions[window.reference_year].descriptors)
    seen: dict[str, int] = {}
    out: dict[int, set[str]] = {}
    for year in window.intro_years:
        fresh = identify_new_descriptors(versions[year - 1], versions[year]) & reference
        for uid in sorted(fresh & seen.keys()):
            log.warning("%s reintroduced in %s; kept under %s", uid, year, seen[uid])
        fresh -= seen.keys()
        for uid in fresh:
            seen[uid] = year
        out[year] = fresh
    return out


# -- configuration ------------------------------------------------------------

_INT_KEYS = {"first_year", "last_year", "reference_year", "jobs"}


def read_config(path) -> dict[str, object]:
    """Plain ``key = value`` file; ``#`` starts a comment."""
    conf: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{n}: expected key=value")
            key, value = key.strip(), value.strip()
            if key in _INT_KEYS:
                try:
                    conf[key] = int(value)
                except ValueError:
                    raise ValueError(f"{path}:{n}: {key} must be an integer") from None
            else:
                conf[key] = value
    return conf


# -- release files and cache -------------------------------------------------------

@dataclass(frozen=True)
class ReleaseFiles:
    data_dir: Path
    descriptor_template: str = "desc{year}.xml"
    scr_template: str = "supp{year}.xml"

    def descriptor_path(self, year: int) -> Path:
        return self.data_dir / self.descriptor_template.format(year=year)

    def scr_path(self, year: int) -> Path:
        return self.data_dir / self.scr_template.format(year=year)

    def missing(self, years) -> list[int]:
        return [y for y in years if not self.descriptor_path(y).exists() or not self.scr_path(y).exists()]


def _fingerprint(*paths: Path) -> list[list]:
    out = []
    for p in paths:
        st = p.stat()
        out.append([p.name, st.st_size, st.st_mtime_ns])
    return out


def _concept_json(c: Concept) -> list:
    return [c.concept_id, c.relation_to_preferred.value, [[t.text, t.is_preferred] for t in c.terms]]


def _concept_from_json(row) -> Concept:
    cid, rel, terms = row
    return Concept(cid, tuple(Term(t, p) for t, p in terms), ConceptRelation(rel))


def version_to_json(version: MeshVersion) -> dict:
    return {
        "year": version.year,
        "descriptors": [
            [d.descriptor_id, d.name, [_concept_json(c) for c in d.concepts],
             [str(t) for t in d.tree_numbers], d.pmn_text, list(d.pi_notes)]
            for d in version.descriptors.values()
        ],
        "scrs": [
            [s.scr_id, s.name, [_concept_json(c) for c in s.concepts], list(s.mapped_descriptor_ids)]
            for s in version.scrs.values()
        ],
    }


def version_from_json(data: dict) -> MeshVersion:
    descriptors = []
    for uid, name, concepts, trees, pmn, pi in data["descriptors"]:
        cs = [_concept_from_json(c) for c in concepts]
        descriptors.append(Descriptor(uid, name, cs[0], tuple(cs[1:]),
                                      tuple(TreeNumber.parse(t) for t in trees), pmn, tuple(pi)))
    scrs = []
    for uid, name, concepts, mapped in data["scrs"]:
        cs = [_concept_from_json(c) for c in concepts]
        scrs.append(ScrRecord(uid, cs[0], tuple(cs[1:]), tuple(mapped), name=name))
    return MeshVersion.build(data["year"], descriptors, scrs)


def _cache_path(cache_dir: Path, year: int) -> Path:
    return cache_dir / f"mesh{year}.json.gz"


def _header_path(cache_dir: Path, year: int) -> Path:
    return cache_dir / f"mesh{year}.json"


def _read_header(cache_dir: Path, year: int, fingerprint) -> ParseReport | None:
    """Parse report of a cached release whose source files are unchanged, else None."""
    path = _header_path(cache_dir, year)
    if not path.exists() or not _cache_path(cache_dir, year).exists():
        return None
    try:
        head = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        log.warning("unreadable cache header %s; reparsing", path)
        return None
    if head.get("format") != CACHE_FORMAT or head.get("source") != fingerprint:
        return None
    r = head["report"]
    return ParseReport(year, r["descriptors"], r["scrs"], [tuple(x) for x in r["skipped"]], list(r["warnings"]))


def _read_version(cache_dir: Path, year: int) -> MeshVersion | None:
    path = _cache_path(cache_dir, year)
    try:
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            return version_from_json(json.load(fh))
    except (OSError, ValueError):
        log.warning("unreadable cache %s; reparsing", path)
        return None


def _write_cache(cache_dir: Path, version: MeshVersion, report: ParseReport, fingerprint) -> None:
    cache_dir.mkdir(parents=True, exist_ok=True)
    year = version.year
    # the header is written last and marks the entry complete
    _header_path(cache_dir, year).unlink(missing_ok=True)
    tmp = _cache_path(cache_dir, year).with_suffix(".tmp")
    # mtime=0 keeps the gzip header, hence the cache file, reproducible
    with open(tmp, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as fh:
        fh.write(json.dumps(version_to_json(version), separators=(",", ":")).encode("utf-8"))
    os.replace(tmp, _cache_path(cache_dir, year))
    head = {
        "format": CACHE_FORMAT,
        "source": fingerprint,
        "report": {"descriptors": report.descriptor_count, "scrs": report.scr_count,
                   "skipped": [list(x) for x in report.skipped_records], "warnings": report.warnings},
    }
    tmp = _header_path(cache_dir, year).with_suffix(".tmp")
    tmp.write_text(json.dumps(head, separators=(",", ":")), encoding="utf-8")
    os.replace(tmp, _header_path(cache_dir, year))


def _load_one(files: ReleaseFiles, year: int, cache_dir: Path | None, keep: bool = True):
    """(version or None, report, cache hit). With ``keep`` false a valid cache is not read."""
    dpath, spath = files.descriptor_path(year), files.scr_path(year)
    fingerprint = _fingerprint(dpath, spath)
    if cache_dir is not None:
        report = _read_header(cache_dir, year, fingerprint)
        if report is not None:
            if not keep:
                return None, report, True
            version = _read_version(cache_dir, year)
            if version is not None:
                return version, report, True
    version, report = load_version(year, dpath, spath)
    if cache_dir is not None:
        _write_cache(cache_dir, version, report, fingerprint)
    return (version if keep else None), report, False


def _run(files, years, cache_dir, jobs, keep, on_loaded):
    years = list(years)
    missing = files.missing(years)
    if missing:
        raise MissingVersionError(missing)
    if jobs > 1 and len(years) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {y: pool.submit(_load_one, files, y, cache_dir, keep) for y in years}
            results = {y: f.result() for y, f in futures.items()}
    else:
        results = {y: _load_one(files, y, cache_dir, keep) for y in years}
    for y in years:
        _, report, cached = results[y]
        log.info("loaded %s: %d descriptors, %d SCRs%s", y, report.descriptor_count,
                 report.scr_count, " (cache hit)" if cached else "")
        if on_loaded is not None:
            on_loaded(y, report, cached)
    return results


def load_versions(
    files: ReleaseFiles,
    years,
    cache_dir: Path | None = None,
    jobs: int = 1,
    on_loaded: Callable[[int, ParseReport, bool], None] | None = None,
) -> tuple[dict[int, MeshVersion], dict[int, ParseReport]]:
    """Load every year in ``years``, reading the cache when it matches the source files."""
    results = _run(files, years, cache_dir, jobs, True, on_loaded)
    return {y: r[0] for y, r in results.items()}, {y: r[1] for y, r in results.items()}


def harvest(
    files: ReleaseFiles,
    years,
    cache_dir: Path,
    jobs: int = 1,
    on_loaded: Callable[[int, ParseReport, bool], None] | None = None,
) -> dict[int, ParseReport]:
    """Parse every year into the cache without keeping the releases in memory."""
    return {y: r[1] for y, r in _run(files, years, cache_dir, jobs, False, on_loaded).items()}


class LazyVersions(Mapping):
    """``{year: MeshVersion}`` read from the cache on first use.

    Only the ``pinned`` years and the ``keep`` most recently used others stay
    in memory, so a long run of releases never has to fit at once.
    """

    def __init__(self, files: ReleaseFiles, years, cache_dir: Path, keep: int = 2, pinned=()):
        self.files = files
        self.cache_dir = cache_dir
        self.keep = keep
        self._years = sorted(years)
        missing = files.missing(self._years)
        if missing:
            raise MissingVersionError(missing)
        self._pinned = set(pinned)
        self._held: OrderedDict[int, MeshVersion] = OrderedDict()

    def __getitem__(self, year: int) -> MeshVersion:
        if year not in self._years:
            raise KeyError(year)
        if year in self._held:
            self._held.move_to_end(year)
            return self._held[year]
        version, _, _ = _load_one(self.files, year, self.cache_dir)
        self._held[year] = version
        loose = [y for y in self._held if y not in self._pinned]
        for y in loose[: max(0, len(loose) - self.keep)]:
            del self._held[y]
        return version

    def __contains__(self, year) -> bool:
        return year in self._years

    def __iter__(self):
        return iter(self._years)

    def __len__(self) -> int:
        return len(self._years)
