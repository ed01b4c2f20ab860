"""Reading provenance evidence out of Public MeSH Notes and Previous Indexing notes.

PMN and PI fields are free text written for people. The patterns handled here
cover the common shapes; anything else, and any term that does not match a
record name exactly, goes to a review file for manual confirmation.
"""

from __future__ import annotations

import csv
import logging
import re
import string
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass

import numpy as np
from rapidfuzz import process
from rapidfuzz.distance import Levenshtein

from .model import MeshVersion, OverrideEntry, OverrideKind, normalize_term

log = logging.getLogger(__name__)

REVIEW_HEADER = ["descriptor_id", "kind", "query_term", "rank", "candidate_id", "candidate_term", "score"]
OVERRIDE_HEADER = ["descriptor_id", "kind", "resolved_ids"]
TOP_K = 5


class OverrideError(Exception):
    pass


@dataclass(frozen=True)
class PmnExtraction:
    scr_term: str
    matched: bool
    raw_sentence: str
    indexed_under: str = ""


@dataclass(frozen=True)
class PiEntry:
    descriptor_term: str
    start_year: int | None
    end_year: int | None
    raw: str

    def __post_init__(self):
        if self.start_year is not None and self.end_year is not None and self.start_year > self.end_year:
            raise ValueError(f"PI period runs backwards: {self.raw!r}")


@dataclass(frozen=True)
class ReviewItem:
    descriptor_id: str
    kind: OverrideKind
    query_term: str
    candidates: tuple[tuple[str, str, float], ...]


# -- resolution outcomes --------------------------------------------------------

@dataclass(frozen=True)
class Exact:
    ids: tuple[str, ...]

    @property
    def id(self) -> str:
        return self.ids[0]


@dataclass(frozen=True)
class Suggestions:
    item: ReviewItem


@dataclass(frozen=True)
class Unresolved:
    reason: str = ""


Resolution = Exact | Suggestions | Unresolved


# -- PMN ----------------------------------------------------------------------

_INDEXED_UNDER = re.compile(r"^(?P<x>.*?)\s+was\s+indexed\s+under\s+(?P<y>.+)$", re.IGNORECASE | re.DOTALL)
# "2019", "2019(1990)", "2019 (1990-2000)" and similar leading history stamps
_YEAR_STAMP = re.compile(r"^\s*(?:\d{4}(?:\s*\(\s*\d{4}(?:\s*-\s*\d{4})?\s*\))?\s*[:,.\-]?\s*)+")
_EDGE_QUOTES = "\"'`‘’“” "


def parse_pmn(pmn_text: str | None) -> PmnExtraction | None:
    """First ``X was indexed under Y`` sentence of a PMN, if any."""
    if not pmn_text:
        return None
    for sentence in pmn_text.split(";"):
        m = _INDEXED_UNDER.match(sentence.strip())
        if not m:
            continue
        x = _YEAR_STAMP.sub("", m.group("x")).strip(_EDGE_QUOTES)
        if not x:
            continue
        return PmnExtraction(x, True, sentence.strip(), m.group("y").strip())
    return None


# -- PI -----------------------------------------------------------------------

_PERIOD = re.compile(r"^(?P<term>.*?)\s*\((?P<period>[^()]*)\)\s*$", re.DOTALL)
_RANGE = re.compile(r"^(\d{4})\s*-\s*(\d{4})$")
_SINGLE = re.compile(r"^(\d{4})$")
_CONJ = re.compile(r"\s+and\s+|\s*&\s*", re.IGNORECASE)


def _split_period(note: str, warnings: list[str]) -> tuple[str, int | None, int | None]:
    m = _PERIOD.match(note.strip())
    if not m:
        return note.strip(), None, None
    term, period = m.group("term").strip(), m.group("period").strip()
    if r := _RANGE.match(period):
        start, end = int(r.group(1)), int(r.group(2))
        if start > end:
            warnings.append(f"PI period runs backwards in {note!r}; years dropped")
            return term, None, None
        return term, start, end
    if s := _SINGLE.match(period):
        return term, int(s.group(1)), int(s.group(1))
    if re.search(r"\d", period) or not period:
        warnings.append(f"unparseable PI period in {note!r}; years dropped")
        return term, None, None
    # parentheses that are part of the name, e.g. "Foo (Bar)"
    return note.strip(), None, None


def pi_term_fragments(term: str) -> list[str]:
    return [f.strip() for f in _CONJ.split(term) if f.strip()]


def parse_pi(
    pi_notes: Iterable[str],
    warnings: list[str] | None = None,
    keep_whole: Callable[[str], bool] | None = None,
) -> list[PiEntry]:
    """One entry per descriptor term named in the notes.

    Notes joining several terms with "and" or "&" yield one entry per term,
    all sharing the note's period, unless ``keep_whole(term)`` says the joined
    text is itself a name (e.g. "Head and Neck Neoplasms").
    """
    warnings = [] if warnings is None else warnings
    out = []
    for note in pi_notes:
        if not note or not note.strip():
            continue
        term, start, end = _split_period(note, warnings)
        if keep_whole is not None and keep_whole(term):
            fragments = [term]
        else:
            fragments = pi_term_fragments(term) or [term]
        for frag in fragments:
            out.append(PiEntry(frag, start, end, note))
    return out


def select_current_pi_hosts(entries: Iterable[PiEntry], version0_year: int) -> list[str]:
    """Terms whose (effective) end year is the latest; undated notes count as current."""
    entries = list(entries)
    if not entries:
        return []
    effective = [(e.end_year if e.end_year is not None else version0_year, e) for e in entries]
    latest = max(y for y, _ in effective)
    return list(dict.fromkeys(e.descriptor_term for y, e in effective if y == latest))


# -- similarity ----------------------------------------------------------------

_PUNCT = re.compile(f"[{re.escape(string.punctuation)}]")


def similarity_key(text: str) -> str:
    return " ".join(_PUNCT.sub(" ", text.lower()).split())


def string_similarity(a: str, b: str) -> float:
    """1 - Levenshtein distance / longer length, on punctuation-free lowercase text."""
    a, b = similarity_key(a), similarity_key(b)
    if not a and not b:
        return 1.0
    return float(Levenshtein.normalized_similarity(a, b))


class _TermTable:
    """Flat list of (record id, term) for candidate ranking, built once per version."""

    def __init__(self, pairs: Iterable[tuple[str, str]]):
        pairs = sorted(set(pairs))
        self.ids = [p[0] for p in pairs]
        self.terms = [p[1] for p in pairs]
        self.keys = [similarity_key(t) for t in self.terms]
        self.by_key: dict[str, set[str]] = {}
        for uid, key in zip(self.ids, self.keys):
            self.by_key.setdefault(key, set()).add(uid)

    def rank(self, queries: list[str], k: int = TOP_K) -> list[tuple[str, str, float]]:
        if not self.keys:
            return []
        qkeys = [similarity_key(q) for q in queries]
        scores = process.cdist(qkeys, self.keys, scorer=Levenshtein.normalized_similarity,
                               dtype=np.float64, workers=1)
        for i, q in enumerate(qkeys):
            if not q:
                # two empty keys are identical
                scores[i] = [1.0 if not key else 0.0 for key in self.keys]
        best = scores.max(axis=0)
        # rows are sorted by (id, term), so a stable sort breaks score ties that way
        order = np.argsort(-best, kind="stable")
        out: list[tuple[str, str, float]] = []
        seen: set[str] = set()
        for j in order:
            if self.ids[j] in seen:
                continue
            seen.add(self.ids[j])
            out.append((self.ids[j], self.terms[j], round(float(best[j]), 6)))
            if len(out) == k:
                break
        return out


def _table(version: MeshVersion, kind: str) -> _TermTable:
    cache = version.__dict__.setdefault("_term_tables", {})
    if kind not in cache:
        if kind == "scr":
            pairs = ((s.scr_id, t) for s in version.scrs.values() for t in {s.name, *s.all_terms()})
        else:
            pairs = ((d.descriptor_id, t) for d in version.descriptors.values() for t in {d.name, *d.all_terms()})
        cache[kind] = _TermTable(pairs)
    return cache[kind]


def _resolve(term, index, table_kind, version0, descriptor_id, kind, extra_queries) -> Resolution:
    hits = index.get(normalize_term(term), frozenset())
    if len(hits) == 1:
        return Exact((next(iter(hits)),))
    table = _table(version0, table_kind)
    if not table.ids:
        return Unresolved("no candidates in version 0")
    # similarity 1.0 (case and punctuation aside) to a single record is accepted
    key = similarity_key(term)
    same = table.by_key.get(key, set()) if key else set()
    if len(same) == 1:
        return Exact((next(iter(same)),))
    candidates = table.rank([term, *extra_queries])
    return Suggestions(ReviewItem(descriptor_id, kind, term, tuple(candidates)))


def resolve_term_to_scr(term: str, version0: MeshVersion, new_descriptor_name: str = "",
                        descriptor_id: str = "") -> Resolution:
    extra = [new_descriptor_name] if new_descriptor_name else []
    return _resolve(term, version0.index_name_to_scr, "scr", version0, descriptor_id,
                    OverrideKind.PMN_SCR, extra)


def resolve_term_to_descriptor(term: str, version0: MeshVersion, descriptor_id: str = "") -> Resolution:
    # "Phenols/adverse effects": a descriptor/qualifier pair names the descriptor
    head = term.split("/", 1)[0].strip()
    if head != term:
        hits = version0.index_name_to_descriptor.get(normalize_term(term), frozenset())
        if not hits:
            hits = version0.index_name_to_descriptor.get(normalize_term(head), frozenset())
        if len(hits) == 1:
            return Exact((next(iter(hits)),))
    return _resolve(term, version0.index_name_to_descriptor, "descriptor", version0, descriptor_id,
                    OverrideKind.PI_HOST, [])


# -- overrides and review files -------------------------------------------------

def check_override(entry: OverrideEntry, version0: MeshVersion) -> None:
    pool = version0.scrs if entry.kind is OverrideKind.PMN_SCR else version0.descriptors
    bad = [i for i in entry.resolved_ids if i not in pool]
    if bad:
        where = f"row {entry.row}" if entry.row is not None else "override"
        what = "SCR" if entry.kind is OverrideKind.PMN_SCR else "descriptor"
        raise OverrideError(
            f"{where} ({entry.descriptor_id},{entry.kind.value},{';'.join(entry.resolved_ids)}): "
            f"{what} id(s) {', '.join(bad)} not in MeSH {version0.year}"
        )


def apply_overrides(
    resolutions: Mapping[tuple[str, OverrideKind], Resolution],
    overrides: Iterable[OverrideEntry],
    version0: MeshVersion | None = None,
) -> dict[tuple[str, OverrideKind], Resolution]:
    """Replace pending resolutions with manually confirmed ids.

    Keys are ``(descriptor_id, kind)``. With ``version0`` given, every
    confirmed id must exist there.
    """
    out = dict(resolutions)
    for entry in overrides:
        if version0 is not None:
            check_override(entry, version0)
        key = (entry.descriptor_id, entry.kind)
        out[key] = Exact(entry.resolved_ids) if entry.resolved_ids else Unresolved("cleared by override")
    return out


def read_overrides(path) -> dict[tuple[str, OverrideKind], OverrideEntry]:
    out: dict[tuple[str, OverrideKind], OverrideEntry] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != OVERRIDE_HEADER:
            raise OverrideError(f"{path}: header must be {','.join(OVERRIDE_HEADER)}")
        for n, row in enumerate(reader, start=2):
            try:
                kind = OverrideKind(row["kind"].strip())
            except ValueError:
                raise OverrideError(f"{path}: row {n}: unknown kind {row['kind']!r}") from None
            uid = row["descriptor_id"].strip()
            if not uid:
                raise OverrideError(f"{path}: row {n}: empty descriptor_id")
            ids = tuple(i.strip() for i in (row["resolved_ids"] or "").split(";") if i.strip())
            if (uid, kind) in out:
                raise OverrideError(f"{path}: row {n}: duplicate override for {uid} {kind.value}")
            out[(uid, kind)] = OverrideEntry(uid, kind, ids, row=n)
    return out


def write_overrides(path, entries: Iterable[OverrideEntry]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OVERRIDE_HEADER)
        for e in entries:
            w.writerow([e.descriptor_id, e.kind.value, ";".join(e.resolved_ids)])


def write_review_file(path, items: Iterable[ReviewItem]) -> int:
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REVIEW_HEADER)
        for item in sorted(items, key=lambda i: (i.descriptor_id, i.kind.value, i.query_term)):
            for rank, (cid, cterm, score) in enumerate(item.candidates, 1):
                w.writerow([item.descriptor_id, item.kind.value, item.query_term, rank, cid, cterm,
                            f"{score:.6f}"])
                rows += 1
    return rows


def read_review_file(path) -> list[ReviewItem]:
    grouped: dict[tuple[str, str, str], list] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["descriptor_id"], row["kind"], row["query_term"])
            grouped.setdefault(key, []).append(
                (int(row["rank"]), row["candidate_id"], row["candidate_term"], float(row["score"])))
    return [
        ReviewItem(uid, OverrideKind(kind), q, tuple((c, t, s) for _, c, t, s in sorted(rows)))
        for (uid, kind, q), rows in grouped.items()
    ]
