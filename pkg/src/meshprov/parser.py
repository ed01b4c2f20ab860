"""Streaming reader (and writer) for the NLM MeSH XML descriptor and SCR files.

The reader is built on pyexpat and keeps only the record under construction in
memory. Elements are matched by their path inside the record, so element order
and unknown optional elements in a given year's DTD do not matter. Text is
buffered only for the handful of paths the provenance analysis needs.
"""

from __future__ import annotations

import gzip
import logging
import os
from collections import deque
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import BinaryIO
from xml.parsers import expat
from xml.sax.saxutils import escape, quoteattr

from .model import (
    Concept,
    ConceptRelation,
    Descriptor,
    IntegrityError,
    MeshVersion,
    ScrRecord,
    Term,
    TreeNumber,
)

log = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 16


class MeshParseError(Exception):
    """Malformed XML. ``byte_offset`` points at the failure in the input."""

    def __init__(self, message: str, byte_offset: int | None = None, source: str | None = None):
        self.byte_offset = byte_offset
        self.source = source
        where = f" at byte offset {byte_offset}" if byte_offset is not None else ""
        src = f"{source}: " if source else ""
        super().__init__(f"{src}{message}{where}")


@dataclass
class ParseReport:
    year: int
    descriptor_count: int = 0
    scr_count: int = 0
    skipped_records: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [
            f"INFO year={self.year} descriptors={self.descriptor_count} scrs={self.scr_count} "
            f"skipped={len(self.skipped_records)}"
        ]
        out += [f"WARNING skipped {rid}: {reason}" for rid, reason in self.skipped_records]
        out += [f"WARNING {w}" for w in self.warnings]
        return out


_RELATION_NAMES = {
    "NRW": ConceptRelation.NARROWER,
    "BRD": ConceptRelation.BROADER,
    "REL": ConceptRelation.RELATED,
}
_INVERSE = {
    ConceptRelation.NARROWER: ConceptRelation.BROADER,
    ConceptRelation.BROADER: ConceptRelation.NARROWER,
    ConceptRelation.RELATED: ConceptRelation.RELATED,
}

_CONCEPT = ("ConceptList", "Concept")
_TERM = (*_CONCEPT, "TermList", "Term")
_RELATION = (*_CONCEPT, "ConceptRelationList", "ConceptRelation")

# record-relative paths whose text is captured
_COMMON_TEXT = {
    (*_CONCEPT, "ConceptUI"),
    (*_CONCEPT, "ConceptName", "String"),
    (*_TERM, "String"),
    (*_RELATION, "Concept1UI"),
    (*_RELATION, "Concept2UI"),
}
_DESCRIPTOR_TEXT = _COMMON_TEXT | {
    ("DescriptorUI",),
    ("DescriptorName", "String"),
    ("PublicMeSHNote",),
    ("PreviousIndexingList", "PreviousIndexing"),
    ("TreeNumberList", "TreeNumber"),
}
_MAPPED_UI = ("HeadingMappedToList", "HeadingMappedTo", "DescriptorReferredTo", "DescriptorUI")
_SCR_TEXT = _COMMON_TEXT | {
    ("SupplementalRecordUI",),
    ("SupplementalRecordName", "String"),
    _MAPPED_UI,
}


def _norm_space(text: str) -> str:
    return " ".join(text.split())


class _RawConcept:
    __slots__ = ("preferred", "cid", "name", "terms", "relations")

    def __init__(self, preferred: bool):
        self.preferred = preferred
        self.cid = ""
        self.name = ""
        self.terms: list[list] = []  # [text, preferred_flag]
        self.relations: list[list[str]] = []  # [name, c1, c2]


class _RawRecord:
    def __init__(self):
        self.uid = ""
        self.name = ""
        self.pmn: str | None = None
        self.pi: list[str] = []
        self.trees: list[str] = []
        self.mapped: list[str] = []
        self.concepts: list[_RawConcept] = []


class _RecordHandler:
    """Expat callbacks that assemble one record at a time into ``self.done``."""

    def __init__(self, record_tag: str, text_paths: set[tuple[str, ...]]):
        self.record_tag = record_tag
        self.text_paths = text_paths
        self.path: list[str] = []  # relative to the current record
        self.in_record = False
        self.rec: _RawRecord | None = None
        self.buf: list[str] | None = None
        self.done: deque[_RawRecord] = deque()

    def start(self, name, attrs):
        if not self.in_record:
            if name == self.record_tag:
                self.in_record = True
                self.rec = _RawRecord()
                self.path = []
            return
        self.path.append(name)
        path = tuple(self.path)
        rec = self.rec
        if path == _CONCEPT:
            rec.concepts.append(_RawConcept(attrs.get("PreferredConceptYN") == "Y"))
        elif path == _TERM:
            rec.concepts[-1].terms.append(["", attrs.get("ConceptPreferredTermYN") == "Y"])
        elif path == _RELATION:
            rec.concepts[-1].relations.append([attrs.get("RelationName", ""), "", ""])
        if path in self.text_paths:
            self.buf = []

    def chars(self, data):
        if self.buf is not None:
            self.buf.append(data)

    def end(self, name):
        if not self.in_record:
            return
        if not self.path:
            # closing the record element itself
            self.in_record = False
            self.done.append(self.rec)
            self.rec = None
            return
        path = tuple(self.path)
        if self.buf is not None:
            self._store(path, _norm_space("".join(self.buf)))
            self.buf = None
        self.path.pop()

    def _store(self, path, text):
        rec = self.rec
        last = path[-1]
        if path == ("DescriptorUI",) or path == ("SupplementalRecordUI",):
            rec.uid = text
        elif path in (("DescriptorName", "String"), ("SupplementalRecordName", "String")):
            rec.name = text
        elif path == ("PublicMeSHNote",):
            rec.pmn = text or None
        elif path == ("PreviousIndexingList", "PreviousIndexing"):
            if text:
                rec.pi.append(text)
        elif path == ("TreeNumberList", "TreeNumber"):
            if text:
                rec.trees.append(text)
        elif path == _MAPPED_UI:
            if text:
                rec.mapped.append(text.lstrip("*"))
        elif last == "ConceptUI":
            rec.concepts[-1].cid = text
        elif path == (*_CONCEPT, "ConceptName", "String"):
            rec.concepts[-1].name = text
        elif path == (*_TERM, "String"):
            rec.concepts[-1].terms[-1][0] = text
        elif last == "Concept1UI":
            rec.concepts[-1].relations[-1][1] = text
        elif last == "Concept2UI":
            rec.concepts[-1].relations[-1][2] = text


def _iter_raw(stream: BinaryIO, record_tag: str, text_paths, source: str | None) -> Iterator[_RawRecord]:
    handler = _RecordHandler(record_tag, text_paths)
    parser = expat.ParserCreate()
    parser.buffer_text = False
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.chars
    try:
        while True:
            chunk = stream.read(CHUNK_SIZE)
            if not chunk:
                parser.Parse(b"", True)
                break
            parser.Parse(chunk, False)
            while handler.done:
                yield handler.done.popleft()
    except expat.ExpatError as exc:
        raise MeshParseError(expat.errors.messages[exc.code], parser.ErrorByteIndex, source) from None
    while handler.done:
        yield handler.done.popleft()


def _build_concept(raw: _RawConcept, relation: ConceptRelation, owner: str, warnings: list[str]) -> Concept | None:
    terms = [(text, pref) for text, pref in raw.terms if text]
    if not terms and raw.name:
        terms = [(raw.name, True)]
    if not terms:
        warnings.append(f"{owner}: concept {raw.cid or '?'} has no terms; dropped")
        return None
    n_pref = sum(pref for _, pref in terms)
    if n_pref != 1:
        # fall back to the concept name, else the first term
        chosen = next((i for i, (t, _) in enumerate(terms) if t == raw.name), 0)
        terms = [(t, i == chosen) for i, (t, _) in enumerate(terms)]
        warnings.append(f"{owner}: concept {raw.cid} has {n_pref} preferred terms; using {terms[chosen][0]!r}")
    return Concept(raw.cid, tuple(Term(t, p) for t, p in terms), relation)


def _build_concepts(rec: _RawRecord, warnings: list[str]) -> tuple[Concept, list[Concept]] | str:
    """Returns (preferred, subordinates) or a skip reason."""
    prefs = [c for c in rec.concepts if c.preferred]
    if not prefs:
        return "no concept with PreferredConceptYN='Y'"
    if len(prefs) > 1:
        return "more than one preferred concept"
    pref_raw = prefs[0]
    if not pref_raw.cid:
        return "preferred concept lacks ConceptUI"

    relations: dict[str, ConceptRelation] = {}
    for c in rec.concepts:
        for rname, c1, c2 in c.relations:
            rel = _RELATION_NAMES.get(rname)
            if rel is None:
                continue
            if c1 == pref_raw.cid and c2 != pref_raw.cid:
                relations.setdefault(c2, rel)
            elif c2 == pref_raw.cid and c1 != pref_raw.cid:
                relations.setdefault(c1, _INVERSE[rel])

    preferred = _build_concept(pref_raw, ConceptRelation.PREFERRED, rec.uid, warnings)
    if preferred is None:
        return "preferred concept has no terms"
    subs: list[Concept] = []
    seen = {preferred.concept_id}
    for raw in rec.concepts:
        if raw is pref_raw:
            continue
        if not raw.cid or raw.cid in seen:
            warnings.append(f"{rec.uid}: subordinate concept with missing or repeated id {raw.cid!r}; dropped")
            continue
        c = _build_concept(raw, relations.get(raw.cid, ConceptRelation.NARROWER), rec.uid, warnings)
        if c is not None:
            seen.add(c.concept_id)
            subs.append(c)
    return preferred, subs


def _to_descriptor(rec: _RawRecord, warnings: list[str]) -> Descriptor | str:
    if not rec.uid:
        return "missing DescriptorUI"
    built = _build_concepts(rec, warnings)
    if isinstance(built, str):
        return built
    preferred, subs = built
    trees = []
    for t in rec.trees:
        try:
            trees.append(TreeNumber.parse(t))
        except ValueError as exc:
            warnings.append(f"{rec.uid}: {exc}; tree number ignored")
    return Descriptor(
        descriptor_id=rec.uid,
        name=rec.name or preferred.preferred_term,
        preferred_concept=preferred,
        subordinate_concepts=tuple(subs),
        tree_numbers=tuple(trees),
        pmn_text=rec.pmn,
        pi_notes=tuple(rec.pi),
    )


def _to_scr(rec: _RawRecord, warnings: list[str]) -> ScrRecord | str:
    if not rec.uid:
        return "missing SupplementalRecordUI"
    if not rec.mapped:
        return "not mapped to any descriptor"
    built = _build_concepts(rec, warnings)
    if isinstance(built, str):
        return built
    preferred, subs = built
    mapped = tuple(dict.fromkeys(rec.mapped))
    return ScrRecord(rec.uid, preferred, tuple(subs), mapped, name=rec.name or preferred.preferred_term)


def _iter_records(stream, tag, paths, convert, source, warnings, skipped):
    for n, raw in enumerate(_iter_raw(stream, tag, paths, source)):
        out = convert(raw, warnings)
        if isinstance(out, str):
            rid = raw.uid or f"<record #{n + 1}>"
            skipped.append((rid, out))
            warnings.append(f"skipped {rid}: {out}")
            continue
        yield out


def iter_descriptors(stream: BinaryIO, warnings: list[str] | None = None,
                     skipped: list | None = None, source: str | None = None) -> Iterator[Descriptor]:
    """Yield descriptors one by one while reading ``stream`` in chunks."""
    warnings = [] if warnings is None else warnings
    skipped = [] if skipped is None else skipped
    yield from _iter_records(stream, "DescriptorRecord", _DESCRIPTOR_TEXT, _to_descriptor, source, warnings, skipped)


def iter_scrs(stream: BinaryIO, warnings: list[str] | None = None,
              skipped: list | None = None, source: str | None = None) -> Iterator[ScrRecord]:
    warnings = [] if warnings is None else warnings
    skipped = [] if skipped is None else skipped
    yield from _iter_records(stream, "SupplementalRecord", _SCR_TEXT, _to_scr, source, warnings, skipped)


def parse_descriptor_file(stream: BinaryIO) -> tuple[list[Descriptor], list[str]]:
    warnings: list[str] = []
    return list(iter_descriptors(stream, warnings)), warnings


def parse_scr_file(stream: BinaryIO) -> tuple[list[ScrRecord], list[str]]:
    warnings: list[str] = []
    return list(iter_scrs(stream, warnings)), warnings


def open_release_file(path: str | os.PathLike) -> BinaryIO:
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_version(year: int, descriptor_path, scr_path) -> tuple[MeshVersion, ParseReport]:
    """Parse one release. Raises MeshParseError or IntegrityError."""
    report = ParseReport(year)
    with open_release_file(descriptor_path) as fh:
        descriptors = list(iter_descriptors(fh, report.warnings, report.skipped_records, os.fspath(descriptor_path)))
    if scr_path is not None and os.path.exists(scr_path):
        with open_release_file(scr_path) as fh:
            scrs = list(iter_scrs(fh, report.warnings, report.skipped_records, os.fspath(scr_path)))
    else:
        if scr_path is not None:
            raise FileNotFoundError(scr_path)
        scrs = []
    try:
        version = MeshVersion.build(year, descriptors, scrs)
    except IntegrityError as exc:
        raise IntegrityError(f"{descriptor_path}: {exc}") from None
    report.warnings.extend(version.warnings)
    report.descriptor_count = len(version.descriptors)
    report.scr_count = len(version.scrs)
    for line in report.lines()[1:]:
        log.debug(line)
    return version, report


# -- writing ---------------------------------------------------------------

_REL_CODES = {v: k for k, v in _RELATION_NAMES.items()}


def _concept_xml(c: Concept, preferred_id: str, subordinates=()) -> list[str]:
    out = [f'  <Concept PreferredConceptYN="{"Y" if c.concept_id == preferred_id else "N"}">',
           f"   <ConceptUI>{escape(c.concept_id)}</ConceptUI>",
           f"   <ConceptName><String>{escape(c.preferred_term)}</String></ConceptName>"]
    if subordinates:
        out.append("   <ConceptRelationList>")
        for s in subordinates:
            out.append(f"    <ConceptRelation RelationName={quoteattr(_REL_CODES[s.relation_to_preferred])}>")
            out.append(f"     <Concept1UI>{escape(preferred_id)}</Concept1UI>")
            out.append(f"     <Concept2UI>{escape(s.concept_id)}</Concept2UI>")
            out.append("    </ConceptRelation>")
        out.append("   </ConceptRelationList>")
    out.append("   <TermList>")
    for t in c.terms:
        out.append(f'    <Term ConceptPreferredTermYN="{"Y" if t.is_preferred else "N"}">'
                   f"<String>{escape(t.text)}</String></Term>")
    out += ["   </TermList>", "  </Concept>"]
    return out


def _concept_list_xml(preferred: Concept, subordinates) -> list[str]:
    out = [" <ConceptList>"]
    out += _concept_xml(preferred, preferred.concept_id, subordinates)
    for s in subordinates:
        out += _concept_xml(s, preferred.concept_id)
    out.append(" </ConceptList>")
    return out


def descriptors_to_xml(descriptors) -> str:
    out = ['<?xml version="1.0" encoding="UTF-8"?>', "<DescriptorRecordSet>"]
    for d in descriptors:
        out.append("<DescriptorRecord>")
        out.append(f" <DescriptorUI>{escape(d.descriptor_id)}</DescriptorUI>")
        out.append(f" <DescriptorName><String>{escape(d.name)}</String></DescriptorName>")
        if d.pmn_text:
            out.append(f" <PublicMeSHNote>{escape(d.pmn_text)}</PublicMeSHNote>")
        if d.pi_notes:
            out.append(" <PreviousIndexingList>")
            out += [f"  <PreviousIndexing>{escape(p)}</PreviousIndexing>" for p in d.pi_notes]
            out.append(" </PreviousIndexingList>")
        if d.tree_numbers:
            out.append(" <TreeNumberList>")
            out += [f"  <TreeNumber>{t}</TreeNumber>" for t in d.tree_numbers]
            out.append(" </TreeNumberList>")
        out += _concept_list_xml(d.preferred_concept, d.subordinate_concepts)
        out.append("</DescriptorRecord>")
    out.append("</DescriptorRecordSet>")
    return "\n".join(out) + "\n"


def scrs_to_xml(scrs) -> str:
    out = ['<?xml version="1.0" encoding="UTF-8"?>', "<SupplementalRecordSet>"]
    for s in scrs:
        out.append("<SupplementalRecord>")
        out.append(f" <SupplementalRecordUI>{escape(s.scr_id)}</SupplementalRecordUI>")
        out.append(f" <SupplementalRecordName><String>{escape(s.name)}</String></SupplementalRecordName>")
        out.append(" <HeadingMappedToList>")
        for uid in s.mapped_descriptor_ids:
            out.append("  <HeadingMappedTo><DescriptorReferredTo>"
                       f"<DescriptorUI>*{escape(uid)}</DescriptorUI>"
                       "</DescriptorReferredTo></HeadingMappedTo>")
        out.append(" </HeadingMappedToList>")
        out += _concept_list_xml(s.preferred_concept, s.subordinate_concepts)
        out.append("</SupplementalRecord>")
    out.append("</SupplementalRecordSet>")
    return "\n".join(out) + "\n"


def write_version_files(version: MeshVersion, descriptor_path, scr_path) -> None:
    with open(descriptor_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(descriptors_to_xml(version.descriptors.values()))
    with open(scr_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(scrs_to_xml(version.scrs.values()))
