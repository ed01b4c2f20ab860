"""Domain types for MeSH releases and provenance annotations.

Everything here is an immutable value object. A :class:`MeshVersion` is built
once per release through :meth:`MeshVersion.build`, which also derives the
concept and name lookup indexes used by the provenance engine.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType


class IntegrityError(Exception):
    """A release violates a structural rule of the thesaurus."""


_FIRST_SEGMENT = re.compile(r"^[A-Z][0-9]+$")
_DIGITS = re.compile(r"^[0-9]+$")


@dataclass(frozen=True, order=True)
class TreeNumber:
    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("tree number needs at least one segment")
        if not _FIRST_SEGMENT.match(self.segments[0]):
            raise ValueError(f"bad leading tree segment {self.segments[0]!r}")
        for seg in self.segments[1:]:
            if not _DIGITS.match(seg):
                raise ValueError(f"bad tree segment {seg!r} in {'.'.join(self.segments)}")

    @classmethod
    def parse(cls, text: str) -> TreeNumber:
        return cls(tuple(text.strip().split(".")))

    def __str__(self) -> str:
        return ".".join(self.segments)

    @property
    def depth(self) -> int:
        return len(self.segments)

    @property
    def letter(self) -> str:
        return self.segments[0][0]

    def parent(self) -> TreeNumber | None:
        if len(self.segments) == 1:
            return None
        return TreeNumber(self.segments[:-1])


def is_tree_prefix(shorter: TreeNumber, longer: TreeNumber) -> bool:
    """True when ``shorter`` is a proper prefix of ``longer``, segment-wise."""
    n = len(shorter.segments)
    return n < len(longer.segments) and longer.segments[:n] == shorter.segments


_WS = re.compile(r"\s+")
_QUOTES = "\"'`‘’“”"


def normalize_term(text: str) -> str:
    """Lookup key for term text: lowercase, trimmed, single spaces, no outer quotes."""
    text = _WS.sub(" ", text).strip()
    text = text.strip(_QUOTES).strip()
    return text.lower()


@dataclass(frozen=True)
class Term:
    text: str
    is_preferred: bool = False

    def __post_init__(self):
        clean = _WS.sub(" ", self.text).strip()
        if not clean:
            raise ValueError("empty term text")
        object.__setattr__(self, "text", clean)


class ConceptRelation(str, enum.Enum):
    PREFERRED = "preferred"
    NARROWER = "narrower"
    BROADER = "broader"
    RELATED = "related"


@dataclass(frozen=True)
class Concept:
    concept_id: str
    terms: tuple[Term, ...]
    relation_to_preferred: ConceptRelation = ConceptRelation.PREFERRED

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        n_pref = sum(t.is_preferred for t in self.terms)
        if n_pref != 1:
            raise ValueError(
                f"concept {self.concept_id} has {n_pref} preferred terms, expected 1"
            )

    @property
    def preferred_term(self) -> str:
        return next(t.text for t in self.terms if t.is_preferred)


def _check_concepts(owner: str, preferred: Concept, subordinates: tuple[Concept, ...]):
    if preferred.relation_to_preferred is not ConceptRelation.PREFERRED:
        raise ValueError(f"{owner}: preferred concept must have relation 'preferred'")
    seen = {preferred.concept_id}
    for c in subordinates:
        if c.relation_to_preferred is ConceptRelation.PREFERRED:
            raise ValueError(f"{owner}: subordinate concept {c.concept_id} marked preferred")
        if c.concept_id in seen:
            raise ValueError(f"{owner}: duplicate concept id {c.concept_id}")
        seen.add(c.concept_id)


@dataclass(frozen=True)
class Descriptor:
    descriptor_id: str
    name: str
    preferred_concept: Concept
    subordinate_concepts: tuple[Concept, ...] = ()
    tree_numbers: tuple[TreeNumber, ...] = ()
    pmn_text: str | None = None
    pi_notes: tuple[str, ...] = ()

    def __post_init__(self):
        for attr in ("subordinate_concepts", "tree_numbers", "pi_notes"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        _check_concepts(self.descriptor_id, self.preferred_concept, self.subordinate_concepts)

    @property
    def concepts(self) -> tuple[Concept, ...]:
        return (self.preferred_concept, *self.subordinate_concepts)

    def all_terms(self) -> list[str]:
        return [t.text for c in self.concepts for t in c.terms]


def mesh_category_letters(d: Descriptor) -> frozenset[str]:
    return frozenset(t.letter for t in d.tree_numbers)


@dataclass(frozen=True)
class ScrRecord:
    scr_id: str
    preferred_concept: Concept
    subordinate_concepts: tuple[Concept, ...] = ()
    mapped_descriptor_ids: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "subordinate_concepts", tuple(self.subordinate_concepts))
        object.__setattr__(self, "mapped_descriptor_ids", tuple(self.mapped_descriptor_ids))
        if not self.mapped_descriptor_ids:
            raise ValueError(f"SCR {self.scr_id} is not mapped to any descriptor")
        if not self.name:
            object.__setattr__(self, "name", self.preferred_concept.preferred_term)
        _check_concepts(self.scr_id, self.preferred_concept, self.subordinate_concepts)

    @property
    def concepts(self) -> tuple[Concept, ...]:
        return (self.preferred_concept, *self.subordinate_concepts)

    def all_terms(self) -> list[str]:
        return [t.text for c in self.concepts for t in c.terms]


def _freeze_index(index: dict[str, set[str]]) -> Mapping[str, frozenset[str]]:
    return MappingProxyType({k: frozenset(v) for k, v in index.items()})


@dataclass(frozen=True, eq=False)
class MeshVersion:
    """One annual release. Build with :meth:`build`; do not mutate."""

    year: int
    descriptors: Mapping[str, Descriptor]
    scrs: Mapping[str, ScrRecord]
    index_concept_to_descriptor: Mapping[str, str]
    index_concept_to_scr: Mapping[str, str]
    index_name_to_descriptor: Mapping[str, frozenset[str]]
    index_name_to_scr: Mapping[str, frozenset[str]]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def build(
        cls,
        year: int,
        descriptors: Iterable[Descriptor],
        scrs: Iterable[ScrRecord] = (),
    ) -> MeshVersion:
        warnings: list[str] = []
        desc_map: dict[str, Descriptor] = {}
        c2d: dict[str, str] = {}
        n2d: dict[str, set[str]] = {}
        for d in descriptors:
            if d.descriptor_id in desc_map:
                raise IntegrityError(f"{year}: duplicate descriptor id {d.descriptor_id}")
            desc_map[d.descriptor_id] = d
            for c in d.concepts:
                other = c2d.get(c.concept_id)
                if other is not None:
                    raise IntegrityError(
                        f"{year}: concept {c.concept_id} belongs to both "
                        f"{other} and {d.descriptor_id}"
                    )
                c2d[c.concept_id] = d.descriptor_id
            for text in {d.name, *d.all_terms()}:
                n2d.setdefault(normalize_term(text), set()).add(d.descriptor_id)

        scr_map: dict[str, ScrRecord] = {}
        c2s: dict[str, str] = {}
        n2s: dict[str, set[str]] = {}
        for s in scrs:
            if s.scr_id in scr_map:
                raise IntegrityError(f"{year}: duplicate SCR id {s.scr_id}")
            scr_map[s.scr_id] = s
            for c in s.concepts:
                if c.concept_id in c2s:
                    # keep the first owner; real releases occasionally carry such slips
                    warnings.append(
                        f"{year}: concept {c.concept_id} in SCRs {c2s[c.concept_id]} "
                        f"and {s.scr_id}; keeping the first"
                    )
                    continue
                c2s[c.concept_id] = s.scr_id
            for text in {s.name, *s.all_terms()}:
                n2s.setdefault(normalize_term(text), set()).add(s.scr_id)

        return cls(
            year=year,
            descriptors=MappingProxyType(desc_map),
            scrs=MappingProxyType(scr_map),
            index_concept_to_descriptor=MappingProxyType(c2d),
            index_concept_to_scr=MappingProxyType(c2s),
            index_name_to_descriptor=_freeze_index(n2d),
            index_name_to_scr=_freeze_index(n2s),
            warnings=tuple(warnings),
        )

    def __reduce__(self):
        return (_rebuild_version, (self.year, list(self.descriptors.values()), list(self.scrs.values())))

    def __eq__(self, other):
        if not isinstance(other, MeshVersion):
            return NotImplemented
        return (
            self.year == other.year
            and dict(self.descriptors) == dict(other.descriptors)
            and dict(self.scrs) == dict(other.scrs)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"MeshVersion(year={self.year}, descriptors={len(self.descriptors)}, scrs={len(self.scrs)})"

    @cached_property
    def tree_index(self) -> Mapping[TreeNumber, str]:
        """Tree number -> owning descriptor id."""
        return MappingProxyType(
            {t: d.descriptor_id for d in self.descriptors.values() for t in d.tree_numbers}
        )

    @cached_property
    def adjacency(self) -> Mapping[str, frozenset[str]]:
        """Undirected parent/child links between descriptors, derived from tree numbers."""
        links: dict[str, set[str]] = {uid: set() for uid in self.descriptors}
        index = self.tree_index
        for t, uid in index.items():
            parent = t.parent()
            if parent is None:
                continue
            owner = index.get(parent)
            if owner is not None and owner != uid:
                links[uid].add(owner)
                links[owner].add(uid)
        return MappingProxyType({k: frozenset(v) for k, v in links.items()})


def _rebuild_version(year, descriptors, scrs):
    return MeshVersion.build(year, descriptors, scrs)


class RelationType(str, enum.Enum):
    ANCESTOR = "ancestor"
    DESCENDANT = "descendant"
    UNRELATED = "unrelated"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class Distance:
    """Hierarchy distance: a count of intermediate descriptors, infinite or undefined."""

    value: int | None = None
    kind: str = "finite"

    @classmethod
    def finite(cls, n: int) -> Distance:
        if n < 0:
            raise ValueError("distance must be >= 0")
        return cls(n, "finite")

    @classmethod
    def infinite(cls) -> Distance:
        return cls(None, "infinite")

    @classmethod
    def undefined(cls) -> Distance:
        return cls(None, "undefined")

    def __str__(self) -> str:
        return str(self.value) if self.kind == "finite" else self.kind

    @classmethod
    def parse(cls, text: str) -> Distance:
        if text in ("infinite", "undefined"):
            return cls(None, text)
        return cls.finite(int(text))


class ProvenanceCategory(enum.IntEnum):
    OLD_CONCEPT = 1
    OLD_SCR = 2
    NEW_PI_CONCEPT = 3
    EMERGING = 4


class ProvenanceType(enum.IntEnum):
    EMERSION = 0
    SUCCESSION = 1
    SUBDIVISION = 2
    SUBMERSION = 3
    OVERTOPPING = 4
    DETACHMENT = 5


@dataclass(frozen=True, order=True)
class ProvenanceCode:
    category: ProvenanceCategory
    ptype: ProvenanceType

    def __post_init__(self):
        object.__setattr__(self, "category", ProvenanceCategory(self.category))
        object.__setattr__(self, "ptype", ProvenanceType(self.ptype))
        emerging = self.category is ProvenanceCategory.EMERGING
        if emerging != (self.ptype is ProvenanceType.EMERSION):
            raise ValueError(f"invalid provenance code {int(self.category)}.{int(self.ptype)}")

    @classmethod
    def parse(cls, text: str) -> ProvenanceCode:
        cat, _, typ = text.strip().partition(".")
        return cls(ProvenanceCategory(int(cat)), ProvenanceType(int(typ)))

    def __str__(self) -> str:
        return f"{int(self.category)}.{int(self.ptype)}"


EMERSION_CODE = ProvenanceCode(ProvenanceCategory.EMERGING, ProvenanceType.EMERSION)


class Coverage(str, enum.Enum):
    EXPLICIT_CONCEPT = "explicit_concept"
    EXPLICIT_SCR = "explicit_scr"
    IMPLICIT_PI = "implicit_pi"


@dataclass(frozen=True)
class PreviousHost:
    descriptor_id: str
    name: str
    coverage: Coverage


@dataclass(frozen=True)
class HostRelation:
    """Where a Previous Host sits relative to the new descriptor in the reference release."""

    host_id: str
    relation: RelationType
    gap: int | None
    distance: Distance
    ptype: ProvenanceType


@dataclass(frozen=True)
class NewDescriptorRecord:
    descriptor_id: str
    name: str
    intro_year: int
    category: ProvenanceCategory
    hosts: tuple[PreviousHost, ...]
    codes: frozenset[ProvenanceCode]
    tree_numbers: tuple[TreeNumber, ...]
    mesh_category_letters: frozenset[str]
    relations: tuple[HostRelation, ...] = field(default=(), compare=False)
    flags: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "hosts", tuple(self.hosts))
        object.__setattr__(self, "codes", frozenset(self.codes))
        object.__setattr__(self, "tree_numbers", tuple(self.tree_numbers))
        object.__setattr__(self, "mesh_category_letters", frozenset(self.mesh_category_letters))
        if any(c.category != self.category for c in self.codes):
            raise ValueError(f"{self.descriptor_id}: codes disagree with category {int(self.category)}")
        if self.category is ProvenanceCategory.EMERGING:
            if self.hosts or self.codes != {EMERSION_CODE}:
                raise ValueError(f"{self.descriptor_id}: emerging record must be hostless with code 4.0")
        elif self.category is ProvenanceCategory.OLD_CONCEPT and len(self.hosts) != 1:
            raise ValueError(f"{self.descriptor_id}: old-concept record needs exactly one host")
        elif not self.hosts and self.category is not ProvenanceCategory.NEW_PI_CONCEPT:
            raise ValueError(f"{self.descriptor_id}: category {int(self.category)} needs hosts")

    @property
    def ptypes(self) -> frozenset[ProvenanceType]:
        return frozenset(c.ptype for c in self.codes)

    @property
    def unresolved(self) -> bool:
        """A category-3 record whose PI hosts could not be resolved."""
        return not self.hosts and self.category is ProvenanceCategory.NEW_PI_CONCEPT


class OverrideKind(str, enum.Enum):
    PMN_SCR = "pmn_scr"
    PI_HOST = "pi_host"


@dataclass(frozen=True)
class OverrideEntry:
    descriptor_id: str
    kind: OverrideKind
    resolved_ids: tuple[str, ...]
    row: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", OverrideKind(self.kind))
        object.__setattr__(self, "resolved_ids", tuple(self.resolved_ids))
