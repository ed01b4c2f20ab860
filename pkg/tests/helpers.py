from __future__ import annotations

from meshprov.model import (
    Concept,
    ConceptRelation,
    Descriptor,
    MeshVersion,
    ScrRecord,
    Term,
    TreeNumber,
)


def concept(cid: str, name: str, *synonyms: str, relation=ConceptRelation.PREFERRED) -> Concept:
    return Concept(cid, (Term(name, True), *(Term(s) for s in synonyms)), relation)


def descriptor(uid: str, trees=(), name: str | None = None, concept_id: str | None = None,
               subordinates=(), pmn: str | None = None, pi=(), synonyms=()) -> Descriptor:
    name = name or f"Name {uid}"
    subs = tuple(
        s if isinstance(s, Concept) else concept(s[0], s[1], relation=ConceptRelation.NARROWER)
        for s in subordinates
    )
    return Descriptor(
        uid, name, concept(concept_id or "M" + uid, name, *synonyms), subs,
        tuple(TreeNumber.parse(t) for t in trees), pmn, tuple(pi),
    )


def scr(uid: str, name: str, mapped, concept_id: str | None = None, synonyms=()) -> ScrRecord:
    return ScrRecord(uid, concept(concept_id or "M" + uid, name, *synonyms), (), tuple(mapped), name=name)


def version(year: int, descriptors=(), scrs=()) -> MeshVersion:
    return MeshVersion.build(year, descriptors, scrs)


def tree(*texts: str) -> tuple[TreeNumber, ...]:
    return tuple(TreeNumber.parse(t) for t in texts)
