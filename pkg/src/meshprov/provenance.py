"""Previous Host discovery, hierarchy relations and provenance codes.

The category of a new descriptor depends on where its preferred concept was in
the release just before its introduction (version 0). Its provenance types
depend on where each Previous Host sits relative to it in the reference
release.
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field

from .model import (
    Coverage,
    Descriptor,
    Distance,
    EMERSION_CODE,
    HostRelation,
    MeshVersion,
    NewDescriptorRecord,
    OverrideEntry,
    OverrideKind,
    PreviousHost,
    ProvenanceCategory,
    ProvenanceCode,
    ProvenanceType,
    RelationType,
    is_tree_prefix,
    mesh_category_letters,
    normalize_term,
)
from .notes import (
    Exact,
    ReviewItem,
    Suggestions,
    check_override,
    parse_pi,
    parse_pmn,
    resolve_term_to_descriptor,
    resolve_term_to_scr,
    select_current_pi_hosts,
)

log = logging.getLogger(__name__)

Overrides = Mapping[tuple[str, OverrideKind], OverrideEntry]

FLAG_PREFERRED_MATCH = "host_held_preferred_concept"
FLAG_UNRESOLVED_PI = "unresolved_pi_hosts"
FLAG_PARTIAL_PI = "partially_resolved_pi_hosts"
FLAG_PENDING_PMN = "pending_pmn_review"


class PreconditionError(ValueError):
    pass


@dataclass
class HostSearch:
    category: ProvenanceCategory
    hosts: list[PreviousHost]
    review_items: list[ReviewItem] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (category, hosts)
        return iter((self.category, self.hosts))


def _host(uid: str, version0: MeshVersion, coverage: Coverage) -> PreviousHost:
    d = version0.descriptors.get(uid)
    return PreviousHost(uid, d.name if d is not None else uid, coverage)


def _unique(hosts: list[PreviousHost]) -> list[PreviousHost]:
    seen: dict[str, PreviousHost] = {}
    for h in hosts:
        seen.setdefault(h.descriptor_id, h)
    return list(seen.values())


def _scr_hosts(scr_id: str, version0: MeshVersion, search: HostSearch) -> list[PreviousHost]:
    scr = version0.scrs[scr_id]
    missing = [u for u in scr.mapped_descriptor_ids if u not in version0.descriptors]
    if missing:
        search.warnings.append(f"SCR {scr_id} maps to ids absent from {version0.year}: {', '.join(missing)}")
    return _unique([_host(u, version0, Coverage.EXPLICIT_SCR) for u in scr.mapped_descriptor_ids])


def _resolve_pmn_scr(d1: Descriptor, version0: MeshVersion, overrides: Overrides,
                     search: HostSearch) -> str | None:
    override = overrides.get((d1.descriptor_id, OverrideKind.PMN_SCR))
    if override is not None:
        check_override(override, version0)
        return override.resolved_ids[0] if override.resolved_ids else None
    extraction = parse_pmn(d1.pmn_text)
    if extraction is None:
        return None
    res = resolve_term_to_scr(extraction.scr_term, version0, d1.name, d1.descriptor_id)
    if isinstance(res, Exact):
        return res.id
    if isinstance(res, Suggestions):
        search.review_items.append(res.item)
        search.flags.append(FLAG_PENDING_PMN)
        search.warnings.append(f"{d1.descriptor_id}: PMN term {extraction.scr_term!r} needs review")
    return None


def _pi_host_terms(d1: Descriptor, version0: MeshVersion, search: HostSearch) -> list[str]:
    index = version0.index_name_to_descriptor

    def names_a_descriptor(term: str) -> bool:
        return len(index.get(normalize_term(term), ())) == 1

    entries = parse_pi(d1.pi_notes, search.warnings, keep_whole=names_a_descriptor)
    return select_current_pi_hosts(entries, version0.year)


def find_previous_hosts(d1: Descriptor, version0: MeshVersion, overrides: Overrides | None = None) -> HostSearch:
    """Provenance category and Previous Hosts of ``d1`` in release ``version0``.

    Checks run in a fixed order: old subordinate concept, old SCR concept, SCR
    named in the PMN, previous indexing, and finally no host at all.
    """
    overrides = overrides or {}
    search = HostSearch(ProvenanceCategory.EMERGING, [])
    uid = d1.descriptor_id
    concept_id = d1.preferred_concept.concept_id

    owner_id = version0.index_concept_to_descriptor.get(concept_id)
    if owner_id is not None and owner_id != uid:
        owner = version0.descriptors[owner_id]
        if owner.preferred_concept.concept_id == concept_id:
            search.flags.append(FLAG_PREFERRED_MATCH)
            search.warnings.append(
                f"{uid}: preferred concept {concept_id} was the preferred concept of {owner_id} "
                f"in {version0.year}; treated as old concept")
        search.category = ProvenanceCategory.OLD_CONCEPT
        search.hosts = [_host(owner_id, version0, Coverage.EXPLICIT_CONCEPT)]
        return search

    scr_id = version0.index_concept_to_scr.get(concept_id)
    if scr_id is None:
        scr_id = _resolve_pmn_scr(d1, version0, overrides, search)
    if scr_id is not None:
        search.category = ProvenanceCategory.OLD_SCR
        search.hosts = _scr_hosts(scr_id, version0, search)
        return search

    override = overrides.get((uid, OverrideKind.PI_HOST))
    if override is not None:
        check_override(override, version0)
        search.category = ProvenanceCategory.NEW_PI_CONCEPT
        search.hosts = _unique([_host(h, version0, Coverage.IMPLICIT_PI) for h in override.resolved_ids])
        if not search.hosts:
            search.flags.append(FLAG_UNRESOLVED_PI)
        return search

    terms = _pi_host_terms(d1, version0, search)
    if not terms:
        return search

    search.category = ProvenanceCategory.NEW_PI_CONCEPT
    hosts = []
    dropped = 0
    for term in terms:
        res = resolve_term_to_descriptor(term, version0, uid)
        if isinstance(res, Exact):
            hosts.append(_host(res.id, version0, Coverage.IMPLICIT_PI))
            continue
        dropped += 1
        search.warnings.append(f"{uid}: PI term {term!r} not resolved in {version0.year}; dropped")
        if isinstance(res, Suggestions):
            search.review_items.append(res.item)
    search.hosts = _unique(hosts)
    if not search.hosts:
        search.flags.append(FLAG_UNRESOLVED_PI)
    elif dropped:
        search.flags.append(FLAG_PARTIAL_PI)
    return search


def relation_type(d1_id: str, d0_id: str, reference: MeshVersion) -> RelationType:
    """Position of host ``d0`` relative to new descriptor ``d1`` in ``reference``.

    ``ANCESTOR`` means d0 is an ancestor of d1.
    """
    d1 = reference.descriptors.get(d1_id)
    if d1 is None:
        raise PreconditionError(f"{d1_id} is not in MeSH {reference.year}")
    if d1_id == d0_id:
        raise PreconditionError("a descriptor is not its own host")
    d0 = reference.descriptors.get(d0_id)
    if d0 is None:
        return RelationType.UNDEFINED
    above = any(is_tree_prefix(t0, t1) for t1 in d1.tree_numbers for t0 in d0.tree_numbers)
    below = any(is_tree_prefix(t1, t0) for t1 in d1.tree_numbers for t0 in d0.tree_numbers)
    if above and below:
        log.warning("%s and %s are both ancestor and descendant of each other in %s; using ancestor",
                    d1_id, d0_id, reference.year)
    if above:
        return RelationType.ANCESTOR
    if below:
        return RelationType.DESCENDANT
    return RelationType.UNRELATED


def ancestor_gap(d1: Descriptor, d0: Descriptor) -> int:
    """Fewest tree levels strictly between d0 and d1 over all ancestor paths."""
    gaps = [
        t1.depth - t0.depth - 1
        for t1 in d1.tree_numbers
        for t0 in d0.tree_numbers
        if is_tree_prefix(t0, t1)
    ]
    if not gaps:
        raise PreconditionError(f"{d0.descriptor_id} is not an ancestor of {d1.descriptor_id}")
    return min(gaps)


def hierarchy_distance(d1_id: str, d0_id: str, reference: MeshVersion) -> Distance:
    """Number of descriptors strictly between d1 and d0 on a shortest parent/child path."""
    if d1_id not in reference.descriptors:
        raise PreconditionError(f"{d1_id} is not in MeSH {reference.year}")
    if d0_id not in reference.descriptors:
        return Distance.undefined()
    if d1_id == d0_id:
        raise PreconditionError("distance to itself is not defined")
    adjacency = reference.adjacency
    depth = {d1_id: 0}
    queue = deque([d1_id])
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt in depth:
                continue
            if nxt == d0_id:
                return Distance.finite(depth[node])
            depth[nxt] = depth[node] + 1
            queue.append(nxt)
    return Distance.infinite()


_TYPE_BY_RELATION = {
    RelationType.UNDEFINED: ProvenanceType.SUCCESSION,
    RelationType.DESCENDANT: ProvenanceType.OVERTOPPING,
    RelationType.UNRELATED: ProvenanceType.DETACHMENT,
}


def classify_type(rel: RelationType, gap: int | None = None) -> ProvenanceType:
    if rel is RelationType.ANCESTOR:
        if gap is None or gap < 0:
            raise PreconditionError("ancestor relation needs a non-negative gap")
        return ProvenanceType.SUBDIVISION if gap == 0 else ProvenanceType.SUBMERSION
    if gap is not None:
        raise PreconditionError(f"gap given for {rel.value} relation")
    return _TYPE_BY_RELATION[rel]


def annotate(
    d1: Descriptor,
    intro_year: int,
    version0: MeshVersion,
    reference: MeshVersion,
    overrides: Overrides | None = None,
    compute_distance: bool = True,
    review: list[ReviewItem] | None = None,
) -> NewDescriptorRecord:
    """Provenance record for descriptor ``d1`` as it appeared in ``intro_year``.

    Review items raised along the way are appended to ``review`` when given.
    """
    uid = d1.descriptor_id
    current = reference.descriptors.get(uid)
    if current is None:
        raise PreconditionError(f"{uid} is not in the reference release {reference.year}")
    search = find_previous_hosts(d1, version0, overrides)
    for w in search.warnings:
        log.warning(w)
    if review is not None:
        review.extend(search.review_items)

    relations = []
    codes = set()
    for host in search.hosts:
        rel = relation_type(uid, host.descriptor_id, reference)
        gap = ancestor_gap(current, reference.descriptors[host.descriptor_id]) if rel is RelationType.ANCESTOR else None
        ptype = classify_type(rel, gap)
        dist = hierarchy_distance(uid, host.descriptor_id, reference) if compute_distance else Distance.undefined()
        relations.append(HostRelation(host.descriptor_id, rel, gap, dist, ptype))
        codes.add(ProvenanceCode(search.category, ptype))
    if search.category is ProvenanceCategory.EMERGING:
        codes = {EMERSION_CODE}

    return NewDescriptorRecord(
        descriptor_id=uid,
        name=current.name,
        intro_year=intro_year,
        category=search.category,
        hosts=tuple(search.hosts),
        codes=frozenset(codes),
        tree_numbers=current.tree_numbers,
        mesh_category_letters=mesh_category_letters(current),
        relations=tuple(relations),
        flags=tuple(dict.fromkeys(search.flags)),
    )


def annotate_year(
    year: int,
    ids,
    versions: Mapping[int, MeshVersion],
    reference: MeshVersion,
    overrides: Overrides | None = None,
    compute_distance: bool = True,
    review: list[ReviewItem] | None = None,
) -> list[NewDescriptorRecord]:
    """Annotate the given new descriptors of ``year``, in descriptor id order."""
    version1, version0 = versions[year], versions[year - 1]
    return [
        annotate(version1.descriptors[uid], year, version0, reference, overrides, compute_distance, review)
        for uid in sorted(ids)
    ]
