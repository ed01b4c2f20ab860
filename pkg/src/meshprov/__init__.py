"""Conceptual provenance of new MeSH descriptors."""

from .estimator import ProvenanceAnnotator
from .harvester import StudyWindow, identify_new_descriptors, retained_new_descriptors
from .model import (
    Concept,
    ConceptRelation,
    Coverage,
    Descriptor,
    Distance,
    MeshVersion,
    NewDescriptorRecord,
    OverrideEntry,
    OverrideKind,
    PreviousHost,
    ProvenanceCategory,
    ProvenanceCode,
    ProvenanceType,
    RelationType,
    ScrRecord,
    Term,
    TreeNumber,
    is_tree_prefix,
    mesh_category_letters,
)
from .parser import load_version, parse_descriptor_file, parse_scr_file
from .provenance import (
    ancestor_gap,
    annotate,
    classify_type,
    find_previous_hosts,
    hierarchy_distance,
    relation_type,
)
from .report import StatsBundle, aggregate, read_year_csv, write_stats, write_year_csv

__version__ = "0.1.0"
