"""scikit-learn style front end for the provenance pipeline.

``fit`` takes the annual releases and finds the new descriptors of the study
window; ``transform`` annotates them; ``predict`` returns just their codes.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .harvester import StudyWindow, retained_new_descriptors
from .model import NewDescriptorRecord
from .provenance import annotate
from .validation import check_descriptor_ids, check_overrides, check_versions


class ProvenanceAnnotator(BaseEstimator):
    """Annotate the new descriptors of a run of MeSH releases with provenance codes.

    Parameters
    ----------
    first_year, last_year, reference_year : int, optional
        Study window. Defaults: the second release given, the reference year,
        and the latest release given.
    overrides : path, mapping or list of OverrideEntry, optional
        Manually confirmed PMN/PI resolutions.
    compute_distance : bool
        Also compute the hierarchy distance to each host (reporting only).

    Attributes
    ----------
    window_ : StudyWindow
    new_descriptors_ : dict[int, tuple[str, ...]]
        Retained new descriptor ids per introduction year.
    intro_year_ : dict[str, int]
    review_items_ : list[ReviewItem]
        Items from the last ``transform`` that need manual confirmation.
    """

    def __init__(self, first_year=None, last_year=None, reference_year=None, overrides=None,
                 compute_distance=True):
        self.first_year = first_year
        self.last_year = last_year
        self.reference_year = reference_year
        self.overrides = overrides
        self.compute_distance = compute_distance

    def fit(self, X, y=None):
        versions = check_versions(X)
        reference = self.reference_year if self.reference_year is not None else max(versions)
        first = self.first_year if self.first_year is not None else min(versions) + 1
        last = self.last_year if self.last_year is not None else reference
        self.window_ = StudyWindow(first, last, reference)
        self.overrides_ = check_overrides(self.overrides)
        self.versions_ = versions
        found = retained_new_descriptors(self.window_, versions)
        self.new_descriptors_ = {year: tuple(sorted(ids)) for year, ids in found.items()}
        self.intro_year_ = {uid: year for year, ids in found.items() for uid in ids}
        self.review_items_ = []
        return self

    def transform(self, X=None) -> list[NewDescriptorRecord]:
        """Records for descriptor ids ``X`` (default: every new descriptor), ordered by year then id."""
        check_is_fitted(self, "new_descriptors_")
        if X is None:
            ids = list(self.intro_year_)
        else:
            ids = check_descriptor_ids(X, self.intro_year_)
        reference = self.versions_[self.window_.reference_year]
        review: list = []
        records = []
        for uid in sorted(set(ids), key=lambda u: (self.intro_year_[u], u)):
            year = self.intro_year_[uid]
            records.append(annotate(
                self.versions_[year].descriptors[uid], year, self.versions_[year - 1], reference,
                self.overrides_, self.compute_distance, review))
        self.review_items_ = review
        return records

    def fit_transform(self, X, y=None) -> list[NewDescriptorRecord]:
        return self.fit(X).transform()

    def predict(self, X=None) -> list[tuple[str, ...]]:
        """Sorted provenance codes ("3.2", ...) per descriptor, in ``transform`` order."""
        return [tuple(str(c) for c in sorted(r.codes)) for r in self.transform(X)]

    def transform_by_year(self) -> dict[int, list[NewDescriptorRecord]]:
        by_year: dict[int, list[NewDescriptorRecord]] = {y: [] for y in self.window_.intro_years}
        for r in self.transform():
            by_year[r.intro_year].append(r)
        return by_year
