from __future__ import annotations

import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from meshprov import ProvenanceAnnotator
from meshprov.harvester import LazyVersions, MissingVersionError, ReleaseFiles
from meshprov.model import OverrideEntry, OverrideKind

import corpus


def test_params_round_trip():
    est = ProvenanceAnnotator(2015, 2020, 2020, compute_distance=False)
    params = est.get_params()
    assert params == {"first_year": 2015, "last_year": 2020, "reference_year": 2020,
                      "overrides": None, "compute_distance": False}
    assert clone(est).get_params() == params
    assert est.set_params(first_year=2016).first_year == 2016


def test_transform_before_fit():
    with pytest.raises(NotFittedError):
        ProvenanceAnnotator().transform()


def test_fit_defaults_to_whole_range(corpus_versions):
    est = ProvenanceAnnotator().fit(corpus_versions)
    assert (est.window_.first_year, est.window_.last_year, est.window_.reference_year) == (2015, 2020, 2020)
    assert est.new_descriptors_[2016] == ("D100021", "D100031")


def test_predict_matches_worked_examples(corpus_versions):
    est = ProvenanceAnnotator(2015, 2020, 2020).fit(corpus_versions)
    ids = [uid for uid, _, _ in corpus.WORKED_EXAMPLES.values()]
    codes = dict(zip(sorted(ids, key=lambda u: (est.intro_year_[u], u)), est.predict(ids)))
    for name, (uid, expected, _) in corpus.WORKED_EXAMPLES.items():
        if expected is not None:
            assert set(codes[uid]) == expected, name


def test_iterable_input_and_review_items(corpus_versions):
    est = ProvenanceAnnotator(2015, 2020, 2020)
    records = est.fit_transform(list(corpus_versions.values()))
    assert [r.intro_year for r in records] == sorted(r.intro_year for r in records)
    assert sorted((i.descriptor_id, i.kind.value) for i in est.review_items_) == [
        ("D100112", "pmn_scr"), ("D100121", "pi_host")]


def test_overrides_as_entries(corpus_versions):
    overrides = [OverrideEntry("D100112", OverrideKind.PMN_SCR, ("C100111",)),
                 OverrideEntry("D100121", OverrideKind.PI_HOST, ("D100120",))]
    est = ProvenanceAnnotator(2015, 2020, 2020, overrides=overrides)
    codes = dict(zip(["D100121", "D100112"], est.fit(corpus_versions).predict(["D100112", "D100121"])))
    assert codes == {"D100121": ("3.2",), "D100112": ("2.3",)}
    assert est.review_items_ == []


def test_input_validation(corpus_versions):
    with pytest.raises(TypeError):
        ProvenanceAnnotator().fit(corpus_versions[2020])
    with pytest.raises(TypeError):
        ProvenanceAnnotator().fit({2019: "not a version", 2020: corpus_versions[2020]})
    with pytest.raises(ValueError):
        ProvenanceAnnotator().fit({2019: corpus_versions[2020], 2020: corpus_versions[2020]})
    with pytest.raises(ValueError):
        ProvenanceAnnotator().fit({2020: corpus_versions[2020]})
    with pytest.raises(MissingVersionError):
        ProvenanceAnnotator(2010, 2020, 2020).fit(corpus_versions)
    est = ProvenanceAnnotator(2015, 2020, 2020).fit(corpus_versions)
    with pytest.raises(ValueError, match="D100010"):
        est.transform(["D100010"])


def test_lazy_versions_give_same_records(corpus_versions, corpus_dir, tmp_path):
    lazy = LazyVersions(ReleaseFiles(corpus_dir), range(2014, 2021), tmp_path / "cache", pinned=(2020,))
    eager = ProvenanceAnnotator(2015, 2020, 2020).fit_transform(corpus_versions)
    assert ProvenanceAnnotator(2015, 2020, 2020).fit_transform(lazy) == eager
