"""Synthetic MeSH releases 2014-2020 rebuilding the published worked examples.

Identifiers are made up. Every tree-number prefix that no real record holds
gets a filler descriptor present in all years, so the hierarchy is connected
and the fillers never count as new.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from meshprov.model import (
    Concept,
    ConceptRelation,
    Descriptor,
    MeshVersion,
    ScrRecord,
    Term,
    TreeNumber,
)
from meshprov.parser import write_version_files

YEARS = range(2014, 2021)
FIRST_YEAR, LAST_YEAR, REFERENCE_YEAR = 2015, 2020, 2020


def _at(by_year: dict, year: int, default=()):
    keys = [k for k in by_year if k <= year]
    return by_year[max(keys)] if keys else default


@dataclass
class Rec:
    uid: str
    name: str
    start: int
    end: int
    trees: dict[int, tuple[str, ...]]
    concept: str
    synonyms: tuple[str, ...] = ()
    subordinates: dict[int, tuple[tuple[str, str], ...]] = field(default_factory=dict)
    pi: tuple[str, ...] = ()
    pmn: str | None = None

    def descriptor(self, year: int) -> Descriptor:
        terms = (Term(self.name, True), *(Term(s) for s in self.synonyms))
        subs = tuple(
            Concept(cid, (Term(text, True),), ConceptRelation.NARROWER)
            for cid, text in _at(self.subordinates, year)
        )
        return Descriptor(
            self.uid, self.name, Concept(self.concept, terms), subs,
            tuple(TreeNumber.parse(t) for t in _at(self.trees, year)), self.pmn, self.pi,
        )


@dataclass
class Scr:
    uid: str
    name: str
    start: int
    end: int
    concept: str
    mapped: tuple[str, ...]
    synonyms: tuple[str, ...] = ()

    def record(self) -> ScrRecord:
        terms = (Term(self.name, True), *(Term(s) for s in self.synonyms))
        return ScrRecord(self.uid, Concept(self.concept, terms), (), self.mapped, name=self.name)


def R(uid, name, trees, start=2014, end=2020, concept=None, **kw) -> Rec:
    if not isinstance(trees, dict):
        trees = {start: tuple(trees)}
    return Rec(uid, name, start, end, trees, concept or "M" + uid[1:], **kw)


DESCRIPTORS = [
    # Fig. 1 neighbourhood
    R("D100010", "Dementia", ["F03.615.400", "C10.228.140.380"], synonyms=("Amentia",),
      subordinates={2014: (("M100013", "Senile Paranoid Dementia"), ("M100014", "Familial Dementia"))}),
    R("D100011", "Alzheimer Disease", {2014: ("F03.615.400.100", "C10.228.140.380.100"),
                                       2016: ("F03.615.400.100", "C10.228.140.380.100", "C10.574.945.249")}),
    R("D100020", "tau Proteins", ["D12.776.543"]),
    R("D100021", "Tauopathies", ["C10.574.945"], start=2016, pi=("tau Proteins (1997-2015)",)),
    # old concept, host later removed
    R("D100030", "Pygeum", ["B01.650.700"], end=2015,
      subordinates={2014: (("M100031", "Prunus africana"),)}),
    R("D100031", "Prunus africana", ["B01.650.940.800"], start=2016, concept="M100031"),
    # old SCR
    R("D100040", "Adenocarcinoma", ["C04.557.470.200"]),
    R("D100041", "Lung Neoplasms", ["C04.588.894.797.520", "C08.381.540"]),
    R("D100042", "Adenocarcinoma of Lung",
      ["C04.557.470.200.100", "C04.588.894.797.520.100", "C08.381.540.100"],
      start=2019, concept="M100042",
      pmn="2019; ADENOCARCINOMA OF LUNG was indexed under ADENOCARCINOMA and LUNG NEOPLASMS 2008-2018"),
    # new PI concept with two current hosts and an older, neglected one
    R("D100052", "Virus Diseases", ["C01.925"]),
    R("D100050", "Arbovirus Infections", ["C01.925.081"]),
    R("D100051", "Flavivirus Infections", ["C01.925.782.350"]),
    R("D100053", "Zika Virus Infection", ["C01.925.081.990", "C01.925.782.350.960"], start=2015,
      pi=("Virus Diseases (1990-2005)", "Arbovirus Infections (2006-2014)",
          "Flavivirus Infections (2006-2014)")),
    # emersion
    R("D100060", "Long Term Adverse Effects", ["C23.550.100"], start=2015),
    # subdivision, submersion, detachment
    R("D100070", "Cell Death", ["G04.146"]),
    R("D100071", "Necrosis", {2014: ("G04.146.300", "C23.550.717"), 2020: ("C23.550.717",)}),
    R("D100072", "Regulated Cell Death", ["G04.146.500"], start=2020, pi=("Cell Death (2000-2019)",)),
    R("D100073", "Ferroptosis", ["G04.146.500.250"], start=2020, pi=("Cell Death (2012-2019)",)),
    R("D100074", "Necroptosis", ["G04.146.500.500"], start=2020, pi=("Necrosis (2014-2019)",)),
    # overtopping
    R("D100080", "Joint Diseases", ["C05.550"]),
    R("D100081", "Chondrocalcinosis", {2014: ("C05.550.200",), 2017: ("C05.550.300.200",)}),
    R("D100082", "Gout", {2014: ("C05.550.400",), 2017: ("C05.550.300.400",)}),
    R("D100083", "Crystal Arthropathies", ["C05.550.300"], start=2017,
      pi=("Chondrocalcinosis (1990-2016)", "Gout (1990-2016)")),
    # detachment from a sibling
    R("D100090", "Disease Attributes", ["C23.550.291"]),
    R("D100091", "Rare Diseases", ["C23.550.291.937"]),
    R("D100092", "Undiagnosed Diseases", ["C23.550.291.968"], start=2020,
      pi=("Rare Diseases (2003-2019)",)),
    # two codes
    R("D100100", "Dystocia", ["C13.703.420"]),
    R("D100101", "Shoulder", ["A01.378.800"]),
    R("D100102", "Shoulder Dystocia", ["C13.703.420.700"], start=2020,
      pi=("Dystocia (1991-2019)", "Shoulder (1998-2019)")),
    # review workflow: PMN names a misspelt SCR, PI names a misspelt descriptor
    R("D100110", "Receptors, Immunologic", ["D12.776.829"]),
    R("D100113", "Receptors, Scavenger", ["D12.776.829.300"]),
    R("D100112", "Scavenger Receptors, Class A", ["D12.776.829.300.100"], start=2019,
      pmn="2019; SCAVENGER RECEPTORS CLASS A was indexed under RECEPTORS, IMMUNOLOGIC 2006-2018"),
    R("D100120", "Hypotension", ["C14.907.514"]),
    R("D100121", "Post-Exercise Hypotension", ["C14.907.514.700"], start=2018,
      pi=("Hypotensoin (2005-2017)",)),
]

SCRS = [
    Scr("C100040", "Adenocarcinoma of Lung", 2014, 2018, "M100042", ("D100040", "D100041"),
        synonyms=("Lung Adenocarcinoma",)),
    Scr("C100011", "Presenile And Senile Dementia", 2014, 2020, "M100015", ("D100011",)),
    Scr("C100111", "Scavenger Receptor Class A", 2014, 2018, "M100111", ("D100110",)),
    Scr("C100112", "Scavenger Receptor Class B", 2014, 2020, "M100116", ("D100110",)),
]

# descriptor id -> (expected codes, expected host ids or None to skip the check)
WORKED_EXAMPLES = {
    "Prunus africana": ("D100031", {"1.1"}, {"D100030"}),
    "Adenocarcinoma of Lung": ("D100042", {"2.2"}, {"D100040", "D100041"}),
    "Zika Virus Infection": ("D100053", None, {"D100050", "D100051"}),
    "Long Term Adverse Effects": ("D100060", {"4.0"}, set()),
    "Regulated Cell Death": ("D100072", {"3.2"}, {"D100070"}),
    "Ferroptosis": ("D100073", {"3.3"}, {"D100070"}),
    "Necroptosis": ("D100074", {"3.5"}, {"D100071"}),
    "Crystal Arthropathies": ("D100083", {"3.4"}, {"D100081", "D100082"}),
    "Undiagnosed Diseases": ("D100092", {"3.5"}, {"D100091"}),
    "Shoulder Dystocia": ("D100102", {"3.2", "3.5"}, {"D100100", "D100101"}),
    "Tauopathies": ("D100021", {"3.5"}, {"D100020"}),
}
ZIKA_CATEGORY = 3

OVERRIDES_CSV = (
    "descriptor_id,kind,resolved_ids\n"
    "D100112,pmn_scr,C100111\n"
    "D100121,pi_host,D100120\n"
)


def _fillers() -> list[Descriptor]:
    held: set[str] = set()
    prefixes: set[str] = set()
    for rec in DESCRIPTORS:
        for trees in rec.trees.values():
            for t in trees:
                held.add(t)
                parts = t.split(".")
                prefixes.update(".".join(parts[:i]) for i in range(1, len(parts)))
    out = []
    for t in sorted(prefixes - held):
        uid = "DF" + t.replace(".", "")
        out.append(Descriptor(uid, f"Filler {t}", Concept("MF" + t.replace(".", ""), (Term(f"Filler {t}", True),)),
                              (), (TreeNumber.parse(t),)))
    return out


@lru_cache(maxsize=None)
def build_versions() -> dict[int, MeshVersion]:
    fillers = _fillers()
    versions = {}
    for year in YEARS:
        descs = [r.descriptor(year) for r in DESCRIPTORS if r.start <= year <= r.end] + fillers
        scrs = [s.record() for s in SCRS if s.start <= year <= s.end]
        versions[year] = MeshVersion.build(year, descs, scrs)
    return versions


def write_corpus(data_dir: Path) -> Path:
    data_dir.mkdir(parents=True, exist_ok=True)
    for year, version in build_versions().items():
        write_version_files(version, data_dir / f"desc{year}.xml", data_dir / f"supp{year}.xml")
    return data_dir


def write_config(path: Path, data_dir: Path, out_dir: Path, overrides: Path | None = None) -> Path:
    lines = [
        f"data_dir = {data_dir}",
        f"first_year = {FIRST_YEAR}",
        f"last_year = {LAST_YEAR}",
        f"reference_year = {REFERENCE_YEAR}",
        f"output_dir = {out_dir}",
        "log_level = WARNING",
    ]
    if overrides is not None:
        lines.append(f"overrides_path = {overrides}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
