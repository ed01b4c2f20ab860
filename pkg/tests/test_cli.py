from __future__ import annotations

import shutil
import subprocess
import sys
from pathlib import Path

import pytest

import corpus
from meshprov.cli import EXIT_FATAL, EXIT_OK, EXIT_REVIEW, main
from meshprov.notes import REVIEW_HEADER
from meshprov.report import STATS_FILES


def _tree_bytes(root: Path, skip=("cache", "parse_reports")) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.relative_to(root).parts[0] not in skip
    }


def _args(data_dir, out, *extra):
    return ["--data-dir", str(data_dir), "--first-year", "2015", "--last-year", "2020",
            "--reference-year", "2020", "--out", str(out), "--log-level", "WARNING", *extra]


@pytest.fixture
def overrides(tmp_path):
    path = tmp_path / "overrides.csv"
    path.write_text(corpus.OVERRIDES_CSV)
    return path


def test_two_pass_review_workflow(corpus_dir, tmp_path, overrides):
    out = tmp_path / "out"
    assert main(["run", *_args(corpus_dir, out)]) == EXIT_REVIEW
    review = (out / "review.csv").read_text().splitlines()
    assert review[0] == ",".join(REVIEW_HEADER)
    assert {line.split(",")[0] for line in review[1:]} == {"D100112", "D100121"}
    assert review[1].startswith("D100112,pmn_scr,SCAVENGER RECEPTORS CLASS A,1,C100111,")

    assert main(["run", *_args(corpus_dir, out, "--overrides", str(overrides))]) == EXIT_OK
    assert (out / "review.csv").read_text() == ",".join(REVIEW_HEADER) + "\n"
    rows = {line.split(",")[0]: line for line in (out / "annotations" / "2018.csv").read_text().splitlines()}
    assert ",3.2," in rows["D100121"]


def test_staged_equals_run_all(corpus_dir, tmp_path, overrides):
    staged, whole = tmp_path / "staged", tmp_path / "whole"
    assert main(["harvest", *_args(corpus_dir, staged)]) == EXIT_OK
    assert len(list((staged / "parse_reports").iterdir())) == 7
    assert main(["classify", *_args(corpus_dir, staged, "--overrides", str(overrides))]) == EXIT_OK
    assert main(["report", *_args(corpus_dir, staged)]) == EXIT_OK
    assert main(["run", *_args(corpus_dir, whole, "--overrides", str(overrides))]) == EXIT_OK
    a, b = _tree_bytes(staged), _tree_bytes(whole)
    assert a == b
    assert {f"stats/{name}" for name in STATS_FILES} <= set(a)
    assert {f"annotations/{y}.csv" for y in range(2015, 2021)} <= set(a)


def test_rerun_is_byte_identical_with_warm_cache(corpus_dir, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", *_args(corpus_dir, out)])
    first = _tree_bytes(out, skip=())
    capsys.readouterr()
    main(["run", *_args(corpus_dir, out)[:-2], "--log-level", "INFO"])
    assert _tree_bytes(out, skip=()) == first
    assert "cache hit" in capsys.readouterr().err


def test_config_file_and_flag_precedence(corpus_dir, tmp_path):
    out = tmp_path / "out"
    conf = corpus.write_config(tmp_path / "run.conf", corpus_dir, out)
    assert main(["classify", "--config", str(conf), "--reference-year", "2019", "--last-year", "2019"]) == EXIT_REVIEW
    window = (out / "annotations" / "window.csv").read_text()
    assert "reference_year,2019" in window
    assert not (out / "annotations" / "2020.csv").exists()
    # reference 2019: descriptors introduced in 2020 are out of the window
    names = (out / "annotations" / "2019.csv").read_text()
    assert "D100042" in names


def test_jobs_flag(corpus_dir, tmp_path):
    assert main(["harvest", *_args(corpus_dir, tmp_path / "out", "--jobs", "2")]) == EXIT_OK


def test_zero_new_descriptors(tmp_path, corpus_dir):
    data = tmp_path / "data"
    data.mkdir()
    for name in ("desc2016.xml", "supp2016.xml"):
        shutil.copy(corpus_dir / name, data / name)
        shutil.copy(corpus_dir / name, data / name.replace("2016", "2017"))
    # the 2017 files claim to be 2016's content, so nothing is new
    out = tmp_path / "out"
    status = main(["run", "--data-dir", str(data), "--first-year", "2017", "--last-year", "2017",
                   "--reference-year", "2017", "--out", str(out)])
    assert status == EXIT_OK
    assert (out / "annotations" / "2017.csv").read_text().count("\n") == 1


@pytest.mark.parametrize("argv", [
    ["--first-year", "2020", "--last-year", "2015", "--reference-year", "2020"],
    ["--first-year", "2015", "--last-year", "2020"],
    ["--first-year", "2015", "--last-year", "2020", "--reference-year", "2020", "--jobs", "0"],
])
def test_usage_errors(argv, corpus_dir, tmp_path, capsys):
    assert main(["run", *argv, "--data-dir", str(corpus_dir), "--out", str(tmp_path)]) == EXIT_FATAL
    assert "error" in capsys.readouterr().err


def test_unknown_command_exits_fatal(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == EXIT_FATAL
    assert "invalid choice" in capsys.readouterr().err


def test_missing_release_files(corpus_dir, tmp_path, capsys):
    status = main(["harvest", "--data-dir", str(corpus_dir), "--first-year", "2011", "--last-year", "2020",
                   "--reference-year", "2020", "--out", str(tmp_path)])
    assert status == EXIT_FATAL
    assert "2010, 2011, 2012, 2013" in capsys.readouterr().err


def test_corrupt_xml(corpus_dir, tmp_path, capsys):
    data = tmp_path / "data"
    shutil.copytree(corpus_dir, data)
    (data / "desc2019.xml").write_bytes(b"<DescriptorRecordSet><DescriptorRecord>")
    status = main(["harvest", *_args(data, tmp_path / "out")])
    assert status == EXIT_FATAL
    assert "byte offset" in capsys.readouterr().err


def test_report_without_annotations(corpus_dir, tmp_path, capsys):
    assert main(["report", *_args(corpus_dir, tmp_path / "out")]) == EXIT_FATAL
    assert "2015, 2016, 2017, 2018, 2019, 2020" in capsys.readouterr().err


def test_bad_override_file(corpus_dir, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("descriptor_id,kind,resolved_ids\nD100121,pi_host,D999999\n")
    assert main(["classify", *_args(corpus_dir, tmp_path / "out", "--overrides", str(bad))]) == EXIT_FATAL
    err = capsys.readouterr().err
    assert "row 2" in err and "D999999" in err


def test_console_script_entry_point(corpus_dir, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "meshprov", "run", *_args(corpus_dir, tmp_path / "out")],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_REVIEW
    assert proc.stdout == ""
    assert all(line.split(" ", 1)[0] in {"WARNING", "ERROR", "INFO", "DEBUG"}
               for line in proc.stderr.splitlines())
