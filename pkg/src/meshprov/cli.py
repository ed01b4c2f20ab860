"""Command line entry point.

    meshprov harvest   parse the releases of the study window (and cache them)
    meshprov classify  annotate new descriptors, write per-year CSVs and review.csv
    meshprov report    aggregate the per-year CSVs into statistics tables
    meshprov run       all of the above

Exit status: 0 clean, 2 finished with items awaiting manual review, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .estimator import ProvenanceAnnotator
from .harvester import (LazyVersions, MissingVersionError, ReleaseFiles, StudyWindow, harvest, load_versions,
                        read_config)
from .model import IntegrityError
from .notes import OverrideError, write_review_file
from .parser import MeshParseError
from .report import (aggregate, read_year_csv, write_flags_csv, write_hosts_csv, write_stats, write_year_csv,
                     year_csv_path)

log = logging.getLogger("meshprov")

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_REVIEW = 2


class UsageError(Exception):
    pass


class MissingAnnotationsError(Exception):
    def __init__(self, years):
        self.years = sorted(years)
        super().__init__("no annotation CSV for year(s): " + ", ".join(map(str, self.years))
                         + "; run classify first")


@dataclass(frozen=True)
class RunConfig:
    data_dir: Path
    first_year: int
    last_year: int
    reference_year: int
    output_dir: Path
    descriptor_template: str = "desc{year}.xml"
    scr_template: str = "supp{year}.xml"
    overrides_path: Path | None = None
    log_level: str = "INFO"
    jobs: int = 1

    @property
    def window(self) -> StudyWindow:
        return StudyWindow(self.first_year, self.last_year, self.reference_year)

    @property
    def files(self) -> ReleaseFiles:
        return ReleaseFiles(self.data_dir, self.descriptor_template, self.scr_template)

    @property
    def cache_dir(self) -> Path:
        return self.output_dir / "cache"

    @property
    def annotations_dir(self) -> Path:
        return self.output_dir / "annotations"

    @property
    def stats_dir(self) -> Path:
        return self.output_dir / "stats"

    @property
    def review_path(self) -> Path:
        return self.output_dir / "review.csv"


_FLAG_KEYS = {
    "data_dir": "data_dir", "first_year": "first_year", "last_year": "last_year",
    "reference_year": "reference_year", "overrides": "overrides_path", "out": "output_dir",
    "jobs": "jobs", "log_level": "log_level",
    "descriptor_template": "descriptor_template", "scr_template": "scr_template",
}


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, object] = {}
    if args.config:
        try:
            values.update(read_config(args.config))
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    for flag, key in _FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    missing = [k for k in ("data_dir", "first_year", "last_year", "reference_year", "output_dir")
               if k not in values]
    if missing:
        raise UsageError("missing setting(s): " + ", ".join(missing))
    unknown = set(values) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise UsageError("unknown setting(s): " + ", ".join(sorted(unknown)))
    values["data_dir"] = Path(values["data_dir"])
    values["output_dir"] = Path(values["output_dir"])
    if values.get("overrides_path"):
        values["overrides_path"] = Path(values["overrides_path"])
    else:
        values["overrides_path"] = None
    config = RunConfig(**values)
    try:
        config.window
    except ValueError as exc:
        raise UsageError(f"invalid study window: {exc}") from None
    if config.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    if not config.data_dir.is_dir():
        raise UsageError(f"data directory {config.data_dir} does not exist")
    if config.overrides_path is not None and not config.overrides_path.is_file():
        raise UsageError(f"overrides file {config.overrides_path} does not exist")
    return config


def cmd_harvest(config: RunConfig) -> None:
    reports_dir = config.output_dir / "parse_reports"
    reports_dir.mkdir(parents=True, exist_ok=True)

    def save(year, report, cached):
        if cached:
            log.info("cache hit for %s", year)
        (reports_dir / f"{year}.log").write_text("\n".join(report.lines()) + "\n", encoding="utf-8")

    harvest(config.files, config.window.required_years, config.cache_dir, config.jobs, on_loaded=save)


def _write_meta(config: RunConfig, versions) -> None:
    w = config.window
    rows = [
        ("first_year", w.first_year), ("last_year", w.last_year),
        ("reference_year", w.reference_year), ("baseline_year", w.baseline_year),
        ("baseline_descriptors", len(versions[w.baseline_year].descriptors)),
    ]
    with open(config.annotations_dir / "window.csv", "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["key", "value"])
        out.writerows(rows)


def cmd_classify(config: RunConfig, harvested: bool = False) -> int:
    if not harvested:
        cmd_harvest(config)
    w = config.window
    # releases come from the cache a few at a time; the reference stays loaded
    versions = LazyVersions(config.files, w.required_years, config.cache_dir, pinned=(w.reference_year,))
    annotator = ProvenanceAnnotator(w.first_year, w.last_year, w.reference_year,
                                    overrides=config.overrides_path)
    annotator.fit(versions)
    by_year = annotator.transform_by_year()
    config.annotations_dir.mkdir(parents=True, exist_ok=True)
    for year, records in by_year.items():
        write_year_csv(year, records, year_csv_path(config.annotations_dir, year))
        log.info("%s: %d new descriptors annotated", year, len(records))
    every = [r for records in by_year.values() for r in records]
    write_hosts_csv(every, config.annotations_dir / "hosts.csv")
    write_flags_csv(every, config.annotations_dir / "flags.csv")
    _write_meta(config, versions)
    n_rows = write_review_file(config.review_path, annotator.review_items_)
    if annotator.review_items_:
        log.warning("%d item(s) need review (%d candidate rows in %s)",
                    len(annotator.review_items_), n_rows, config.review_path)
        return EXIT_REVIEW
    return EXIT_OK


def _baseline_count(config: RunConfig) -> int:
    meta = config.annotations_dir / "window.csv"
    if meta.exists():
        with open(meta, encoding="utf-8", newline="") as fh:
            values = {row["key"]: row["value"] for row in csv.DictReader(fh)}
        if int(values.get("baseline_year", -1)) == config.window.baseline_year:
            return int(values["baseline_descriptors"])
    versions, _ = load_versions(config.files, [config.window.baseline_year], config.cache_dir)
    return len(versions[config.window.baseline_year].descriptors)


def cmd_report(config: RunConfig) -> list[Path]:
    years = list(config.window.intro_years)
    missing = [y for y in years if not year_csv_path(config.annotations_dir, y).exists()]
    if missing:
        raise MissingAnnotationsError(missing)
    records = [r for y in years for r in read_year_csv(year_csv_path(config.annotations_dir, y))]
    bundle = aggregate(records, _baseline_count(config), years=years)
    paths = write_stats(bundle, config.stats_dir)
    log.info("%d new descriptors; statistics in %s", bundle.record_count, config.stats_dir)
    return paths


def cmd_run_all(config: RunConfig) -> int:
    cmd_harvest(config)
    status = cmd_classify(config, harvested=True)
    cmd_report(config)
    return status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are fatal errors; status 2 is reserved for pending reviews
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--data-dir", help="directory holding the MeSH XML releases")
    common.add_argument("--first-year", type=int)
    common.add_argument("--last-year", type=int)
    common.add_argument("--reference-year", type=int)
    common.add_argument("--overrides", help="CSV of manually confirmed resolutions")
    common.add_argument("--out", help="output directory")
    common.add_argument("--descriptor-template", help="descriptor file name, default desc{year}.xml")
    common.add_argument("--scr-template", help="SCR file name, default supp{year}.xml")
    common.add_argument("--jobs", type=int, help="releases parsed in parallel")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = _Parser(prog="meshprov", description="Provenance of new MeSH descriptors.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("harvest", parents=[common], help="parse and cache the releases")
    sub.add_parser("classify", parents=[common], help="annotate new descriptors")
    sub.add_parser("report", parents=[common], help="aggregate statistics")
    sub.add_parser("run", parents=[common], help="harvest, classify and report")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"meshprov: error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    logging.basicConfig(level=config.log_level, format="%(levelname)s %(message)s",
                        stream=sys.stderr, force=True)
    try:
        if args.command == "harvest":
            cmd_harvest(config)
            return EXIT_OK
        if args.command == "classify":
            return cmd_classify(config)
        if args.command == "report":
            cmd_report(config)
            return EXIT_OK
        return cmd_run_all(config)
    except (MissingVersionError, MissingAnnotationsError) as exc:
        log.error("%s", exc)
    except (MeshParseError, IntegrityError, OverrideError) as exc:
        log.error("%s", exc)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
