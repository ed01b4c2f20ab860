"""Input checks shared by the estimator and the command line."""

from __future__ import annotations

from collections.abc import Iterable, Mapping

from .harvester import LazyVersions
from .model import MeshVersion, OverrideEntry, OverrideKind
from .notes import read_overrides


def check_versions(X) -> Mapping[int, MeshVersion]:
    """Accept a ``{year: MeshVersion}`` mapping, an iterable of versions or LazyVersions."""
    if isinstance(X, MeshVersion):
        raise TypeError("expected several MeSH releases, got a single MeshVersion")
    if isinstance(X, LazyVersions):
        # read on demand; loading everything here would defeat the point
        if len(X) < 2:
            raise ValueError("need at least two consecutive releases")
        return X
    if isinstance(X, Mapping):
        items = list(X.items())
    else:
        try:
            items = [(v.year, v) for v in X]
        except (TypeError, AttributeError):
            raise TypeError(f"expected MeshVersion objects, got {type(X).__name__}") from None
    out: dict[int, MeshVersion] = {}
    for year, v in items:
        if not isinstance(v, MeshVersion):
            raise TypeError(f"expected MeshVersion for {year}, got {type(v).__name__}")
        if v.year != year:
            raise ValueError(f"release keyed as {year} reports year {v.year}")
        if year in out:
            raise ValueError(f"two releases for {year}")
        out[year] = v
    if len(out) < 2:
        raise ValueError("need at least two consecutive releases")
    return dict(sorted(out.items()))


def check_overrides(overrides) -> dict[tuple[str, OverrideKind], OverrideEntry]:
    """None, a CSV path, a mapping, or an iterable of :class:`OverrideEntry`."""
    if overrides is None:
        return {}
    if isinstance(overrides, (str, bytes)) or hasattr(overrides, "__fspath__"):
        return read_overrides(overrides)
    if isinstance(overrides, Mapping):
        overrides = overrides.values()
    out = {}
    for e in overrides:
        if not isinstance(e, OverrideEntry):
            raise TypeError(f"expected OverrideEntry, got {type(e).__name__}")
        out[(e.descriptor_id, e.kind)] = e
    return out


def check_descriptor_ids(ids: Iterable[str], known: Mapping[str, int]) -> list[str]:
    if isinstance(ids, str):
        ids = [ids]
    ids = list(ids)
    unknown = [i for i in ids if i not in known]
    if unknown:
        raise ValueError(f"not new descriptors of the fitted window: {', '.join(unknown[:10])}")
    return ids
