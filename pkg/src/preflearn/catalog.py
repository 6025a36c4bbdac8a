"""Catalogs of alternatives: JSON Lines ingestion and feature access.

Each line is one object: {"id": str, "title": optional str,
"features": [floats]}. All feature arrays in a catalog share one length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .belief import Alternative, Question
from .errors import IngestionError, InvalidArgumentError


@dataclass(frozen=True)
class Catalog:
    alternatives: tuple[Alternative, ...]

    def __post_init__(self):
        alts = tuple(self.alternatives)
        if not alts:
            raise InvalidArgumentError("catalog must not be empty")
        dims = {a.d for a in alts}
        if len(dims) != 1:
            raise InvalidArgumentError(f"catalog mixes feature dimensions: {sorted(dims)}")
        ids = [a.id for a in alts]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("catalog has duplicate alternative ids")
        object.__setattr__(self, "alternatives", alts)
        features = np.vstack([a.features for a in alts])
        features.flags.writeable = False
        object.__setattr__(self, "_features", features)

    @property
    def features(self) -> np.ndarray:
        return self._features  # type: ignore[attr-defined]

    @property
    def d(self) -> int:
        return self.alternatives[0].d

    def __len__(self) -> int:
        return len(self.alternatives)

    def question(self, indices) -> Question:
        """Question made of the catalog entries at the given indices."""
        return Question(tuple(self.alternatives[int(i)] for i in indices))


def parse_catalog_lines(lines) -> Catalog:
    """Parse JSON Lines into a catalog, collecting per-line errors.

    Raises IngestionError naming every offending 1-based line number for
    malformed JSON, missing/ragged/non-finite features, or duplicate ids.
    """
    alternatives: list[Alternative] = []
    bad: list[tuple[int, str]] = []
    seen_ids: dict[str, int] = {}
    dim: int | None = None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            ident = str(obj["id"])
            features = np.asarray(obj["features"], dtype=float)
            if features.ndim != 1 or features.size == 0:
                raise ValueError("features must be a nonempty array")
            if not np.all(np.isfinite(features)):
                raise ValueError("features contain non-finite values")
            if dim is None:
                dim = features.size
            elif features.size != dim:
                raise ValueError(f"expected {dim} features, got {features.size}")
            if ident in seen_ids:
                raise ValueError(f"duplicate id {ident!r} (first seen on line {seen_ids[ident]})")
            seen_ids[ident] = lineno
            alternatives.append(
                Alternative(id=ident, features=features, title=obj.get("title"))
            )
        except (KeyError, ValueError, TypeError) as exc:
            bad.append((lineno, str(exc)))
    if bad:
        details = "; ".join(f"line {n}: {msg}" for n, msg in bad)
        raise IngestionError(f"catalog rejected: {details}", line_numbers=[n for n, _ in bad])
    if not alternatives:
        raise IngestionError("catalog rejected: no alternatives found")
    return Catalog(tuple(alternatives))


def load_catalog(path) -> Catalog:
    with open(Path(path), "r", encoding="utf-8") as handle:
        return parse_catalog_lines(handle)


def dump_catalog(catalog: Catalog, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as handle:
        for alt in catalog.alternatives:
            record = {"id": alt.id, "features": alt.features.tolist()}
            if alt.title is not None:
                record["title"] = alt.title
            handle.write(json.dumps(record) + "\n")


def synthetic_catalog(
    count: int, mean: np.ndarray, covariance: np.ndarray, seed: int
) -> Catalog:
    """Gaussian-drawn catalog sharing the prior's distribution."""
    if count < 1:
        raise InvalidArgumentError("catalog count must be >= 1")
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(np.asarray(covariance, dtype=float))
    mean = np.asarray(mean, dtype=float)
    draws = mean + rng.standard_normal((count, mean.shape[0])) @ chol.T
    alts = tuple(
        Alternative(id=f"syn-{i:05d}", features=draws[i]) for i in range(count)
    )
    return Catalog(alts)
