"""Catalog file format: parsing, validation, round trips."""

import json

import numpy as np
import pytest

from preflearn.catalog import (
    Catalog,
    dump_catalog,
    load_catalog,
    parse_catalog_lines,
    synthetic_catalog,
)
from preflearn.errors import IngestionError, InvalidArgumentError


def test_round_trip_preserves_titles(tmp_path, rng):
    catalog = synthetic_catalog(10, np.zeros(3), np.eye(3), seed=2)
    path = tmp_path / "cat.jsonl"
    dump_catalog(catalog, path)
    loaded = load_catalog(path)
    np.testing.assert_allclose(loaded.features, catalog.features)
    assert [a.id for a in loaded.alternatives] == [a.id for a in catalog.alternatives]


def test_titles_survive_round_trip(tmp_path):
    lines = [
        json.dumps({"id": "a", "title": "Alpha", "features": [1.0, 2.0]}),
        json.dumps({"id": "b", "features": [0.0, 1.0]}),
    ]
    catalog = parse_catalog_lines(lines)
    assert catalog.alternatives[0].title == "Alpha"
    assert catalog.alternatives[1].title is None
    path = tmp_path / "t.jsonl"
    dump_catalog(catalog, path)
    again = load_catalog(path)
    assert again.alternatives[0].title == "Alpha"


def test_blank_lines_skipped():
    lines = ["", json.dumps({"id": "a", "features": [1.0]}), "   "]
    assert len(parse_catalog_lines(lines)) == 1


def test_malformed_json_reports_all_lines():
    lines = ["not json", json.dumps({"id": "a", "features": [1.0]}), "{broken"]
    with pytest.raises(IngestionError) as err:
        parse_catalog_lines(lines)
    assert err.value.line_numbers == (1, 3)


def test_missing_features_rejected():
    with pytest.raises(IngestionError):
        parse_catalog_lines([json.dumps({"id": "a"})])


def test_empty_catalog_rejected():
    with pytest.raises(IngestionError):
        parse_catalog_lines([])


def test_question_from_indices(rng):
    catalog = synthetic_catalog(5, np.zeros(2), np.eye(2), seed=1)
    q = catalog.question([3, 0])
    assert [a.id for a in q.alternatives] == ["syn-00003", "syn-00000"]


def test_catalog_rejects_mixed_dimensions():
    from preflearn.belief import Alternative

    with pytest.raises(InvalidArgumentError):
        Catalog((Alternative("a", [1.0]), Alternative("b", [1.0, 2.0])))
