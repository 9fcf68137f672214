"""Canonical JSON, config hashing, atomic writes."""

import json

import numpy as np
import pytest

from gkslmap.serialize import (
    FormatError,
    atomic_write_text,
    canonical_dumps,
    config_hash,
    matrix_from_doc,
    matrix_to_doc,
)


def test_canonical_dumps_is_sorted_and_compact():
    s = canonical_dumps({"b": 1, "a": [1.5, True, None]})
    assert s == '{"a":[1.5,true,null],"b":1}'


def test_canonical_dumps_handles_numpy_scalars():
    doc = {"x": np.float64(0.1), "n": np.int64(3), "flag": np.bool_(True), "v": np.arange(3)}
    assert json.loads(canonical_dumps(doc)) == {"x": 0.1, "n": 3, "flag": True, "v": [0, 1, 2]}


def test_canonical_dumps_rejects_nan():
    with pytest.raises(ValueError):
        canonical_dumps({"x": float("nan")})


def test_config_hash_is_stable_and_order_insensitive():
    h1 = config_hash({"T": 2.0, "steps": 400})
    h2 = config_hash({"steps": 400, "T": 2.0})
    assert h1 == h2
    assert len(h1) == 16
    assert h1 != config_hash({"T": 2.0, "steps": 401})


def test_matrix_doc_round_trip(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    back = matrix_from_doc(matrix_to_doc(a))
    assert np.array_equal(back, a)


def test_matrix_doc_errors_name_the_field():
    with pytest.raises(FormatError) as err:
        matrix_from_doc({"entries": []}, "hermitian[2].operator")
    assert "hermitian[2].operator.dim" in str(err.value)
    with pytest.raises(FormatError, match="entries"):
        matrix_from_doc({"dim": 2, "entries": [[0.0, 0.0]]})
    with pytest.raises(FormatError) as err:
        matrix_from_doc({"dim": 1, "entries": [[0.0, "x"]]})
    assert "entries[0]" in str(err.value)
    with pytest.raises(FormatError):
        matrix_to_doc(np.zeros((2, 3)))


def test_atomic_write_creates_parents_and_replaces(tmp_path):
    target = tmp_path / "nested" / "out.json"
    atomic_write_text(str(target), "first")
    atomic_write_text(str(target), "second")
    assert target.read_text() == "second"
    leftovers = [p for p in (tmp_path / "nested").iterdir() if p.name != "out.json"]
    assert leftovers == []
