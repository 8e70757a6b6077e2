import numpy as np
import pytest

from qthermo import _parallel


def test_chunk_bounds_cover_range():
    b = _parallel.chunk_bounds(10, 4)
    assert b == [(0, 4), (4, 8), (8, 10)]
    assert _parallel.chunk_bounds(0, 4) == []


def test_resolve_workers_env_fallback(monkeypatch):
    monkeypatch.delenv(_parallel.WORKERS_ENV, raising=False)
    assert _parallel.resolve_workers(None) == 1
    monkeypatch.setenv(_parallel.WORKERS_ENV, "3")
    assert _parallel.resolve_workers(None) == 3
    assert _parallel.resolve_workers(2) == 2
    with pytest.raises(ValueError):
        _parallel.resolve_workers(0)


def test_chunk_rng_is_keyed_by_seed_and_chunk():
    a = _parallel.chunk_rng(5, 2).random(4)
    b = _parallel.chunk_rng(5, 2).random(4)
    c = _parallel.chunk_rng(5, 3).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        _parallel.chunk_rng(-1, 0)


def test_map_chunks_order_independent_of_workers():
    def fn(chunk, start, stop):
        return (chunk, start, stop, _parallel.chunk_rng(7, chunk).random())

    one = _parallel.map_chunks(fn, 50, workers=1, chunk_size=8)
    many = _parallel.map_chunks(fn, 50, workers=4, chunk_size=8)
    assert one == many
    assert [c for c, *_ in one] == list(range(7))
