import numpy as np

from hetbeliefs.pricing import mc_oracle_VT
from hetbeliefs.rng import chunk_size, map_chunks, path_generator, worker_count


class TestStreams:
    def test_same_key_same_stream(self):
        a = path_generator(7, 3).standard_normal(16)
        b = path_generator(7, 3).standard_normal(16)
        assert np.array_equal(a, b)

    def test_distinct_paths_distinct_streams(self):
        a = path_generator(7, 0).standard_normal(16)
        b = path_generator(7, 1).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_prefix_property(self):
        # a longer draw from the same stream starts with the shorter one
        a = path_generator(5, 2).standard_normal(8)
        b = path_generator(5, 2).standard_normal(32)
        assert np.array_equal(a, b[:8])


class TestWorkers:
    def test_worker_count_parsing(self, monkeypatch):
        monkeypatch.delenv("HETBELIEF_THREADS", raising=False)
        assert worker_count() == 1
        monkeypatch.setenv("HETBELIEF_THREADS", "4")
        assert worker_count() == 4
        monkeypatch.setenv("HETBELIEF_THREADS", "junk")
        assert worker_count() == 1
        monkeypatch.setenv("HETBELIEF_THREADS", "0")
        assert worker_count() == 1

    def test_map_chunks_order(self, monkeypatch):
        monkeypatch.setenv("HETBELIEF_THREADS", "3")
        out = map_chunks(lambda lo, hi: list(range(lo, hi)), 10, 3)
        assert out == [[0, 1, 2], [3, 4, 5], [6, 7, 8], [9]]

    def test_threaded_mc_byte_identical(self, monkeypatch, econ_j1):
        params, _, coeffs = econ_j1
        Z = np.zeros(2)
        monkeypatch.delenv("HETBELIEF_THREADS", raising=False)
        seq = mc_oracle_VT(coeffs, params, 0.25, Z, 0.3, n_paths=5000, seed=7, dt=1e-3)
        monkeypatch.setenv("HETBELIEF_THREADS", "4")
        par = mc_oracle_VT(coeffs, params, 0.25, Z, 0.3, n_paths=5000, seed=7, dt=1e-3)
        assert seq == par


class TestChunkSize:
    def test_caps(self):
        assert chunk_size(10) == 4096
        assert chunk_size(10_000_000) >= 1
        assert chunk_size(100_000, width=4) * 100_000 * 4 * 8 <= (1 << 28)
