import numpy as np
import pytest

from shellkoop.io import atomic_write_text, dumps_17g, fmt_float, read_dataset, write_dataset
from shellkoop.traffic import TrafficConfig, generate_dataset


class TestFloatFormat:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(0)
        for x in rng.uniform(-1e6, 1e6, 200):
            assert float(fmt_float(float(x))) == float(x)
        for x in (0.1, 1e-300, 1e300, -0.0, 6928.137):
            assert float(fmt_float(x)) == x

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            fmt_float(float("nan"))
        with pytest.raises(ValueError):
            fmt_float(float("inf"))

    def test_dumps_is_valid_json(self):
        import json

        obj = {"a": 1, "b": [0.1, True, None, "s"], "c": {"d": np.float64(2.5)}}
        text = dumps_17g(obj)
        assert json.loads(text) == {"a": 1, "b": [0.1, True, None, "s"], "c": {"d": 2.5}}


class TestDatasetFile:
    def test_round_trip(self, tmp_path, toy_shell, budget, toy_dataset):
        path = str(tmp_path / "toy.jsonl")
        write_dataset(
            path, toy_dataset.snapshots, toy_shell, budget, toy_dataset.dt_s,
            toy_dataset.buffer_pkts,
        )
        snaps, shell, budget2, dt_s, buffer_b = read_dataset(path)
        assert shell == toy_shell
        assert budget2 == budget
        assert dt_s == toy_dataset.dt_s
        assert buffer_b == toy_dataset.buffer_pkts
        assert len(snaps) == len(toy_dataset.snapshots)
        for got, want in zip(snaps, toy_dataset.snapshots):
            assert got.t == want.t
            assert np.array_equal(got.x, want.x)
            assert got.edges == want.edges
            assert np.array_equal(got.mask, want.mask)

    def test_bit_exact_reserialization(self, tmp_path, toy_shell, budget, toy_dataset):
        p1 = str(tmp_path / "a.jsonl")
        p2 = str(tmp_path / "b.jsonl")
        write_dataset(p1, toy_dataset.snapshots, toy_shell, budget, 60.0, 1000.0)
        snaps, shell, budget2, dt_s, buffer_b = read_dataset(p1)
        write_dataset(p2, snaps, shell, budget2, dt_s, buffer_b)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_same_seed_byte_identical(self, tmp_path, toy_shell, budget):
        cfg = TrafficConfig(seed=5)
        paths = []
        for name in ("x.jsonl", "y.jsonl"):
            ds = generate_dataset(toy_shell, cfg, budget, 15, 0.5)
            p = str(tmp_path / name)
            write_dataset(p, ds.snapshots, toy_shell, budget, cfg.dt_s, cfg.buffer_pkts)
            paths.append(p)
        assert open(paths[0], "rb").read() == open(paths[1], "rb").read()

    def test_atomic_write_replaces(self, tmp_path):
        p = str(tmp_path / "f.txt")
        atomic_write_text(p, "one")
        atomic_write_text(p, "two")
        assert open(p).read() == "two"
        assert list(tmp_path.iterdir()) == [tmp_path / "f.txt"]
