import json
import math

import numpy as np
import pytest

from mlfczo.grid import Grid, GridFunction
from mlfczo.serialize import dump_json, load_grid_function, save_grid_function, to_jsonable, write_csv


@pytest.mark.parametrize("fmt", ["bin", "csv"])
@pytest.mark.parametrize("n", [1, 2])
def test_round_trip_bit_exact(tmp_path, fmt, n):
    g = Grid.make(n, -1.0, 2.0, 8)
    v = np.random.default_rng(0).normal(size=g.shape) * 1e-7 + 1 / 3
    f = GridFunction(g, v)
    save_grid_function(f, tmp_path / "f", fmt)
    back = load_grid_function(tmp_path / "f")
    assert back.grid == g
    assert np.array_equal(back.values.view(np.uint64), f.values.view(np.uint64))


def test_bad_format(tmp_path):
    with pytest.raises(ValueError):
        save_grid_function(Grid.make(1, 0.0, 1.0, 4).zeros(), tmp_path / "f", "npy")


def test_to_jsonable_non_finite():
    out = to_jsonable({"a": math.inf, "b": [-math.inf, math.nan], "c": np.float64(1.5), "d": np.bool_(True)})
    assert out == {"a": "inf", "b": ["-inf", "nan"], "c": 1.5, "d": True}


def test_dump_json_deterministic(tmp_path):
    dump_json({"b": 1, "a": [0.1, 2]}, tmp_path / "x.json")
    dump_json({"a": [0.1, 2], "b": 1}, tmp_path / "y.json")
    assert (tmp_path / "x.json").read_bytes() == (tmp_path / "y.json").read_bytes()
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": [0.1, 2], "b": 1}


def test_write_csv_repr_floats(tmp_path):
    write_csv(tmp_path / "sub" / "t.csv", ["x"], [[0.1 + 0.2]])
    assert (tmp_path / "sub" / "t.csv").read_text().splitlines()[1] == repr(0.1 + 0.2)
