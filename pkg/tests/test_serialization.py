import math
from dataclasses import dataclass
from fractions import Fraction as F

import numpy as np
import pytest

from dyadic_disc.serialization import csv_cell, dumps, format_float, loads, to_csv, to_plain


def test_format_float():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(2.0) == "2.0"
    assert format_float(1e300) == "1.0000000000000001e+300"
    assert format_float(math.inf) == '"inf"'
    assert format_float(-0.0) == "-0.0"


def test_rationals_keep_exact_form():
    text = dumps({"x": F(1, 3), "n": F(4, 1)})
    assert '"rational": "1/3"' in text
    assert '"n": 4' in text
    back = loads(text)
    assert back == {"x": F(1, 3), "n": 4}


def test_round_trip_nested():
    obj = {"a": [1, 2.5, F(-7, 8)], "b": {"c": None, "d": True, "e": math.inf}, "f": []}
    assert loads(dumps(obj)) == obj


@dataclass
class Rec:
    a: int
    b: float


def test_to_plain_handles_numpy_and_dataclasses():
    out = to_plain({"arr": np.array([1, 2]), "x": np.float64(0.5), "ok": np.bool_(True), "r": Rec(1, 2.0)})
    assert out == {"arr": [1, 2], "x": 0.5, "ok": True, "r": {"a": 1, "b": 2.0}}
    assert type(out["x"]) is float


def test_dumps_is_deterministic_and_rejects_unknown_types():
    obj = {"z": [F(1, 2)] * 20, "y": "text"}
    assert dumps(obj) == dumps(obj)
    with pytest.raises(TypeError):
        dumps({"bad": object()})


def test_csv():
    assert csv_cell(F(3, 4)) == "3/4"
    assert csv_cell(True) == "true"
    assert csv_cell(None) == ""
    assert csv_cell(math.inf) == "inf"
    text = to_csv([{"q": 1.0, "v": F(1, 2)}, {"q": 2.0}], ["q", "v"])
    assert text == "q,v\n1.0,1/2\n2.0,\n"
