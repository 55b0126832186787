import numpy as np
import pytest

from learnware.data import Dataset, format_csv, parse_csv, read_csv, write_csv
from learnware.errors import InputError


def test_roundtrip_with_labels(tmp_path, rng):
    d = Dataset(rng.normal(size=(5, 3)), np.array([0, 1, 2, 1, 0]))
    write_csv(d, tmp_path / "d.csv")
    back = read_csv(tmp_path / "d.csv")
    assert back.X.tobytes() == d.X.tobytes()
    np.testing.assert_array_equal(back.y, d.y)
    assert format_csv(d).splitlines()[0] == "f0,f1,f2,label"


def test_real_labels_and_no_labels(rng):
    d = Dataset(rng.normal(size=(3, 2)), np.array([0.5, 1.0, -2.25]))
    back = parse_csv(format_csv(d))
    assert back.y.dtype == float
    np.testing.assert_array_equal(back.y, d.y)
    assert parse_csv(format_csv(Dataset(d.X))).y is None


@pytest.mark.parametrize(
    "text",
    ["", "a,b\n1,2\n", "f0,f1\n", "f0,f1\n1,2,3\n", "f0,f1\n1,x\n", "f0\nnan\n"],
)
def test_malformed(text):
    with pytest.raises(InputError):
        parse_csv(text)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        read_csv(tmp_path / "missing.csv")
