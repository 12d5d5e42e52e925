import numpy as np
import pytest
from nbmarkov.distributions import make_stream
from nbmarkov.errors import SeriesFormatError
from nbmarkov.process import ModelParams
from nbmarkov.series_io import params_from_result, read_result, read_series, write_result, write_series
from nbmarkov.simulate import ExponentialArrivals, simulate_path


def write(tmp_path, text, name="series.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_series_round_trip(tmp_path):
    series = simulate_path(make_stream(0), ModelParams(r=2.0, q=0.5, c=0.5), ExponentialArrivals(rate=0.5, n=50))
    path = write_series(series, str(tmp_path / "out" / "series.csv"))
    back = read_series(path)
    np.testing.assert_allclose(back.times, series.times, rtol=1e-15)
    np.testing.assert_array_equal(back.counts, series.counts)


def test_read_accepts_integral_floats(tmp_path):
    series = read_series(write(tmp_path, "time,count\n0,1\n1.5,3.0\n"))
    assert series.counts.tolist() == [1, 3]


@pytest.mark.parametrize("text,line", [
    ("time,count\n0,1\n1,-2\n", 3),
    ("time,count\n0,1\n2,1\n1,1\n", 4),
    ("time,count\n0,1.5\n", 2),
    ("time,count\n0,abc\n", 2),
    ("time,count\nx,1\n", 2),
    ("time,count\n0,1\n1,\n", 3),
    ("when,count\n0,1\n", 1),
    ("", 1),
    ("time,count\n0,3\n1,4,9\n2,5\n", 3),
    ("time,count\n0,3,9\n", 2),
    ("time,count\n0,1\n\n1,-2\n", 4),
    ("time,count\n0,1\n\n\n2,1\n1,1\n", 6),
])
def test_read_reports_line_numbers(tmp_path, text, line):
    with pytest.raises(SeriesFormatError, match=f"line {line}:") as info:
        read_series(write(tmp_path, text))
    assert info.value.line == line


def test_read_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_series(str(tmp_path / "nope.csv"))


def test_result_round_trip(tmp_path):
    values = {"r_hat": 2.0330000000000004, "q_hat": 0.4963, "c_hat": 0.5085, "converged": True, "n_evals": 311}
    path = write_result(values, str(tmp_path / "fit.txt"))
    text = (tmp_path / "fit.txt").read_text()
    assert "r_hat = 2.0330000000000004\n" in text
    back = read_result(path)
    assert back["converged"] == "True"
    assert back["n_evals"] == "311"
    assert params_from_result(back) == ModelParams(r=2.0330000000000004, q=0.4963, c=0.5085)


def test_result_format_errors(tmp_path):
    with pytest.raises(SeriesFormatError, match="line 2"):
        read_result(write(tmp_path, "r_hat = 1.0\nbroken\n", "fit.txt"))
    with pytest.raises(SeriesFormatError):
        params_from_result({"r_hat": "1.0"})


def test_read_skips_blank_lines(tmp_path):
    series = read_series(write(tmp_path, "time,count\n0,1\n\n1,2\n\n"))
    assert series.counts.tolist() == [1, 2]
