import numpy as np
import pytest

from sevensins.covariance import Verdict, diagnose
from sevensins.dataio import format_returns, parse_covariance, parse_returns, parse_vector, read_returns
from sevensins.errors import DataFormatError
from sevensins.fixtures import ill_conditioned_q, load_synthetic_returns, synthetic_returns
from sevensins.linalg import eigh


class TestParseReturns:
    def test_basic(self):
        s = parse_returns("date,a,b\n2020-01-01,0.01,-0.02\n2020-01-02,0.0,0.03\n")
        assert s.assets == ["a", "b"] and s.dates == ["2020-01-01", "2020-01-02"]
        np.testing.assert_array_equal(s.sample.values, [[0.01, -0.02], [0.0, 0.03]])

    def test_crlf(self):
        s = parse_returns("date,a\r\n2020-01-01,0.5\r\n")
        assert s.sample.values.tolist() == [[0.5]]

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "when,a\n2020-01-01,1\n",
            "date,a\n2020-01-01,1,2\n",
            "date,a\n01/02/2020,1\n",
            "date,a\n2020-01-01,abc\n",
            "date,a\n2020-01-01,nan\n",
            "date,a\n",
        ],
    )
    def test_malformed(self, text):
        with pytest.raises(DataFormatError):
            parse_returns(text)

    def test_round_trip(self):
        series = synthetic_returns(periods=20)
        again = parse_returns(format_returns(series))
        assert again.dates == series.dates and again.assets == series.assets
        assert again.sample.values.tobytes() == series.sample.values.tobytes()

    def test_invalid_utf8(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_bytes(b"date,a\n2020-01-01,\xff\n")
        with pytest.raises(DataFormatError):
            read_returns(path)


class TestParseCovariance:
    def test_basic(self):
        assert parse_covariance("0.2,0.1\n0.1,0.2\n").entries.tolist() == [[0.2, 0.1], [0.1, 0.2]]

    @pytest.mark.parametrize("text", ["1,2\n2\n", "1,2\n3,1\n", "", "1,x\nx,1\n"])
    def test_malformed(self, text):
        with pytest.raises(DataFormatError):
            parse_covariance(text)


class TestParseVector:
    def test_broadcast(self):
        np.testing.assert_array_equal(parse_vector("0.5", 3), [0.5, 0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(DataFormatError):
            parse_vector("1,2", 3)


class TestFixtures:
    def test_bundled_file_matches_generator(self):
        bundled, fresh = load_synthetic_returns(), synthetic_returns()
        assert bundled.dates == fresh.dates
        assert bundled.sample.values.tobytes() == fresh.sample.values.tobytes()

    def test_ill_conditioned_spectrum(self):
        np.testing.assert_allclose(eigh(ill_conditioned_q()).eigenvalues, [0.04, 0.01, 4e-9], rtol=1e-6, atol=1e-15)
        assert diagnose(ill_conditioned_q()).verdict is Verdict.NEAR_SINGULAR
