import numpy as np
import pytest

from tenfill import (DenseTensor, ObservationSet, TnsBoundsError, TnsDataError,
                     TnsFormatError, load_tns, random_cp_tensor, write_tns)


class TestLoadTns:
    def test_minimal_file(self, tmp_path):
        p = tmp_path / "one.tns"
        p.write_text("3\n2 2 2\n1 1 1 5.0\n")
        obs = load_tns(p)
        assert obs.dims == (2, 2, 2)
        assert list(obs.entries()) == [((1, 1, 1), 5.0)]

    def test_duplicate_index_names_line(self, tmp_path):
        p = tmp_path / "dup.tns"
        p.write_text("3\n2 2 2\n1 1 1 5.0\n1 1 1 6.0\n")
        with pytest.raises(TnsDataError, match="line 4") as err:
            load_tns(p)
        assert err.value.line == 4

    def test_malformed_line_number(self, tmp_path):
        p = tmp_path / "bad.tns"
        p.write_text("2\n2 2\n1 1 1.0\n1 two 2.0\n")
        with pytest.raises(TnsFormatError, match="line 4"):
            load_tns(p)

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "fields.tns"
        p.write_text("2\n2 2\n1 1 1 1.0\n")
        with pytest.raises(TnsFormatError, match="line 3"):
            load_tns(p)

    def test_out_of_declared_bounds(self, tmp_path):
        p = tmp_path / "oob.tns"
        p.write_text("2\n2 2\n3 1 1.0\n")
        with pytest.raises(TnsBoundsError, match="line 3"):
            load_tns(p)

    def test_dense_materialization_requires_full_cover(self, tmp_path):
        p = tmp_path / "partial.tns"
        p.write_text("2\n2 2\n1 1 1.0\n")
        with pytest.raises(TnsDataError, match="dense"):
            load_tns(p, as_dense=True)

    def test_dense_materialization(self, tmp_path):
        p = tmp_path / "full.tns"
        p.write_text("2\n2 2\n1 1 1.0\n1 2 2.0\n2 1 3.0\n2 2 4.0\n")
        t = load_tns(p, as_dense=True)
        assert isinstance(t, DenseTensor)
        assert t.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]

    def test_missing_header(self, tmp_path):
        p = tmp_path / "empty.tns"
        p.write_text("3\n")
        with pytest.raises(TnsFormatError):
            load_tns(p)


class TestRoundTrip:
    def test_dense_bitwise(self, tmp_path):
        _, truth = random_cp_tensor((5, 4, 3), 2, seed=17)
        p = tmp_path / "t.tns"
        write_tns(p, truth)
        back = load_tns(p, as_dense=True)
        assert np.array_equal(back.values, truth.values)

    def test_observations_bitwise(self, tmp_path):
        rng = np.random.default_rng(3)
        vals = rng.standard_normal(6) * 10.0 ** rng.integers(-8, 8, size=6)
        obs = ObservationSet((3, 4), [(1, 1), (1, 4), (2, 2), (2, 3), (3, 1), (3, 4)],
                             vals)
        p = tmp_path / "o.tns"
        write_tns(p, obs)
        back = load_tns(p)
        assert np.array_equal(back.values, obs.values)
        assert np.array_equal(back.indices, obs.indices)

    def test_write_is_deterministic(self, tmp_path):
        _, truth = random_cp_tensor((4, 4), 2, seed=9)
        p1, p2 = tmp_path / "a.tns", tmp_path / "b.tns"
        write_tns(p1, truth)
        write_tns(p2, truth)
        assert p1.read_bytes() == p2.read_bytes()

    def test_dense_entry_count(self, tmp_path):
        _, truth = random_cp_tensor((30, 30, 15), 3, seed=7)
        p = tmp_path / "big.tns"
        write_tns(p, truth)
        lines = p.read_text().splitlines()
        assert len(lines) == 2 + 30 * 30 * 15
