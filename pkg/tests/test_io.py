import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_array_equal

from mmh.datagen import SphereLineSpec, gen_sphere_line
from mmh.errors import ManifoldTestError
from mmh.idim import LocalIdRecord, stratify
from mmh.io import export_labeled, load_cloud, save_cloud


class TestGenerator:
    def test_line_only(self):
        X = gen_sphere_line(SphereLineSpec(n_sphere=0, n_line=50))
        assert X.shape == (50, 3)
        assert np.all(X[:, 1:] == 0)

    def test_construction(self):
        spec = SphereLineSpec(seed=4)
        X = gen_sphere_line(spec)
        sphere, line = X[: spec.n_sphere], X[spec.n_sphere :]
        assert np.abs(np.linalg.norm(sphere, axis=1) - 0.5).max() <= 1e-12
        assert np.all((np.abs(line[:, 0]) >= 0.5) & (np.abs(line[:, 0]) <= 1.0))
        assert np.all(line[:, 1:] == 0)

    def test_defaults(self):
        assert gen_sphere_line().shape == (2513 + 193, 3)

    def test_deterministic(self):
        assert_array_equal(gen_sphere_line(SphereLineSpec(seed=9)), gen_sphere_line(SphereLineSpec(seed=9)))

    def test_area_uniform_sphere(self):
        X = gen_sphere_line(SphereLineSpec(area_uniform=True, n_line=0))
        # uniform on area: z is uniform on [-r, r]
        assert abs(np.mean(np.abs(X[:, 2]) < 0.25) - 0.5) < 0.05

    def test_interval_inside_ball(self):
        with pytest.raises(ManifoldTestError):
            SphereLineSpec(line_intervals=((-0.2, 0.8),))


class TestLoad:
    def test_xyz_axes(self, tmp_path):
        p = tmp_path / "axes.xyz"
        p.write_text("1 0 0\n0 1 0\n0 0 1\n")
        assert_array_equal(load_cloud(p), np.eye(3))

    def test_xyz_comments(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("# header\n1 2\n\n3 4\n")
        assert_array_equal(load_cloud(p), [[1, 2], [3, 4]])

    def test_csv_named_columns(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("id,x,y,z\n0,1,2,3\n1,4,5,6\n")
        assert_array_equal(load_cloud(p), [[1, 2, 3], [4, 5, 6]])

    def test_nan_row(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("1 2 3\n4 nan 6\n")
        with pytest.raises(ManifoldTestError) as err:
            load_cloud(p)
        assert err.value.code == "parse-error" and err.value.context["line"] == 2

    def test_ragged(self, tmp_path):
        p = tmp_path / "r.xyz"
        p.write_text("1 2 3\n4 5\n")
        with pytest.raises(ManifoldTestError) as err:
            load_cloud(p)
        assert err.value.code == "ragged-rows"

    def test_missing(self, tmp_path):
        with pytest.raises(ManifoldTestError) as err:
            load_cloud(tmp_path / "nope.csv")
        assert err.value.code == "missing-input" and "nope.csv" in str(err.value)

    def test_large_csv(self, tmp_path):
        X = np.random.default_rng(0).uniform(0, 1000, (87000, 3))
        p = tmp_path / "big.csv"
        save_cloud(X, p)
        assert load_cloud(p).shape == (87000, 3)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 4)),
              elements=st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)),
       st.sampled_from(["csv", "xyz"]))
def test_roundtrip_is_lossless(tmp_path_factory, X, fmt):
    p = tmp_path_factory.mktemp("rt") / f"cloud.{fmt}"
    save_cloud(X, p)
    assert_array_equal(load_cloud(p), X)


class TestExport:
    def test_labeled_roundtrip(self, tmp_path):
        X = np.random.default_rng(0).standard_normal((4, 2))
        recs = [LocalIdRecord(i, d, [], 0 if d else None, 0.5) for i, d in enumerate([1, 2, None, 1])]
        p = tmp_path / "lab.csv"
        export_labeled(X, recs, stratify(recs), p)
        assert_array_equal(load_cloud(p), X)
        rows = [line.split(",") for line in p.read_text().splitlines()]
        assert rows[0] == ["x1", "x2", "idim", "lex_code", "energy", "stratum"]
        assert [r[2] for r in rows[1:]] == ["1", "2", "-1", "1"]
        assert rows[3][5] == "-1"

    def test_coordinates_only(self, tmp_path):
        X = np.arange(6.0).reshape(3, 2)
        p = tmp_path / "plain.csv"
        export_labeled(X, None, None, p)
        assert p.read_text().splitlines()[0] == "x1,x2"

    def test_sphere_line_labels(self, tmp_path, sphere_line, sphere_line_records):
        p = tmp_path / "sl.csv"
        export_labeled(sphere_line, sphere_line_records, stratify(sphere_line_records), p)
        idim = np.loadtxt(p, delimiter=",", skiprows=1, usecols=3)
        assert set(idim.astype(int)) == {1, 2, 3}
