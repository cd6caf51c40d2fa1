"""
tests/test_exchange.py — file formats in kaczlab/services/exchange.py.

All files go to pytest's tmp_path.
"""
import numpy as np
import pytest

from kaczlab.errors import DimensionMismatchError
from kaczlab.models.preconditioner import SketchedPreconditioner
from kaczlab.services.exchange import (
    export_problem,
    load_preconditioner,
    read_matrix_market,
    read_pgm,
    read_sidecar,
    read_vector,
    save_preconditioner,
    write_image_csv,
    write_matrix_market,
    write_pgm,
    write_sidecar,
    write_vector,
)
from kaczlab.services.precond import build_sketched_preconditioner
from kaczlab.services.sampling import RngStream
from kaczlab.services.tomography import gen_parallel_tomo, shepp_logan_phantom


@pytest.mark.parametrize("coordinate", [False, True])
def test_matrix_market_preserves_values(tmp_path, gaussian, coordinate):
    a = gaussian(7, 4, seed=3)
    a[2] = 0.0
    path = write_matrix_market(tmp_path / "A.mtx", a, coordinate=coordinate)
    header = path.read_text().splitlines()[0]
    assert ("coordinate" if coordinate else "array") in header
    assert np.array_equal(read_matrix_market(path), a)


def test_coordinate_format_stores_only_nonzeros(tmp_path):
    a = np.zeros((50, 50))
    a[3, 7] = 1.5
    path = write_matrix_market(tmp_path / "sparse.mtx", a, coordinate=True)
    body = [line for line in path.read_text().splitlines() if not line.startswith("%")]
    assert body[0].split() == ["50", "50", "1"]
    assert len(body) == 2


def test_vector_file_is_exact(tmp_path, gaussian):
    v = gaussian(9, seed=4)
    path = write_vector(tmp_path / "b.txt", v)
    assert len(path.read_text().splitlines()) == 9
    assert np.array_equal(read_vector(path), v)


def test_single_value_vector(tmp_path):
    path = write_vector(tmp_path / "one.txt", np.array([0.1]))
    assert read_vector(path).shape == (1,)


def test_pgm_scales_to_maxval(tmp_path):
    phantom = shepp_logan_phantom(16)
    path = write_pgm(tmp_path / "p.pgm", phantom)
    lines = path.read_text().splitlines()
    assert lines[:3] == ["P2", "16 16", "255"]
    grey = read_pgm(path)
    assert grey.shape == (16, 16)
    assert grey.max() == 255
    assert grey[0, 0] == 0


def test_pgm_of_blank_image(tmp_path):
    grey = read_pgm(write_pgm(tmp_path / "blank.pgm", np.zeros((3, 5))))
    assert grey.shape == (3, 5)
    assert not grey.any()


def test_pgm_rejects_vectors(tmp_path):
    with pytest.raises(DimensionMismatchError):
        write_pgm(tmp_path / "bad.pgm", np.zeros(5))


def test_image_csv(tmp_path):
    image = shepp_logan_phantom(8).pixels
    path = write_image_csv(tmp_path / "img.csv", image)
    assert np.array_equal(np.loadtxt(path, delimiter=","), image)


def test_sidecar_values(tmp_path):
    path = write_sidecar(
        tmp_path / "x.meta",
        {"name": 'quote " and \\', "count": 3, "ratio": 0.1, "flag": True, "ids": [1, 2], "skip": None},
    )
    values = read_sidecar(path)
    assert values == {"name": 'quote " and \\', "count": 3, "ratio": 0.1, "flag": True, "ids": [1, 2]}


def test_preconditioner_files(tmp_path, small_source):
    p = build_sketched_preconditioner(small_source, 2.0, RngStream(1, 1))
    mtx, meta = save_preconditioner(p, tmp_path / "precond")
    assert mtx.suffix == ".mtx" and meta.suffix == ".meta"
    loaded = load_preconditioner(tmp_path / "precond")
    assert np.array_equal(loaded.p, p.p)
    assert loaded.meta() == p.meta()


def test_identity_preconditioner_files(tmp_path):
    save_preconditioner(SketchedPreconditioner.identity(3), tmp_path / "eye")
    loaded = load_preconditioner(tmp_path / "eye")
    assert np.array_equal(loaded.p, np.eye(3))
    assert loaded.r == 0 and loaded.indices == ()


def test_export_random_problem(tmp_path, small_problem):
    out = export_problem(small_problem, tmp_path / "random")
    assert np.array_equal(read_matrix_market(out / "A.mtx"), small_problem.a)
    assert np.array_equal(read_vector(out / "b.txt"), small_problem.b)
    assert np.array_equal(read_vector(out / "x_star.txt"), small_problem.x_star)
    meta = read_sidecar(out / "problem.meta")
    assert meta["kind"] == "random"
    assert (meta["rows"], meta["cols"]) == (120, 6)
    assert meta["consistent"] is True


def test_export_tomography_problem(tmp_path):
    problem = gen_parallel_tomo(8, n_angles=6)
    out = export_problem(problem, tmp_path / "tomo", coordinate=True)
    assert np.array_equal(read_matrix_market(out / "A.mtx"), problem.a)
    meta = read_sidecar(out / "problem.meta")
    assert meta["zero_rows"] == problem.metadata["zero_rows"]
    assert meta["q"] == 8
