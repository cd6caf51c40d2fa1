"""
File formats for matrices, vectors, images and
preconditioners.

  *.mtx      Matrix Market, array (dense) or coordinate (sparse) variant
  *.txt      plain vectors, one value per line, 17 significant digits
  *.pgm      ASCII PGM (P2) greyscale image, 8-bit
  *.csv      image as comma-separated rows
  *.meta     ``key = value`` sidecar (TOML subset: scalars and flat lists)
"""
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import scipy.io
import scipy.sparse

from kaczlab.errors import DimensionMismatchError
from kaczlab.models.preconditioner import SketchedPreconditioner
from kaczlab.models.problem import GeneratedProblem, PhantomImage
from kaczlab.services.numerics import DenseMatrix, Vector, as_matrix, as_vector

log = logging.getLogger(__name__)

REAL_FORMAT = "%.17g"


# ── Matrix Market ─────────────────────────────────────────────────────────────

def write_matrix_market(path: str | os.PathLike, a: DenseMatrix, coordinate: bool = False) -> Path:
    """Write *a* as Matrix Market; ``coordinate=True`` stores only non-zeros."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = scipy.sparse.coo_matrix(a) if coordinate else np.asarray(a, dtype=np.float64)
    scipy.io.mmwrite(str(path), data, precision=17)
    return path


def read_matrix_market(path: str | os.PathLike) -> DenseMatrix:
    """Read either Matrix Market variant into a dense float64 array."""
    data = scipy.io.mmread(str(path))
    if scipy.sparse.issparse(data):
        data = data.toarray()
    return as_matrix(np.asarray(data, dtype=np.float64), str(path))


# ── Vectors and images ────────────────────────────────────────────────────────

def write_vector(path: str | os.PathLike, v: Vector) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(v, dtype=np.float64).reshape(-1), fmt=REAL_FORMAT)
    return path


def read_vector(path: str | os.PathLike) -> Vector:
    return as_vector(np.atleast_1d(np.loadtxt(path, dtype=np.float64)), str(path))


def write_image_csv(path: str | os.PathLike, image: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(image, dtype=np.float64), fmt=REAL_FORMAT, delimiter=",")
    return path


def write_pgm(path: str | os.PathLike, image: PhantomImage | np.ndarray, maxval: int = 255) -> Path:
    """
    ASCII PGM of an image scaled so that its largest value maps to *maxval*.
    Negative values are clipped to 0.
    """
    pixels = image.pixels if isinstance(image, PhantomImage) else np.asarray(image, dtype=np.float64)
    if pixels.ndim != 2:
        raise DimensionMismatchError(f"image must be 2-D, got shape {pixels.shape}")
    peak = float(pixels.max()) if pixels.size else 0.0
    scaled = np.zeros(pixels.shape, dtype=np.int64)
    if peak > 0:
        scaled = np.rint(np.clip(pixels, 0.0, None) / peak * maxval).astype(np.int64)
    rows, cols = pixels.shape
    lines = ["P2", f"{cols} {rows}", str(maxval)]
    lines += [" ".join(str(v) for v in row) for row in scaled]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read an ASCII PGM back as integer grey levels."""
    tokens = [
        tok
        for line in Path(path).read_text(encoding="ascii").splitlines()
        for tok in line.split("#", 1)[0].split()
    ]
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM file")
    cols, rows = int(tokens[1]), int(tokens[2])
    values = np.array([int(t) for t in tokens[4:4 + rows * cols]], dtype=np.int64)
    return values.reshape(rows, cols)


# ── key = value sidecars ──────────────────────────────────────────────────────

def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        # repr() spells nan/inf the way TOML does
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    text = str(getattr(value, "value", value))
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_sidecar(path: str | os.PathLike, values: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = "".join(f"{key} = {_format_value(value)}\n" for key, value in values.items() if value is not None)
    path.write_text(body, encoding="utf-8")
    return path


def read_sidecar(path: str | os.PathLike) -> dict[str, Any]:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


# ── Preconditioners ───────────────────────────────────────────────────────────

def save_preconditioner(p: SketchedPreconditioner, stem: str | os.PathLike) -> tuple[Path, Path]:
    """Write ``<stem>.mtx`` (array) and ``<stem>.meta``; returns both paths."""
    stem = Path(stem)
    mtx = write_matrix_market(stem.with_suffix(".mtx"), p.p)
    meta = write_sidecar(
        stem.with_suffix(".meta"),
        {
            "gamma": p.gamma,
            "r": p.r,
            "indices": list(p.indices),
            "used_pseudoinverse": p.used_pseudoinverse,
            "build_seconds": p.build_seconds,
        },
    )
    log.info("Preconditioner saved: %s", mtx)
    return mtx, meta


def load_preconditioner(stem: str | os.PathLike) -> SketchedPreconditioner:
    stem = Path(stem)
    p = read_matrix_market(stem.with_suffix(".mtx"))
    meta = read_sidecar(stem.with_suffix(".meta"))
    return SketchedPreconditioner(
        p=p,
        gamma=float(meta["gamma"]),
        r=int(meta["r"]),
        indices=tuple(int(i) for i in meta.get("indices", [])),
        used_pseudoinverse=bool(meta["used_pseudoinverse"]),
        build_seconds=float(meta["build_seconds"]),
    )


# ── Problems ──────────────────────────────────────────────────────────────────

def export_problem(problem: GeneratedProblem, out_dir: str | os.PathLike, coordinate: bool = False) -> Path:
    """Write A.mtx, b.txt, x_star.txt (when known) and problem.meta into *out_dir*."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out / "A.mtx", problem.a, coordinate=coordinate)
    write_vector(out / "b.txt", problem.b)
    if problem.x_star is not None:
        write_vector(out / "x_star.txt", problem.x_star)
    meta = {"kind": problem.kind.value, "rows": problem.shape[0], "cols": problem.shape[1],
            "consistent": problem.consistent, **problem.metadata}
    write_sidecar(out / "problem.meta", meta)
    log.info("Problem %s (%d×%d) exported to %s", problem.kind.value, *problem.shape, out)
    return out
