"""Surface point sets for rotating bodies and the sample sets used to bound a_max."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .rcbf import StateSamples

logger = logging.getLogger(__name__)

GRAVITATIONAL_CONSTANT = 6.674e-11
ASTEROID_DENSITY = 2670.0
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors, shape ``(n, 3)``."""

    if n < 1:
        raise ValueError("need at least one direction")
    i = np.arange(n, dtype=float)
    z = 1.0 - 2.0 * (i + 0.5) / n
    radius = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = GOLDEN_ANGLE * i
    return np.column_stack((radius * np.cos(phi), radius * np.sin(phi), z))


def generate_ellipsoid_mesh(semi_axes: Sequence[float], n_points: int) -> np.ndarray:
    """Fibonacci-sphere points stretched onto an ellipsoid; deterministic."""

    axes = np.asarray(semi_axes, dtype=float).reshape(-1)
    if axes.shape != (3,) or np.any(axes <= 0):
        raise ValueError(f"semi_axes must be three positive lengths, got {semi_axes!r}")
    if n_points < 4:
        raise ValueError("an ellipsoid mesh needs at least 4 points")
    return fibonacci_sphere(int(n_points)) * axes


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_mesh(path: Path | str) -> np.ndarray:
    """Read vertices from a plain text file.

    Each vertex is a line ``x y z`` or ``v x y z``. Blank lines, ``#`` comments
    and other records (``f ...``, ``vn ...``) are skipped. Vertex lines with
    ``nan`` or ``inf`` coordinates are rejected.
    """

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Mesh file not found: {path}")
    vertices = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "v":
            parts = parts[1:]
        elif not _is_number(parts[0]):
            continue
        if len(parts) < 3:
            raise ValueError(f"{path}:{lineno}: expected three coordinates")
        try:
            vertices.append([float(p) for p in parts[:3]])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    mesh = np.array(vertices, dtype=float).reshape(-1, 3)
    if len(mesh) < 4:
        raise ValueError(f"{path}: a mesh needs at least 4 vertices, found {len(mesh)}")
    if not np.all(np.isfinite(mesh)):
        raise ValueError(f"{path}: non-finite vertex coordinates")
    return mesh


def write_mesh(vertices: np.ndarray, path: Path | str, comment: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for x, y, z in np.asarray(vertices, dtype=float):
            fh.write(f"v {x:.6f} {y:.6f} {z:.6f}\n")
    return path


def mesh_spacing(vertices: np.ndarray) -> float:
    """Largest nearest-neighbour distance among the vertices."""

    vertices = np.asarray(vertices, dtype=float)
    if len(vertices) < 2:
        raise ValueError("spacing needs at least two vertices")
    dist, _ = cKDTree(vertices).query(vertices, k=2)
    return float(dist[:, 1].max())


def report_spacing(vertices: np.ndarray, rho: float) -> float:
    """Log the spacing and warn when the keep-out spheres leave gaps."""

    spacing = mesh_spacing(vertices)
    if spacing >= 2.0 * rho:
        logger.warning("mesh spacing %.1f m >= 2*rho = %.1f m; keep-out spheres do not overlap", spacing, 2 * rho)
    else:
        logger.info("mesh: %d vertices, max nearest-neighbour spacing %.1f m", len(vertices), spacing)
    return spacing


def estimate_semi_axes(vertices: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(vertices, dtype=float)).max(axis=0)


def ellipsoid_mu(semi_axes: Sequence[float], density: float = ASTEROID_DENSITY) -> float:
    """Gravitational parameter of a uniform ellipsoid."""

    a, b, c = (float(v) for v in semi_axes)
    return GRAVITATIONAL_CONSTANT * density * 4.0 / 3.0 * math.pi * a * b * c


def shell_samples(
    r_min: float,
    r_max: float,
    n_radii: int = 8,
    n_directions: int = 200,
    times: Sequence[float] = (0.0,),
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> StateSamples:
    """Positions on concentric spheres around ``center`` at each of ``times``.

    Velocities are zero; the a_max bound depends on position and time only.
    """

    if not 0 < r_min <= r_max:
        raise ValueError("need 0 < r_min <= r_max")
    radii = np.linspace(r_min, r_max, max(int(n_radii), 1))
    dirs = fibonacci_sphere(n_directions)
    positions = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3) + np.asarray(center, dtype=float)
    times = np.asarray(times, dtype=float).reshape(-1)
    t = np.repeat(times, len(positions))
    x = np.hstack((np.tile(positions, (len(times), 1)), np.zeros((len(t), 3))))
    return StateSamples(t, x)
