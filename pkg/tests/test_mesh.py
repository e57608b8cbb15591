"""Tests for mesh generation, mesh files and sample shells."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from rcbf_sim.mesh import (
    ellipsoid_mu,
    estimate_semi_axes,
    fibonacci_sphere,
    generate_ellipsoid_mesh,
    load_mesh,
    mesh_spacing,
    report_spacing,
    shell_samples,
    write_mesh,
)


def test_unit_sphere_points_have_unit_norm() -> None:
    points = generate_ellipsoid_mesh((1.0, 1.0, 1.0), 300)

    assert np.linalg.norm(points, axis=1) == pytest.approx(np.ones(300), abs=1e-12)


def test_ellipsoid_points_lie_on_surface() -> None:
    axes = np.array([16000.0, 8000.0, 8000.0])

    points = generate_ellipsoid_mesh(axes, 500)

    assert points.shape == (500, 3)
    assert np.all(np.abs(points) <= axes + 1e-9)
    assert np.sum((points / axes) ** 2, axis=1) == pytest.approx(np.ones(500))


def test_mesh_generation_is_deterministic() -> None:
    assert np.array_equal(generate_ellipsoid_mesh((3, 2, 1), 50), generate_ellipsoid_mesh((3, 2, 1), 50))


def test_mesh_generation_validates_input() -> None:
    with pytest.raises(ValueError):
        generate_ellipsoid_mesh((1.0, 1.0, 1.0), 3)
    with pytest.raises(ValueError):
        generate_ellipsoid_mesh((1.0, -1.0, 1.0), 10)


def test_spacing_shrinks_with_more_points() -> None:
    coarse = mesh_spacing(fibonacci_sphere(200))
    fine = mesh_spacing(fibonacci_sphere(2000))
    typical = math.sqrt(4 * math.pi / 2000)

    assert fine < coarse
    assert 0.5 * typical < fine < 2.0 * typical


def test_spacing_of_known_points() -> None:
    points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])

    assert mesh_spacing(points) == pytest.approx(2.0)


def test_report_spacing_warns_about_gaps(caplog: pytest.LogCaptureFixture) -> None:
    points = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]])

    with caplog.at_level("WARNING", logger="rcbf_sim.mesh"):
        spacing = report_spacing(points, rho=1.0)

    assert spacing == pytest.approx(10.0)
    assert "do not overlap" in caplog.text


def test_load_mesh_skips_comments_and_faces(fixtures_dir: Path) -> None:
    vertices = load_mesh(fixtures_dir / "tiny_mesh.txt")

    assert vertices.shape == (7, 3)
    assert vertices[4] == pytest.approx([0.0, 0.0, 8000.0])
    assert estimate_semi_axes(vertices) == pytest.approx([16000.0, 8000.0, 8000.0])


def test_written_mesh_loads_back(tmp_path: Path) -> None:
    points = generate_ellipsoid_mesh((100.0, 50.0, 25.0), 20)

    path = write_mesh(points, tmp_path / "mesh" / "body.obj", comment="test body")

    assert path.read_text(encoding="utf-8").startswith("# test body\n")
    assert load_mesh(path) == pytest.approx(points, abs=1e-6)


def test_load_mesh_errors(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "missing.txt")

    short = tmp_path / "short.txt"
    short.write_text("v 0 0 0\nv 1 0 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_mesh(short)

    broken = tmp_path / "broken.txt"
    broken.write_text("v 0 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_mesh(broken)


def test_ellipsoid_mass_parameter() -> None:
    expected = 6.674e-11 * 2670.0 * 4.0 / 3.0 * math.pi * 16000.0 * 8000.0 * 8000.0

    assert ellipsoid_mu((16000.0, 8000.0, 8000.0)) == pytest.approx(expected)
    assert expected == pytest.approx(7.643e5, rel=1e-3)


def test_shell_samples_layout() -> None:
    samples = shell_samples(10.0, 20.0, n_radii=3, n_directions=40, times=(0.0, 5.0), center=(1.0, 0.0, 0.0))

    assert len(samples) == 3 * 40 * 2
    radii = np.linalg.norm(samples.x[:, :3] - [1.0, 0.0, 0.0], axis=1)
    assert radii.min() == pytest.approx(10.0)
    assert radii.max() == pytest.approx(20.0)
    assert not np.any(samples.x[:, 3:])
    assert sorted(set(samples.t.tolist())) == [0.0, 5.0]


def test_shell_samples_validate_radii() -> None:
    with pytest.raises(ValueError):
        shell_samples(0.0, 1.0)
    with pytest.raises(ValueError):
        shell_samples(2.0, 1.0)


@pytest.mark.parametrize("line", ["nan 0 0", "v 1 inf 0", "-inf 2 3"])
def test_load_mesh_rejects_non_finite_vertices(tmp_path: Path, line: str) -> None:
    path = tmp_path / "bad.txt"
    path.write_text("v 1 0 0\nv 0 1 0\nv 0 0 1\nv 1 1 1\n" + line + "\n", encoding="utf-8")

    with pytest.raises(ValueError, match="non-finite"):
        load_mesh(path)
