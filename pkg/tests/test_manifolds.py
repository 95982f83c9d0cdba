import math

import numpy as np
import pytest

from fbmflow import (
    ManifoldError,
    ManifoldMesh,
    gram_hadamard_check,
    gram_volume,
    hausdorff_measure,
    make_manifold,
    measure_curve,
)

RNG = np.random.Generator(np.random.Philox(key=31337))

# circumference of the ellipse with semi-axes (2, 1): 8 E(3/4), frozen
ELLIPSE_CIRCUMFERENCE = 9.688448220547675


def identity_track(mesh: ManifoldMesh, steps: int) -> np.ndarray:
    eye = np.tile(np.eye(mesh.n), (mesh.point_count, 1, 1))
    return np.tile(eye, (steps + 1, 1, 1, 1))


def random_rotation(n: int) -> np.ndarray:
    q, r = np.linalg.qr(RNG.normal(size=(n, n)))
    q *= np.sign(np.diag(r))
    return q


# ---------------------------------------------------------------------------
# reference measures of the built-in meshes
# ---------------------------------------------------------------------------


def test_circle_weights_are_exact():
    mesh = make_manifold("circle", 1000, radius=1.5)
    assert mesh.m == 1 and mesh.n == 2
    assert mesh.point_count == 1000
    assert mesh.reference_measure == pytest.approx(2.0 * math.pi * 1.5, rel=1e-13)
    radii = np.linalg.norm(mesh.points, axis=1)
    assert np.allclose(radii, 1.5, atol=1e-12)
    # unit tangents orthogonal to the radius
    assert np.allclose(np.linalg.norm(mesh.frames[:, 0], axis=1), 1.0, atol=1e-12)
    assert np.allclose(np.sum(mesh.frames[:, 0] * mesh.points, axis=1), 0.0, atol=1e-12)


def test_segment_weights_are_exact():
    mesh = make_manifold("segment", 64, length=3.0)
    assert mesh.reference_measure == pytest.approx(3.0, rel=1e-13)
    assert np.all((mesh.points[:, 0] > 0.0) & (mesh.points[:, 0] < 3.0))


def test_torus_weights_are_exact():
    mesh = make_manifold("torus", 600, major_radius=2.0, minor_radius=1.0)
    assert mesh.reference_measure == pytest.approx(8.0 * math.pi**2, rel=1e-12)


def test_sphere_weights_match_area():
    mesh = make_manifold("sphere", 2000, radius=1.0)
    assert mesh.reference_measure == pytest.approx(4.0 * math.pi, rel=1.5e-3)
    finer = make_manifold("sphere", 20000, radius=1.0)
    defect = abs(finer.reference_measure - 4.0 * math.pi)
    assert defect < abs(mesh.reference_measure - 4.0 * math.pi)


@pytest.mark.parametrize("kind", ["circle", "sphere", "torus", "segment"])
def test_frames_are_orthonormal(kind):
    mesh = make_manifold(kind, 300)
    gram = np.einsum("pij,pkj->pik", mesh.frames, mesh.frames)
    assert np.allclose(gram, np.eye(mesh.m), atol=1e-10)


def test_ambient_embedding_pads_zeros():
    mesh = make_manifold("circle", 100, ambient_dim=4)
    assert mesh.points.shape == (100, 4)
    assert np.all(mesh.points[:, 2:] == 0.0)
    jac = np.tile(np.eye(4), (100, 1, 1))
    assert hausdorff_measure(mesh, jac) == pytest.approx(2.0 * math.pi, rel=1e-12)


# ---------------------------------------------------------------------------
# gram volumes
# ---------------------------------------------------------------------------


def test_gram_volume_golden():
    rows = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    assert gram_volume(rows) == pytest.approx(1.0, rel=1e-14)


def test_gram_volume_scaling():
    rows = RNG.normal(size=(2, 3))
    assert gram_volume(3.0 * rows) == pytest.approx(9.0 * gram_volume(rows), rel=1e-10)


def test_gram_volume_batched():
    batch = RNG.normal(size=(5, 2, 3))
    out = gram_volume(batch)
    assert out.shape == (5,)
    for i in range(5):
        assert out[i] == pytest.approx(gram_volume(batch[i]), rel=1e-12)


def test_gram_volume_shape_check():
    with pytest.raises(ManifoldError):
        gram_volume(np.ones(3))


def test_hadamard_bound_fuzz():
    for m, n in ((1, 2), (2, 3), (3, 3)):
        frames = RNG.normal(size=(10_000, m, n)) * RNG.uniform(0.01, 100.0)
        assert gram_hadamard_check(frames)


# ---------------------------------------------------------------------------
# pushforward measures
# ---------------------------------------------------------------------------


def test_identity_pushforward_preserves_measure():
    mesh = make_manifold("circle", 500)
    jac = np.tile(np.eye(2), (500, 1, 1))
    assert hausdorff_measure(mesh, jac) == pytest.approx(mesh.reference_measure, rel=1e-12)


def test_measure_is_rotation_invariant():
    mesh = make_manifold("circle", 500)
    q = random_rotation(2)
    jac = np.tile(q, (500, 1, 1))
    assert hausdorff_measure(mesh, jac) == pytest.approx(mesh.reference_measure, rel=1e-12)
    sphere = make_manifold("sphere", 800)
    jac = np.tile(random_rotation(3), (sphere.point_count, 1, 1))
    assert hausdorff_measure(sphere, jac) == pytest.approx(sphere.reference_measure, rel=1e-12)


def test_anisotropic_stretch_gives_ellipse_circumference():
    mesh = make_manifold("circle", 1000)
    jac = np.tile(np.diag([2.0, 1.0]), (1000, 1, 1))
    assert hausdorff_measure(mesh, jac) == pytest.approx(ELLIPSE_CIRCUMFERENCE, rel=1e-9)


def test_uniform_scaling_multiplies_area_by_square():
    sphere = make_manifold("sphere", 1000)
    jac = np.tile(2.0 * np.eye(3), (sphere.point_count, 1, 1))
    assert hausdorff_measure(sphere, jac) == pytest.approx(
        4.0 * sphere.reference_measure, rel=1e-12
    )


def test_measure_evaluation_is_deterministic():
    mesh = make_manifold("torus", 400)
    jac = RNG.normal(size=(mesh.point_count, 3, 3))
    assert hausdorff_measure(mesh, jac) == hausdorff_measure(mesh, jac)


def test_measure_curve_flat_for_identity_track():
    mesh = make_manifold("circle", 200)
    times = np.array([0.0, 0.5, 1.0])
    curve = measure_curve(mesh, identity_track(mesh, 2), times)
    assert curve.initial == pytest.approx(mesh.reference_measure, rel=1e-12)
    assert curve.sup == pytest.approx(mesh.reference_measure, rel=1e-12)
    assert np.ptp(curve.values) < 1e-12
    assert curve.point_count == 200 and curve.m == 1


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_make_manifold_validation():
    with pytest.raises(ManifoldError, match="unknown manifold kind"):
        make_manifold("klein", 100)
    with pytest.raises(ManifoldError, match="points"):
        make_manifold("circle", 1)
    with pytest.raises(ManifoldError, match="radius"):
        make_manifold("circle", 100, radius=-1.0)
    with pytest.raises(ManifoldError, match="minor_radius"):
        make_manifold("torus", 100, major_radius=1.0, minor_radius=2.0)
    with pytest.raises(ManifoldError, match="ambient_dim"):
        make_manifold("sphere", 100, ambient_dim=2)
    with pytest.raises(ManifoldError, match="unknown circle parameters"):
        make_manifold("circle", 100, twist=3)


def test_mesh_rejects_bad_frames():
    pts = np.zeros((4, 2))
    weights = np.ones(4)
    skewed = np.tile(np.array([[2.0, 0.0]]), (4, 1))[:, None, :]
    with pytest.raises(ManifoldError, match="orthonormal"):
        ManifoldMesh(kind="circle", m=1, n=2, points=pts, frames=skewed, weights=weights)
    good = np.tile(np.array([[1.0, 0.0]]), (4, 1))[:, None, :]
    with pytest.raises(ManifoldError, match="positive"):
        ManifoldMesh(kind="circle", m=1, n=2, points=pts, frames=good, weights=np.zeros(4))


def test_jacobian_shape_checked():
    mesh = make_manifold("circle", 100)
    with pytest.raises(ManifoldError, match="tangent map"):
        hausdorff_measure(mesh, np.zeros((99, 2, 2)))
    with pytest.raises(ManifoldError, match="jacobian track"):
        measure_curve(mesh, np.zeros((3, 100, 2)), np.zeros(3))


def test_mesh_arrays_are_frozen():
    mesh = make_manifold("circle", 16)
    with pytest.raises(ValueError):
        mesh.points[0, 0] = 5.0
    with pytest.raises(ValueError):
        mesh.weights[0] = 5.0
