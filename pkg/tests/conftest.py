import numpy as np
import pytest

from normal_forge import CameraIntrinsics, PlaneScene, SphereScene, synth_plane, synth_sphere


@pytest.fixture
def intr():
    return CameraIntrinsics(fx=500.0, fy=500.0, xo=320.0, yo=240.0)


@pytest.fixture
def simple_intr():
    return CameraIntrinsics(fx=100.0, fy=100.0, xo=320.0, yo=240.0)


@pytest.fixture
def slanted_plane(intr):
    """Generic visible plane with center depth 10 m."""
    scene = PlaneScene(normal=(0.0, -0.8, -0.6), d=6.0, width=640, height=480, intrinsics=intr)
    return scene, synth_plane(scene)


@pytest.fixture
def sphere_scene(intr):
    scene = SphereScene(center=(0.0, 0.0, 10.0), radius=2.0, width=640, height=480, intrinsics=intr)
    return scene, synth_sphere(scene)


def angle_between(u, v):
    """Rotation-angle form, accurate near 0 and pi."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    return np.arctan2(cross, dot)
