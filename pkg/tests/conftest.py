import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from splatloc.lie import exp_se3
from splatloc.render import Camera
from splatloc.scene import GaussianScene, SynthSpec, synth_room

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_scene(rng, n, degree=0, background=None):
    """Gaussians scattered 2-5 m in front of an identity camera."""
    centers = rng.uniform([-1.5, -1.0, 2.0], [1.5, 1.0, 5.0], size=(n, 3))
    scales = rng.uniform(0.05, 0.35, size=(n, 3))
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    op = rng.uniform(0.2, 0.95, size=n)
    k = (degree + 1) ** 2
    sh = rng.normal(scale=0.5, size=(n, k, 3))
    sh[:, 1:] *= 0.3
    bg = rng.uniform(0, 1, 3) if background is None else background
    return GaussianScene(centers, scales, q, op, sh, bg, degree)


def small_camera(pose=None, size=64, f=60.0):
    return Camera(f, f, size / 2, size / 2, size, size, pose if pose is not None else exp_se3(np.zeros(6)))


@pytest.fixture(scope="session")
def room():
    scene, cams = synth_room(SynthSpec(), 0)
    return scene, cams


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
