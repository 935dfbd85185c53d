import numpy as np
import pytest

from ontofit.geometry import Pose, random_rotation
from ontofit.templates import Instance, get_template


def random_instance(tid: str, rng: np.random.Generator,
                    lo: float = 0.05, hi: float = 5.0,
                    translation: float = 1.0) -> Instance:
    """In-bounds instance with log-uniform params and a uniform random pose.

    Ring tubes are capped below the major radius so the torus stays embedded.
    """
    tpl = get_template(tid)
    p = np.exp(rng.uniform(np.log(lo), np.log(hi), size=tpl.n_params))
    if tid == "ring":
        p[1] = min(p[1], 0.6 * p[0])
    if tid == "handle":
        p[1] = min(p[1], 0.6 * p[0])
    if tid == "lever":
        p[3] = max(p[3], 0.3 * p[0])
    pose = Pose(random_rotation(rng), rng.uniform(-translation, translation, 3))
    return Instance(tid, tpl.schema.project(p), pose)


def pose_allclose(a: Pose, b: Pose, tol: float = 1e-9) -> bool:
    return bool(np.allclose(a.as_affine(), b.as_affine(), atol=tol, rtol=0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
