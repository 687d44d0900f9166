import numpy as np
import pytest

from fkneuro.geometry import (
    Connectome,
    generate_connectome,
    generate_structured_mesh,
    slab_atlas,
    slab_labeler,
)


def logistic(t, c0, alpha):
    e = np.exp(alpha * np.asarray(t, dtype=float))
    return c0 * e / (1.0 - c0 + c0 * e)


def scalar_euler_semi_implicit(c0, alpha, dt, n_steps):
    """Independent 1x1 reduction of the mesh update (brute-force oracle)."""
    out = [c0]
    c = c0
    for _ in range(n_steps):
        c = c / (1.0 - dt * alpha * (1.0 - c))
        out.append(c)
    return np.array(out)


def scalar_cn_extrapolated(c0, alpha, dt, n_steps, literal_rhs=False):
    """Independent 1x1 reduction of the graph update (brute-force oracle)."""
    out = [c0]
    prev = curr = c0
    sign = -1.0 if literal_rhs else 1.0
    for _ in range(n_steps):
        r = alpha * dt * (1.0 - 0.5 * (3.0 * curr - prev))
        nxt = curr * (2.0 + sign * r) / (2.0 - r)
        prev, curr = curr, nxt
        out.append(nxt)
    return np.array(out)


@pytest.fixture(scope="session")
def unit_square_mesh():
    return generate_structured_mesh(2, 1, 1.0)


@pytest.fixture(scope="session")
def square_mesh_4():
    return generate_structured_mesh(2, 4, 1.0)


@pytest.fixture(scope="session")
def slab_mesh():
    return generate_structured_mesh(2, 8, 40.0, labeler=slab_labeler(5, 40.0))


@pytest.fixture(scope="session")
def atlas5():
    return slab_atlas()


@pytest.fixture(scope="session")
def chain5():
    return generate_connectome(5, topology="chain")


@pytest.fixture()
def triangle_graph():
    # three nodes, all pairwise weights exactly 1 (k * n / l = 1)
    return Connectome(
        region_ids=np.array([1, 2, 3]),
        coords=np.zeros((3, 3)),
        volumes=np.ones(3),
        edges=[(0, 1, 5.0, 5.0), (1, 2, 5.0, 5.0), (0, 2, 5.0, 5.0)],
        scale_k=1.0,
    )


def edgeless_graph(n):
    return Connectome(
        region_ids=np.arange(1, n + 1),
        coords=np.zeros((n, 3)),
        volumes=np.ones(n),
        edges=[],
        scale_k=1.0,
    )
