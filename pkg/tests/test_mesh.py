import numpy as np
import pytest
from numpy.testing import assert_allclose

from faultslip.mesh import (Geometry, Mesh, element_geometry, generate_mesh,
                            initial_damage, make_grid)


def expected_counts(level):
    nx, ny = 9 * 2**level, 8 * 2**level
    return 4 * nx * ny, (nx + 1) * (ny + 1) + nx * ny


def test_published_counts_level2(geometry):
    mesh = generate_mesh(geometry, 2)
    assert mesh.n_elements == 4608
    assert mesh.n_nodes == 2373


@pytest.mark.parametrize("level", range(5))
def test_count_formulas(geometry, level):
    mesh = generate_mesh(geometry, level)
    n_tri, n_nodes = expected_counts(level)
    assert mesh.n_elements == n_tri
    assert mesh.n_nodes == n_nodes
    assert mesh.level == level


def test_level0_and_level3_counts(geometry):
    assert (generate_mesh(geometry, 0).n_elements,
            generate_mesh(geometry, 0).n_nodes) == (288, 162)
    assert (generate_mesh(geometry, 3).n_elements,
            generate_mesh(geometry, 3).n_nodes) == (18432, 9353)


def test_positive_areas_and_total_area(geometry):
    for level in (0, 2):
        mesh = generate_mesh(geometry, level)
        assert np.all(mesh.areas > 0)
        assert_allclose(mesh.areas.sum(), geometry.width * geometry.height,
                        rtol=1e-12)


def test_boundary_edges_fully_classified(geometry):
    mesh = generate_mesh(geometry, 1)
    edges = {}
    for tri in mesh.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            edges[key] = edges.get(key, 0) + 1
    boundary = {e for e, count in edges.items() if count == 1}
    dirichlet = set(mesh.dirichlet_nodes)
    neumann = {(min(a, b), max(a, b)) for a, b in mesh.neumann_edges}
    w, h = geometry.width, geometry.height
    for a, b in boundary:
        ya, yb = mesh.nodes[a, 1], mesh.nodes[b, 1]
        xa, xb = mesh.nodes[a, 0], mesh.nodes[b, 0]
        on_plates = (ya == yb) and ya in (0.0, h)
        on_sides = (xa == xb) and xa in (0.0, w)
        assert on_plates != on_sides
        if on_plates:
            assert a in dirichlet and b in dirichlet
            assert (a, b) not in neumann
        else:
            assert (a, b) in neumann
    assert len(neumann) == len(mesh.neumann_edges)


def test_dirichlet_contains_corners(geometry):
    mesh = generate_mesh(geometry, 0)
    d = set(mesh.dirichlet_nodes)
    for x in (0.0, geometry.width):
        for y in (0.0, geometry.height):
            corner = np.flatnonzero((mesh.nodes[:, 0] == x)
                                    & (mesh.nodes[:, 1] == y))
            assert corner[0] in d


def test_element_geometry_reference_triangle(reference_triangle):
    area, grads = element_geometry(reference_triangle, 0)
    assert_allclose(area, 0.5)
    assert_allclose(grads, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
                    atol=1e-15)


def test_basis_gradients_partition_of_unity(geometry):
    mesh = generate_mesh(geometry, 0)
    assert_allclose(mesh.grads.sum(axis=1), 0.0, atol=1e-15)


def test_element_geometry_translation_invariant(geometry):
    mesh = make_grid(geometry, 2, 2)
    shifted = Mesh(nodes=mesh.nodes + [123.0, -45.0],
                   triangles=mesh.triangles,
                   dirichlet_nodes=mesh.dirichlet_nodes,
                   neumann_edges=mesh.neumann_edges)
    assert_allclose(shifted.areas, mesh.areas, rtol=1e-12)
    assert_allclose(shifted.grads, mesh.grads, rtol=1e-9, atol=1e-18)


def test_degenerate_element_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        Mesh(nodes=np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]),
             triangles=np.array([[0, 1, 2]]),
             dirichlet_nodes=np.array([], dtype=int),
             neumann_edges=np.empty((0, 2), dtype=int))


def test_initial_damage_stripe(geometry):
    mesh = generate_mesh(geometry, 2)
    zeta = initial_damage(mesh, geometry)
    center = np.flatnonzero(
        (mesh.nodes[:, 0] == geometry.width / 2)
        & (mesh.nodes[:, 1] == geometry.height / 2))[0]
    assert zeta[center] == 0.5
    top = np.flatnonzero(mesh.nodes[:, 1] == geometry.height)
    assert np.all(zeta[top] == 1.0)
    assert set(np.unique(zeta)) == {0.5, 1.0}
    inside = np.abs(mesh.nodes[:, 1] - geometry.height / 2) \
        < geometry.damaged_stripe_height / 2
    assert np.array_equal(zeta == 0.5, inside)


def test_initial_damage_empty_stripe():
    geom = Geometry(damaged_stripe_height=0.0)
    mesh = generate_mesh(geom, 0)
    assert np.all(initial_damage(mesh, geom) == 1.0)


def test_free_mask(geometry):
    mesh = generate_mesh(geometry, 0)
    mask = mesh.free_mask()
    assert mask.sum() == 2 * (mesh.n_nodes - len(mesh.dirichlet_nodes))
    assert not mask[2 * mesh.dirichlet_nodes[0]]


def test_invalid_inputs(geometry):
    with pytest.raises(ValueError):
        generate_mesh(geometry, -1)
    with pytest.raises(ValueError):
        make_grid(geometry, 0, 3)
    with pytest.raises(ValueError):
        Geometry(damaged_stripe_height=30.0, fault_stripe_height=20.0)
    with pytest.raises(ValueError):
        Geometry(fault_stripe_height=120.0)
    with pytest.raises(ValueError):
        Geometry(width=-1.0)
