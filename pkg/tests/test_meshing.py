import numpy as np
import pytest
from numpy.testing import assert_allclose

from hardyspec import (Annulus, ConvexPolygon, Disc, Interval, StripSpec,
                       Torus, axisymmetric_reduce, build_mesh_1d,
                       build_trimesh, mesh_1d_with_level, refine_mesh_1d,
                       refine_trimesh, restrict_to_strip)
from hardyspec.errors import (InvalidGrading, MeshGenerationFailure,
                              NotATorus, StripTooThin)
from hardyspec.meshing import DIRICHLET, format_mesh_text

UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_uniform_1d_nodes():
    mesh = build_mesh_1d(Interval(0, 1), 4, 1.0)
    assert_allclose(mesh.nodes, [0, 0.25, 0.5, 0.75, 1])


def test_graded_1d_nodes():
    mesh = build_mesh_1d(Interval(0, 1), 4, 0.5)
    assert_allclose(mesh.nodes, [0, 1 / 6, 0.5, 5 / 6, 1], atol=1e-15)


def test_two_elements_any_grading():
    for g in (0.2, 0.7, 1.0):
        mesh = build_mesh_1d(Interval(0, 1), 2, g)
        assert_allclose(mesh.nodes, [0, 0.5, 1])


def test_invalid_grading():
    with pytest.raises(InvalidGrading):
        build_mesh_1d(Interval(0, 1), 4, 0.0)
    with pytest.raises(InvalidGrading):
        build_mesh_1d(Interval(0, 1), 4, 1.5)
    with pytest.raises(InvalidGrading):
        build_mesh_1d(Interval(0, 1), 5, 0.5)  # odd count cannot be symmetric
    with pytest.raises(InvalidGrading):
        # 2048 geometric layers per side underflow float64 near x = 1
        build_mesh_1d(Interval(0, 1), 4096, 0.15)


def test_graded_size_ratio_exact():
    n, g = 16, 0.6
    mesh = build_mesh_1d(Interval(0, 1), n, g)
    sizes = mesh.element_sizes()
    ratio = sizes.max() / sizes.min()
    assert ratio == pytest.approx(g ** (1 - n // 2), rel=1e-12)


def test_element_measures_sum():
    mesh = build_mesh_1d(Interval(-1, 2), 32, 0.3)
    assert mesh.total_measure() == pytest.approx(3.0, rel=1e-12)


def test_structured_square():
    mesh = build_trimesh(ConvexPolygon(UNIT_SQUARE), 0.25, 1.0)
    assert len(mesh.triangles) == 32
    assert_allclose(mesh.areas(), 1 / 32)
    assert mesh.total_measure() == pytest.approx(1.0, rel=1e-12)


def test_disc_triangle_count_band():
    mesh = build_trimesh(Disc((0, 0), 1.0), 0.2, 1.0)
    target = np.pi / (0.5 * 0.2**2)
    assert 0.5 * target <= len(mesh.triangles) <= 2 * target


def test_graded_boundary_diameter():
    mesh = build_trimesh(ConvexPolygon(UNIT_SQUARE), 0.25, 0.25)
    touching = [t for t in mesh.triangles if np.any(mesh.node_d[t] < 1e-12)]
    for t in touching:
        p = mesh.points[t]
        diam = max(np.linalg.norm(p[0] - p[1]), np.linalg.norm(p[1] - p[2]),
                   np.linalg.norm(p[2] - p[0]))
        assert diam <= 0.0625 * np.sqrt(2) + 1e-12


def test_mesh_too_coarse():
    with pytest.raises(MeshGenerationFailure):
        build_trimesh(Disc((0, 0), 1.0), 0.9, 1.0)


def test_areas_positive_and_boundary_distance():
    for dom, h in ((Disc((0.5, 0.5), 1.0), 0.1),
                   (Annulus((0, 0), 0.5, 1.0), 0.08),
                   (ConvexPolygon([(0, 0), (2, 0), (3, 1), (1, 2)]), 0.2)):
        mesh = build_trimesh(dom, h, 1.0)
        assert np.all(mesh.areas() > 0)
        boundary_nodes = sorted({i for i, j, _ in mesh.boundary_edges}
                                | {j for _, j, _ in mesh.boundary_edges})
        assert np.all(mesh.node_d[boundary_nodes] < 1e-12)


def test_area_sum_within_tolerance():
    # straight boundaries are exact, curved ones carry the polygonal defect
    square = build_trimesh(ConvexPolygon(UNIT_SQUARE), 0.1, 1.0)
    assert abs(square.total_measure() - 1.0) < 1e-6
    disc = build_trimesh(Disc((0, 0), 1.0), 0.05, 1.0)
    assert abs(disc.total_measure() / np.pi - 1) < 1e-3
    ann = build_trimesh(Annulus((0, 0), 0.5, 1.0), 0.05, 1.0)
    assert abs(ann.total_measure() / (np.pi * 0.75) - 1) < 1e-3


def test_restrict_two_components():
    mesh = build_mesh_1d(Interval(0, 1), 64, 0.85)
    sub = restrict_to_strip(mesh, StripSpec(0.0, 0.25))
    bary = sub.barycenters()
    d = np.minimum(bary, 1 - bary)
    assert np.all(d < 0.25)
    # two disjoint pieces on either side of the removed core
    assert max(sub.nodes) > 0.75 and min(sub.nodes) < 0.25
    # clamped: endpoints plus both interface nodes
    clamped_x = sorted(sub.nodes[i] for i in sub.dirichlet_nodes())
    assert clamped_x[0] == 0.0 and clamped_x[-1] == 1.0
    interface = [x for x in clamped_x if 0 < x < 1]
    assert len(interface) == 2
    assert interface[0] == pytest.approx(0.25, abs=0.08)
    assert interface[1] == pytest.approx(0.75, abs=0.08)


def test_restrict_whole_mesh():
    mesh = build_mesh_1d(Interval(0, 1), 64, 0.85)
    sub = restrict_to_strip(mesh, StripSpec(0.0, 0.5))
    assert len(sub.elements) == 64
    # the midpoint sits on the inner interface and is clamped
    mid = int(np.argmin(np.abs(sub.nodes - 0.5)))
    assert sub.node_tags.get(mid) == DIRICHLET


def test_strip_too_thin():
    mesh = build_mesh_1d(Interval(0, 1), 16, 1.0)
    with pytest.raises(StripTooThin):
        restrict_to_strip(mesh, StripSpec(0.0, 0.01))


def test_strip_nesting():
    mesh = build_mesh_1d(Interval(0, 1), 128, 0.85)
    inner = restrict_to_strip(mesh, StripSpec(0.0, 0.125))
    outer = restrict_to_strip(mesh, StripSpec(0.0, 0.25))
    inner_elems = {(round(mesh_x, 14), round(mesh_y, 14))
                   for mesh_x, mesh_y in inner.nodes[inner.elements]}
    outer_elems = {(round(mesh_x, 14), round(mesh_y, 14))
                   for mesh_x, mesh_y in outer.nodes[outer.elements]}
    assert inner_elems <= outer_elems


def test_restrict_trimesh():
    mesh = build_trimesh(Disc((0, 0), 1.0), 0.05, 1.0)
    sub = restrict_to_strip(mesh, StripSpec(0.0, 0.3))
    d = np.maximum(mesh.domain.distance_many(sub.barycenters()), 0)
    assert np.all(d < 0.3)
    assert np.all(sub.areas() > 0)
    inner = [i for i, t in sub.node_tags.items()
             if t == DIRICHLET and sub.node_d[i] > 0.2]
    assert inner  # the cut interface is clamped


def test_mesh_with_level_has_exact_node():
    mesh = mesh_1d_with_level(Interval(0, 1), 0.25, 32, 0.5)
    assert 0.25 in mesh.nodes
    assert 0.75 in mesh.nodes
    assert mesh.nodes[0] == 0.0 and mesh.nodes[-1] == 1.0


def test_refine_1d_nested():
    mesh = build_mesh_1d(Interval(0, 1), 8, 0.5)
    fine = refine_mesh_1d(mesh)
    assert len(fine.elements) == 16
    assert set(np.round(mesh.nodes, 15)) <= set(np.round(fine.nodes, 15))
    assert fine.node_tags[0] == DIRICHLET


def test_refine_trimesh_quadruples():
    mesh = build_trimesh(ConvexPolygon(UNIT_SQUARE), 0.25, 1.0)
    fine = refine_trimesh(mesh)
    assert len(fine.triangles) == 4 * len(mesh.triangles)
    assert fine.total_measure() == pytest.approx(1.0, rel=1e-12)
    assert np.all(fine.areas() > 0)


def test_refine_trimesh_snaps_curved_boundary():
    mesh = build_trimesh(Disc((0, 0), 1.0), 0.2, 1.0)
    fine = refine_trimesh(mesh)
    boundary_nodes = sorted({i for i, j, _ in fine.boundary_edges}
                            | {j for _, j, _ in fine.boundary_edges})
    assert np.all(fine.node_d[boundary_nodes] < 1e-12)


def test_axisymmetric_reduce():
    torus = Torus(3.0, 1.0)
    disc, weight, potential = axisymmetric_reduce(torus, 0)
    assert isinstance(disc, Disc)
    assert_allclose(disc.center, [3.0, 0.0])
    assert disc.radius == 1.0
    assert potential.is_zero()
    assert_allclose(weight.evaluate({"r": np.array([2.5])}), [2.5])

    _, _, pot2 = axisymmetric_reduce(torus, 2)
    assert_allclose(pot2.evaluate({"r": np.array([2.0])}), [1.0])  # 4 / r^2


def test_axisymmetric_distance_consistency():
    torus = Torus(3.0, 1.0)
    disc, _, _ = axisymmetric_reduce(torus, 0)
    assert disc.distance([3.5, 0.0]) == pytest.approx(torus.distance([3.5, 0, 0]))
    rng = np.random.RandomState(0)
    pts = rng.uniform([2.2, -0.7], [3.8, 0.7], size=(50, 2))
    inside = disc.distance_many(pts) > 0
    for r, z in pts[inside]:
        p3 = [r * np.cos(0.7), r * np.sin(0.7), z]
        assert disc.distance([r, z]) == pytest.approx(torus.distance(p3), abs=1e-12)


def test_not_a_torus():
    with pytest.raises(NotATorus):
        axisymmetric_reduce(Disc((0, 0), 1.0), 0)


def test_axisymmetric_reduction_self_consistent():
    # the weighted cross-section problem converges at the P1 rate, so the
    # reduction is internally consistent across nested resolutions
    from hardyspec import FormSpec, assemble_pencil, smallest_eigenpairs
    disc, weight, _ = axisymmetric_reduce(Torus(3.0, 1.0), 0)
    mesh = build_trimesh(disc, 0.25, 1.0)
    vals = []
    for level in range(3):
        if level:
            mesh = refine_trimesh(mesh)
        pencil = assemble_pencil(mesh, FormSpec(a=1.0, q=0.0), 1.0,
                                 measure_weight=weight)
        vals.append(smallest_eigenpairs(pencil, 1).eigenvalues[0])
    rate = np.log2((vals[0] - vals[1]) / (vals[1] - vals[2]))
    assert 1.8 <= rate <= 2.2


def test_mesh_text_format():
    mesh = build_mesh_1d(Interval(0, 1), 4, 1.0)
    text = format_mesh_text(mesh)
    lines = text.strip().split("\n")
    dim, n_nodes, n_el, n_bnd = map(int, lines[0].split())
    assert (dim, n_nodes, n_el, n_bnd) == (1, 5, 4, 2)
    assert float(lines[1]) == 0.0
    tri = build_trimesh(ConvexPolygon(UNIT_SQUARE), 0.25, 1.0)
    text2 = format_mesh_text(tri)
    head = text2.split("\n", 1)[0].split()
    assert head[0] == "2"
