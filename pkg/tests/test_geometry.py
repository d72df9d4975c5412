import numpy as np
import pytest
from numpy.testing import assert_allclose

from hardyspec import (Annulus, ConvexPolygon, Disc, Interval, Torus,
                       superharmonicity_scan)
from hardyspec.errors import EmptyRegion, PointOutsideDomain

UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def test_interval_distance():
    iv = Interval(0, 1)
    assert iv.distance(0.3) == 0.3
    assert iv.distance(0.9) == pytest.approx(0.1)
    assert iv.distance(0.0) == 0.0


def test_disc_distance():
    disc = Disc((0, 0), 1.0)
    assert disc.distance([0.5, 0.0]) == 0.5


def test_point_outside_raises():
    with pytest.raises(PointOutsideDomain):
        Interval(0, 1).distance(1.5)
    with pytest.raises(PointOutsideDomain):
        Disc((0, 0), 1.0).distance([2.0, 0.0])


def test_torus_distance_against_boundary_sampling():
    # brute-force minimum over a dense boundary sample
    torus = Torus(3.0, 1.0)
    p = np.array([3.5, 0.0, 0.0])
    assert torus.distance(p) == pytest.approx(0.5, abs=1e-12)

    th = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
    ph = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    r = 3.0 + np.cos(pp)
    bx = r * np.cos(tt)
    by = r * np.sin(tt)
    bz = np.sin(pp)
    dmin = np.sqrt((bx - p[0]) ** 2 + (by - p[1]) ** 2 + (bz - p[2]) ** 2).min()
    assert abs(dmin - 0.5) < 1e-4


def test_interval_calculus():
    ev = Interval(0, 1).distance_calculus(0.3)
    assert ev.grad_d == 1.0
    assert ev.neg_laplacian_d == 0.0
    assert ev.provenance == "closed_form"
    assert not ev.near_ridge


def test_disc_calculus():
    ev = Disc((0, 0), 1.0).distance_calculus([0.5, 0.0])
    assert ev.neg_laplacian_d == pytest.approx(2.0)
    assert_allclose(ev.grad_d, [-1.0, 0.0], atol=1e-15)


def test_torus_neg_laplacian_closed_form():
    torus = Torus(3.0, 1.0)
    ev = torus.distance_calculus([3.5, 0.0, 0.0])
    assert ev.neg_laplacian_d == pytest.approx((2 * 3.5 - 3) / (3.5 * 0.5))
    fd = torus.distance_calculus([3.5, 0.0, 0.0], h=1e-4,
                                 method="finite_difference")
    assert abs(ev.neg_laplacian_d - fd.neg_laplacian_d) < 1e-6
    assert fd.provenance == "finite_difference"


def test_torus_closed_form_vs_fd_random_points():
    # agreement at 1e3 random interior points with d > 0.05; points too close
    # to the medial axis (the core circle) are excluded, since the fixed-step
    # second difference cannot resolve the 1/rho blowup there
    torus = Torus(3.0, 1.0)
    rng = np.random.RandomState(42)
    kept = 0
    while kept < 1000:
        r = rng.uniform(2.0, 4.0, 3000)
        z = rng.uniform(-1.0, 1.0, 3000)
        th = rng.uniform(0, 2 * np.pi, 3000)
        pts = np.column_stack([r * np.cos(th), r * np.sin(th), z])
        d = torus.distance_many(pts)
        pts = pts[(d > 0.05) & (d < 0.7)][: 1000 - kept]
        for p in pts:
            cf = torus.distance_calculus(p)
            fd = torus.distance_calculus(p, h=1e-4, method="finite_difference")
            assert abs(cf.neg_laplacian_d - fd.neg_laplacian_d) < 1e-5
            # central differences are O(h^2) with a curvature prefactor
            assert_allclose(cf.grad_d, fd.grad_d, atol=1e-6)
        kept += len(pts)


def test_eikonal_unit_gradient():
    domains = [Disc((0.5, -1.0), 2.0), Annulus((0, 0), 0.5, 1.5),
               ConvexPolygon(UNIT_SQUARE), Torus(3.0, 1.0)]
    rng = np.random.RandomState(3)
    for dom in domains:
        found = 0
        while found < 50:
            if dom.dim == 2:
                p = rng.uniform(-3, 3, 2)
            else:
                p = rng.uniform(-4.5, 4.5, 3)
            d = float(dom.distance_many(p[None])[0])
            if d <= 1e-3:
                continue
            ev = dom.distance_calculus(p)
            if ev.near_ridge:
                continue
            assert abs(np.linalg.norm(ev.grad_d) - 1.0) < 1e-8
            found += 1


def test_one_lipschitz_sampled():
    rng = np.random.RandomState(11)
    dom = ConvexPolygon([(0, 0), (2, 0), (3, 1), (1, 2)])
    pts = rng.uniform(-1, 4, size=(400, 2))
    d = dom.distance_many(pts)
    inside = d > 0
    p = pts[inside]
    dp = d[inside]
    for i in range(len(p)):
        for j in range(i + 1, min(i + 10, len(p))):
            assert abs(dp[i] - dp[j]) <= np.linalg.norm(p[i] - p[j]) + 1e-12


def test_polygon_distance_vs_brute_force():
    poly = ConvexPolygon([(0, 0), (2, 0), (3, 1), (1, 2)])
    rng = np.random.RandomState(5)
    pts = rng.uniform(0.2, 1.8, size=(20, 2))
    pts = pts[poly.distance_many(pts) > 0.05]
    v = poly.vertices
    for p in pts:
        best = np.inf
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            ts = np.linspace(0, 1, 100001)
            seg = a[None, :] + ts[:, None] * (b - a)[None, :]
            best = min(best, np.sqrt(((seg - p) ** 2).sum(axis=1)).min())
        assert abs(poly.distance(p) - best) < 1e-9


def test_interior_diameter():
    assert Interval(0, 1).interior_diameter() == 1.0
    assert Disc((0, 0), 1.0).interior_diameter() == 2.0
    assert Torus(3, 1).interior_diameter() == 2.0
    assert Annulus((0, 0), 0.25, 1.0).interior_diameter() == 0.75
    assert ConvexPolygon(UNIT_SQUARE).interior_diameter() == pytest.approx(1.0, abs=1e-9)


def test_volume():
    assert Disc((0, 0), 1.0).volume() == pytest.approx(np.pi)
    assert Torus(3, 1).volume() == pytest.approx(2 * np.pi**2 * 3)
    assert ConvexPolygon(UNIT_SQUARE).volume() == pytest.approx(1.0)
    assert Annulus((0, 0), 0.5, 1.0).volume() == pytest.approx(np.pi * 0.75)


def test_ridge_flags():
    ev = Interval(0, 1).distance_calculus(0.5)
    assert ev.near_ridge
    ev = Disc((0, 0), 1.0).distance_calculus([0.0, 0.0])
    assert ev.near_ridge
    ev = Annulus((0, 0), 0.5, 1.5).distance_calculus([1.0, 0.0])
    assert ev.near_ridge
    # square diagonal is the medial axis
    ev = ConvexPolygon(UNIT_SQUARE).distance_calculus([0.3, 0.3])
    assert ev.near_ridge


def test_scan_torus_pass():
    report = superharmonicity_scan(Torus(3.0, 1.0), resolution=200)
    assert report.verdict == "PASS"
    assert abs(report.min_value - 0.5) < 1e-3
    # minimum attained at the inner equator (r = c - R, z = 0)
    assert report.argmin[0] == pytest.approx(2.0, abs=0.05)


def test_scan_torus_fail():
    report = superharmonicity_scan(Torus(1.8, 1.0), resolution=200)
    assert report.verdict == "FAIL"
    assert report.min_value < -0.1


@pytest.mark.parametrize("ratio", [2.1, 2.5, 3.5, 5.0])
def test_scan_threshold_pass(ratio):
    assert superharmonicity_scan(Torus(ratio, 1.0), resolution=120).verdict == "PASS"


@pytest.mark.parametrize("ratio", [1.1, 1.4, 1.7, 1.9])
def test_scan_threshold_fail(ratio):
    assert superharmonicity_scan(Torus(ratio, 1.0), resolution=120).verdict == "FAIL"


def test_scan_disc_and_polygon():
    assert superharmonicity_scan(Disc((0, 0), 1.0), resolution=100).verdict == "PASS"
    assert superharmonicity_scan(ConvexPolygon(UNIT_SQUARE), resolution=64).verdict == "PASS"


def test_scan_tubular_region():
    report = superharmonicity_scan(Torus(3.0, 1.0), region=("tubular", 0.2),
                                   resolution=200)
    assert report.verdict == "PASS"
    with pytest.raises(EmptyRegion):
        superharmonicity_scan(Torus(3.0, 1.0), region=("tubular", 1e-9),
                              resolution=16)


def test_scan_resolution_guard():
    with pytest.raises(ValueError):
        superharmonicity_scan(Disc((0, 0), 1.0), resolution=4)


def test_scan_report_serialization():
    report = superharmonicity_scan(Disc((0, 0), 1.0), resolution=50)
    doc = report.to_dict()
    assert set(doc) >= {"min_value", "argmin", "verdict", "resolution"}


def test_polygon_validation():
    with pytest.raises(ValueError):
        ConvexPolygon([(0, 0), (1, 0)])
    with pytest.raises(ValueError):
        # clockwise square
        ConvexPolygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    with pytest.raises(ValueError):
        # non-convex chevron
        ConvexPolygon([(0, 0), (2, 0), (1, 0.4), (1, 2)])


def test_domain_invariants():
    with pytest.raises(ValueError):
        Interval(1, 0)
    with pytest.raises(ValueError):
        Annulus((0, 0), 1.0, 0.5)
    with pytest.raises(ValueError):
        Torus(1.0, 2.0)


def test_finite_difference_needs_clearance():
    from hardyspec.errors import TooCloseToBoundary
    with pytest.raises(TooCloseToBoundary):
        Disc((0, 0), 1.0).distance_calculus([0.999, 0.0], h=0.01,
                                            method="finite_difference")
