"""Distance-to-boundary calculus for the supported domain families.

Every domain knows its exact Euclidean distance to the boundary, the
gradient and (negative) Laplacian of that distance where they exist in
closed form, and the geometric functionals (interior diameter, volume)
that the Hardy-constant catalogue consumes.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import EmptyRegion, PointOutsideDomain, TooCloseToBoundary

RIDGE_TOL = 1e-9       # two boundary features closer than this => medial axis
GEOM_TOL = 1e-6        # verdict tolerance for superharmonicity scans
FD_STEP_FACTOR = 1e-4  # default finite-difference step, relative to D_int


@dataclass
class DistanceEval:
    """Distance, unit gradient and -laplacian of d at a single point."""

    d: float
    grad_d: object          # float in 1D, ndarray in 2D/3D
    neg_laplacian_d: float
    provenance: str         # "closed_form" or "finite_difference"
    near_ridge: bool = False


@dataclass
class SuperharmonicityReport:
    min_value: float
    argmin: tuple
    verdict: str            # "PASS" or "FAIL"
    resolution: int
    region: str
    tol: float
    n_points: int

    def to_dict(self):
        return {
            "min_value": self.min_value,
            "argmin": list(self.argmin),
            "verdict": self.verdict,
            "resolution": self.resolution,
            "region": self.region,
            "tol": self.tol,
            "n_points": self.n_points,
        }


def _as_point(p, dim):
    q = np.atleast_1d(np.asarray(p, dtype=float))
    if q.shape != (dim,):
        raise ValueError(f"expected a point with {dim} coordinates, got shape {q.shape}")
    return q


class Domain:
    """Base class; concrete variants implement the closed-form calculus."""

    dim = None
    is_convex = False

    # -- membership and distance --------------------------------------------

    def contains(self, p, tol=1e-12):
        return bool(self.distance_many(np.asarray([_as_point(p, self.dim)])) >= -tol)

    def distance(self, p, tol=1e-12):
        """Exact distance from an inside point to the boundary."""
        p = _as_point(p, self.dim)
        d = float(self.distance_many(p[None, :])[0])
        if d < -tol:
            raise PointOutsideDomain(f"point {p.tolist()} lies outside the domain (d={d:.3e})")
        return max(d, 0.0)

    def distance_many(self, pts):
        """Vectorized signed distance (positive inside); no membership check."""
        raise NotImplementedError

    # -- calculus ------------------------------------------------------------

    def _closed_form_eval(self, p):
        """(grad, -lap, near_ridge) at an interior point, or None if unavailable."""
        raise NotImplementedError

    def distance_calculus(self, p, h=None, method="auto", tol=1e-12):
        """Gradient and -laplacian of d, closed form where available.

        method: "auto" prefers the closed form, "closed_form" requires it,
        "finite_difference" forces second-order central differences with
        step h (default 1e-4 * D_int).
        """
        p = _as_point(p, self.dim)
        d = self.distance(p, tol=tol)
        if h is None:
            h = FD_STEP_FACTOR * self.interior_diameter()

        if method in ("auto", "closed_form"):
            cf = self._closed_form_eval(p)
            if cf is not None:
                grad, neg_lap, ridge = cf
                return DistanceEval(d, grad, neg_lap, "closed_form", ridge)
            if method == "closed_form":
                raise NotImplementedError("no closed form for this variant")

        if d <= 2 * h:
            raise TooCloseToBoundary(
                f"d(p)={d:.3e} <= 2h={2 * h:.3e}; finite differences need clearance")
        grad = np.empty(self.dim)
        lap = 0.0
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            dp = float(self.distance_many((p + e)[None, :])[0])
            dm = float(self.distance_many((p - e)[None, :])[0])
            grad[i] = (dp - dm) / (2 * h)
            lap += (dp - 2 * d + dm) / h**2
        ridge = bool(self._ridge_mask(p[None, :])[0])
        if self.dim == 1:
            grad = float(grad[0])
        return DistanceEval(d, grad, -lap, "finite_difference", ridge)

    def _ridge_mask(self, pts):
        """Boolean mask of points whose nearest boundary point is non-unique."""
        raise NotImplementedError

    def neg_laplacian_many(self, pts):
        """Vectorized closed-form -laplacian; caller excludes ridge points."""
        raise NotImplementedError

    # -- functionals ----------------------------------------------------------

    def interior_diameter(self):
        raise NotImplementedError

    def volume(self):
        raise NotImplementedError

    def diameter(self):
        """Usual diameter, defined for the variants the catalogue accepts."""
        raise NotImplementedError


class Interval(Domain):
    dim = 1
    is_convex = True

    def __init__(self, a, b):
        if not a < b:
            raise ValueError(f"need a < b, got a={a}, b={b}")
        self.a = float(a)
        self.b = float(b)

    def __repr__(self):
        return f"Interval({self.a}, {self.b})"

    def distance_many(self, pts):
        x = np.asarray(pts, dtype=float).reshape(-1)
        return np.minimum(x - self.a, self.b - x)

    def _ridge_mask(self, pts):
        x = np.asarray(pts, dtype=float).reshape(-1)
        return np.abs((x - self.a) - (self.b - x)) < RIDGE_TOL

    def _closed_form_eval(self, p):
        x = float(p[0])
        left = x - self.a
        right = self.b - x
        ridge = abs(left - right) < RIDGE_TOL
        grad = 1.0 if left <= right else -1.0
        return grad, 0.0, ridge

    def neg_laplacian_many(self, pts):
        return np.zeros(np.asarray(pts).reshape(-1).shape[0])

    def interior_diameter(self):
        return self.b - self.a

    def volume(self):
        return self.b - self.a

    def diameter(self):
        return self.b - self.a


class Disc(Domain):
    dim = 2
    is_convex = True

    def __init__(self, center, radius):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.radius = float(radius)

    def __repr__(self):
        return f"Disc(center={self.center.tolist()}, radius={self.radius})"

    def _rho(self, pts):
        return np.linalg.norm(np.asarray(pts, dtype=float).reshape(-1, 2) - self.center, axis=1)

    def distance_many(self, pts):
        return self.radius - self._rho(pts)

    def _ridge_mask(self, pts):
        return self._rho(pts) < RIDGE_TOL

    def _closed_form_eval(self, p):
        v = p - self.center
        rho = float(np.hypot(v[0], v[1]))
        if rho < RIDGE_TOL:
            # center of the disc: every boundary point is nearest
            return np.array([1.0, 0.0]), 1.0 / max(rho, RIDGE_TOL), True
        return -v / rho, 1.0 / rho, False

    def neg_laplacian_many(self, pts):
        return 1.0 / self._rho(pts)

    def interior_diameter(self):
        return 2 * self.radius

    def volume(self):
        return np.pi * self.radius**2

    def diameter(self):
        return 2 * self.radius


class Annulus(Domain):
    dim = 2
    is_convex = False

    def __init__(self, center, r_in, r_out):
        if not 0 < r_in < r_out:
            raise ValueError("need 0 < r_in < r_out")
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.r_in = float(r_in)
        self.r_out = float(r_out)

    def __repr__(self):
        return f"Annulus(center={self.center.tolist()}, r_in={self.r_in}, r_out={self.r_out})"

    def _rho(self, pts):
        return np.linalg.norm(np.asarray(pts, dtype=float).reshape(-1, 2) - self.center, axis=1)

    def distance_many(self, pts):
        rho = self._rho(pts)
        return np.minimum(rho - self.r_in, self.r_out - rho)

    def _ridge_mask(self, pts):
        rho = self._rho(pts)
        return np.abs((rho - self.r_in) - (self.r_out - rho)) < RIDGE_TOL

    def _closed_form_eval(self, p):
        v = p - self.center
        rho = float(np.hypot(v[0], v[1]))
        inner = rho - self.r_in
        outer = self.r_out - rho
        ridge = abs(inner - outer) < RIDGE_TOL
        if inner <= outer:
            return v / rho, -1.0 / rho, ridge
        return -v / rho, 1.0 / rho, ridge

    def neg_laplacian_many(self, pts):
        rho = self._rho(pts)
        inner_side = (rho - self.r_in) <= (self.r_out - rho)
        return np.where(inner_side, -1.0 / rho, 1.0 / rho)

    def interior_diameter(self):
        return self.r_out - self.r_in

    def volume(self):
        return np.pi * (self.r_out**2 - self.r_in**2)

    def diameter(self):
        return 2 * self.r_out


class ConvexPolygon(Domain):
    dim = 2
    is_convex = True

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        edges = np.roll(v, -1, axis=0) - v
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] \
            - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(cross < -1e-12):
            raise ValueError("vertices must be counterclockwise and convex")
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area2 <= 0:
            raise ValueError("vertices must be counterclockwise (positive area)")
        self.vertices = v
        self._edges = edges
        lengths = np.linalg.norm(edges, axis=1)
        if np.any(lengths <= 0):
            raise ValueError("degenerate edge")
        self._edge_len = lengths
        # inward unit normals (ccw order => inward is left of the edge)
        self._normals = np.column_stack([-edges[:, 1], edges[:, 0]]) / lengths[:, None]

    def __repr__(self):
        return f"ConvexPolygon({self.vertices.tolist()})"

    def _edge_distances(self, pts):
        """Distance from each point to each (full) edge segment, (N, E)."""
        p = np.asarray(pts, dtype=float).reshape(-1, 2)
        rel = p[:, None, :] - self.vertices[None, :, :]
        t = np.einsum("nej,ej->ne", rel, self._edges) / self._edge_len[None, :]**2
        t = np.clip(t, 0.0, 1.0)
        proj = self.vertices[None, :, :] + t[:, :, None] * self._edges[None, :, :]
        return np.linalg.norm(p[:, None, :] - proj, axis=2), proj

    def distance_many(self, pts):
        p = np.asarray(pts, dtype=float).reshape(-1, 2)
        seg_d, _ = self._edge_distances(p)
        d = seg_d.min(axis=1)
        # signed: negative outside any edge half-plane
        halfplane = np.einsum("nej,ej->ne", p[:, None, :] - self.vertices[None, :, :],
                              self._normals)
        outside = halfplane.min(axis=1) < 0
        return np.where(outside, halfplane.min(axis=1), d)

    def _ridge_mask(self, pts):
        seg_d, _ = self._edge_distances(pts)
        seg_d = np.sort(seg_d, axis=1)
        return (seg_d[:, 1] - seg_d[:, 0]) < RIDGE_TOL

    def _closed_form_eval(self, p):
        seg_d, proj = self._edge_distances(p[None, :])
        order = np.argsort(seg_d[0])
        nearest = order[0]
        ridge = (seg_d[0, order[1]] - seg_d[0, nearest]) < RIDGE_TOL
        y = proj[0, nearest]
        v = p - y
        r = float(np.hypot(v[0], v[1]))
        grad = v / r if r > RIDGE_TOL else self._normals[nearest]
        # d is a min of affine functions: Laplacian vanishes off the ridge
        return grad, 0.0, ridge

    def neg_laplacian_many(self, pts):
        return np.zeros(np.asarray(pts).reshape(-1, 2).shape[0])

    def chebyshev_radius(self):
        """Radius of the largest inscribed disc, by linear programming."""
        n = self._normals
        b = np.einsum("ej,ej->e", n, self.vertices)
        # maximize t  s.t.  n_i . p - t >= n_i . v_i
        a_ub = np.column_stack([-n, np.ones(len(n))])
        res = linprog(c=[0.0, 0.0, -1.0], A_ub=a_ub, b_ub=-b,
                      bounds=[(None, None), (None, None), (0, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"Chebyshev LP failed: {res.message}")
        return float(res.x[2])

    def chebyshev_center(self):
        n = self._normals
        b = np.einsum("ej,ej->e", n, self.vertices)
        a_ub = np.column_stack([-n, np.ones(len(n))])
        res = linprog(c=[0.0, 0.0, -1.0], A_ub=a_ub, b_ub=-b,
                      bounds=[(None, None), (None, None), (0, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"Chebyshev LP failed: {res.message}")
        return np.array(res.x[:2])

    def interior_diameter(self):
        return 2 * self.chebyshev_radius()

    def volume(self):
        v = self.vertices
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1)
                                  - np.roll(v[:, 0], -1) * v[:, 1]))

    def diameter(self):
        v = self.vertices
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=2)).max())


class Torus(Domain):
    """Solid torus: the disc of radius R centered at distance c from the
    z-axis, revolved about that axis.  Embedded when 0 < R < c."""

    dim = 3
    is_convex = False

    def __init__(self, c, R):
        if not 0 < R < c:
            raise ValueError("need 0 < R < c for an embedded torus")
        self.c = float(c)
        self.R = float(R)

    def __repr__(self):
        return f"Torus(c={self.c}, R={self.R})"

    def cross_section(self, pts):
        """Cylindrical (r, z) coordinates of 3D points, shape (N, 2)."""
        p = np.asarray(pts, dtype=float).reshape(-1, 3)
        r = np.hypot(p[:, 0], p[:, 1])
        return np.column_stack([r, p[:, 2]])

    def _rho(self, pts):
        rz = self.cross_section(pts)
        return np.hypot(rz[:, 0] - self.c, rz[:, 1])

    def distance_many(self, pts):
        return self.R - self._rho(pts)

    def _ridge_mask(self, pts):
        return self._rho(pts) < RIDGE_TOL

    def _closed_form_eval(self, p):
        x, y, z = p
        r = float(np.hypot(x, y))
        rho = float(np.hypot(r - self.c, z))
        if rho < RIDGE_TOL:
            # core circle: nearest boundary point is non-unique
            grad = np.array([x / r, y / r, 0.0])
            return grad, (2 * r - self.c) / (r * max(rho, RIDGE_TOL)), True
        grad = np.array([-(r - self.c) * x / (r * rho),
                         -(r - self.c) * y / (r * rho),
                         -z / rho])
        return grad, (2 * r - self.c) / (r * rho), False

    def neg_laplacian_many(self, pts):
        rz = self.cross_section(pts)
        return self.neg_laplacian_rz(rz)

    def neg_laplacian_rz(self, rz):
        r = rz[:, 0]
        rho = np.hypot(r - self.c, rz[:, 1])
        return (2 * r - self.c) / (r * rho)

    def interior_diameter(self):
        return 2 * self.R

    def volume(self):
        # Pappus: area of the revolved disc times the travel of its centroid
        return 2 * np.pi**2 * self.c * self.R**2

    def diameter(self):
        return 2 * (self.c + self.R)


def _scan_grid(domain, resolution):
    """Closed-domain grid points and coordinates used for the scan report."""
    if isinstance(domain, Interval):
        x = np.linspace(domain.a, domain.b, resolution + 1)
        return x[:, None]
    if isinstance(domain, Torus):
        r = np.linspace(domain.c - domain.R, domain.c + domain.R, resolution + 1)
        z = np.linspace(-domain.R, domain.R, resolution + 1)
        rr, zz = np.meshgrid(r, z, indexing="ij")
        return np.column_stack([rr.ravel(), zz.ravel()])
    if isinstance(domain, Disc):
        lo = domain.center - domain.radius
        hi = domain.center + domain.radius
    elif isinstance(domain, Annulus):
        lo = domain.center - domain.r_out
        hi = domain.center + domain.r_out
    elif isinstance(domain, ConvexPolygon):
        lo = domain.vertices.min(axis=0)
        hi = domain.vertices.max(axis=0)
    else:
        raise NotImplementedError(type(domain))
    x = np.linspace(lo[0], hi[0], resolution + 1)
    y = np.linspace(lo[1], hi[1], resolution + 1)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def _region_mask(region, d):
    if region == "full":
        return np.ones_like(d, dtype=bool)
    kind, delta = region
    if kind != "tubular":
        raise ValueError(f"unknown region {region!r}")
    return (d > 0) & (d < delta)


def superharmonicity_scan(domain, region="full", resolution=200, tol=GEOM_TOL):
    """Scan -laplacian(d) over a uniform grid and certify its sign.

    A full scan covers the closed domain (the closed forms extend
    continuously to the boundary); a ("tubular", delta) scan keeps the
    interior band 0 < d < delta.  Points on the medial axis, where the
    Laplacian has a singular measure part, are excluded.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    pts = _scan_grid(domain, resolution)

    if isinstance(domain, Torus):
        # axisymmetric: scan the (r, z) cross-section
        rho = np.hypot(pts[:, 0] - domain.c, pts[:, 1])
        d = domain.R - rho
        ridge = rho < RIDGE_TOL
        mask = (d >= -1e-12) & ~ridge
        mask &= _region_mask(region, d)
        if not mask.any():
            raise EmptyRegion("no grid point falls in the requested region")
        values = domain.neg_laplacian_rz(pts[mask])
    else:
        d = domain.distance_many(pts)
        ridge = domain._ridge_mask(pts)
        mask = (d >= -1e-12) & ~ridge
        mask &= _region_mask(region, d)
        if not mask.any():
            raise EmptyRegion("no grid point falls in the requested region")
        values = domain.neg_laplacian_many(pts[mask])

    i = int(np.argmin(values))
    min_value = float(values[i])
    argmin = tuple(np.asarray(pts[mask][i], dtype=float).tolist())
    verdict = "PASS" if min_value >= -tol else "FAIL"
    region_name = "full" if region == "full" else f"tubular({region[1]})"
    return SuperharmonicityReport(min_value, argmin, verdict, resolution,
                                  region_name, tol, int(mask.sum()))
