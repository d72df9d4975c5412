"""Graded interval meshes, boundary-fitted triangulations, tubular strips.

Meshes carry their generating domain so that the exact boundary distance
(not any polygonal proxy) is available at nodes and quadrature points.
"""

from dataclasses import dataclass, field

import numpy as np

from . import coefficients
from .errors import InvalidGrading, MeshGenerationFailure, NotATorus, StripTooThin
from .geometry import Annulus, ConvexPolygon, Disc, Interval, Torus

DIRICHLET = "dirichlet"
ROBIN = "robin"


@dataclass
class StripSpec:
    """Tubular band {x : delta_out < d(x) < delta_in}; touches the boundary
    when delta_out = 0.  The inner interface (d = delta_in) is clamped."""

    delta_out: float
    delta_in: float

    def __post_init__(self):
        if not 0 <= self.delta_out < self.delta_in:
            raise ValueError("need 0 <= delta_out < delta_in")


@dataclass
class Mesh1D:
    nodes: np.ndarray                 # sorted coordinates
    elements: np.ndarray              # (m, 2) node index pairs
    node_tags: dict                   # node index -> DIRICHLET | ROBIN
    domain: Interval

    @property
    def dim(self):
        return 1

    @property
    def n_nodes(self):
        return len(self.nodes)

    def element_sizes(self):
        return self.nodes[self.elements[:, 1]] - self.nodes[self.elements[:, 0]]

    def barycenters(self):
        return 0.5 * (self.nodes[self.elements[:, 0]] + self.nodes[self.elements[:, 1]])

    def node_distances(self):
        return np.maximum(self.domain.distance_many(self.nodes), 0.0)

    def dirichlet_nodes(self):
        return sorted(i for i, t in self.node_tags.items() if t == DIRICHLET)

    def total_measure(self):
        return float(self.element_sizes().sum())


@dataclass
class TriMesh:
    points: np.ndarray                # (n, 2)
    triangles: np.ndarray             # (m, 3), counterclockwise
    boundary_edges: list              # (i, j, tag) tuples
    node_tags: dict                   # node index -> tag (dirichlet clamps)
    domain: object
    node_d: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.node_d is None:
            self.node_d = np.maximum(self.domain.distance_many(self.points), 0.0)

    @property
    def dim(self):
        return 2

    @property
    def n_nodes(self):
        return len(self.points)

    def areas(self):
        p = self.points
        t = self.triangles
        v1 = p[t[:, 1]] - p[t[:, 0]]
        v2 = p[t[:, 2]] - p[t[:, 0]]
        return 0.5 * (v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0])

    def barycenters(self):
        return self.points[self.triangles].mean(axis=1)

    def dirichlet_nodes(self):
        return sorted(i for i, t in self.node_tags.items() if t == DIRICHLET)

    def total_measure(self):
        return float(self.areas().sum())


# ---------------------------------------------------------------------------
# 1D meshes
# ---------------------------------------------------------------------------

def _geometric_side_sizes(half, m, grading):
    """Element sizes covering [0, half], geometric with the given ratio,
    smallest first (adjacent to the endpoint)."""
    if grading == 1.0:
        return np.full(m, half / m)
    r = 1.0 / grading
    # h1 * (r^m - 1) / (r - 1) = half
    log_rm = m * np.log(r)
    if log_rm > 700:
        raise InvalidGrading(
            f"grading {grading} with {m} layers per side underflows float64")
    h1 = half * (r - 1.0) / (r**m - 1.0)
    if h1 < 1e-280:
        raise InvalidGrading(
            f"grading {grading} with {m} layers per side underflows float64")
    return h1 * r**np.arange(m)


def grading_floor(interval, headroom=1.0):
    """Smallest element size distinguishable in float64 next to the interval
    endpoints, with room for `headroom` further bisections."""
    scale = max(1.0, abs(interval.a), abs(interval.b))
    return 4096.0 * np.finfo(float).eps * scale * 2.0 ** headroom


def feasible_grading(requested, layers, span, floor, one_sided=False):
    """Steepest grading >= requested whose smallest element stays above the
    float64 floor; geometric meshes cannot grade below machine spacing."""
    if requested is None:
        requested = 1.0
    if requested >= 1.0 or layers <= 1:
        return requested

    def smallest(g):
        if one_sided:
            t = span * g ** np.arange(layers - 1, -1, -1)
            sizes = np.diff(np.concatenate([[0.0], t]))
        else:
            try:
                sizes = _geometric_side_sizes(span, layers, g)
            except InvalidGrading:
                return 0.0
        return float(sizes.min())

    if smallest(requested) >= floor:
        return requested
    lo, hi = requested, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if smallest(mid) >= floor:
            hi = mid
        else:
            lo = mid
    return hi


def build_mesh_1d(interval, n, grading=1.0, tags=(DIRICHLET, DIRICHLET)):
    """Symmetric mesh with n elements on the interval.

    grading < 1 shrinks element sizes geometrically by that factor toward
    each endpoint, n/2 layers per side; grading = 1 is uniform.
    """
    if not isinstance(interval, Interval):
        raise TypeError("build_mesh_1d needs an Interval domain")
    if n < 2:
        raise ValueError("need at least 2 elements")
    if not 0 < grading <= 1:
        raise InvalidGrading(f"grading must lie in (0, 1], got {grading}")
    a, b = interval.a, interval.b
    if grading == 1.0:
        nodes = np.linspace(a, b, n + 1)
    else:
        if n % 2:
            raise InvalidGrading("graded meshes need an even element count")
        sizes = _geometric_side_sizes((b - a) / 2.0, n // 2, grading)
        left = a + np.concatenate([[0.0], np.cumsum(sizes)])
        left[-1] = 0.5 * (a + b)
        right = (a + b) - left[-2::-1]
        nodes = np.concatenate([left, right])
        nodes[-1] = b
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    if np.any(np.diff(nodes) <= 0):
        raise InvalidGrading("grading produced a degenerate element")
    return Mesh1D(nodes, elements, {0: tags[0], n: tags[1]}, interval)


def _one_sided_graded(delta, layers, grading):
    """Nodes on [0, delta] clustered geometrically at 0 (ratio 1/grading)."""
    if grading == 1.0:
        return np.linspace(0.0, delta, layers + 1)
    t = delta * grading ** np.arange(layers - 1, -1, -1)
    if t[0] < 1e-280:
        raise InvalidGrading("one-sided grading underflows float64")
    return np.concatenate([[0.0], t])


def mesh_1d_with_level(interval, level, n_strip, grading=1.0, n_mid=None):
    """Mesh of the full interval with nodes exactly at distance `level`
    from each endpoint; the two boundary strips are graded toward the
    endpoints.  Used to realize exhaustion strips conformingly."""
    a, b = interval.a, interval.b
    half = (b - a) / 2.0
    if not 0 < level <= half:
        raise ValueError("level must lie in (0, (b-a)/2]")
    left = a + _one_sided_graded(level, n_strip, grading)
    right = (b - _one_sided_graded(level, n_strip, grading))[::-1]
    if level == half:
        nodes = np.concatenate([left, right[1:]])
    else:
        if n_mid is None:
            inner = b - a - 2 * level
            n_mid = max(2, int(np.ceil(inner / max(level / n_strip * 4, 1e-12))))
            n_mid = min(n_mid, 4 * n_strip)
        mid = np.linspace(a + level, b - level, n_mid + 1)[1:-1]
        nodes = np.concatenate([left, mid, right])
    n = len(nodes) - 1
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    if np.any(np.diff(nodes) <= 0):
        raise MeshGenerationFailure("level mesh produced a degenerate element")
    return Mesh1D(nodes, elements, {0: DIRICHLET, n: DIRICHLET}, interval)


def refine_mesh_1d(mesh):
    """Split every element at its midpoint (nested refinement)."""
    old = mesh.nodes
    mids = 0.5 * (old[mesh.elements[:, 0]] + old[mesh.elements[:, 1]])
    nodes = np.sort(np.unique(np.concatenate([old, mids])))
    index = {x: i for i, x in enumerate(nodes)}
    elements = []
    for e0, e1 in mesh.elements:
        im = index[0.5 * (old[e0] + old[e1])]
        elements.append((index[old[e0]], im))
        elements.append((im, index[old[e1]]))
    tags = {index[old[i]]: t for i, t in mesh.node_tags.items()}
    return Mesh1D(nodes, np.asarray(elements, dtype=int), tags, mesh.domain)


# ---------------------------------------------------------------------------
# 2D meshes
# ---------------------------------------------------------------------------

def _is_axis_rectangle(domain):
    if not isinstance(domain, ConvexPolygon) or len(domain.vertices) != 4:
        return False
    e = np.roll(domain.vertices, -1, axis=0) - domain.vertices
    return all(abs(vx) < 1e-14 or abs(vy) < 1e-14 for vx, vy in e)


def _structured_rectangle(domain, h):
    v = domain.vertices
    xs, ys = np.unique(v[:, 0]), np.unique(v[:, 1])
    x0, x1 = xs[0], xs[-1]
    y0, y1 = ys[0], ys[-1]
    nx = max(1, int(np.ceil((x1 - x0) / h - 1e-9)))
    ny = max(1, int(np.ceil((y1 - y0) / h - 1e-9)))
    gx = np.linspace(x0, x1, nx + 1)
    gy = np.linspace(y0, y1, ny + 1)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    points = np.column_stack([xx.ravel(), yy.ravel()])
    idx = lambda i, j: i * (ny + 1) + j
    tris = []
    for i in range(nx):
        for j in range(ny):
            tris.append((idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)))
            tris.append((idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)))
    edges = []
    for i in range(nx):
        edges.append((idx(i, 0), idx(i + 1, 0), DIRICHLET))
        edges.append((idx(i + 1, ny), idx(i, ny), DIRICHLET))
    for j in range(ny):
        edges.append((idx(nx, j), idx(nx, j + 1), DIRICHLET))
        edges.append((idx(0, j + 1), idx(0, j), DIRICHLET))
    tags = {i: DIRICHLET for e in edges for i in e[:2]}
    return TriMesh(points, np.asarray(tris, dtype=int), edges, tags, domain)


def _boundary_polyline(domain, spacing):
    """Closed loop of boundary nodes with roughly the requested spacing."""
    if isinstance(domain, Disc):
        m = max(8, int(np.ceil(2 * np.pi * domain.radius / spacing)))
        th = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
        return domain.center + domain.radius * np.column_stack([np.cos(th), np.sin(th)])
    if isinstance(domain, ConvexPolygon):
        pts = []
        v = domain.vertices
        for i in range(len(v)):
            p0, p1 = v[i], v[(i + 1) % len(v)]
            k = max(1, int(np.ceil(np.linalg.norm(p1 - p0) / spacing)))
            for t in np.arange(k) / k:
                pts.append(p0 + t * (p1 - p0))
        return np.asarray(pts)
    raise MeshGenerationFailure(f"no boundary template for {type(domain).__name__}")


def _layer_depths(depth, h, grading, stop_factor=1.3):
    """Distance-from-boundary levels: sizes doubling up to h, stopping once
    the remaining core is about one element deep.  Graded meshes start at
    half of grading*h so that skewed corner cells keep their diameter under
    sqrt(2) * grading * h (radial + tangential legs total 1.25 grading h)."""
    levels = [0.0]
    size = grading * h * (0.5 if grading < 1 else 1.0)
    while depth - levels[-1] > stop_factor * h:
        levels.append(levels[-1] + size)
        size = min(2 * size, h)
    return np.asarray(levels)


def _ring_mesh(domain, h, grading):
    """Rings of scaled boundary polylines collapsing onto an interior center."""
    spacing = h * (0.75 * grading if grading < 1 else 1.0)
    loop = _boundary_polyline(domain, spacing)
    m = len(loop)
    if isinstance(domain, Disc):
        center = domain.center
    else:
        center = domain.chebyshev_center()
    # levels measured along rays from the center: the radial leg of a cell
    # at the boundary is then exactly the first level everywhere
    depth = float(np.linalg.norm(loop - center, axis=1).max())
    levels = _layer_depths(depth, h, grading)
    scales = 1.0 - levels / depth
    rings = [center + s * (loop - center) for s in scales]
    points = np.vstack(rings + [center[None, :]])
    center_idx = len(rings) * m
    tris = []
    for k in range(len(rings) - 1):
        base0, base1 = k * m, (k + 1) * m
        for i in range(m):
            j = (i + 1) % m
            tris.append((base0 + i, base0 + j, base1 + j))
            tris.append((base0 + i, base1 + j, base1 + i))
    base = (len(rings) - 1) * m
    for i in range(m):
        j = (i + 1) % m
        tris.append((base + i, base + j, center_idx))
    edges = [(i, (i + 1) % m, DIRICHLET) for i in range(m)]
    tags = {i: DIRICHLET for i in range(m)}
    mesh = TriMesh(points, np.asarray(tris, dtype=int), edges, tags, domain)
    if np.any(mesh.areas() <= 0):
        raise MeshGenerationFailure("ring template produced an inverted triangle")
    return mesh


def _annulus_mesh(domain, h, grading):
    spacing = h * (0.75 * grading if grading < 1 else 1.0)
    m = max(8, int(np.ceil(2 * np.pi * domain.r_out / spacing)))
    width = domain.r_out - domain.r_in
    n_rad = max(2, int(np.ceil(width / h)))
    if grading == 1.0:
        radii = np.linspace(domain.r_in, domain.r_out, n_rad + 1)
    else:
        lo = _layer_depths(width / 2, h, grading)
        radii = np.unique(np.concatenate([
            domain.r_in + lo, [domain.r_in + width / 2], domain.r_out - lo]))
    th = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
    ring = np.column_stack([np.cos(th), np.sin(th)])
    points = np.vstack([domain.center + r * ring for r in radii])
    tris = []
    for k in range(len(radii) - 1):
        base0, base1 = k * m, (k + 1) * m
        for i in range(m):
            j = (i + 1) % m
            tris.append((base0 + i, base1 + i, base1 + j))
            tris.append((base0 + i, base1 + j, base0 + j))
    inner = [(ring_i, (ring_i + 1) % m, DIRICHLET) for ring_i in range(m)]
    outer_base = (len(radii) - 1) * m
    outer = [(outer_base + i, outer_base + (i + 1) % m, DIRICHLET) for i in range(m)]
    edges = inner + outer
    tags = {i: DIRICHLET for e in edges for i in e[:2]}
    mesh = TriMesh(points, np.asarray(tris, dtype=int), edges, tags, domain)
    if np.any(mesh.areas() <= 0):
        raise MeshGenerationFailure("annulus template produced an inverted triangle")
    return mesh


def build_trimesh(domain, h, grading=1.0):
    """Conforming triangulation with target interior edge length h.

    With grading < 1 the elements touching the boundary have diameter at
    most about grading*h (fine tangential spacing plus a thin first layer).
    All boundary edges are clamped (tagged dirichlet) by default.
    """
    if domain.dim != 2:
        raise TypeError("build_trimesh needs a 2D domain")
    if not 0 < grading <= 1:
        raise InvalidGrading(f"grading must lie in (0, 1], got {grading}")
    if h > domain.interior_diameter() / 4 + 1e-12:
        raise MeshGenerationFailure(
            f"h={h} too coarse: need h <= D_int/4 = {domain.interior_diameter() / 4}")
    if isinstance(domain, Annulus):
        return _annulus_mesh(domain, h, grading)
    if _is_axis_rectangle(domain) and grading == 1.0:
        return _structured_rectangle(domain, h)
    if isinstance(domain, (Disc, ConvexPolygon)):
        return _ring_mesh(domain, h, grading)
    raise MeshGenerationFailure(f"unsupported 2D domain {type(domain).__name__}")


def refine_trimesh(mesh):
    """Split every triangle into four; curved-boundary midpoints are snapped
    back onto the exact boundary circle."""
    points = list(map(tuple, mesh.points))
    index = {p: i for i, p in enumerate(points)}
    pts = [np.asarray(p) for p in points]

    def midpoint(i, j, snap):
        p = 0.5 * (mesh.points[i] + mesh.points[j])
        if snap is not None:
            center, radius = snap
            v = p - center
            p = center + v * (radius / np.linalg.norm(v))
        key = tuple(p)
        if key not in index:
            index[key] = len(pts)
            pts.append(p)
        return index[key]

    def snap_target(i, j):
        dom = mesh.domain
        if isinstance(dom, Disc):
            if mesh.node_d[i] < 1e-12 and mesh.node_d[j] < 1e-12:
                return dom.center, dom.radius
        if isinstance(dom, Annulus):
            if mesh.node_d[i] < 1e-12 and mesh.node_d[j] < 1e-12:
                r_i = np.linalg.norm(mesh.points[i] - dom.center)
                ring = dom.r_in if abs(r_i - dom.r_in) < abs(r_i - dom.r_out) else dom.r_out
                return dom.center, ring
        return None

    tris = []
    for a, b, c in mesh.triangles:
        ab = midpoint(a, b, snap_target(a, b))
        bc = midpoint(b, c, snap_target(b, c))
        ca = midpoint(c, a, snap_target(c, a))
        tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    edges = []
    tags = {}
    for i, j, tag in mesh.boundary_edges:
        mid = midpoint(i, j, snap_target(i, j))
        edges.extend([(i, mid, tag), (mid, j, tag)])
        tags[i] = tag
        tags[j] = tag
        tags[mid] = tag
    for i, t in mesh.node_tags.items():
        tags.setdefault(i, t)
    return TriMesh(np.asarray(pts), np.asarray(tris, dtype=int), edges, tags, mesh.domain)


# ---------------------------------------------------------------------------
# strips
# ---------------------------------------------------------------------------

def restrict_to_strip(mesh, strip):
    """Submesh of elements whose barycenter lies in the strip; nodes cut at
    the inner interface are clamped, boundary nodes keep their tags."""
    sup_d = mesh.domain.interior_diameter() / 2.0
    if strip.delta_in > sup_d + 1e-12:
        raise ValueError(f"delta_in={strip.delta_in} exceeds sup d = {sup_d}")

    if isinstance(mesh, Mesh1D):
        elems = mesh.elements
        coords = mesh.nodes
    else:
        elems = mesh.triangles
        coords = mesh.points
    bary_d = np.maximum(mesh.domain.distance_many(mesh.barycenters()), 0.0)
    keep = (bary_d > strip.delta_out) & (bary_d < strip.delta_in)
    kept = np.where(keep)[0]
    if len(kept) < 4:
        raise StripTooThin(
            f"strip ({strip.delta_out}, {strip.delta_in}) contains only "
            f"{len(kept)} elements; need at least 4 layers")
    # resolvability: each quarter of the band must hold an element
    edges_q = np.linspace(strip.delta_out, strip.delta_in, 5)
    band = np.clip(np.searchsorted(edges_q, bary_d[kept], side="right") - 1, 0, 3)
    if len(np.unique(band)) < 4:
        raise StripTooThin(
            f"strip ({strip.delta_out}, {strip.delta_in}) is not resolved by "
            "4 element layers")

    kept_elems = elems[kept]
    dropped_nodes = set(elems[~keep].ravel().tolist())
    used = np.unique(kept_elems)
    renum = {int(old): new for new, old in enumerate(used)}
    new_elems = np.vectorize(renum.get)(kept_elems)

    node_d = np.maximum(mesh.domain.distance_many(coords[used]), 0.0)
    tags = {}
    for old, t in mesh.node_tags.items():
        if old in renum:
            tags[renum[old]] = t
    for new, old in enumerate(used):
        interface = int(old) in dropped_nodes or node_d[new] >= strip.delta_in - 1e-12
        if interface:
            tags[new] = DIRICHLET

    if isinstance(mesh, Mesh1D):
        return Mesh1D(coords[used], new_elems, tags, mesh.domain)
    edges = [(renum[i], renum[j], t) for i, j, t in mesh.boundary_edges
             if i in renum and j in renum]
    return TriMesh(coords[used], new_elems, edges, tags, mesh.domain,
                   node_d=node_d)


# ---------------------------------------------------------------------------
# axisymmetric reduction
# ---------------------------------------------------------------------------

def axisymmetric_reduce(torus, mode=0):
    """Reduce the solid torus to its cross-section disc in (r, z).

    Returns (disc, measure weight r, azimuthal potential mode^2/r^2); for
    azimuthal mode m the 3D energy of u = v(r,z) e^{i m theta} equals (up to
    the constant angular factor) the weighted 2D energy

        integral of (a |grad v|^2 + (a m^2/r^2 + q) |v|^2) r dr dz,

    and the 3D boundary distance coincides with the disc's own distance.
    """
    if not isinstance(torus, Torus):
        raise NotATorus(f"expected a torus, got {type(torus).__name__}")
    if mode < 0 or int(mode) != mode:
        raise ValueError("mode must be a nonnegative integer")
    disc = Disc(center=(torus.c, 0.0), radius=torus.R)
    weight = coefficients.parse_coefficient("r")
    if mode == 0:
        potential = coefficients.constant(0.0)
    else:
        potential = coefficients.parse_coefficient(f"{int(mode)**2}/r^2")
    return disc, weight, potential


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------

def format_mesh_text(mesh):
    """Plain-text mesh format: a header line `dim n_nodes n_elements
    n_boundary`, then node coordinate lines, element index lines, and tagged
    boundary lines (node index + tag in 1D, edge indices + tag in 2D)."""
    lines = []
    if isinstance(mesh, Mesh1D):
        bnd = sorted(mesh.node_tags.items())
        lines.append(f"1 {mesh.n_nodes} {len(mesh.elements)} {len(bnd)}")
        lines.extend(repr(float(x)) for x in mesh.nodes)
        lines.extend(f"{i} {j}" for i, j in mesh.elements)
        lines.extend(f"{i} {tag}" for i, tag in bnd)
    else:
        lines.append(f"2 {mesh.n_nodes} {len(mesh.triangles)} {len(mesh.boundary_edges)}")
        lines.extend(f"{repr(float(x))} {repr(float(y))}" for x, y in mesh.points)
        lines.extend(f"{a} {b} {c}" for a, b, c in mesh.triangles)
        lines.extend(f"{i} {j} {tag}" for i, j, tag in mesh.boundary_edges)
    return "\n".join(lines) + "\n"
