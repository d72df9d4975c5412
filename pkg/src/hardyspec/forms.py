"""Assembly of quadratic-form pencils over P1 elements, plus the smooth
partition of unity used for localization checks.

The numerator form is  integral of a |grad u|^2 + q |u|^2  (plus point or
edge boundary terms weighted by sigma); the denominator is a weighted mass
form.  Quadrature points are strictly interior to every element, so weights
that blow up like a power of the boundary distance are only ever evaluated
at d > 0.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coefficients import Coefficient, as_coefficient
from .errors import (DegenerateBand, NonpositiveDiffusion, NonpositiveWeight,
                     SingularQuadrature)
from .meshing import ROBIN, Mesh1D, TriMesh


@dataclass
class FormSpec:
    """Coefficients of the energy form."""

    a: Coefficient
    q: Coefficient
    sigma: object = None       # None, float, or (sigma_left, sigma_right) in 1D
    beta: float = None         # recorded exponent when a = d^beta

    def __post_init__(self):
        self.a = as_coefficient(self.a)
        self.q = as_coefficient(self.q)
        if self.beta is not None and self.beta >= 1:
            raise ValueError("the power form requires beta < 1")


@dataclass
class Pencil:
    """Sparse symmetric pair (K, M) on the free (non-clamped) nodes."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    free_nodes: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dof(self):
        return self.K.shape[0]

    def rayleigh(self, v):
        v = np.asarray(v, dtype=float)
        return float(v @ (self.K @ v)) / float(v @ (self.M @ v))


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------

def gauss_panels(npts, nsub):
    """Composite Gauss-Legendre rule on [0, 1]: nsub equal panels of npts.

    Composite panels keep the rule accurate on strongly graded meshes where
    a single element spans a wide multiplicative range of d.
    """
    x, w = np.polynomial.legendre.leggauss(npts)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    pts = np.concatenate([(k + x) / nsub for k in range(nsub)])
    wts = np.tile(w / nsub, nsub)
    return pts, wts


# 7-point degree-5 rule on the reference triangle, all points interior
_TRI_A = 0.470142064105115
_TRI_B = 0.101286507323456
TRI_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_TRI_A, _TRI_A, 1 - 2 * _TRI_A],
    [_TRI_A, 1 - 2 * _TRI_A, _TRI_A],
    [1 - 2 * _TRI_A, _TRI_A, _TRI_A],
    [_TRI_B, _TRI_B, 1 - 2 * _TRI_B],
    [_TRI_B, 1 - 2 * _TRI_B, _TRI_B],
    [1 - 2 * _TRI_B, _TRI_B, _TRI_B],
])
TRI_W = np.array([0.225,
                  0.132394152788506, 0.132394152788506, 0.132394152788506,
                  0.125939180544827, 0.125939180544827, 0.125939180544827])


def _tri_rule(subdiv):
    """Barycentric points/weights, optionally composited over 4^k congruent
    subtriangles of the reference triangle."""
    bary, w = TRI_BARY, TRI_W
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for _ in range(int(np.log2(max(subdiv, 1)))):
        pts = bary @ corners
        new_pts = []
        sub = [
            (np.array([0., 0.]), np.array([.5, 0.]), np.array([0., .5])),
            (np.array([.5, 0.]), np.array([1., 0.]), np.array([.5, .5])),
            (np.array([0., .5]), np.array([.5, .5]), np.array([0., 1.])),
            (np.array([.5, 0.]), np.array([.5, .5]), np.array([0., .5])),
        ]
        for p0, p1, p2 in sub:
            new_pts.append(p0 + pts @ np.vstack([p1 - p0, p2 - p0]))
        pts = np.vstack(new_pts)
        bary = np.column_stack([1 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
        w = np.tile(w / 4.0, 4)
    return bary, w


# ---------------------------------------------------------------------------
# coefficient evaluation environments
# ---------------------------------------------------------------------------

def _env_1d(x, d):
    return {"x": x, "x1": x, "d": d}

def _env_2d(x, y, d):
    # r, z alias the coordinates for axisymmetric cross-section problems
    return {"x": x, "x1": x, "y": y, "x2": y, "r": x, "z": y, "d": d}


def _eval_on(coef, env, shape):
    vals = coef.evaluate(env)
    return np.broadcast_to(vals, shape)


def _symmetric_csr(rows, cols, vals, n):
    """Assemble from upper-triangle triplets; exactly symmetric by mirroring."""
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return upper + sp.triu(upper, k=1).T.tocsr()


def assemble_pencil(mesh, form, denominator, quad_points=6, quad_subdiv=4,
                    measure_weight=None):
    """Assemble the (K, M) pencil of the form against a weighted mass.

    K carries the diffusion, potential and boundary sigma terms; M carries
    the denominator weight.  Rows/columns of clamped (dirichlet) nodes are
    eliminated.  measure_weight multiplies every volume integrand (used by
    the axisymmetric reduction, where it is the cylindrical radius).
    """
    denominator = as_coefficient(denominator)
    mw = as_coefficient(measure_weight) if measure_weight is not None else None

    if isinstance(mesh, Mesh1D):
        K, M, qneg_ratio = _assemble_1d(mesh, form, denominator, quad_points,
                                        quad_subdiv, mw)
    elif isinstance(mesh, TriMesh):
        K, M, qneg_ratio = _assemble_2d(mesh, form, denominator, quad_subdiv, mw)
    else:
        raise TypeError(f"cannot assemble on {type(mesh).__name__}")

    clamped = mesh.dirichlet_nodes()
    free = np.setdiff1d(np.arange(mesh.n_nodes), np.asarray(clamped, dtype=int))
    if len(free) == 0:
        raise ValueError("no free degrees of freedom after clamping")
    K = K[free][:, free].tocsr()
    M = M[free][:, free].tocsr()
    # x'Kx >= -max(q_-/den) x'Mx elementwise under the shared quadrature,
    # so -max ratio certifies a bound below the whole pencil spectrum
    lower = -qneg_ratio
    if _has_negative_sigma(form):
        lower = None
    meta = {
        "dim": mesh.dim,
        "n_nodes": mesh.n_nodes,
        "dof": len(free),
        "quad_points": quad_points,
        "quad_subdiv": quad_subdiv,
        "a": form.a.text,
        "q": form.q.text,
        "denominator": denominator.text,
        "measure_weight": mw.text if mw is not None else None,
        "spectral_lower_bound": lower,
    }
    return Pencil(K, M, free, meta)


def _has_negative_sigma(form):
    if form.sigma is None:
        return False
    if callable(form.sigma):
        return True
    if isinstance(form.sigma, (int, float)):
        return form.sigma < 0
    return any(s < 0 for s in form.sigma)


def _quad_points_1d(mesh, quad_points, quad_subdiv):
    t, w = gauss_panels(quad_points, quad_subdiv)
    x0 = mesh.nodes[mesh.elements[:, 0]][:, None]
    h = mesh.element_sizes()[:, None]
    pts = x0 + t[None, :] * h
    wts = w[None, :] * h
    return pts, wts, h


def _assemble_1d(mesh, form, denominator, quad_points, quad_subdiv, mw):
    pts, wts, h = _quad_points_1d(mesh, quad_points, quad_subdiv)
    d = mesh.domain.distance_many(pts.ravel()).reshape(pts.shape)
    if np.any(d <= 0):
        raise SingularQuadrature("a quadrature point touched the boundary (d <= 0)")
    env = _env_1d(pts, d)
    a = _eval_on(form.a, env, pts.shape)
    if np.any(a <= 0):
        raise NonpositiveDiffusion("diffusion coefficient is not positive "
                                   "at a quadrature point")
    q = _eval_on(form.q, env, pts.shape)
    den = _eval_on(denominator, env, pts.shape)
    if np.any(den <= 0):
        raise NonpositiveWeight("denominator weight is not positive "
                                "at a quadrature point")
    scale = np.ones_like(pts) if mw is None else _eval_on(mw, env, pts.shape)
    if np.any(scale <= 0):
        raise NonpositiveWeight("measure weight is not positive at a quadrature point")

    x0 = mesh.nodes[mesh.elements[:, 0]][:, None]
    phi_r = (pts - x0) / h
    phi = np.stack([1.0 - phi_r, phi_r], axis=1)        # (m, 2, nq)

    stiff = ((wts * a * scale).sum(axis=1) / h[:, 0] ** 2)    # (m,)
    wq = wts * q * scale
    wden = wts * den * scale

    m = len(mesh.elements)
    blocks_k = np.empty((m, 2, 2))
    blocks_m = np.empty((m, 2, 2))
    sgn = np.array([[1.0, -1.0], [-1.0, 1.0]])
    for i in range(2):
        for j in range(i, 2):
            pot = (wq * phi[:, i, :] * phi[:, j, :]).sum(axis=1)
            mass = (wden * phi[:, i, :] * phi[:, j, :]).sum(axis=1)
            blocks_k[:, i, j] = stiff * sgn[i, j] + pot
            blocks_k[:, j, i] = blocks_k[:, i, j]
            blocks_m[:, i, j] = mass
            blocks_m[:, j, i] = mass

    n = mesh.n_nodes
    K = _scatter_blocks(mesh.elements, blocks_k, n)
    M = _scatter_blocks(mesh.elements, blocks_m, n)
    K = K + _robin_1d(mesh, form, n)
    qneg_ratio = float(np.max(np.maximum(-q, 0.0) / den))
    return K, M, qneg_ratio


def _robin_1d(mesh, form, n):
    mat = sp.csr_matrix((n, n))
    robin = [i for i, t in mesh.node_tags.items() if t == ROBIN]
    if not robin:
        return mat
    if form.sigma is None:
        return mat
    a, b = mesh.domain.a, mesh.domain.b
    entries = {}
    for i in robin:
        if isinstance(form.sigma, (int, float)):
            val = float(form.sigma)
        else:
            side = 0 if abs(mesh.nodes[i] - a) <= abs(mesh.nodes[i] - b) else 1
            val = float(form.sigma[side])
        entries[(i, i)] = val
    rows, cols = zip(*entries)
    return sp.csr_matrix((list(entries.values()), (rows, cols)), shape=(n, n))


def _assemble_2d(mesh, form, denominator, quad_subdiv, mw):
    bary, w = _tri_rule(max(1, quad_subdiv // 4))
    p = mesh.points
    t = mesh.triangles
    v = p[t]                                           # (m, 3, 2)
    area = mesh.areas()
    if np.any(area <= 0):
        raise ValueError("mesh has an inverted triangle")

    pts = np.einsum("qk,mkj->mqj", bary, v)            # (m, nq, 2)
    d = mesh.domain.distance_many(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    if np.any(d <= 0):
        raise SingularQuadrature("a quadrature point touched the boundary (d <= 0)")
    env = _env_2d(pts[:, :, 0], pts[:, :, 1], d)
    shape = pts.shape[:2]
    a = _eval_on(form.a, env, shape)
    if np.any(a <= 0):
        raise NonpositiveDiffusion("diffusion coefficient is not positive "
                                   "at a quadrature point")
    q = _eval_on(form.q, env, shape)
    den = _eval_on(denominator, env, shape)
    if np.any(den <= 0):
        raise NonpositiveWeight("denominator weight is not positive "
                                "at a quadrature point")
    scale = np.ones(shape) if mw is None else _eval_on(mw, env, shape)
    if np.any(scale <= 0):
        raise NonpositiveWeight("measure weight is not positive at a quadrature point")

    wts = w[None, :] * area[:, None]                   # (m, nq)

    # constant P1 gradients: grad lambda_i = (b_i, c_i) / (2 area)
    x, y = v[:, :, 0], v[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([b, c], axis=2) / (2 * area[:, None, None])   # (m, 3, 2)

    wa = (wts * a * scale).sum(axis=1)                 # (m,)
    wq = wts * q * scale
    wden = wts * den * scale

    m = len(t)
    blocks_k = np.empty((m, 3, 3))
    blocks_m = np.empty((m, 3, 3))
    for i in range(3):
        for j in range(i, 3):
            gij = (grads[:, i, :] * grads[:, j, :]).sum(axis=1)
            pot = (wq * bary[None, :, i] * bary[None, :, j]).sum(axis=1)
            mass = (wden * bary[None, :, i] * bary[None, :, j]).sum(axis=1)
            blocks_k[:, i, j] = wa * gij + pot
            blocks_k[:, j, i] = blocks_k[:, i, j]
            blocks_m[:, i, j] = mass
            blocks_m[:, j, i] = mass

    n = mesh.n_nodes
    K = _scatter_blocks(t, blocks_k, n)
    M = _scatter_blocks(t, blocks_m, n)
    K = K + _robin_2d(mesh, form, n)
    qneg_ratio = float(np.max(np.maximum(-q, 0.0) / den))
    return K, M, qneg_ratio


def _robin_2d(mesh, form, n):
    robin_edges = [(i, j) for i, j, tag in mesh.boundary_edges if tag == ROBIN]
    if not robin_edges or form.sigma is None:
        return sp.csr_matrix((n, n))
    rows, cols, vals = [], [], []
    for i, j in robin_edges:
        length = float(np.linalg.norm(mesh.points[j] - mesh.points[i]))
        if callable(form.sigma):
            midpoint = 0.5 * (mesh.points[i] + mesh.points[j])
            sig = float(form.sigma(midpoint))
        else:
            sig = float(form.sigma)
        # exact P1 edge mass: (|e|/6) [[2, 1], [1, 2]]
        block = sig * length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        glob = (i, j)
        for a_loc in range(2):
            for b_loc in range(2):
                rows.append(glob[a_loc])
                cols.append(glob[b_loc])
                vals.append(block[a_loc, b_loc])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _scatter_blocks(conn, blocks, n):
    """Scatter symmetric element blocks; only the upper triangle is stored
    and mirrored, which keeps K exactly equal to its transpose."""
    nloc = conn.shape[1]
    rows, cols, vals = [], [], []
    for i in range(nloc):
        for j in range(i, nloc):
            gi = conn[:, i]
            gj = conn[:, j]
            rows.append(np.minimum(gi, gj))
            cols.append(np.maximum(gi, gj))
            vals.append(blocks[:, i, j])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return _symmetric_csr(rows, cols, vals, n)


def format_matrix_text(mat):
    """Coordinate text format: one `row col value` line, sorted by row, col."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
    lines.extend(f"{coo.row[k]} {coo.col[k]} {coo.data[k]!r}" for k in order)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# IMS partition of unity
# ---------------------------------------------------------------------------

@dataclass
class IMSPartition:
    """Pair of profiles phi1, phi2 with phi1^2 + phi2^2 = 1 pointwise;
    phi1 = 1 in the boundary strip d <= delta_in, 0 beyond delta_out."""

    delta_in: float
    delta_out: float
    phi1: np.ndarray
    phi2: np.ndarray
    grad_phi1: np.ndarray
    grad_phi2: np.ndarray

    def theta(self, d):
        t = np.clip((np.asarray(d, dtype=float) - self.delta_in)
                    / (self.delta_out - self.delta_in), 0.0, 1.0)
        s = 3 * t**2 - 2 * t**3
        return (np.pi / 2) * s, t

    def values_at(self, d):
        th, _ = self.theta(d)
        return np.cos(th), np.sin(th)

    def gradients_at(self, d, grad_d):
        th, t = self.theta(d)
        ds = 6 * t * (1 - t)
        dtheta = (np.pi / 2) * ds / (self.delta_out - self.delta_in)
        g1 = (-np.sin(th) * dtheta)[..., None] * grad_d
        g2 = (np.cos(th) * dtheta)[..., None] * grad_d
        return g1, g2


def ims_partition(mesh, delta_in, delta_out):
    """Build the transition pair on the mesh nodes."""
    sup_d = mesh.domain.interior_diameter() / 2.0
    if not 0 < delta_in < delta_out < sup_d + 1e-12:
        raise ValueError("need 0 < delta_in < delta_out < sup d")
    sizes = (mesh.element_sizes() if isinstance(mesh, Mesh1D)
             else np.sqrt(2 * mesh.areas()))
    bary_d = np.maximum(mesh.domain.distance_many(mesh.barycenters()), 0.0)
    in_band = (bary_d >= delta_in) & (bary_d <= delta_out)
    local = sizes[in_band].max() if in_band.any() else sizes.min()
    if delta_out - delta_in < 4 * local:
        raise DegenerateBand(
            f"transition band {delta_out - delta_in:.3g} thinner than 4 local "
            f"element sizes ({local:.3g})")

    if isinstance(mesh, Mesh1D):
        node_pts = mesh.nodes[:, None]
        d = mesh.node_distances()
    else:
        node_pts = mesh.points
        d = mesh.node_d
    grad_d = grad_distance_many(mesh.domain, node_pts)
    part = IMSPartition(delta_in, delta_out, None, None, None, None)
    part.phi1, part.phi2 = part.values_at(d)
    part.grad_phi1, part.grad_phi2 = part.gradients_at(d, grad_d)
    return part


def grad_distance_many(domain, pts):
    """Vectorized closed-form gradient of d; a deterministic branch is taken
    on the medial axis (callers exclude or ignore those points)."""
    pts = np.asarray(pts, dtype=float)
    out = np.empty((pts.shape[0], domain.dim))
    for k in range(pts.shape[0]):
        grad, _, _ = domain._closed_form_eval(pts[k].reshape(domain.dim))
        out[k] = grad
    return out


def ims_identity_residual(mesh, partition, u, a, quad_points=4):
    """Max pointwise defect of the localization identity

        a |grad(phi_j u)|^2 = phi_j^2 a |grad u|^2 + a |grad phi_j|^2 u^2
                              + a grad(phi_j^2) . (u grad u)

    summed over j = 1, 2, with gradients taken exactly elementwise.
    """
    a = as_coefficient(a)
    u = np.asarray(u, dtype=float)

    if isinstance(mesh, Mesh1D):
        pts, _, h = _quad_points_1d(mesh, quad_points, 1)
        d = np.maximum(mesh.domain.distance_many(pts.ravel()), 0.0).reshape(pts.shape)
        grad_d = grad_distance_many(mesh.domain, pts.reshape(-1, 1)).reshape(pts.shape + (1,))
        x0 = mesh.nodes[mesh.elements[:, 0]][:, None]
        lam_r = (pts - x0) / h
        u_l = u[mesh.elements[:, 0]][:, None]
        u_r = u[mesh.elements[:, 1]][:, None]
        u_q = u_l * (1 - lam_r) + u_r * lam_r
        grad_u = ((u_r - u_l) / h)[:, :, None] * np.ones_like(pts)[..., None]
        env = _env_1d(pts, d)
    else:
        bary, _ = _tri_rule(1)
        v = mesh.points[mesh.triangles]
        pts = np.einsum("qk,mkj->mqj", bary, v)
        d = np.maximum(mesh.domain.distance_many(pts.reshape(-1, 2)), 0.0)
        d = d.reshape(pts.shape[:2])
        grad_d = grad_distance_many(mesh.domain, pts.reshape(-1, 2))
        grad_d = grad_d.reshape(pts.shape[:2] + (2,))
        area = mesh.areas()
        x, y = v[:, :, 0], v[:, :, 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        grads = np.stack([b, c], axis=2) / (2 * area[:, None, None])
        u_loc = u[mesh.triangles]
        u_q = np.einsum("qk,mk->mq", bary, u_loc)
        grad_u = np.einsum("mk,mkj->mj", u_loc, grads)[:, None, :] \
            * np.ones(pts.shape[:2])[..., None]
        env = _env_2d(pts[:, :, 0], pts[:, :, 1], d)

    a_q = _eval_on(a, env, pts.shape[:2] if mesh.dim == 2 else pts.shape)

    phi1, phi2 = partition.values_at(d)
    g1, g2 = partition.gradients_at(d, grad_d)
    worst = 0.0
    for phi, g in ((phi1, g1), (phi2, g2)):
        full = phi[..., None] * grad_u + u_q[..., None] * g
        lhs = a_q * (full**2).sum(axis=-1)
        rhs = (a_q * phi**2 * (grad_u**2).sum(axis=-1)
               + a_q * (g**2).sum(axis=-1) * u_q**2
               + a_q * (2 * phi * u_q) * (g * grad_u).sum(axis=-1))
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst
