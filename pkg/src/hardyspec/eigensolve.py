"""Smallest eigenpairs of sparse symmetric pencils K x = lambda M x.

Shift-invert Lanczos (ARPACK) around a shift certified to sit below the
bottom of the spectrum.  The floor comes from a quadrature-level bound on
the negative part of the form (stored at assembly) or a scaled Gershgorin
bound; tridiagonal pencils tighten it by exact Sturm-sequence inertia
bisection, the rest by a below-shift probe walk.  Small pencils with
moderate scale spread fall through to a dense solve.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationFailure, NoConvergence

DENSE_CUTOFF = 120
NEAR_FLOOR_FACTOR = 1e3   # floors further than this from the diagonal upper
                          # bound go through the probe walk, not a direct solve


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray          # ||K x - lam M x|| / ||M x||
    backward_errors: np.ndarray    # ||K x - lam M x|| / ((||K||+|lam| ||M||) ||x||)
    eigenvectors: np.ndarray       # (dof, count), M-orthonormal
    dof: int
    tol: float
    sigma: float                   # shift used (below the returned spectrum)
    seed: int
    solver: str                    # "dense" or "shift-invert-lanczos"
    iterations: int                # number of iterative-solver invocations
    converged: bool = True
    mesh_info: dict = field(default_factory=dict)

    def count_below(self, lam):
        return int(np.sum(self.eigenvalues <= lam))

    def to_dict(self):
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(v) for v in self.residuals],
            "backward_errors": [float(v) for v in self.backward_errors],
            "dof": self.dof,
            "tol": self.tol,
            "sigma": self.sigma,
            "seed": self.seed,
            "solver": self.solver,
            "iterations": self.iterations,
            "converged": self.converged,
            "mesh_info": self.mesh_info,
        }


def _gershgorin_lower(pencil, seed):
    """A value certified to lie below every pencil eigenvalue.

    Work on the diagonally scaled pair K' = S K S, M' = S M S with
    S = diag(M)^{-1/2}; Rayleigh quotients are invariant.  Then
    lam >= min(x K' x) / (worst-case x M' x) via Gershgorin bounds.
    """
    K, M = pencil.K, pencil.M
    dM = M.diagonal()
    if np.any(dM <= 0):
        raise FactorizationFailure("denominator matrix has a nonpositive diagonal")
    s = 1.0 / np.sqrt(dM)
    S = sp.diags(s)
    Ks = (S @ K @ S).tocsr()
    Ms = (S @ M @ S).tocsr()

    def gersh(A):
        d = A.diagonal()
        row = np.asarray(abs(A).sum(axis=1)).ravel()
        off = row - np.abs(d)
        return d - off, d + off

    klo, _ = gersh(Ks)
    mlo, mhi = gersh(Ms)
    gk = float(klo.min())
    if gk >= 0:
        return gk / float(mhi.max())
    gm = float(mlo.min())
    if gm <= 0:
        # Gershgorin fails to bound lambda_min(M') away from zero; compute it
        n = Ms.shape[0]
        v0 = np.random.RandomState(seed).standard_normal(n)
        try:
            lam_min = float(spla.eigsh(Ms, k=1, which="SA", v0=v0,
                                       maxiter=5000, tol=1e-6,
                                       return_eigenvectors=False)[0])
        except Exception:
            lam_min = None
        if lam_min is None or lam_min <= 0:
            # mass matrices of conforming meshes keep a positive bottom;
            # fall back to a crude but safe floor
            lam_min = 1e-3
        gm = lam_min
    return gk / gm


def _diag_spread(pencil):
    """max |K_ii| / M_ii: the scale of the top of the pencil spectrum."""
    return float(np.max(np.abs(pencil.K.diagonal()) / pencil.M.diagonal()))


def _diag_upper(pencil):
    """min K_ii / M_ii: a certified upper bound for the smallest eigenvalue
    (the Rayleigh quotient of a coordinate vector)."""
    return float(np.min(pencil.K.diagonal() / pencil.M.diagonal()))


def _dense_solve(pencil, count):
    # diagonal prescaling keeps LAPACK's Cholesky of M well behaved
    s = 1.0 / np.sqrt(pencil.M.diagonal())
    K = pencil.K.toarray() * s[:, None] * s[None, :]
    M = pencil.M.toarray() * s[:, None] * s[None, :]
    vals, vecs = scipy.linalg.eigh(K, M, subset_by_index=[0, count - 1])
    return vals, vecs * s[:, None]


def _arpack_once(K, M, count, sigma, v0, tol, maxiter, which="LM"):
    try:
        vals, vecs = spla.eigsh(K, k=count, M=M, sigma=sigma, which=which,
                                mode="normal", v0=v0, tol=tol, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            raise
        vals, vecs = exc.eigenvalues, exc.eigenvectors
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _probe(K, M, k_buf, sigma, v0, tol, maxiter, which="LM"):
    """One shift-invert solve with the singular-factor retry."""
    for attempt in range(4):
        try:
            return _arpack_once(K, M, k_buf, sigma, v0, tol, maxiter,
                                which=which), sigma
        except spla.ArpackNoConvergence:
            raise
        except RuntimeError as exc:
            if attempt == 3:
                raise FactorizationFailure(str(exc)) from exc
            sigma = sigma - (1e-6 + 0.01 * abs(sigma)) * (attempt + 1)
    raise AssertionError("unreachable")


def _probe_below(K, M, sigma, v0, maxiter):
    """The eigenvalue closest below sigma, or None when the whole spectrum
    sits above.  which="SA" targets the most negative transformed value
    1/(lam - sigma), which exists exactly when some lam < sigma."""
    for attempt in range(4):
        try:
            vals = spla.eigsh(K, k=1, M=M, sigma=sigma, which="SA", v0=v0,
                              tol=1e-8, maxiter=maxiter,
                              return_eigenvectors=False)
            lam = float(vals[0])
            return (lam if lam < sigma else None), sigma
        except spla.ArpackNoConvergence:
            # eigenvalues below sigma transform to dominant negatives and
            # converge fast; stagnation means the spectrum sits above
            return None, sigma
        except RuntimeError as exc:
            if attempt == 3:
                raise FactorizationFailure(str(exc)) from exc
            sigma = sigma - (1e-6 + 0.01 * abs(sigma)) * (attempt + 1)
    raise AssertionError("unreachable")


def _is_tridiagonal(A):
    coo = A.tocoo()
    return bool(np.all(np.abs(coo.row - coo.col) <= 1))


def _sturm_count(kd, ko, md, mo, sigma):
    """Eigenvalues of the tridiagonal pencil strictly below sigma, via the
    signs of the LDL^T pivots of K - sigma M (Sturm sequence)."""
    n = len(kd)
    count = 0
    tiny = np.finfo(float).tiny
    d = kd[0] - sigma * md[0]
    if d == 0.0:
        d = tiny
    if d < 0:
        count += 1
    for i in range(1, n):
        e = ko[i - 1] - sigma * mo[i - 1]
        correction = e * e / d if np.isfinite(d) and d != 0.0 else 0.0
        d = kd[i] - sigma * md[i] - correction
        if d == 0.0:
            d = tiny
        if d < 0:
            count += 1
    return count


def _sturm_brackets(K, M, count, sigma_floor, c_upper):
    """Certified brackets (lo_j, hi_j] around each of the count smallest
    eigenvalues of a tridiagonal pencil, by inertia bisection; exactly j
    eigenvalues lie below lo_j."""
    kd = K.diagonal()
    ko = K.diagonal(1) if K.shape[0] > 1 else np.zeros(0)
    md = M.diagonal()
    mo = M.diagonal(1) if M.shape[0] > 1 else np.zeros(0)

    def below(x):
        return _sturm_count(kd, ko, md, mo, x)

    floor = sigma_floor
    for _ in range(8):
        if below(floor) == 0:
            break
        floor = floor - (1.0 + abs(floor))
    ceil = c_upper + 1e-6 * (1.0 + abs(c_upper))
    for _ in range(200):
        if below(ceil) >= count:
            break
        ceil = ceil + (1.0 + abs(ceil))

    brackets = []
    for j in range(count):
        lo, hi = floor, ceil
        for _ in range(220):
            if hi - lo <= 1e-10 * (1.0 + abs(lo)):
                break
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if below(mid) <= j:
                lo = mid
            else:
                hi = mid
        brackets.append((lo, hi))
    return brackets


def _locate_shift(K, M, sigma_floor, c_upper, v0, maxiter):
    """Find a shift certified (by below-shift probes) to sit under the whole
    spectrum, yet close enough to its bottom for sharp shift-invert solves.

    A floor many orders of magnitude below the spectrum cannot be used
    directly (the transformed spectrum degenerates numerically), so walk an
    anchor downward, amplifying the step while probes keep finding smaller
    eigenvalues."""
    probes = 0
    near = (c_upper - sigma_floor) <= NEAR_FLOOR_FACTOR * (1.0 + abs(c_upper))
    if near:
        return sigma_floor, probes
    anchor = c_upper
    step = 0.5 * (1.0 + abs(anchor))
    sigma = anchor - step
    for _ in range(80):
        sigma = max(sigma, sigma_floor)
        below, sigma = _probe_below(K, M, sigma, v0, maxiter)
        probes += 1
        if below is None:
            return sigma, probes
        anchor = below
        step = max(8.0 * step, 0.5 * (1.0 + abs(anchor)))
        sigma = anchor - step
        if sigma <= sigma_floor and anchor - sigma_floor <= 1e8 * (1.0 + abs(anchor)):
            return sigma_floor, probes
    raise NoConvergence("shift walk failed to settle below the spectrum")


def _polish(K, M, lam, x):
    """One inverse-iteration step at a slightly detuned shift; keeps the
    update only when it reduces the residual."""
    shift = lam - max(1e-8 * (1.0 + abs(lam)), 0.0)
    try:
        lu = spla.splu((K - shift * M).tocsc())
    except RuntimeError:
        return lam, x
    y = lu.solve(M @ x)
    ny = np.sqrt(abs(y @ (M @ y)))
    if not np.isfinite(ny) or ny == 0:
        return lam, x
    y = y / ny
    lam_y = float(y @ (K @ y)) / float(y @ (M @ y))
    def resid(l, v):
        r = K @ v - l * (M @ v)
        return np.linalg.norm(r) / max(np.linalg.norm(M @ v), 1e-300)
    if resid(lam_y, y) < resid(lam, x):
        return lam_y, y
    return lam, x


def smallest_eigenpairs(pencil, count=1, tol=None, seed=0, maxiter=400,
                        mesh_info=None, polish=True):
    """The `count` algebraically smallest eigenpairs of K x = lambda M x.

    Deterministic for a fixed seed (the seed fixes the Lanczos start
    vector).  Eigenvectors come back M-orthonormal; residuals are checked
    against tol, with one inverse-iteration polish when needed.
    """
    n = pencil.dof
    if count < 1:
        raise ValueError("count must be at least 1")
    if count > n:
        raise ValueError(f"requested {count} eigenpairs from a {n}-dof pencil")
    if tol is None:
        tol = 1e-10 if pencil.meta.get("dim", 1) == 1 else 1e-8

    lower = pencil.meta.get("spectral_lower_bound") if pencil.meta else None
    if lower is None:
        lower = _gershgorin_lower(pencil, seed)
    sigma_floor = lower - 0.01 * (1.0 + abs(lower))
    c_upper = _diag_upper(pencil)
    solver_calls = 0

    # dense transformation methods lose the bottom of a pencil whose top
    # is more than ~1/eps above it; such pencils must go through shift-invert
    dense_feasible = _diag_spread(pencil) <= 1e12
    if n <= max(DENSE_CUTOFF, count + 2) and (dense_feasible or n <= count + 2):
        vals, vecs = _dense_solve(pencil, count)
        solver = "dense"
        sigma = sigma_floor
    else:
        solver = "shift-invert-lanczos"
        K, M = pencil.K, pencil.M
        v0 = np.random.RandomState(seed).standard_normal(n)
        k_buf = min(n - 1, count + 3)
        near_floor = (c_upper - sigma_floor) \
            <= NEAR_FLOOR_FACTOR * (1.0 + abs(c_upper))
        try:
            vals, vecs, sigma, solver_calls = _sparse_paths(
                K, M, count, k_buf, sigma_floor, c_upper, near_floor,
                v0, tol, maxiter)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(
                f"Lanczos stalled after {maxiter} iterations", partial=exc) from exc
        vals = vals[:count]
        vecs = vecs[:, :count]

    # normalize in the M inner product
    K, M = pencil.K, pencil.M
    for j in range(vecs.shape[1]):
        nj = np.sqrt(abs(vecs[:, j] @ (M @ vecs[:, j])))
        vecs[:, j] /= nj

    vals = np.asarray(vals, dtype=float)
    residuals = np.empty(count)
    backward = np.empty(count)
    normK = spla.norm(K, 1) if sp.issparse(K) else np.linalg.norm(K, 1)
    normM = spla.norm(M, 1) if sp.issparse(M) else np.linalg.norm(M, 1)
    for j in range(count):
        x = vecs[:, j]
        r = K @ x - vals[j] * (M @ x)
        res = np.linalg.norm(r) / max(np.linalg.norm(M @ x), 1e-300)
        if polish and res > tol and solver != "dense":
            vals[j], vecs[:, j] = _polish(K, M, vals[j], x)
            x = vecs[:, j]
            r = K @ x - vals[j] * (M @ x)
            res = np.linalg.norm(r) / max(np.linalg.norm(M @ x), 1e-300)
        residuals[j] = res
        backward[j] = np.linalg.norm(r) / max((normK + abs(vals[j]) * normM)
                                              * np.linalg.norm(x), 1e-300)

    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    residuals = residuals[order]
    backward = backward[order]
    converged = bool(np.all((residuals <= tol) | (backward <= tol)))
    return SpectralReport(vals, residuals, backward, vecs, n, tol,
                          float(sigma), seed, solver, solver_calls,
                          converged, mesh_info or dict(pencil.meta))


def _sparse_paths(K, M, count, k_buf, sigma_floor, c_upper, near_floor,
                  v0, tol, maxiter):
    if _is_tridiagonal(K) and _is_tridiagonal(M):
        return _sturm_slice(K, M, count, sigma_floor, c_upper, v0, tol, maxiter)
    if near_floor:
        # the floor (quadrature bound or Gershgorin) is rigorous, so the
        # nearest-shift solve at it returns the bottom of the spectrum;
        # a stall means the floor was too far from a clustered bottom
        try:
            return _direct_at_floor(K, M, count, k_buf, sigma_floor, v0,
                                    tol, maxiter)
        except spla.ArpackNoConvergence:
            pass
    return _walk(K, M, count, k_buf, sigma_floor, c_upper, v0, tol, maxiter)


def _sturm_slice(K, M, count, sigma_floor, c_upper, v0, tol, maxiter):
    """Spectrum slicing for tridiagonal pencils: inertia bisection brackets
    every requested eigenvalue (so none can be skipped even when the
    spectrum spans many decades), then one shift-invert solve per cluster
    collects the eigenvectors just above a certified shift."""
    brackets = _sturm_brackets(K, M, count, sigma_floor, c_upper)

    # group near-coincident brackets so ARPACK resolves multiplets jointly
    clusters = [[0]]
    for j in range(1, count):
        prev = brackets[clusters[-1][-1]][1]
        if brackets[j][0] - prev <= 1e-8 * (1.0 + abs(prev)):
            clusters[-1].append(j)
        else:
            clusters.append([j])

    n = K.shape[0]
    vals = np.empty(count)
    vecs = np.empty((n, count))
    solver_calls = 0
    sigma0 = None
    prev_hi = None
    for group in clusters:
        lo = brackets[group[0]][0]
        width = max(brackets[group[-1]][1] - lo, 1e-12 * (1.0 + abs(lo)))
        # keep the shift a respectful distance below the cluster: a shift
        # within rounding of an eigenvalue makes the factor numerically
        # singular and the solves meaningless
        pad = max(2.0 * width, 1e-6 * (1.0 + abs(lo)))
        if prev_hi is not None:
            pad = min(pad, 0.5 * (lo - prev_hi))
        sigma = lo - pad
        prev_hi = brackets[group[-1]][1]
        if sigma0 is None:
            sigma0 = sigma
        for attempt in range(4):
            try:
                got = spla.eigsh(K, k=len(group), M=M, sigma=sigma,
                                 which="LA", mode="normal", v0=v0,
                                 tol=tol, maxiter=maxiter)
                break
            except spla.ArpackNoConvergence as exc:
                if attempt == 3 or len(exc.eigenvalues) < len(group):
                    raise
                got = (exc.eigenvalues, exc.eigenvectors)
                break
            except RuntimeError as exc:
                if attempt == 3:
                    raise FactorizationFailure(str(exc)) from exc
                sigma = sigma - 1e-2 * width * (attempt + 1)
        solver_calls += 1
        gvals, gvecs = got
        order = np.argsort(gvals)
        for pos, j in enumerate(group):
            vals[j] = gvals[order[pos]]
            vecs[:, j] = gvecs[:, order[pos]]
    return vals, vecs, sigma0, solver_calls


def _direct_at_floor(K, M, count, k_buf, sigma_floor, v0, tol, maxiter):
    (vals, vecs), sigma = _probe(K, M, k_buf, sigma_floor, v0,
                                 max(tol, 1e-6), maxiter)
    solver_calls = 1
    # recenter just below the located bottom to sharpen the separation
    spread = max(float(vals[min(count, len(vals) - 1)] - vals[0]),
                 1e-6 * (1.0 + abs(vals[0])))
    sigma_b = vals[0] - 0.05 * spread
    try:
        (vals_b, vecs_b), sigma_b = _probe(K, M, k_buf, sigma_b, v0,
                                           tol, maxiter)
        solver_calls += 1
        if vals_b[0] > sigma_b:
            vals, vecs, sigma = vals_b, vecs_b, sigma_b
    except (FactorizationFailure, spla.ArpackNoConvergence):
        pass
    return vals, vecs, sigma, solver_calls


def _walk(K, M, count, k_buf, sigma_floor, c_upper, v0, tol, maxiter):
    sigma, solver_calls = _locate_shift(K, M, sigma_floor, c_upper,
                                        v0, maxiter)
    (vals, vecs), sigma = _probe(K, M, k_buf, sigma, v0,
                                 max(tol, 1e-7), maxiter)
    solver_calls += 1
    for _ in range(3):
        # recenter just below the located bottom for sharp convergence,
        # verifying that nothing lies beneath
        spread = max(float(vals[min(count, len(vals) - 1)] - vals[0]),
                     1e-6 * (1.0 + abs(vals[0])))
        sigma_b = vals[0] - 0.05 * spread
        below, sigma_b = _probe_below(K, M, sigma_b, v0, maxiter)
        solver_calls += 1
        if below is not None:
            sigma, extra = _locate_shift(K, M, sigma_floor, below,
                                         v0, maxiter)
            solver_calls += extra + 1
            (vals, vecs), sigma = _probe(K, M, k_buf, sigma, v0,
                                         max(tol, 1e-7), maxiter)
            continue
        try:
            (vals_b, vecs_b), sigma_b = _probe(K, M, k_buf, sigma_b,
                                               v0, tol, maxiter)
            solver_calls += 1
            if vals_b[0] > sigma_b:
                vals, vecs, sigma = vals_b, vecs_b, sigma_b
        except (FactorizationFailure, spla.ArpackNoConvergence):
            pass
        break
    return vals, vecs, sigma, solver_calls


def counting_function(report, lam):
    """Number of computed eigenvalues <= lam (closed at lam).

    When lam is not below the largest computed eigenvalue the answer only
    bounds the true counting function from below.
    """
    return int(np.sum(report.eigenvalues <= lam))


def counting_is_lower_bound(report, lam):
    return bool(lam >= report.eigenvalues[-1]) and report.dof > len(report.eigenvalues)


@dataclass
class ConvergenceTable:
    values: list
    dofs: list
    rates: list
    extrapolated: float
    flag: str                     # "Converging", "Exact" or "NonConvergent"

    def to_dict(self):
        return {
            "values": [float(v) for v in self.values],
            "dofs": [int(d) for d in self.dofs],
            "rates": [float(r) for r in self.rates],
            "extrapolated": None if self.extrapolated is None else float(self.extrapolated),
            "flag": self.flag,
        }


def refine_and_extrapolate(pencil_factory, levels, tol=None, seed=0):
    """Solve the smallest eigenvalue on a ladder of nested refinements.

    pencil_factory(level) must return the pencil of level `level`, where
    each level halves the element size.  Reports per-level values, observed
    convergence rates from consecutive triples, and the Aitken limit.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels to observe a rate")
    values, dofs = [], []
    for level in range(levels):
        pencil = pencil_factory(level)
        rep = smallest_eigenpairs(pencil, 1, tol=tol, seed=seed)
        values.append(float(rep.eigenvalues[0]))
        dofs.append(pencil.dof)

    scale = max(1.0, max(abs(v) for v in values))
    diffs = [values[i] - values[i + 1] for i in range(len(values) - 1)]
    if all(abs(d) <= 1e-14 * scale for d in diffs):
        return ConvergenceTable(values, dofs, [], values[0], "Exact")

    decreasing = all(d > 0 for d in diffs)
    non_contracting = all(abs(diffs[i + 1]) >= 0.9 * abs(diffs[i])
                          for i in range(len(diffs) - 1))
    if decreasing and non_contracting:
        return ConvergenceTable(values, dofs, [], None, "NonConvergent")

    rates = []
    for i in range(len(diffs) - 1):
        if diffs[i] * diffs[i + 1] > 0 and abs(diffs[i + 1]) < abs(diffs[i]):
            rates.append(np.log2(abs(diffs[i]) / abs(diffs[i + 1])))
    v0, v1, v2 = values[-3], values[-2], values[-1]
    denom = (v2 - v1) - (v1 - v0)
    extrapolated = v2 - (v2 - v1) ** 2 / denom if denom != 0 else v2
    return ConvergenceTable(values, dofs, rates, extrapolated, "Converging")
