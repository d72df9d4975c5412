"""Explicit Hardy constants, geometric lower bounds for the remainder term,
and numerical certification of the weighted inequality

    integral d^beta |grad u|^2
        >= kappa(beta) integral |u|^2 / d^(2-beta)
         + lambda integral d^alpha |u|^2

on concrete domains.  Certification is one-sided by construction: conforming
elements make every discrete minimum an upper bound for the continuum
infimum, so CERTIFIED means the inequality holds on all tested subspaces.
"""

from dataclasses import dataclass, field

import numpy as np

from .coefficients import Coefficient, constant
from .eigensolve import smallest_eigenpairs
from .errors import ExponentOutOfRange, MethodNotApplicable
from .forms import FormSpec, assemble_pencil
from .geometry import Torus, superharmonicity_scan
from .meshing import (axisymmetric_reduce, build_mesh_1d, build_trimesh,
                      feasible_grading, grading_floor, refine_mesh_1d,
                      refine_trimesh)

CERT_TOL = 1e-4          # absolute slack on the certified margin
LAMBDA0 = 0.94           # pinned lower bound for the Avkhadiev-Wirths constant

CATALOGUE_METHODS = ("none", "brezis_marcus", "fmt_dint", "avkhadiev_wirths",
                     "hhl_volume", "evans_lewis_volume", "fmt_weighted", "tubular")


def kappa(beta):
    """The weighted Hardy constant (1 - beta)^2 / 4, positive for beta < 1."""
    if beta >= 1:
        raise ExponentOutOfRange(f"kappa requires beta < 1, got {beta}")
    return (1.0 - beta) ** 2 / 4.0


@dataclass
class HardyConstants:
    kappa: float
    fmt: float          # None when alpha <= beta - 2
    tubular: float      # None when alpha <= (beta - 3) / 2

    def to_dict(self):
        return {"kappa": self.kappa, "fmt": self.fmt, "tubular": self.tubular}


def fmt_constant(alpha, beta):
    """Two-branch constant of the interior-diameter Hardy remainder:
    2^(alpha-beta) (alpha+2-beta)^2 below alpha = -1 and
    2^(alpha-beta) (1-beta) (2 alpha+3-beta) from -1 on; the branches agree
    at alpha = -1."""
    if beta >= 1:
        raise ExponentOutOfRange(f"requires beta < 1, got {beta}")
    if alpha <= beta - 2:
        return None
    if alpha < -1:
        return 2.0 ** (alpha - beta) * (alpha + 2 - beta) ** 2
    return 2.0 ** (alpha - beta) * (1 - beta) * (2 * alpha + 3 - beta)


def tubular_constant(alpha, beta):
    """Remainder constant for tubular neighborhoods:
    2^(alpha-beta+1) (2 alpha-beta+3) / (1-beta)^(alpha-beta+2)."""
    if beta >= 1:
        raise ExponentOutOfRange(f"requires beta < 1, got {beta}")
    if alpha <= (beta - 3) / 2:
        return None
    return 2.0 ** (alpha - beta + 1) * (2 * alpha - beta + 3) \
        / (1 - beta) ** (alpha - beta + 2)


def hardy_constants(alpha, beta):
    """kappa(beta) plus the two remainder constants; out-of-range entries
    come back absent (None) rather than raising."""
    return HardyConstants(kappa(beta), fmt_constant(alpha, beta),
                          tubular_constant(alpha, beta))


# ---------------------------------------------------------------------------
# the lambda(Omega) catalogue
# ---------------------------------------------------------------------------

def sphere_measure(n):
    return {1: 2.0, 2: 2 * np.pi, 3: 4 * np.pi}[n]


def volume_constant(n):
    """K(n) = n^(1-2/n) |S^(n-1)|^(2/n)."""
    return n ** (1 - 2 / n) * sphere_measure(n) ** (2 / n)


@dataclass
class HardyBoundSpec:
    beta: float
    alpha: float
    kappa: float
    method: str
    lam: float
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {"beta": self.beta, "alpha": self.alpha, "kappa": self.kappa,
                "method": self.method, "lambda": self.lam, "notes": self.notes}


def _require_superharmonic(domain, method, resolution):
    """Convexity implies -lap(d) >= 0; otherwise certify it by scanning."""
    if domain.is_convex:
        return {"superharmonic": "convex variant"}
    report = superharmonicity_scan(domain, resolution=resolution)
    if report.verdict != "PASS":
        raise MethodNotApplicable(
            f"{method} requires -laplacian(d) >= 0; scan found "
            f"{report.min_value:.3e} at {report.argmin}")
    return {"superharmonic": f"scan PASS (min {report.min_value:.6g})"}


def lambda_bound(domain, method, alpha=None, beta=0.0, delta=None,
                 scan_resolution=200):
    """Geometric lower bound for the remainder constant lambda.

    Catalogue entries (diameter, interior-diameter and volume bounds) need a
    convex domain; the weighted and tubular bounds need -lap(d) >= 0, which
    is taken from the variant when convex and certified by a scan otherwise.
    """
    if method not in CATALOGUE_METHODS:
        raise MethodNotApplicable(f"unknown method {method!r}; "
                                  f"choose from {CATALOGUE_METHODS}")
    notes = {"convex": domain.is_convex, "c2_boundary": not hasattr(domain, "vertices")}
    if method == "none":
        return HardyBoundSpec(beta, 0.0 if alpha is None else alpha,
                              kappa(beta), method, 0.0, notes)

    if method in ("brezis_marcus", "fmt_dint", "avkhadiev_wirths",
                  "hhl_volume", "evans_lewis_volume"):
        if beta != 0.0 or (alpha not in (None, 0.0)):
            raise MethodNotApplicable(
                f"{method} is stated for the unweighted case alpha = beta = 0")
        if not domain.is_convex:
            raise MethodNotApplicable(f"{method} requires a convex domain; "
                                      f"{type(domain).__name__} is not")
        n = domain.dim
        if method == "brezis_marcus":
            lam = 1.0 / (4.0 * domain.diameter() ** 2)
        elif method == "fmt_dint":
            lam = 3.0 / domain.interior_diameter() ** 2
        elif method == "avkhadiev_wirths":
            lam = 4.0 * LAMBDA0 / domain.interior_diameter() ** 2
        elif method == "hhl_volume":
            lam = volume_constant(n) / (4.0 * domain.volume() ** (2 / n))
        else:
            lam = 3.0 * volume_constant(n) / (2.0 * domain.volume() ** (2 / n))
        return HardyBoundSpec(0.0, 0.0, kappa(0.0), method, lam, notes)

    if alpha is None:
        raise MethodNotApplicable(f"{method} needs the weight exponent alpha")

    if method == "fmt_weighted":
        c = fmt_constant(alpha, beta)
        if c is None:
            raise MethodNotApplicable(f"fmt_weighted needs alpha > beta - 2")
        notes.update(_require_superharmonic(domain, method, scan_resolution))
        lam = c * domain.interior_diameter() ** (beta - (alpha + 2))
        return HardyBoundSpec(beta, alpha, kappa(beta), method, lam, notes)

    # tubular
    c = tubular_constant(alpha, beta)
    if c is None:
        raise MethodNotApplicable("tubular needs 2 alpha - beta + 3 > 0")
    if delta is None:
        raise MethodNotApplicable("tubular needs the strip width delta")
    if delta > (1 - beta) / 2:
        raise MethodNotApplicable(
            f"tubular needs delta <= (1-beta)/2 = {(1 - beta) / 2}")
    if domain.is_convex:
        notes["superharmonic"] = "convex variant"
    else:
        report = superharmonicity_scan(domain, region=("tubular", delta),
                                       resolution=scan_resolution)
        if report.verdict != "PASS":
            raise MethodNotApplicable(
                f"tubular requires -laplacian(d) >= 0 on the strip; scan found "
                f"{report.min_value:.3e}")
        notes["superharmonic"] = f"strip scan PASS (min {report.min_value:.6g})"
    notes["delta"] = delta
    lam = c * delta
    return HardyBoundSpec(beta, alpha, kappa(beta), method, lam, notes)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def power_of_d(exponent):
    if exponent == 0:
        return constant(1.0)
    return Coefficient(("pow", ("var", "d"), float(exponent)))


@dataclass
class HardyCertificate:
    domain: str
    beta: float
    alpha: float
    lam: float
    kappa: float
    levels: list            # dicts: level, n_or_h, dof, minimum, margin
    verdict: str            # "CERTIFIED" or "INCONCLUSIVE"
    cert_tol: float
    semantics: str

    def to_dict(self):
        return {"domain": self.domain, "beta": self.beta, "alpha": self.alpha,
                "lambda": self.lam, "kappa": self.kappa, "levels": self.levels,
                "verdict": self.verdict, "cert_tol": self.cert_tol,
                "semantics": self.semantics}

    def csv_rows(self):
        return [(self.beta, self.alpha, self.lam, lv["level"], lv["dof"],
                 lv["minimum"], lv["margin"]) for lv in self.levels]


SEMANTICS = ("discrete minima over conforming subspaces bound the continuum "
             "infimum from above; CERTIFIED means every tested subspace "
             "satisfies the inequality, consistent with (not a proof of) the "
             "continuum bound")


def hardy_pencil(mesh, beta, alpha, lam, measure_weight=None,
                 quad_points=6, quad_subdiv=4):
    """Pencil of the Hardy quotient:
    numerator integral d^beta |grad u|^2 - lam integral d^alpha |u|^2,
    denominator integral d^(beta-2) |u|^2."""
    q = constant(0.0) if lam == 0 else Coefficient(
        ("mul", ("num", -float(lam)), power_of_d(alpha).ast))
    form = FormSpec(a=power_of_d(beta), q=q, beta=beta)
    return assemble_pencil(mesh, form, power_of_d(beta - 2),
                           quad_points=quad_points, quad_subdiv=quad_subdiv,
                           measure_weight=measure_weight)


def verify_hardy(domain, beta, alpha=0.0, lam=0.0, n=256, h=None,
                 grading=0.15, levels=3, refine_factor=2, cert_tol=CERT_TOL,
                 seed=0, tol=None, quad_points=6, quad_subdiv=4):
    """Certify the weighted Hardy inequality on a refinement ladder.

    1D and 2D domains mesh directly; a torus reduces to its cross-section
    disc with the cylindrical radius folded into all three integrals.  Each
    ladder level applies `refine_factor` nested bisections, so the discrete
    minima decrease monotonically toward the continuum infimum.
    """
    if beta >= 1:
        raise ExponentOutOfRange(f"requires beta < 1, got {beta}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    kap = kappa(beta)

    measure_weight = None
    mesh_domain = domain
    if isinstance(domain, Torus):
        mesh_domain, measure_weight, _ = axisymmetric_reduce(domain, 0)

    if mesh_domain.dim == 1:
        # steepest float64-feasible grading at this depth (with bisection room)
        floor = grading_floor(mesh_domain, headroom=refine_factor * (levels - 1))
        grading = feasible_grading(grading, n // 2,
                                   mesh_domain.interior_diameter() / 2, floor)
        mesh = build_mesh_1d(mesh_domain, n, grading)
        refine = refine_mesh_1d
        size_of = lambda m: len(m.elements)
    else:
        if h is None:
            h = mesh_domain.interior_diameter() / 16
        mesh = build_trimesh(mesh_domain, h, grading)
        refine = refine_trimesh
        size_of = lambda m: len(m.triangles)

    rows = []
    for level in range(levels):
        if level > 0:
            for _ in range(refine_factor):
                mesh = refine(mesh)
        pencil = hardy_pencil(mesh, beta, alpha, lam,
                              measure_weight=measure_weight,
                              quad_points=quad_points, quad_subdiv=quad_subdiv)
        rep = smallest_eigenpairs(pencil, 1, tol=tol, seed=seed)
        mu = float(rep.eigenvalues[0])
        rows.append({"level": level, "size": size_of(mesh), "dof": pencil.dof,
                     "minimum": mu, "margin": mu - kap})

    certified = all(r["margin"] >= -cert_tol for r in rows)
    return HardyCertificate(repr(domain), beta, alpha, lam, kap, rows,
                            "CERTIFIED" if certified else "INCONCLUSIVE",
                            cert_tol, SEMANTICS)
