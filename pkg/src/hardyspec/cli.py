"""Configuration-driven command line: parse a sectioned key-value config,
dispatch to the geometry / hardy / spectral pipelines, and emit reports.

Exit status: 0 for PASS/CERTIFIED/DISCRETE or plain computational success,
1 for FAIL/INCONCLUSIVE verdicts, 2 for configuration or runtime errors.
"""

import argparse
import configparser
import os
import sys

import numpy as np

from . import geometry, report
from .coefficients import parse_coefficient
from .eigensolve import smallest_eigenpairs
from .errors import ConfigError, HardySpecError
from .forms import FormSpec, assemble_pencil, format_matrix_text
from .hardy import CATALOGUE_METHODS, lambda_bound, verify_hardy
from .meshing import (axisymmetric_reduce, build_mesh_1d, build_trimesh,
                      format_mesh_text)
from .spectral import (ProblemSpec, check_form_nonnegativity,
                       check_pointwise_criterion, discreteness_diagnostic,
                       persson_sequence, strip_mesh)

COMMANDS = ("distance", "hardy", "spectrum", "persson", "criteria", "diagnose")


def _load_config(path):
    parser = configparser.ConfigParser(interpolation=None)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc
    return parser


class _Section:
    """Typed getters with field-qualified diagnostics."""

    def __init__(self, parser, name):
        self.name = name
        self.data = dict(parser[name]) if parser.has_section(name) else {}

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ConfigError(f"[{self.name}] is missing required key {key!r}")
        return self.data[key]

    def get_float(self, key, default=None):
        raw = self.data.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {raw!r} is not a number") from None

    def get_int(self, key, default=None):
        raw = self.data.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {raw!r} is not an integer") from None


def _build_domain(sec):
    variant = sec.require("variant")
    try:
        if variant == "interval":
            return geometry.Interval(sec.get_float("a", 0.0), sec.get_float("b", 1.0))
        if variant == "disc":
            return geometry.Disc((sec.get_float("center_x", 0.0),
                                  sec.get_float("center_y", 0.0)),
                                 sec.get_float("radius", 1.0))
        if variant == "annulus":
            return geometry.Annulus((sec.get_float("center_x", 0.0),
                                     sec.get_float("center_y", 0.0)),
                                    sec.get_float("r_in", 0.5),
                                    sec.get_float("r_out", 1.0))
        if variant == "torus":
            return geometry.Torus(sec.get_float("c", 3.0), sec.get_float("r_tube", 1.0))
        if variant == "convex_polygon":
            raw = sec.require("vertices")
            verts = []
            for chunk in raw.split(";"):
                xy = chunk.split(",")
                if len(xy) != 2:
                    raise ConfigError(f"[domain] bad vertex {chunk!r}")
                verts.append((float(xy[0]), float(xy[1])))
            return geometry.ConvexPolygon(verts)
    except (ValueError, ConfigError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[domain] invalid parameters: {exc}") from exc
    raise ConfigError(f"[domain] unknown variant {variant!r}")


def _build_form(sec):
    try:
        a = parse_coefficient(sec.get("a", "1"))
        q = parse_coefficient(sec.get("q", "0"))
    except HardySpecError as exc:
        raise ConfigError(f"[form] expression error: {exc}") from exc
    sigma = None
    if "sigma_left" in sec.data or "sigma_right" in sec.data:
        sigma = (sec.get_float("sigma_left", 0.0), sec.get_float("sigma_right", 0.0))
    beta = sec.get_float("beta")
    return FormSpec(a=a, q=q, sigma=sigma, beta=beta)


def _problem_spec(domain, form, form_sec, num_sec, seed):
    ks = tuple(range(num_sec.get_int("k_min", 2), num_sec.get_int("k_max", 16) + 1))
    return ProblemSpec(
        domain=domain, form=form,
        gamma=form_sec.get_float("gamma", 0.5),
        ks=ks,
        k0=num_sec.get_int("k0"),
        strip_elements=num_sec.get_int("strip_elements", 96),
        grading=num_sec.get_float("grading"),
        samples=num_sec.get_int("samples", 10000),
        lam=form_sec.get_float("lambda", 0.0),
        alpha=form_sec.get_float("alpha", 0.0),
        seed=seed,
        tol=num_sec.get_float("tol"),
    )


def _status_from_verdict(verdict):
    return 0 if verdict in ("PASS", "CERTIFIED", "DISCRETE") else 1


def run(command, config_path, out_dir=".", seed=None, dry_run=False,
        formats=None):
    """Execute one pipeline; returns (status, result dict)."""
    parser = _load_config(config_path)
    run_sec = _Section(parser, "run")
    declared = run_sec.get("command")
    if declared is not None and declared != command:
        raise ConfigError(f"[run] command = {declared!r} does not match "
                          f"the requested subcommand {command!r}")
    domain_sec = _Section(parser, "domain")
    form_sec = _Section(parser, "form")
    num_sec = _Section(parser, "numerics")
    out_sec = _Section(parser, "output")
    point_sec = _Section(parser, "point")

    if seed is None:
        seed = num_sec.get_int("seed", 0)
    if formats is None:
        formats = tuple(f.strip() for f in out_sec.get("formats", "json").split(","))

    domain = _build_domain(domain_sec)
    resolved = {"command": command, "seed": seed,
                "config_path": os.path.abspath(config_path),
                "sections": {name: dict(parser[name]) for name in parser.sections()}}

    csv_payload = None  # (filename, header, rows)
    if command == "distance":
        coords = [point_sec.get_float("x")]
        if domain.dim >= 2:
            coords.append(point_sec.get_float("y", 0.0))
        if domain.dim == 3:
            coords.append(point_sec.get_float("z", 0.0))
        if coords[0] is None:
            raise ConfigError("[point] x is required for the distance command")
        p = np.array(coords, dtype=float)
        ev = domain.distance_calculus(p)
        result = {"point": p.tolist(), "d": ev.d,
                  "grad_d": ev.grad_d.tolist() if hasattr(ev.grad_d, "tolist")
                  else ev.grad_d,
                  "neg_laplacian_d": ev.neg_laplacian_d,
                  "provenance": ev.provenance, "near_ridge": ev.near_ridge}
        status = 0

    elif command == "hardy":
        beta = form_sec.get_float("beta", 0.0)
        alpha = form_sec.get_float("alpha", 0.0)
        method = form_sec.get("lambda_method")
        if method is not None:
            if method not in CATALOGUE_METHODS:
                raise ConfigError(f"[form] unknown lambda_method {method!r}")
            bound = lambda_bound(domain, method, alpha=alpha, beta=beta,
                                 delta=form_sec.get_float("delta"))
            lam = bound.lam
        else:
            lam = form_sec.get_float("lambda", 0.0)
        if dry_run:
            result = {"dry_run": True, "beta": beta, "alpha": alpha, "lambda": lam}
            status = 0
        else:
            cert = verify_hardy(
                domain, beta, alpha, lam,
                n=num_sec.get_int("n", 256), h=num_sec.get_float("h"),
                grading=num_sec.get_float("grading", 0.15),
                levels=num_sec.get_int("levels", 3), seed=seed,
                tol=num_sec.get_float("tol"))
            result = cert
            status = _status_from_verdict(cert.verdict)
            csv_payload = ("hardy_table.csv",
                           ("beta", "alpha", "lambda", "level", "dof",
                            "minimum", "margin"), cert.csv_rows())

    elif command == "spectrum":
        form = _build_form(form_sec)
        count = num_sec.get_int("count", 5)
        measure_weight = None
        mesh_domain = domain
        extra_q = None
        if isinstance(domain, geometry.Torus):
            mode = num_sec.get_int("mode", 0)
            mesh_domain, measure_weight, potential = axisymmetric_reduce(domain, mode)
            if not potential.is_zero():
                extra_q = form.a * potential
        if mesh_domain.dim == 1:
            tags = (form_sec.get("bc_left", "dirichlet"),
                    form_sec.get("bc_right", "dirichlet"))
            if any(t not in ("dirichlet", "robin") for t in tags):
                raise ConfigError("[form] bc_left/bc_right must be "
                                  "dirichlet or robin")
            mesh = build_mesh_1d(mesh_domain, num_sec.get_int("n", 256),
                                 num_sec.get_float("grading", 1.0), tags=tags)
        else:
            mesh = build_trimesh(mesh_domain,
                                 num_sec.get_float("h", mesh_domain.interior_diameter() / 16),
                                 num_sec.get_float("grading", 1.0))
        if extra_q is not None:
            form = FormSpec(a=form.a, q=form.q + extra_q, sigma=form.sigma,
                            beta=form.beta)
        if dry_run:
            n_el = len(mesh.elements) if mesh.dim == 1 else len(mesh.triangles)
            result = {"dry_run": True, "nodes": mesh.n_nodes, "elements": n_el}
            status = 0
        else:
            pencil = assemble_pencil(mesh, form, 1.0, measure_weight=measure_weight)
            rep = smallest_eigenpairs(pencil, count, tol=num_sec.get_float("tol"),
                                      seed=seed)
            result = rep
            status = 0
            csv_payload = ("spectrum_table.csv", ("index", "value", "residual"),
                           [(i, float(v), float(r)) for i, (v, r) in
                            enumerate(zip(rep.eigenvalues, rep.residuals))])
            if out_sec.get("write_mesh") == "true":
                report._atomic_write(os.path.join(out_dir, "mesh.txt"),
                                     format_mesh_text(mesh))
            if out_sec.get("write_pencil") == "true":
                report._atomic_write(os.path.join(out_dir, "pencil_K.txt"),
                                     format_matrix_text(pencil.K))
                report._atomic_write(os.path.join(out_dir, "pencil_M.txt"),
                                     format_matrix_text(pencil.M))

    elif command in ("persson", "criteria", "diagnose"):
        form = _build_form(form_sec)
        problem = _problem_spec(domain, form, form_sec, num_sec, seed)
        if dry_run:
            sizes = {}
            for k in problem.ks[:1] + problem.ks[-1:]:
                sub, _ = strip_mesh(problem, k)
                sizes[str(k)] = sub.n_nodes
            result = {"dry_run": True, "strip_nodes": sizes, "ks": list(problem.ks)}
            status = 0
        elif command == "persson":
            seq = persson_sequence(problem)
            result = seq
            status = 0
            csv_payload = ("persson_table.csv", ("k", "delta", "dof", "mu", "bound"),
                           seq.csv_rows())
        elif command == "criteria":
            pw = check_pointwise_criterion(problem)
            fm = check_form_nonnegativity(problem)
            both = "PASS" if (pw.verdict == "PASS" and fm.verdict == "PASS") else "FAIL"
            result = {"pointwise": pw, "form": fm, "verdict": both}
            status = _status_from_verdict(both)
        else:
            diag = discreteness_diagnostic(problem)
            result = diag
            status = _status_from_verdict(diag.verdict)
            if diag.sequence is not None:
                csv_payload = ("persson_table.csv",
                               ("k", "delta", "dof", "mu", "bound"),
                               diag.sequence.csv_rows())
    else:
        raise ConfigError(f"unknown command {command!r}")

    os.makedirs(out_dir, exist_ok=True)
    doc = report.make_report(command, resolved, result, status)
    if "json" in formats:
        report.write_json(os.path.join(out_dir, f"{command}_report.json"), doc)
    if "csv" in formats and csv_payload is not None:
        name, header, rows = csv_payload
        report.write_csv(os.path.join(out_dir, name), header, rows)
    return status, doc


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hardyspec",
        description="numerical laboratory for degenerate elliptic forms: "
                    "boundary-distance Hardy inequalities and spectral "
                    "discreteness diagnostics")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the run config")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="solver seed")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate the config and mesh feasibility only")
    parser.add_argument("--format", default=None,
                        help="comma-separated output formats (json,csv)")
    args = parser.parse_args(argv)

    formats = None
    if args.format is not None:
        formats = tuple(f.strip() for f in args.format.split(","))
    try:
        status, _ = run(args.command, args.config, out_dir=args.out,
                        seed=args.seed, dry_run=args.dry_run, formats=formats)
    except HardySpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
