import numpy as np
import pytest

from hardyspec import (FormSpec, Interval, ProblemSpec,
                       check_form_nonnegativity, check_pointwise_criterion,
                       discreteness_diagnostic, persson_sequence)
from hardyspec.errors import StripTooThin
from hardyspec.spectral import strip_mesh

IV = Interval(0, 1)


def _problem(a, q, beta, gamma, ks, **kw):
    return ProblemSpec(domain=IV, form=FormSpec(a=a, q=q, beta=beta),
                       gamma=gamma, ks=ks, **kw)


def test_persson_laplacian_matches_strip_modes():
    # the strip {d < 1/k} splits into two intervals of length 1/k, so the
    # smallest clamped mode is (pi k)^2
    prob = _problem(1.0, 0.0, 0.0, 0.5, (2, 4, 8))
    seq = persson_sequence(prob)
    for e in seq.entries:
        assert e["mu"] == pytest.approx(np.pi**2 * e["k"] ** 2, rel=1e-3)
    assert seq.fitted_exponent == pytest.approx(2.0, abs=0.05)


def test_persson_strip_bound_weighted():
    prob = _problem("d^0.5", 0.0, 0.5, 0.9, tuple(range(2, 17)))
    seq = persson_sequence(prob)
    mus = seq.mus()
    ks = np.array([e["k"] for e in seq.entries], dtype=float)
    assert np.all(mus >= 0.0625 * ks**1.5 - 1e-8)
    assert np.all(np.diff(mus) >= -1e-8)
    assert seq.fitted_exponent >= 1.4
    assert seq.bound is not None


def test_persson_monotone():
    prob = _problem(1.0, 0.0, 0.0, 0.5, (2, 3, 4, 6, 8, 12, 16))
    seq = persson_sequence(prob)
    mus = seq.mus()
    assert np.all(np.diff(mus) >= -1e-8)


def test_persson_bound_column_suppressed_for_negative_q():
    prob = _problem(1.0, "-0.01*d^-1", 0.0, 0.5, (2, 4))
    seq = persson_sequence(prob)
    assert seq.bound is None


def test_strip_too_thin_for_large_k():
    prob = _problem(1.0, 0.0, 0.0, 0.5, (2,))
    with pytest.raises(StripTooThin):
        strip_mesh(prob, 1)  # 1/k = 1 exceeds sup d = 1/2


def test_pointwise_subcritical():
    prob = _problem(1.0, "-0.1*d^-2", 0.0, 0.5, (2,))
    rep = check_pointwise_criterion(prob)
    assert rep.verdict == "PASS"
    # margin = (0.125 - 0.1)/d^2, smallest at the largest sampled d
    assert rep.worst_margin > 0


def test_pointwise_supercritical():
    prob = _problem(1.0, "-0.2*d^-2", 0.0, 0.5, (2,))
    rep = check_pointwise_criterion(prob)
    assert rep.verdict == "FAIL"
    d_worst = min(rep.worst_point[0], 1 - rep.worst_point[0])
    assert d_worst < 0.01  # failure shows up near the boundary


def test_pointwise_weighted_threshold():
    prob = _problem("d^0.5", "-0.125*d^-1.5", 0.5, 0.5, (2,))
    rep = check_pointwise_criterion(prob)
    assert rep.verdict == "FAIL"  # 0.125 > (1-gamma) kappa(0.5) = 0.03125


def test_pointwise_deterministic():
    prob = _problem(1.0, "-0.1*d^-2", 0.0, 0.5, (2,), samples=500)
    r1 = check_pointwise_criterion(prob)
    r2 = check_pointwise_criterion(prob)
    assert r1.worst_margin == r2.worst_margin
    assert r1.worst_point == r2.worst_point


def test_form_subcritical_boundary_case():
    # 0.125 = (1 - gamma) kappa(0): the form stays nonnegative
    prob = _problem(1.0, "-0.125*d^-2", 0.0, 0.5, (2,))
    rep = check_form_nonnegativity(prob, k=2, levels=2)
    assert rep.verdict == "PASS"
    assert all(m >= -1e-4 for m in rep.detail["minima"])


def test_form_trivial_pass_for_nonnegative_q():
    prob = _problem(1.0, "d", 0.0, 0.5, (2,))
    rep = check_form_nonnegativity(prob, k=2, levels=1)
    assert rep.verdict == "PASS"
    assert rep.worst_margin > 0


def test_form_supercritical_blowdown():
    prob = _problem(1.0, "-0.3*d^-2", 0.0, 0.5, (2,))
    rep = check_form_nonnegativity(prob, k=2, levels=2)
    assert rep.verdict == "FAIL"
    minima = rep.detail["minima"]
    assert minima[-1] < 0
    assert minima[-1] < 10 * minima[0]  # blow-down by more than a factor 10
    assert rep.detail["diverging"]


def test_form_free_inner_variant():
    prob = _problem(1.0, "-0.125*d^-2", 0.0, 0.5, (2,))
    rep = check_form_nonnegativity(prob, k=2, bc="free_inner", levels=1)
    assert rep.criterion == "form_free_inner"
    assert rep.verdict == "PASS"


def test_criterion_consistency():
    # pointwise PASS at lambda = 0 implies the form check passes too
    prob = _problem(1.0, "-0.11*d^-2", 0.0, 0.5, (2,))
    assert check_pointwise_criterion(prob).verdict == "PASS"
    assert check_form_nonnegativity(prob, k=2, levels=1).verdict == "PASS"


def test_diagnostic_weighted_discrete():
    prob = _problem("d^0.5", 0.0, 0.5, 0.9, tuple(range(2, 17)))
    rep = discreteness_diagnostic(prob)
    assert rep.verdict == "DISCRETE"
    assert rep.fitted_exponent >= 1.4


def test_diagnostic_laplacian_exponent_two():
    prob = _problem(1.0, 0.0, 0.0, 0.5, (2, 3, 4, 6, 8, 12, 16))
    rep = discreteness_diagnostic(prob)
    assert rep.verdict == "DISCRETE"
    assert 1.95 <= rep.fitted_exponent <= 2.05


def test_diagnostic_gates_on_pointwise():
    prob = _problem(1.0, "-0.3*d^-2", 0.0, 0.5, (2, 3, 4, 6, 8))
    rep = discreteness_diagnostic(prob)
    assert rep.verdict == "INCONCLUSIVE"
    assert rep.pointwise.verdict == "FAIL"
    assert rep.form is None  # the pipeline stops at stage 1


def test_diagnostic_near_threshold_pass():
    prob = _problem("d^0.5", "-0.03*d^-1.5", 0.5, 0.5, tuple(range(2, 17)))
    rep = discreteness_diagnostic(prob)
    assert rep.verdict == "DISCRETE"


def test_diagnostic_near_threshold_fail():
    prob = _problem("d^0.5", "-0.2*d^-1.5", 0.5, 0.5, tuple(range(2, 17)))
    rep = discreteness_diagnostic(prob)
    assert rep.verdict == "INCONCLUSIVE"
    assert rep.pointwise.verdict == "FAIL"


def test_diagnostic_needs_five_indices():
    prob = _problem(1.0, 0.0, 0.0, 0.5, (2, 3, 4))
    with pytest.raises(ValueError):
        discreteness_diagnostic(prob)


def test_gamma_validation():
    with pytest.raises(ValueError):
        _problem(1.0, 0.0, 0.0, 1.5, (2,))


def test_persson_2d_strip_matches_annulus():
    # the k=2 strip of the unit disc is the annulus 1/2 < rho < 1 with both
    # circles clamped; cross-check against a mesh built on that annulus
    from hardyspec import Annulus, Disc, FormSpec, assemble_pencil, \
        build_trimesh, smallest_eigenpairs
    disc = Disc((0, 0), 1.0)
    prob = ProblemSpec(domain=disc, form=FormSpec(a=1.0, q=0.0, beta=0.0),
                       gamma=0.5, ks=(2,), grading=1.0)
    sub, mw = strip_mesh(prob, 2)
    assert mw is None
    pencil = assemble_pencil(sub, prob.form, 1.0)
    mu = smallest_eigenpairs(pencil, 1).eigenvalues[0]

    ann = build_trimesh(Annulus((0, 0), 0.5, 1.0), 0.03, 1.0)
    ref = smallest_eigenpairs(assemble_pencil(ann, prob.form, 1.0), 1).eigenvalues[0]
    assert mu == pytest.approx(ref, rel=0.05)


def test_persson_torus_smoke():
    from hardyspec import Torus
    prob = ProblemSpec(domain=Torus(3.0, 1.0),
                       form=FormSpec(a=1.0, q=0.0, beta=0.0),
                       gamma=0.5, ks=(2, 3), grading=1.0)
    seq = persson_sequence(prob)
    mus = seq.mus()
    assert np.all(mus > 0)
    assert mus[1] >= mus[0] - 1e-8


def test_torus_criteria_subcritical():
    from hardyspec import Torus
    prob = ProblemSpec(domain=Torus(3.0, 1.0),
                       form=FormSpec(a=1.0, q="-0.1*d^-2", beta=0.0),
                       gamma=0.5, ks=(2,), samples=3000)
    assert check_pointwise_criterion(prob).verdict == "PASS"
    rep = check_form_nonnegativity(prob, k=2, levels=1)
    assert rep.verdict == "PASS"
    assert all(m >= -1e-4 for m in rep.detail["minima"])


def test_counting_lower_bound_flag():
    from hardyspec import assemble_pencil, build_mesh_1d, smallest_eigenpairs
    from hardyspec.eigensolve import counting_is_lower_bound
    mesh = build_mesh_1d(IV, 100)
    pencil = assemble_pencil(mesh, FormSpec(a=1.0, q=0.0), 1.0)
    rep = smallest_eigenpairs(pencil, 3)
    assert not counting_is_lower_bound(rep, 15.0)
    assert counting_is_lower_bound(rep, 1e6)


def test_reports_serialize():
    prob = _problem(1.0, "-0.1*d^-2", 0.0, 0.5, (2,), samples=500)
    doc = check_pointwise_criterion(prob).to_dict()
    assert doc["criterion"] == "pointwise"
    seq = persson_sequence(_problem(1.0, 0.0, 0.0, 0.5, (2, 4)))
    rows = seq.csv_rows()
    assert len(rows) == 2 and rows[0][0] == 2
