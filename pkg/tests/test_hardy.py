import numpy as np
import pytest

from hardyspec import (Annulus, Disc, Interval, Torus,
                       hardy_constants, kappa, lambda_bound, verify_hardy)
from hardyspec.errors import ExponentOutOfRange, MethodNotApplicable
from hardyspec.hardy import fmt_constant, tubular_constant

IV = Interval(0, 1)
UNIT_DISC = Disc((0, 0), 1.0)


def test_constants_table():
    assert kappa(0.0) == 0.25
    c = hardy_constants(0.0, 0.0)
    assert abs(c.kappa - 0.25) < 1e-12
    assert abs(c.fmt - 3.0) < 1e-12
    assert abs(c.tubular - 6.0) < 1e-12
    cm1 = hardy_constants(-1.0, 0.0)
    assert abs(cm1.fmt - 0.5) < 1e-12


def test_branch_agreement_at_minus_one():
    rng = np.random.RandomState(0)
    for beta in rng.uniform(-10, 1 - 1e-9, 100):
        low = 2.0 ** (-1 - beta) * (-1 + 2 - beta) ** 2
        high = 2.0 ** (-1 - beta) * (1 - beta) * (2 * (-1) + 3 - beta)
        assert abs(low - high) <= 1e-12 * max(1.0, abs(low))
        assert abs(fmt_constant(-1.0, beta) - low) <= 1e-12 * max(1.0, abs(low))


def test_kappa_positive_and_decreasing():
    grid = np.linspace(-5, 0.999, 300)
    values = [(1 - b) ** 2 / 4 for b in grid]
    assert all(v > 0 for v in values)
    assert all(values[i + 1] < values[i] for i in range(len(values) - 1))
    assert kappa(0.5) == 0.0625


def test_out_of_range_constants_absent():
    c = hardy_constants(-1.9, 0.0)   # alpha > beta-2 holds, tubular needs > -1.5
    assert c.fmt is not None
    assert c.tubular is None
    c2 = hardy_constants(-2.5, 0.0)
    assert c2.fmt is None


def test_beta_out_of_range():
    with pytest.raises(ExponentOutOfRange):
        hardy_constants(0.0, 1.0)
    with pytest.raises(ExponentOutOfRange):
        kappa(1.5)


def test_tubular_positivity():
    rng = np.random.RandomState(1)
    for _ in range(100):
        beta = rng.uniform(-4, 0.999)
        alpha = rng.uniform((beta - 3) / 2 + 1e-6, 3)
        assert tubular_constant(alpha, beta) > 0


def test_catalogue_interval():
    assert abs(lambda_bound(IV, "brezis_marcus").lam - 0.25) < 1e-12
    assert abs(lambda_bound(IV, "fmt_dint").lam - 3.0) < 1e-12
    assert abs(lambda_bound(IV, "avkhadiev_wirths").lam - 3.76) < 1e-12


def test_catalogue_disc():
    assert abs(lambda_bound(UNIT_DISC, "hhl_volume").lam - 0.5) < 1e-12
    assert abs(lambda_bound(UNIT_DISC, "evans_lewis_volume").lam - 3.0) < 1e-12


def test_weighted_matches_catalogue():
    weighted = lambda_bound(IV, "fmt_weighted", alpha=0.0, beta=0.0)
    plain = lambda_bound(IV, "fmt_dint")
    assert abs(weighted.lam - plain.lam) < 1e-12


def test_convexity_gate():
    annulus = Annulus((0, 0), 0.5, 1.0)
    with pytest.raises(MethodNotApplicable):
        lambda_bound(annulus, "fmt_dint")
    with pytest.raises(MethodNotApplicable):
        lambda_bound(Torus(3, 1), "brezis_marcus")


def test_superharmonic_gate():
    # the fat torus passes the scan, the thin one fails it
    spec = lambda_bound(Torus(3, 1), "fmt_weighted", alpha=0.0, beta=0.0,
                        scan_resolution=64)
    assert spec.lam > 0
    assert "scan PASS" in spec.notes["superharmonic"]
    with pytest.raises(MethodNotApplicable):
        lambda_bound(Torus(1.8, 1), "fmt_weighted", alpha=0.0, beta=0.0,
                     scan_resolution=64)


def test_tubular_bound():
    spec = lambda_bound(IV, "tubular", alpha=0.0, beta=0.0, delta=0.25)
    assert abs(spec.lam - 6.0 * 0.25) < 1e-12
    with pytest.raises(MethodNotApplicable):
        lambda_bound(IV, "tubular", alpha=0.0, beta=0.0, delta=0.9)


def test_unknown_method():
    with pytest.raises(MethodNotApplicable):
        lambda_bound(IV, "made_up")


def test_certify_classical_hardy():
    cert = verify_hardy(IV, beta=0.0, alpha=0.0, lam=0.0, n=256,
                        grading=0.15, levels=3)
    assert cert.verdict == "CERTIFIED"
    minima = [lv["minimum"] for lv in cert.levels]
    assert all(m >= 0.25 - 1e-4 for m in minima)
    assert minima[0] > minima[1] > minima[2]


def test_certify_with_remainder():
    cert = verify_hardy(IV, beta=0.0, alpha=0.0, lam=3.0, n=256,
                        grading=0.15, levels=3)
    assert cert.verdict == "CERTIFIED"
    assert all(lv["margin"] >= -1e-4 for lv in cert.levels)


def test_certify_weighted():
    cert = verify_hardy(IV, beta=0.5, alpha=0.0, lam=0.0, n=256,
                        grading=0.15, levels=3)
    assert cert.verdict == "CERTIFIED"
    assert all(lv["minimum"] >= 0.0625 - 1e-4 for lv in cert.levels)


def test_monotone_in_lambda():
    minima = []
    for lam in (0.0, 1.0, 3.0):
        cert = verify_hardy(IV, beta=0.0, alpha=0.0, lam=lam, n=128,
                            grading=0.3, levels=1)
        minima.append(cert.levels[-1]["minimum"])
    assert minima[0] >= minima[1] >= minima[2]


def test_certificate_serialization():
    cert = verify_hardy(IV, beta=0.0, alpha=0.0, lam=0.0, n=64,
                        grading=0.5, levels=1)
    doc = cert.to_dict()
    assert doc["verdict"] == "CERTIFIED"
    assert "upper bounds" in doc["semantics"] or "bound" in doc["semantics"]
    rows = cert.csv_rows()
    assert len(rows) == 1 and len(rows[0]) == 7


def test_torus_certification():
    cert = verify_hardy(Torus(3, 1), beta=0.0, alpha=0.0, lam=0.0,
                        h=0.25, grading=0.2, levels=2)
    assert cert.verdict == "CERTIFIED"
    assert all(lv["minimum"] >= 0.25 - 1e-4 for lv in cert.levels)
