import math

import pytest

crlab = pytest.importorskip("crlab")

FOUR_PI2 = 4 * math.pi**2


def test_group_law():
    p = crlab.HPoint(0.3, -0.2, 0.5)
    q = crlab.HPoint(-1.0, 0.4, 2.0)
    e = crlab.group_mul(p, crlab.group_inv(p))
    assert abs(e.x) + abs(e.y) + abs(e.t) < 1e-15
    pq = crlab.group_mul(p, q)
    assert pq.t == pytest.approx(p.t + q.t + 2 * (p.y * q.x - p.x * q.y))
    assert crlab.koranyi_norm(crlab.dilate(3.0, p)) == pytest.approx(3 * crlab.koranyi_norm(p))


def test_bubble_constant_and_value():
    assert crlab.c1() == pytest.approx(math.sqrt(2), rel=1e-14)
    o = crlab.HPoint(0, 0, 0)
    assert crlab.bubble(o, 1.0, o) == pytest.approx(math.sqrt(2))


def test_calibrate_report():
    code, report, _ = crlab.calibrate()
    assert code == 0
    assert report["pass"]
    assert report["volume"]["integral_U4"] == pytest.approx(FOUR_PI2, rel=1e-3)
    cfg = crlab.default_config()
    cfg["quadrature"]["kappa"] = 2.0
    code, report, _ = crlab.calibrate(cfg)
    assert code == 1


def test_functional_value_flat():
    o = crlab.HPoint(0, 0, 0)
    assert crlab.functional_value(0.0, o, 2.0) == pytest.approx(FOUR_PI2, rel=1e-3)


def test_pushforward_formula():
    p = crlab.HPoint(0.4, -0.7, 1.1)
    z, zb, t = crlab.pushforward_components(p)
    a = 1 + p.x**2 + p.y**2
    w = complex(p.t, a)
    predicted = 0.5j * w**3 / (p.t**2 + a**2)
    assert abs(z - predicted) < 1e-7 * abs(predicted)
    assert abs(zb) < 1e-7 and abs(t) < 1e-7


def test_verify_suite_and_unknown():
    code, report, _ = crlab.verify("heis")
    assert code == 0
    assert all(c["pass"] for c in report["checks"])
    with pytest.raises(crlab.ConfigError):
        crlab.verify("nonexistent")


def test_malformed_config():
    with pytest.raises(crlab.ConfigError):
        crlab.calibrate({"window": {"R": -1}})


def test_flat_scan_is_vacuous():
    cfg = crlab.default_config()
    cfg["deformation"] = {"kind": "zero"}
    cfg["reduce"]["grid"].update(n_xy=9, n_t=9, half_xy=6.0, half_t=24.0, h0_xy=1.5, h0_t=6.0)
    cfg["window"].update(n_x=3, n_y=3, n_t=3, n_lambda=3)
    code, report, tables = crlab.scan(cfg)
    assert code == 2
    assert report["verdict"]["verdict"] == "vacuous/flat"
    assert tables["scan.csv"].startswith("x,y,t,lambda,value,residual,iterations,cell_status")
