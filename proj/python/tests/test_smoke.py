import math

import pytest

import nepbroyden


def test_registry():
    assert "qdep" in nepbroyden.problem_ids()
    assert nepbroyden.method_ids() == ["J", "H", "T", "resinv", "deflated"]


def test_diag_toy_converges():
    out = nepbroyden.run("diag-toy", "T")
    assert out["exit_code"] == 0
    assert out["converged"]
    assert abs(out["eigenvalues"][0] - 2.0) < 1e-9
    assert out["residual_norm"][-1] <= 1e-10
    assert out["actions"] == len(out["k"])


def test_deflated_qdep_locks_conjugates():
    out = nepbroyden.run("qdep", "deflated", p=2, damping=1.0)
    assert out["exit_code"] == 0
    assert len(out["eigenvalues"]) == 2


def test_sigma_and_single_precision():
    out = nepbroyden.run("diag-toy", "J", sigma=complex(1.9, 0.01), precision="single", tol=1e-5)
    assert abs(out["eigenvalues"][0] - 2.0) < 1e-4


def test_bad_ids_raise():
    with pytest.raises(ValueError):
        nepbroyden.run("nope")
    with pytest.raises(ValueError):
        nepbroyden.run(method="newton")


def test_read_csv():
    hist = nepbroyden.read_csv("k,residual_norm,lambda_re,lambda_im,wall_time_s\n1,0.5,2,0,0.0\n")
    assert hist["k"] == [1]
    assert math.isclose(hist["residual_norm"][0], 0.5)
    with pytest.raises(ValueError):
        nepbroyden.read_csv("bad")
