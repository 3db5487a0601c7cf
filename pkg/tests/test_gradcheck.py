"""Finite-difference verification of every registered primitive."""

import time

import pytest

from seizdann.gradcheck import grad_check, registered_checks


def test_registry_covers_core_primitives():
    names = set(registered_checks())
    for needed in ("conv1d", "batchnorm1d", "lstm_cell", "grad_reversal",
                   "maxpool1d", "softmax", "leaky_relu", "matmul"):
        assert needed in names, f"missing grad check for {needed}"


@pytest.mark.parametrize("name", registered_checks())
def test_primitive_gradients(name):
    tol = 1e-4 if name == "lstm_cell" else 1e-5
    result = grad_check(name, tolerance=tol, seed=0)
    assert result, f"{name}: max rel err {result.max_rel_error:.3e} > {tol}"


def test_full_sweep_is_fast():
    start = time.monotonic()
    for name in registered_checks():
        assert grad_check(name, tolerance=1e-4, seed=1)
    assert time.monotonic() - start < 120.0


def test_leaky_relu_at_safe_inputs():
    result = grad_check("leaky_relu", shape=(10,), tolerance=1e-5, seed=2)
    assert result


def test_failure_reports_diagnostics():
    result = grad_check("matmul", tolerance=1e-30, seed=0)
    assert not result
    assert result.max_rel_error > 0.0
