"""Compiled extension vs pure-Python kernels: identical contracts.

Point routing must agree exactly on the chosen leaf (the tie rule is part
of the contract); coefficients may differ in the last ulp because the
fallback reduces with BLAS.  The SGD loops mirror each other operation for
operation, so trained weights are expected to match bit for bit.
"""
import numpy as np
import pytest

from nbcs import _kernels_py
from nbcs.svm import SparseDataset, SvmConfig, hinge_objective, train
from nbcs.system import NestedSystem

from test_system import random_interior_points, random_system

compiled = pytest.importorskip("nbcs._kernels")


@pytest.mark.parametrize("d", [2, 3, 5])
def test_locate_embed_agreement(d):
    system = random_system(d, 7, seed=d + 100)
    X = random_interior_points(system, 3000, seed=d)
    children, beta, inv, _ = system.compiled()
    l_c, c_c = compiled.locate_embed(X, children, beta, inv, 1e-9)
    l_p, c_p = _kernels_py.locate_embed(X, children, beta, inv, 1e-9)
    np.testing.assert_array_equal(l_c, l_p)
    assert np.abs(c_c - c_p).max() < 1e-12


def test_locate_outside_marking_agreement(d=2):
    system = random_system(d, 3, seed=55)
    X = np.array([[10.0, 10.0], [-5.0, 0.0]])
    children, beta, inv, _ = system.compiled()
    l_c, _ = compiled.locate_embed(X, children, beta, inv, 1e-9)
    l_p, _ = _kernels_py.locate_embed(X, children, beta, inv, 1e-9)
    assert (l_c == -1).all() and (l_p == -1).all()


def test_pegasos_bitwise_agreement():
    rng = np.random.default_rng(0)
    n, dim, k = 150, 12, 3
    idx = np.stack([rng.choice(dim, size=k, replace=False) for _ in range(n)])
    idx = idx.astype(np.int32)
    val = rng.dirichlet(np.ones(k), size=n)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    ds = SparseDataset(idx, val, y, dim)
    cfg = SvmConfig(C=1.5, epochs=25, seed=4, tolerance=0.0)
    w_c = train(ds, cfg, kernels=compiled)
    w_p = train(ds, cfg, kernels=_kernels_py)
    np.testing.assert_array_equal(w_c, w_p)
    assert hinge_objective(w_c, ds, 1.5) == hinge_objective(w_p, ds, 1.5)


def test_system_uses_selected_backend():
    system = NestedSystem.regular(2)
    assert system._kernels.NAME in ("cython", "python")
