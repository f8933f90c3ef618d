from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from ecguq.assembly import CorrelationMatrix, assemble_correlation, assemble_point_load
from ecguq.density import JointDensityModel, dirac_density, sample_positions
from ecguq.ecg import correlation_ecg, deterministic_ecg, lead_signal
from ecguq.linsolve import dense_pseudo_inverse
from ecguq.mesh import MeshError
from ecguq.oracle import (
    OracleError,
    forward_bidomain,
    full_tensor_correlation,
    mc_statistics,
    pointwise_ecg,
)


@pytest.fixture(scope="module")
def fwd(tiny_problem):
    p = tiny_problem
    return forward_bidomain(p.solver, p.mesh, p.vm_loads, p.times)


@pytest.fixture(scope="module")
def lead(tiny_config):
    return tiny_config.lead_definition("V1")


def test_forward_constant_vm_is_zero(tiny_problem):
    p = tiny_problem
    out = forward_bidomain(p.solver, p.mesh, np.zeros((p.mesh.n_vertices, 3)), p.times[:3])
    assert np.all(out.traces == 0.0)


def test_forward_linear(tiny_problem, fwd):
    p = tiny_problem
    sl = slice(30, 34)
    two = forward_bidomain(p.solver, p.mesh, 2.0 * p.vm_loads[:, sl], p.times[sl])
    scale = np.max(np.abs(fwd.traces[:, sl]))
    np.testing.assert_allclose(two.traces, 2.0 * fwd.traces[:, sl], rtol=0, atol=1e-9 * scale)


def test_forward_reports_small_residuals(fwd):
    assert fwd.traces.shape[1] == len(fwd.times) == len(fwd.reports)
    assert max(r.residual for r in fwd.reports) <= 1e-8


def test_pointwise_matches_lead_field(tiny_problem, fwd, lead):
    p = tiny_problem
    v_det, _, _ = deterministic_ecg(p.solver, p.mesh, lead, p.electrodes(lead), p.vm_loads)
    v_fwd = pointwise_ecg(fwd, p.electrodes(lead), lead.a)
    assert np.max(np.abs(v_det - v_fwd)) <= 1e-8 * np.max(np.abs(v_det))


def test_pointwise_rejects_off_boundary(tiny_problem, fwd, lead):
    pts = tiny_problem.electrodes(lead)
    bad = [replace(pts[0], segment=tiny_problem.mesh.n_boundary + 3)] + pts[1:]
    with pytest.raises(MeshError):
        pointwise_ecg(fwd, bad, lead.a)


def test_mc_reproducible(tiny_problem, fwd, lead):
    dens = tiny_problem.densities(lead, "gaussian")
    a = mc_statistics(fwd, dens, lead.a, 500, seed=7)
    b = mc_statistics(fwd, dens, lead.a, 500, seed=7, chunk=37)
    c = mc_statistics(fwd, dens, lead.a, 500, seed=8)
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a.variance, b.variance, rtol=1e-10, atol=1e-12)
    assert not np.allclose(a.mean, c.mean)


def test_mc_dirac_has_zero_variance(tiny_problem, fwd, lead):
    p = tiny_problem
    dens = JointDensityModel([dirac_density(p.mesh, q) for q in p.electrodes(lead)])
    est = mc_statistics(fwd, dens, lead.a, 100, seed=1)
    assert np.all(est.variance == 0.0)
    assert np.all(est.stderr_variance == 0.0)
    np.testing.assert_allclose(est.mean, pointwise_ecg(fwd, p.electrodes(lead), lead.a), rtol=1e-12, atol=1e-12)


def _samples(fwd, dens, a, n, seed):
    streams = np.random.SeedSequence(seed).spawn(len(dens.densities))
    out = 0.0
    for al, d, s in zip(a, dens.densities, streams):
        seg, loc = sample_positions(d, np.random.default_rng(s), n)
        out = out + al * fwd.evaluate(seg, loc)
    return out


def test_mc_matches_brute_force_jackknife(tiny_problem, fwd, lead):
    dens = tiny_problem.densities(lead, "uniform")
    n = 150
    est = mc_statistics(fwd, dens, lead.a, n, seed=3)
    x = _samples(fwd, dens, lead.a, n, 3)
    np.testing.assert_allclose(est.mean, x.mean(axis=0), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(est.variance, x.var(axis=0, ddof=1), rtol=1e-8, atol=1e-12)
    loo = np.array([np.delete(x, i, axis=0).var(axis=0, ddof=1) for i in range(n)])
    se = np.sqrt((n - 1) / n * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    np.testing.assert_allclose(est.stderr_variance, se, rtol=1e-6, atol=1e-12 * np.max(se))
    np.testing.assert_allclose(est.stderr_mean, x.std(axis=0, ddof=1) / np.sqrt(n), rtol=1e-8, atol=1e-14)


def test_mc_stderr_halves_with_four_times_samples(tiny_problem, fwd, lead):
    dens = tiny_problem.densities(lead, "gaussian")
    a = mc_statistics(fwd, dens, lead.a, 2000, seed=11)
    b = mc_statistics(fwd, dens, lead.a, 8000, seed=12)
    k = int(np.argmax(a.variance))
    assert b.stderr_mean[k] / a.stderr_mean[k] == pytest.approx(0.5, rel=0.2)
    assert b.stderr_variance[k] / a.stderr_variance[k] == pytest.approx(0.5, rel=0.2)


def test_mc_agrees_with_lead_field_statistics(tiny_problem, fwd, lead):
    p = tiny_problem
    dens = p.densities(lead, "gaussian")
    stats = correlation_ecg(p.solver, p.mesh, lead, p.electrodes(lead), dens, p.vm_loads, p.times,
                            tol=p.config.solver.cholesky_tol)
    est = mc_statistics(fwd, dens, lead.a, 10000, seed=p.config.seed)
    floor = 1e-8 * np.max(np.abs(stats.mean))
    z_mean = np.abs(est.mean - stats.mean) / np.maximum(est.stderr_mean, floor)
    z_var = np.abs(est.variance - stats.variance) / np.maximum(est.stderr_variance, floor**2)
    assert np.max(z_mean) <= 4.0
    assert np.max(z_var) <= 4.0


def test_mc_rejects_bad_input(tiny_problem, fwd, lead):
    dens = tiny_problem.densities(lead, "uniform")
    with pytest.raises(OracleError):
        mc_statistics(fwd, dens, lead.a, 99, seed=0)
    nb = tiny_problem.mesh.n_boundary
    dep = JointDensityModel(dens.densities, {(0, 1): np.ones((nb, nb))})
    with pytest.raises(OracleError):
        mc_statistics(fwd, dep, lead.a, 100, seed=0)


def test_full_tensor_rank_one(tiny_problem, lead):
    p = tiny_problem
    g = assemble_point_load(p.mesh, p.electrodes(lead), lead.a)
    nodes = np.arange(p.mesh.n_vertices)
    R = CorrelationMatrix(np.outer(g, g), nodes)
    cor = full_tensor_correlation(p.solver.K, R, p.vm_loads)
    z = dense_pseudo_inverse(p.solver.K) @ g
    v = lead_signal(p.vm_loads, z)
    np.testing.assert_allclose(cor, np.outer(v, v), rtol=0, atol=1e-10 * np.max(v**2))
    assert np.array_equal(cor, cor.T)


def test_full_tensor_matches_low_rank(tiny_problem, lead):
    p = tiny_problem
    dens = p.densities(lead, "uniform")
    stats = correlation_ecg(p.solver, p.mesh, lead, p.electrodes(lead), dens, p.vm_loads, p.times, tol=1e-12)
    cor = full_tensor_correlation(p.solver.K, assemble_correlation(p.mesh, dens, lead.a), p.vm_loads)
    err = np.linalg.norm(cor - stats.correlation()) / np.linalg.norm(cor)
    assert err <= 1e-6


def test_full_tensor_size_guard():
    K = sp.identity(501, format="csr")
    R = CorrelationMatrix(np.zeros((1, 1)), np.array([0]))
    with pytest.raises(OracleError):
        full_tensor_correlation(K, R, np.zeros((501, 1)))
