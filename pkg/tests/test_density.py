from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ecguq.density import (
    DensityError,
    JointDensityModel,
    arclength_offsets,
    boundary_integral,
    cdf_at,
    dirac_density,
    gaussian_density,
    make_density,
    sample,
    sample_positions,
    uniform_density,
)
from ecguq.mesh import boundary_point_at, electrode_anchor

R = 1.5


@pytest.fixture(scope="module")
def mesh(bench_geometry):
    return bench_geometry[0]


@pytest.fixture(scope="module")
def vf(mesh):
    return electrode_anchor(mesh, 1.5 * np.pi)


@pytest.fixture(scope="module")
def uniform_vf(mesh, vf):
    return uniform_density(mesh, vf, R)


@pytest.fixture(scope="module")
def gaussian_vf(mesh, vf):
    return gaussian_density(mesh, vf, R)


def test_uniform_support_and_height(mesh, vf, uniform_vf):
    d = arclength_offsets(mesh, vf.arclength)
    inside = np.abs(d) < R - 0.5
    outside = np.abs(d) > R + 0.5
    # variance matching narrows the projected ball by about one element, so the
    # plateau sits a few percent above 1 / (2 r)
    assert np.allclose(uniform_vf.values[inside], 1 / (2 * R), rtol=0.1)
    assert np.all(uniform_vf.values[outside] == 0.0)
    support = d[uniform_vf.values > 0]
    assert support.max() - support.min() == pytest.approx(2 * R, abs=2 * mesh.segment_lengths.max())


def test_uniform_variance_and_mass(uniform_vf):
    assert uniform_vf.integral() == pytest.approx(1.0, abs=1e-12)
    mean, var = uniform_vf.arclength_mean_variance()
    assert var == pytest.approx(R * R / 3, rel=0.02)
    assert abs(mean) < 1e-9
    assert np.all(uniform_vf.values >= 0)


def test_gaussian_std_mass_and_shape(mesh, vf, gaussian_vf):
    assert gaussian_vf.arclength_std() == pytest.approx(R / np.sqrt(3), rel=0.02)
    assert gaussian_vf.integral() == pytest.approx(1.0, abs=1e-12)
    assert np.all(gaussian_vf.values > 0)
    d = arclength_offsets(mesh, vf.arclength)
    mode = int(np.argmax(gaussian_vf.values))
    assert abs(d[mode]) <= mesh.segment_lengths.max()
    # unimodal: nonincreasing when walking away from the mode in both directions
    v = np.roll(gaussian_vf.values, -mode)
    half = len(v) // 2
    assert np.all(np.diff(v[: half + 1]) <= 1e-15)
    assert np.all(np.diff(v[::-1][: half]) <= 1e-15)


def test_equal_variances(uniform_vf, gaussian_vf):
    assert gaussian_vf.arclength_mean_variance()[1] == pytest.approx(uniform_vf.arclength_mean_variance()[1], rel=0.02)


# spreads of at least two boundary edges (0.5 cm each); smaller ones are not resolved
@given(s=st.floats(0.0, 79.0), r=st.floats(1.0, 3.0), kind=st.sampled_from(["uniform", "gaussian"]))
def test_density_invariants(mesh, s, r, kind):
    rho = make_density(mesh, kind, boundary_point_at(mesh, s), r)
    assert np.all(rho.values >= 0)
    assert boundary_integral(mesh, rho.values) == pytest.approx(1.0, abs=1e-12)
    assert rho.arclength_mean_variance()[1] == pytest.approx(r * r / 3, rel=0.02)
    assert abs(rho.arclength_mean_variance()[0]) <= 0.02 * r


def test_dirac_at_vertex_and_midpoint(mesh):
    at_vertex = dirac_density(mesh, boundary_point_at(mesh, mesh.arclength[7]))
    assert at_vertex.values[7] == 1.0 and at_vertex.values.sum() == 1.0
    assert at_vertex.degenerate
    mid = dirac_density(mesh, boundary_point_at(mesh, 0.5 * (mesh.arclength[3] + mesh.arclength[4])))
    assert mid.values[3] == pytest.approx(0.5, abs=1e-12) and mid.values[4] == pytest.approx(0.5, abs=1e-12)
    assert at_vertex.arclength_mean_variance()[1] == pytest.approx(0.0, abs=1e-20)
    assert mid.arclength_mean_variance()[1] == pytest.approx(0.25 * mesh.segment_lengths[3] ** 2, rel=1e-9)


@pytest.mark.parametrize("r", [0.0, -1.0, 50.0])
def test_bad_spread_rejected(mesh, vf, r):
    for kind in ("uniform", "gaussian"):
        with pytest.raises(DensityError):
            make_density(mesh, kind, vf, r)


def test_gaussian_rejects_unresolved_spread(mesh, vf):
    with pytest.raises(DensityError):
        gaussian_density(mesh, vf, 0.3)


def test_gaussian_needs_twenty_steps(mesh, vf):
    with pytest.raises(DensityError):
        gaussian_density(mesh, vf, R, n_steps=10)


def test_unknown_kind(mesh, vf):
    with pytest.raises(DensityError):
        make_density(mesh, "cauchy", vf, R)


def _offsets(mesh, vf, seg, t):
    s = mesh.arclength[seg] + t * mesh.segment_lengths[seg]
    return (s - vf.arclength + 0.5 * mesh.total_length) % mesh.total_length - 0.5 * mesh.total_length


def test_sampling_moments(mesh, vf, uniform_vf):
    seg, t = sample_positions(uniform_vf, np.random.default_rng(1), 100_000)
    d = _offsets(mesh, vf, seg, t)
    se = d.std(ddof=1) / np.sqrt(len(d))
    assert abs(d.mean()) <= 3 * se
    # bootstrap standard error of the sample variance
    rng = np.random.default_rng(2)
    boot = [np.var(d[rng.integers(0, len(d), len(d))], ddof=1) for _ in range(200)]
    target = uniform_vf.arclength_mean_variance()[1]
    assert abs(np.var(d, ddof=1) - target) <= 3 * np.std(boot, ddof=1)
    assert target == pytest.approx(R * R / 3, rel=0.02)


@pytest.mark.parametrize("kind", ["uniform", "gaussian"])
def test_sampling_ks(mesh, vf, kind):
    rho = make_density(mesh, kind, vf, R)
    seg, t = sample_positions(rho, np.random.default_rng(3), 10_000)
    s = mesh.arclength[seg] + t * mesh.segment_lengths[seg]
    res = stats.kstest(s, lambda x: cdf_at(rho, x))
    assert res.pvalue > 0.01


def test_sampling_reproducible(uniform_vf):
    a = sample_positions(uniform_vf, np.random.default_rng(5), 1000)
    b = sample_positions(uniform_vf, np.random.default_rng(5), 1000)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_sample_returns_points_on_boundary(mesh, uniform_vf):
    rng = np.random.default_rng(0)
    for _ in range(20):
        pt = sample(uniform_vf, rng)
        assert 0 <= pt.segment < mesh.n_boundary and 0.0 <= pt.local <= 1.0


def test_sample_degenerate_returns_center(mesh, vf):
    rho = dirac_density(mesh, vf)
    assert sample(rho, np.random.default_rng(0)) == vf
    seg, t = sample_positions(rho, np.random.default_rng(0), 5)
    assert np.all(seg == vf.segment) and np.all(t == vf.local)


def test_cdf_endpoints(uniform_vf, mesh):
    assert cdf_at(uniform_vf, np.array([0.0]))[0] == 0.0
    assert cdf_at(uniform_vf, np.array([mesh.total_length]))[0] == pytest.approx(1.0, abs=1e-14)


def test_joint_model_pairs(mesh, vf):
    other = electrode_anchor(mesh, np.pi)
    a, b = uniform_density(mesh, vf, R), gaussian_density(mesh, other, R)
    indep = JointDensityModel([a, b])
    assert indep.independent
    assert np.allclose(indep.pair_load(0, 1), np.outer(a.load(), b.load()), rtol=0, atol=0)
    explicit = JointDensityModel([a, b], pairwise={(0, 1): np.outer(a.values, b.values)})
    assert not explicit.independent
    pl = explicit.pair_load(0, 1)
    assert np.allclose(pl, indep.pair_load(0, 1), rtol=1e-12, atol=1e-16)
    assert pl.sum() == pytest.approx(1.0, abs=1e-12)
    bad = JointDensityModel([a, b], pairwise={(0, 1): np.ones((3, 3))})
    with pytest.raises(DensityError):
        bad.pair_load(0, 1)
    with pytest.raises(DensityError):
        JointDensityModel([a])
