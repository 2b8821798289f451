from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elastic_cq.bie import NystromGrid
from elastic_cq.cq import make_grid
from elastic_cq.forward import (ElasticMedium, IncidentWave, TraceSet, add_noise, boundary_rhs, forward_solve,
                                incident_eval, sin3_profile)
from elastic_cq.geometry import ObservationCircle, apple, peanut

MEDIUM = ElasticMedium()
SMALL = dict(T=4.0, N=32, n_tilde=16)


def test_medium_constants():
    assert MEDIUM.c1 == 3.0 and MEDIUM.c2 == 1.6
    assert MEDIUM.c1 > MEDIUM.c2 > 0
    for lam, mu in [(1.0, 0.0), (-3.0, 2.0), (1.0, -1.0)]:
        with pytest.raises(ValueError):
            ElasticMedium(lam, mu)


def test_incident_examples():
    wave = IncidentWave(theta_inc=0.4)
    d = wave.direction
    # tau = c1 t + x.d - R0 = pi/6 at the origin
    t = (np.pi / 6 + wave.R0) / MEDIUM.c1
    assert np.allclose(incident_eval(wave, MEDIUM, [0.0, 0.0], t), d, atol=1e-15)
    assert np.all(incident_eval(wave, MEDIUM, [0.0, 0.0], wave.R0 / MEDIUM.c1) == 0)
    assert np.all(incident_eval(wave, MEDIUM, [0.0, 0.0], (6.0 + wave.R0) / MEDIUM.c1) == 0)
    shear = IncidentWave("shear", theta_inc=0.4)
    ts = (np.pi / 6 + wave.R0) / MEDIUM.c2
    assert np.allclose(incident_eval(shear, MEDIUM, [0.0, 0.0], ts), [-d[1], d[0]], atol=1e-15)
    with pytest.raises(ValueError):
        IncidentWave("surface")


@given(st.floats(-50.0, 0.0))
def test_profile_causal(tau):
    assert sin3_profile(tau) == 0


def test_profile_taper_is_c2():
    h = np.array([1e-2, 5e-3, 2.5e-3])
    vals = np.abs(sin3_profile(5.0 - h))
    # f, f' and f'' vanish at the window edge, so f(5 - h) = O(h^3)
    assert np.allclose(vals[:-1] / vals[1:], 8.0, rtol=0.05)
    assert np.allclose(sin3_profile(np.linspace(0.1, 4.8, 50)), np.sin(3 * np.linspace(0.1, 4.8, 50)) ** 3)
    assert sin3_profile(5.0 + 1e-9) == 0


def test_boundary_rhs_zero_and_single_sample():
    grid = NystromGrid(8)
    curve = peanut()
    cg = make_grid(2.0, 16)
    zero = IncidentWave(profile=lambda tau: np.zeros_like(tau))
    w1, w2 = boundary_rhs(curve, zero, MEDIUM, cg, grid)
    assert not np.any(w1) and not np.any(w2)

    wave = IncidentWave(theta_inc=1.0, R0=-0.5)
    single = SimpleNamespace(times=np.array([0.0]), lam=0.9)
    w1, w2 = boundary_rhs(curve, wave, MEDIUM, single, grid)
    p = curve.eval(grid.nodes)[0]
    _, n, n_perp = curve.frame(grid.nodes)
    u = incident_eval(wave, MEDIUM, p, 0.0)
    assert np.allclose(w1[0], -2 * np.sum(n * u, axis=-1), atol=1e-15)
    assert np.allclose(w2[0], -2 * np.sum(n_perp * u, axis=-1), atol=1e-15)


def test_quiet_frequencies():
    grid = NystromGrid(32)
    cg = make_grid(10.0, 128)
    w1, w2 = boundary_rhs(apple(), IncidentWave(theta_inc=15 * np.pi / 16), MEDIUM, cg, grid, cg.half_indices())
    norms = np.sqrt(grid.weight * (np.sum(abs(w1) ** 2, 1) + np.sum(abs(w2) ** 2, 1)))
    # the default profile excites every frequency of the half spectrum
    assert np.count_nonzero(norms < 1e-6) == 0
    late = IncidentWave(R0=100.0)
    w1, w2 = boundary_rhs(apple(), late, MEDIUM, cg, grid, cg.half_indices())
    norms = np.sqrt(grid.weight * (np.sum(abs(w1) ** 2, 1) + np.sum(abs(w2) ** 2, 1)))
    assert np.all(norms < 1e-6)


def test_zero_profile_gives_zero_traces():
    zero = IncidentWave(profile=lambda tau: np.zeros_like(tau))
    tr = forward_solve(peanut(), ObservationCircle(), zero, MEDIUM, **SMALL)
    assert not np.any(tr.values) and tr.imag_residue == 0


def test_traces_real_and_shaped():
    tr = forward_solve(peanut(), ObservationCircle(), IncidentWave(theta_inc=0.3), MEDIUM, **SMALL)
    assert tr.values.shape == (SMALL["N"] + 1, 60, 2)
    assert tr.values.dtype == float and tr.imag_residue <= 1e-8
    assert np.allclose(tr.times, np.linspace(0, SMALL["T"], SMALL["N"] + 1))


def test_linearity_in_amplitude():
    obs = ObservationCircle()
    base = forward_solve(peanut(), obs, IncidentWave(theta_inc=0.3), MEDIUM, **SMALL).values
    scaled = IncidentWave(theta_inc=0.3, profile=lambda tau: -2.5 * sin3_profile(tau))
    v = forward_solve(peanut(), obs, scaled, MEDIUM, **SMALL).values
    assert np.max(np.abs(v + 2.5 * base)) <= 1e-12 * np.max(np.abs(base))


def test_workers_do_not_change_traces():
    obs = ObservationCircle()
    wave = IncidentWave(theta_inc=0.3)
    a = forward_solve(peanut(), obs, wave, MEDIUM, **SMALL).values
    b = forward_solve(peanut(), obs, wave, MEDIUM, workers=3, **SMALL).values
    assert np.array_equal(a, b)


def test_obstacle_must_be_inside():
    with pytest.raises(ValueError):
        forward_solve(peanut(), ObservationCircle(radius=0.5), IncidentWave(), MEDIUM, **SMALL)


def test_traces_vanish_before_first_arrival():
    # the pulse sin(9 t)^3 needs N = 512 on [0, 10] before BDF2 smearing drops below 1%
    curve = apple()
    obs = ObservationCircle()
    wave = IncidentWave(theta_inc=15 * np.pi / 16)
    tr = forward_solve(curve, obs, wave, MEDIUM, T=10.0, N=512, n_tilde=50)
    P = curve.polyline(2048, closed=False)
    t_hit = (wave.R0 - np.max(P @ wave.direction)) / MEDIUM.c1
    dist = np.min(np.linalg.norm(obs.points()[:, None, :] - P[None], axis=-1), axis=1)
    arrival = t_hit + dist / MEDIUM.c1
    v = np.linalg.norm(tr.values, axis=-1)
    early = tr.times[:, None] < arrival[None, :]
    assert early.any()
    assert np.max(v * early) <= 1e-2 * np.max(v)


def _fake_traces(shape, seed=0):
    rng = np.random.default_rng(seed)
    return TraceSet(make_grid(1.0, shape[0] - 1), ObservationCircle(n_bar=shape[1] // 2),
                    rng.standard_normal(shape) + 0.1)


def test_noise_examples():
    tr = _fake_traces((401, 60, 2))
    same = add_noise(tr, 0.0, seed=3)
    assert np.array_equal(same.values, tr.values) and same.values is not tr.values
    a, b = add_noise(tr, 0.01, seed=7), add_noise(tr, 0.01, seed=7)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, add_noise(tr, 0.01, seed=8).values)
    rel = a.values / tr.values - 1.0
    assert np.max(np.abs(rel)) <= 0.01 * (1 + 1e-12)
    # clipping at one standard deviation puts about 32% of samples on the bound
    assert 0.25 < np.mean(np.isclose(np.abs(rel), 0.01, rtol=1e-9)) < 0.39
    assert a.meta["delta"] == 0.01 and a.meta["seed"] == 7
    with pytest.raises(ValueError):
        add_noise(tr, -0.1)
