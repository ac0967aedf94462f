import json

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from conftest import random_state
from zeroarea import models
from zeroarea.core import ControlField, QuantumState, TimeGrid, area
from zeroarea.oct import (
    MonotonicityViolation,
    OctConfig,
    cost,
    cost_terms,
    energy_penalty,
    optimize,
    sin2_envelope,
    update_field,
)
from zeroarea.propagation import Direction, PropagatorSpec, propagate_array
from zeroarea.units import fs_to_au


def test_envelope_bounds():
    s = sin2_envelope(TimeGrid(10.0, 101))
    assert s[0] == 0.0 and s[-1] == 0.0
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(s[1:-1] > 0)


def test_config_validation():
    g = ControlField.zeros(TimeGrid(1.0, 10))
    for kw in (dict(lam=0.0), dict(mu=-1.0), dict(target_fidelity=1.5),
               dict(envelope=np.ones(11)), dict(envelope=np.zeros(5))):
        with pytest.raises(ValueError):
            OctConfig(guess=g, **kw)


def test_cost_without_penalties_is_overlap(random_model):
    grid = TimeGrid(3.0, 300)
    f = ControlField.from_function(grid, lambda t: 0.4 * np.sin(t))
    psi0, tgt = random_state(5, 1), random_state(5, 2)
    psi_t = propagate_array(PropagatorSpec.for_grid(random_model, grid), psi0.coeffs, f)[-1]
    c = cost(random_model, psi0, tgt, f, f, 100.0, 0.0, sin2_envelope(grid))
    assert c == np.vdot(tgt.coeffs, psi_t).real


def test_cost_all_terms_zero(two_level):
    grid = TimeGrid(5.0, 50)
    z = ControlField.zeros(grid)
    c = cost(two_level, two_level.basis_state(0), two_level.basis_state(1), z, z, 1.0, 3.0,
             sin2_envelope(grid))
    assert c == 0.0


def test_energy_penalty_undefined_at_envelope_zeros():
    grid = TimeGrid(5.0, 50)
    ref = ControlField.zeros(grid)
    bumped = ControlField(grid, np.r_[1e-3, np.zeros(50)])
    with pytest.raises(ValueError):
        energy_penalty(bumped, ref, sin2_envelope(grid))
    inner = ControlField(grid, np.r_[0.0, np.full(49, 1e-3), 0.0])
    assert energy_penalty(inner, ref, sin2_envelope(grid)) > 0


def test_cost_terms_against_independent_quadrature(rotor, rotor_params, coarse_co_grid):
    grid = coarse_co_grid
    tf = grid.tf
    tau, t0 = fs_to_au(288.0), tf / 4
    gauss = lambda t: 2e-4 * np.exp(-4 * np.log(2) * (t - t0) ** 2 / tau**2)  # noqa: E731
    env = lambda t: np.sin(np.pi * t / tf) ** 2  # noqa: E731
    field = models.guess_pulse(rotor_params, grid)
    s_nodes = sin2_envelope(grid)
    ref = ControlField(grid, field.samples - 3e-5 * s_nodes * np.cos(6 * np.pi * grid.t / tf))
    lam, mu = 100.0, 1.8 / tf
    psi0, tgt = models.ground_state(rotor_params), models.target_state(rotor_params)
    terms = cost_terms(rotor, psi0, tgt, field, ref, lam, mu, s_nodes)

    # overlap: ordered product of exact step exponentials at the same midpoints
    h0, h1 = rotor.h0.matrix, rotor.h1.matrix
    half = expm(-0.5j * h0 * grid.dt)
    psi = psi0.coeffs.copy()
    for e in field.midpoints():
        psi = half @ (expm(-1j * e * h1 * grid.dt) @ (half @ psi))
    assert terms.overlap == pytest.approx(np.vdot(tgt.coeffs, psi).real, rel=1e-9)

    a_exact, _ = quad(gauss, 0, tf, points=[t0], epsabs=0, epsrel=1e-13, limit=200)
    assert terms.area_term == pytest.approx(mu * a_exact**2, rel=1e-9)
    e_exact, _ = quad(lambda t: (3e-5 * np.cos(6 * np.pi * t / tf)) ** 2 * env(t), 0, tf,
                      epsabs=0, epsrel=1e-13, limit=200)
    assert terms.energy_term == pytest.approx(lam * e_exact, rel=1e-9)
    assert terms.total == terms.overlap - terms.area_term - terms.energy_term


def test_update_fixed_point(two_level):
    grid = TimeGrid(4.0, 80)
    spec = PropagatorSpec.for_grid(two_level, grid)
    z = ControlField.zeros(grid)
    psi0 = two_level.basis_state(0)
    chi = propagate_array(spec, psi0.coeffs, z, Direction.BACKWARD)
    new, _ = update_field(spec, chi, psi0, z, 0.0, 1.0, 0.0, sin2_envelope(grid))
    assert np.max(np.abs(new.samples)) < 1e-15


def test_update_shrinks_as_inverse_lambda(random_model):
    grid = TimeGrid(2.0, 200)
    spec = PropagatorSpec.for_grid(random_model, grid)
    f = ControlField.from_function(grid, lambda t: 0.1 * np.sin(3 * t))
    psi0, tgt = random_state(5, 4), random_state(5, 5)
    chi = propagate_array(spec, tgt.coeffs, f, Direction.BACKWARD)
    env = sin2_envelope(grid)
    h1_norm = np.linalg.norm(random_model.h1.matrix, 2)
    steps = []
    for lam in (1e3, 2e3, 4e3):
        new, traj = update_field(spec, chi, psi0, f, area(f), lam, 0.0, env)
        d = new.samples - f.samples
        g = np.einsum("ij,jk,ik->i", chi.conj(), random_model.h1.matrix, traj).imag
        np.testing.assert_allclose(d, env * g / (2 * lam), rtol=0, atol=1e-15)
        assert np.max(np.abs(d)) <= h1_norm / (2 * lam)
        steps.append(np.max(np.abs(d)))
    assert steps[0] / steps[1] == pytest.approx(2, rel=1e-2)
    assert steps[1] / steps[2] == pytest.approx(2, rel=1e-2)


def test_update_area_shift(random_model):
    grid = TimeGrid(2.0, 200)
    spec = PropagatorSpec.for_grid(random_model, grid)
    f = ControlField.from_function(grid, lambda t: 0.1 + 0.0 * t)
    psi0, tgt = random_state(5, 4), random_state(5, 5)
    chi = propagate_array(spec, tgt.coeffs, f, Direction.BACKWARD)
    env = sin2_envelope(grid)
    a = area(f)
    base, _ = update_field(spec, chi, psi0, f, a, 10.0, 0.0, env)
    shifted, _ = update_field(spec, chi, psi0, f, a, 10.0, 0.5, env)
    # the shift changes psi_{k+1} too, so compare only the first few nodes
    np.testing.assert_allclose(shifted.samples[:2] - base.samples[:2],
                               -(0.5 / 10.0) * env[:2] * a, atol=1e-12)


def plain_monotonic_loop(model, psi0, target, guess, lam, iterations):
    """Area-free reference: backward chi, forward sweep with the same midpoint estimate."""
    grid = guess.grid
    spec = PropagatorSpec.for_grid(model, grid)
    env = sin2_envelope(grid)
    h1 = model.h1.matrix
    e = guess.samples.copy()
    for _ in range(iterations):
        mids = 0.5 * (e[1:] + e[:-1])
        chi = [target.coeffs]
        for m in mids[::-1]:
            chi.append(spec.step_matrix(m, Direction.BACKWARD) @ chi[-1])
        chi = chi[::-1]
        new = np.empty_like(e)
        psi = psi0.coeffs.copy()
        new[0] = e[0] + env[0] * np.vdot(chi[0], h1 @ psi).imag / (2 * lam)
        for i in range(grid.n_steps):
            mid = 0.5 * (e[i] + e[i + 1]) + (new[i] - e[i])
            psi = spec.step_matrix(mid) @ psi
            new[i + 1] = e[i + 1] + env[i + 1] * np.vdot(chi[i + 1], h1 @ psi).imag / (2 * lam)
        e = new
    return e


def test_mu_zero_matches_plain_algorithm(random_model):
    grid = TimeGrid(2.0, 150)
    guess = ControlField.from_function(grid, lambda t: 0.2 * np.exp(-((t - 1) / 0.3) ** 2))
    psi0, tgt = random_state(5, 6), random_state(5, 7)
    cfg = OctConfig(guess=guess, lam=5.0, mu=0.0, max_iterations=3, target_fidelity=1.0)
    run = optimize(random_model, psi0, tgt, cfg)
    ref = plain_monotonic_loop(random_model, psi0, tgt, guess, 5.0, 3)
    assert run.iterations == 3
    scale = np.max(np.abs(ref))
    assert np.max(np.abs(run.final_field.samples - ref)) <= 1e-14 * scale


@pytest.mark.parametrize("mu_tf", [0.0, 0.25, 1.8])
def test_single_update_increases_cost_on_rotor(rotor, rotor_params, co_grid, mu_tf):
    guess = models.guess_pulse(rotor_params, co_grid)
    psi0, tgt = models.ground_state(rotor_params), models.target_state(rotor_params)
    mu = mu_tf / co_grid.tf
    cfg = OctConfig(guess=guess, lam=100.0, mu=mu, max_iterations=1, target_fidelity=1.0)
    run = optimize(rotor, psi0, tgt, cfg)
    env = cfg.envelope
    before = cost(rotor, psi0, tgt, guess, guess, 100.0, mu, env)
    after = cost(rotor, psi0, tgt, run.final_field, guess, 100.0, mu, env)
    assert after >= before
    assert after == pytest.approx(run.final.cost, rel=1e-12)
    assert not run.violations


def test_already_at_target_exits_immediately(rotor, rotor_params, coarse_co_grid):
    psi = models.target_state(rotor_params)
    cfg = OctConfig(guess=ControlField.zeros(coarse_co_grid), lam=100.0)
    # free evolution over a full period returns the state up to a global phase
    run = optimize(rotor, psi, psi, cfg)
    assert run.iterations == 0
    assert run.converged
    assert run.final.fidelity == pytest.approx(1.0, abs=1e-9)


def test_endpoints_pinned_and_record_consistent(random_model):
    grid = TimeGrid(2.0, 120)
    guess = ControlField.from_function(grid, lambda t: 0.3 + 0.1 * t)
    psi0, tgt = random_state(5, 8), random_state(5, 9)
    cfg = OctConfig(guess=guess, lam=2.0, mu=0.4, max_iterations=8, target_fidelity=1.0)
    run = optimize(random_model, psi0, tgt, cfg)
    assert len(run.iterates) == 9
    prev = None
    for it in run.iterates:
        assert it.field.samples[0] == guess.samples[0]
        assert it.field.samples[-1] == guess.samples[-1]
        assert it.area == area(it.field)
        assert it.area_term == pytest.approx(0.4 * it.area**2, rel=1e-15)
        if prev is not None:
            e = 2.0 * energy_penalty(it.field, prev.field, cfg.envelope)
            assert it.energy_term == pytest.approx(e, rel=1e-12)
            assert it.cost >= prev.objective - 1e-9 * abs(prev.objective)
        prev = it
    assert not run.violations


def test_gradient_matches_finite_difference(random_model):
    grid = TimeGrid(2.0, 400)
    spec = PropagatorSpec.for_grid(random_model, grid)
    f = ControlField.from_function(grid, lambda t: 0.2 * np.cos(2 * t))
    psi0, tgt = random_state(5, 10), random_state(5, 11)
    env = sin2_envelope(grid)
    mu = 0.3
    h = env * np.sin(5 * grid.t)

    def objective(fld):
        return cost(random_model, psi0, tgt, fld, fld, 1.0, mu, env)

    eta = 1e-6
    fd = (objective(f + ControlField(grid, eta * h)) - objective(f - ControlField(grid, eta * h))) / (2 * eta)
    chi = propagate_array(spec, tgt.coeffs, f, Direction.BACKWARD)
    psi = propagate_array(spec, psi0.coeffs, f)
    g = np.einsum("ij,jk,ik->i", chi.conj(), random_model.h1.matrix, psi).imag
    analytic = np.trapezoid((g - 2 * mu * area(f)) * h, dx=grid.dt)
    assert fd == pytest.approx(analytic, rel=1e-3)


def test_strict_mode_raises_on_violation(random_model):
    grid = TimeGrid(20.0, 40)
    guess = ControlField.from_function(grid, lambda t: 0.5 * np.sin(t))
    psi0, tgt = random_state(5, 12), random_state(5, 13)
    cfg = OctConfig(guess=guess, lam=1e-3, max_iterations=5, target_fidelity=1.0)
    run = optimize(random_model, psi0, tgt, cfg)
    assert run.violations
    with pytest.raises(MonotonicityViolation):
        optimize(random_model, psi0, tgt, cfg, strict=True)


def test_rejects_unnormalized_states(two_level):
    cfg = OctConfig(guess=ControlField.zeros(TimeGrid(1.0, 10)))
    bad = QuantumState(np.array([2.0, 0.0]), norm_tol=10.0)
    with pytest.raises(ValueError):
        optimize(two_level, bad, two_level.basis_state(0), cfg)


def test_run_json_record(random_model):
    grid = TimeGrid(2.0, 60)
    guess = ControlField.from_function(grid, lambda t: 0.2 + 0 * t)
    cfg = OctConfig(guess=guess, lam=3.0, mu=0.1, max_iterations=2, target_fidelity=1.0)
    run = optimize(random_model, random_state(5, 1), random_state(5, 2), cfg)
    doc = json.loads(run.to_json(tag="x"))
    assert doc["tag"] == "x"
    assert doc["lambda_au"] == 3.0 and doc["mu_au"] == 0.1
    assert [d["k"] for d in doc["iterations"]] == [0, 1, 2]
    for d, it in zip(doc["iterations"], run.iterates):
        assert set(d) == {"k", "fidelity", "cost", "area", "energy_term", "area_term"}
        assert d["cost"] == it.cost
