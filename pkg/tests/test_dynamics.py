import math

import numpy as np

from tests.helpers import TABLE1_MASSES, raises, setup

from restricted_orbits.bounds import kepler_witness_loop, kepler_witness_radius
from restricted_orbits.config import TWO_PI, PrimaryField
from restricted_orbits.dynamics import (
    APPROACH_RATIO,
    State,
    _rk4_run,
    el_residual,
    field_periodicity_error,
    field_residual,
    integrate,
    jacobi_constant,
    loop_initial_state,
    rhs,
)
from restricted_orbits.errors import CollisionOnPath, CollisionSingularity, SingularityApproach
from restricted_orbits.loops import EllipticLoopParams, project_to_fourier
from restricted_orbits.minimize import RESIDUAL_THRESHOLD


def test_rhs_symmetry_and_monopole_limit():
    m, cfg = setup()
    assert np.allclose(rhs(cfg, m, 0.0, State(position=(0.0, 0.0), velocity=(0.0, 0.0))), 0.0, atol=1e-12)

    far = np.array([1e3 * cfg.l, 0.0])
    acc = rhs(cfg, m, 0.3, State(position=far, velocity=(0.0, 0.0)))
    monopole = -m.M * far / np.linalg.norm(far) ** 3
    assert np.linalg.norm(acc - monopole) < 1e-2 * np.linalg.norm(monopole)


def test_rhs_refuses_collisions():
    m, cfg = setup()
    eps = 0.5e-12 * cfg.l
    on_top = State(position=cfg.position(1, 0.0) + np.array([eps, 0.0]), velocity=(0.0, 0.0))
    with raises(CollisionSingularity):
        rhs(cfg, m, 0.0, on_top)


def test_state_validation():
    with raises(ValueError):
        State(position=(math.nan, 0.0), velocity=(0.0, 0.0))
    s = State(position=(1.0, 2.0), velocity=(3.0, 4.0), time=0.5)
    assert np.array_equal(State.from_vector(s.as_vector(), 0.5).as_vector(), [1.0, 2.0, 3.0, 4.0])


def test_zero_field_is_uniform_motion(tmp_path):
    m, cfg = setup()
    field = PrimaryField.from_config(cfg, m).with_strengths([0.0, 0.0, 0.0])
    s0 = State(position=(0.1, -0.2), velocity=(0.3, 0.7))
    trajectory = integrate(cfg, m, s0, 1.0, 1e-10, field)
    end = trajectory.final
    assert np.max(np.abs(end.position - np.array([0.4, 0.5]))) < 1e-13
    assert np.max(np.abs(end.velocity - s0.velocity)) < 1e-13
    assert abs(end.time - 1.0) < 1e-15

    path = tmp_path / "trajectory.csv"
    trajectory.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,vx,vy"
    assert len(lines) == len(trajectory) + 1


def test_jacobi_constant_is_conserved():
    m, cfg = setup()
    field = PrimaryField.from_config(cfg, m)
    r = 3.0 * cfg.l
    s0 = State(position=(r, 0.0), velocity=(0.0, math.sqrt(m.M / r)))
    trajectory = integrate(cfg, m, s0, cfg.T, 1e-10)
    start = jacobi_constant(s0, field)
    drift = max(abs(jacobi_constant(trajectory[i], field) - start) for i in range(0, len(trajectory), 7))
    assert drift <= 1e-8 * max(1.0, abs(start))


def test_integration_stops_near_a_primary():
    m, cfg = setup()
    close = State(position=cfg.position(1, 0.0) + np.array([0.1 * APPROACH_RATIO * cfg.l, 0.0]), velocity=(0.0, 0.0))
    with raises(SingularityApproach):
        integrate(cfg, m, close, 0.1)
    with raises(ValueError):
        integrate(cfg, m, State(position=(1.0, 0.0), velocity=(0.0, 0.0)), 1.0, step_tol=0.0)


def test_reduced_kepler_circle_is_a_solution():
    a, T = 1.0, 1.0
    field = PrimaryField.fixed_center(a, T)
    loop = kepler_witness_loop(a, T, K=2)
    assert field_residual(loop, field).l2_residual <= 1e-10
    assert field_periodicity_error(loop, field, 1e-10) <= 1e-9


def test_rk4_is_fourth_order():
    a, T = 1.0, 1.0
    field = PrimaryField.fixed_center(a, T)
    y0 = loop_initial_state(kepler_witness_loop(a, T)).as_vector()
    floor = 1e-6 * kepler_witness_radius(a, T)
    errors = []
    for n in (64, 128):
        _, states = _rk4_run(field, y0, 0.0, T, n, floor)
        errors.append(np.max(np.abs(states[-1] - y0)))
    assert 12.0 <= errors[0] / errors[1] <= 20.0


def test_test_loops_are_not_solutions():
    m, cfg = setup(TABLE1_MASSES)
    loop = project_to_fourier(EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20), 4, 64, cfg)
    assert el_residual(loop, m, cfg).l2_residual > RESIDUAL_THRESHOLD


def test_residual_refuses_colliding_loop():
    m, cfg = setup()
    touching = project_to_fourier(
        lambda t: cfg.position(1, t) + 0.1 * np.stack([np.sin(TWO_PI * t), 0 * t], axis=-1), 2, 64, T=1.0
    )
    with raises(CollisionOnPath):
        el_residual(touching, m, cfg)
