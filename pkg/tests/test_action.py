import math

import numpy as np

from tests.helpers import TABLE1_MASSES, TABLE3_MASSES, loop_near_primary, raises, random_loop, setup

from restricted_orbits.action import (
    QuadratureSettings,
    action_d2,
    action_d3,
    action_decomposed,
    action_direct,
    discretized_action,
    kepler_action,
    periodic_trapezoid,
    primary_kinetic_closed_form,
    primary_kinetic_term,
)
from restricted_orbits.config import TWO_PI, PrimaryField, masses_new
from restricted_orbits.errors import CollisionOnPath, NoConvergence
from restricted_orbits.loops import CircularLoopParams, EllipticLoopParams, FourierLoop, project_to_fourier


def test_periodic_trapezoid_trigonometric_integrand():
    values, points = periodic_trapezoid(lambda t: np.vstack([np.cos(TWO_PI * t) ** 2, 1 + 0 * t]), 1.0)
    assert abs(values[0] - 0.5) < 1e-14 and abs(values[1] - 1.0) < 1e-14
    assert points == 128


def test_periodic_trapezoid_gives_up():
    qs = QuadratureSettings(abs_tol=1e-15, max_doublings=1, initial_points=16)
    with raises(NoConvergence):
        periodic_trapezoid(lambda t: 1.0 / (1.0001 - np.cos(TWO_PI * t)), 1.0, qs)
    with raises(ValueError):
        QuadratureSettings(initial_points=48)


def test_d2_table_values():
    m, cfg = setup(TABLE1_MASSES)
    p = EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20)
    best = min(abs(action_d2(p, m, cfg, reading=r) - 5.417862) for r in ("corrected", "printed"))
    assert best < 1e-5

    m, cfg = setup()
    d2 = action_d2(EllipticLoopParams(a=0.15, b=0.67, theta=math.pi / 30), m, cfg)
    assert abs(d2 - 11.505860) < 5e-6


def test_d3_table_values():
    m, cfg = setup(TABLE3_MASSES)
    assert abs(action_d3(CircularLoopParams(a=0.17, theta=math.pi / 2), m, cfg) - 5.060773) < 1e-5

    m, cfg = setup((0.45, 0.46, 0.09))
    assert abs(action_d3(CircularLoopParams(a=0.23, theta=math.pi / 2), m, cfg) - 4.868944) < 1e-5

    m, cfg = setup()
    assert abs(action_d3(CircularLoopParams(a=0.21, theta=math.pi / 2), m, cfg) - 11.327950) < 5e-6


def test_reduced_forms_agree_with_direct_action():
    rng = np.random.default_rng(2024)
    for masses in (TABLE1_MASSES, (1.0, 1.0, 1.0), (0.45, 0.46, 0.09)):
        m, cfg = setup(masses)
        for _ in range(3):
            a, b = rng.uniform(0.08, 0.2, 2)
            theta = rng.uniform(0.0, TWO_PI)
            ell = EllipticLoopParams(a=a, b=b, theta=theta)
            assert abs(action_d2(ell, m, cfg) - action_direct(ell, m, cfg).total) < 1e-8
            circ = CircularLoopParams(a=a, theta=theta)
            assert abs(action_d3(circ, m, cfg) - action_direct(circ, m, cfg).total) < 1e-8


def test_printed_reading_only_matters_for_unequal_masses():
    m, cfg = setup(TABLE1_MASSES)
    p = EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20)
    corrected = action_d2(p, m, cfg, reading="corrected")
    printed = action_d2(p, m, cfg, reading="printed")
    assert abs(corrected - printed) > 1e-6

    m, cfg = setup()
    p = EllipticLoopParams(a=0.15, b=0.67, theta=math.pi / 30)
    assert abs(action_d2(p, m, cfg, reading="corrected") - action_d2(p, m, cfg, reading="printed")) < 1e-12
    with raises(ValueError):
        action_d2(p, m, cfg, reading="typeset")


def test_decomposed_equals_direct():
    rng = np.random.default_rng(99)
    m, cfg = setup((1.0, 2.0, 3.0))
    for _ in range(20):
        loop = loop_near_primary(rng, cfg, a=rng.uniform(0.05, 0.15), theta=rng.uniform(0, TWO_PI))
        assert abs(action_decomposed(loop, m, cfg) - action_direct(loop, m, cfg).total) < 1e-8

    zero = FourierLoop.zeros(1.0, 2)
    assert abs(action_decomposed(zero, m, cfg) - action_direct(zero, m, cfg).total) < 1e-9


def test_kinetic_decomposition_identity_pointwise():
    m, cfg = setup(TABLE1_MASSES)
    loop = random_loop(np.random.default_rng(8), K=4, scale=0.3)
    t = np.arange(256) / 256
    v = loop.velocity(t)
    vi = cfg.velocities(t)
    w = m.as_array()[:, None]
    rhs = np.sum(w * (np.sum((v[None] - vi) ** 2, axis=-1) - np.sum(vi * vi, axis=-1)), axis=0) / m.M
    lhs = np.sum(v * v, axis=-1)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(lhs)


def test_primary_kinetic_term():
    m = masses_new(1, 1, 1)
    value = primary_kinetic_closed_form(m, 1.0)
    assert abs(value - (-0.5 * TWO_PI ** (2 / 3) * 3 * 3 ** (-4 / 3))) < 1e-14
    assert abs(value + 1.18045) < 2e-5

    m1 = masses_new(*TABLE1_MASSES)
    assert abs(primary_kinetic_closed_form(m1, 1.0) + 0.5 * TWO_PI ** (2 / 3) * 0.3277) < 1e-12
    assert abs(primary_kinetic_closed_form(m1, 8.0) - 2 * primary_kinetic_closed_form(m1, 1.0)) < 1e-14

    _, cfg = setup(TABLE1_MASSES)
    assert abs(primary_kinetic_term(m1, cfg) - primary_kinetic_closed_form(m1, 1.0)) < 1e-12


def test_rotation_invariance_of_reduced_forms():
    m, cfg = setup(TABLE1_MASSES)
    angle = 0.37
    rotated = cfg.rotated(angle)
    p = EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20)
    # a time shift by α/ω turns the primaries by α and the ellipse phase by −α
    p_rot = EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20 - angle)
    assert abs(action_d2(p, m, cfg) - action_d2(p_rot, m, rotated)) < 1e-10

    c = CircularLoopParams(a=0.17, theta=1.0)
    c_rot = CircularLoopParams(a=0.17, theta=1.0 + angle)
    assert abs(action_d3(c, m, cfg) - action_d3(c_rot, m, rotated)) < 1e-10


def test_halving_tolerance_is_stable():
    m, cfg = setup()
    p = CircularLoopParams(a=0.21, theta=math.pi / 2)
    loop = project_to_fourier(p, 2, 64, cfg)
    coarse = action_direct(loop, m, cfg, QuadratureSettings(abs_tol=1e-8)).total
    fine = action_direct(loop, m, cfg, QuadratureSettings(abs_tol=5e-9)).total
    assert abs(coarse - fine) <= 1e-8


def test_collision_on_path():
    m, cfg = setup()
    touching = project_to_fourier(
        lambda t: cfg.position(1, t) + 0.1 * np.stack([np.sin(TWO_PI * t), 0 * t], axis=-1), 2, 64, T=1.0
    )
    with raises(CollisionOnPath):
        action_direct(touching, m, cfg)
    with raises(CollisionOnPath):
        action_decomposed(touching, m, cfg)


def test_kepler_action_and_discretized_action():
    loop = FourierLoop(T=1.0, cos=[[0.3, 0.0]], sin=[[0.0, 0.3]])
    expected = 0.5 * (TWO_PI * 0.3) ** 2 + 2.0 / 0.3
    assert abs(kepler_action(loop, 2.0) - expected) < 1e-10
    field = PrimaryField.fixed_center(2.0, 1.0)
    assert abs(discretized_action(loop, field, 64) - expected) < 1e-12
