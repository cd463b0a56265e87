import math

import numpy as np

from tests.helpers import TABLE1_MASSES, raises, setup

from restricted_orbits.config import (
    TWO_PI,
    PrimaryField,
    lagrange_orbits,
    masses_new,
    newton_acceleration,
    potential_U,
    primary_position,
    primary_velocity,
    side_length,
)
from restricted_orbits.errors import NonPositiveMass


def test_masses_total():
    assert masses_new(1, 1, 1).M == 3.0
    assert abs(masses_new(*TABLE1_MASSES).M - 1.0) < 1e-15


def test_masses_reject_nonpositive():
    with raises(NonPositiveMass, match="m2"):
        masses_new(1, -1, 1)
    with raises(NonPositiveMass):
        masses_new(0, 1, 1)
    with raises(ValueError):
        masses_new(1, math.nan, 1)


def test_side_length_values():
    for masses, expected in ((masses_new(0.29, 0.42, 0.29), 0.2936839), (masses_new(1, 1, 1), 0.4235654)):
        closed_form = (masses.M / TWO_PI**2) ** (1.0 / 3.0)
        assert abs(side_length(masses, 1.0) - closed_form) < 1e-14
        assert abs(side_length(masses, 1.0) - expected) < 1e-6
    assert abs(side_length(masses_new(0.5, 0.25, 0.25), TWO_PI) - 1.0) < 1e-14
    with raises(ValueError):
        side_length(masses_new(1, 1, 1), 0.0)


def test_equal_masses_configuration():
    _, cfg = setup()
    for r in cfg.r:
        assert abs(r - cfg.l / math.sqrt(3.0)) < 1e-14
    expected = (0.0, TWO_PI / 3.0, 2.0 * TWO_PI / 3.0)
    for theta, want in zip(cfg.theta, expected):
        assert abs(theta - want) < 1e-13


def test_table1_masses_radius_and_angle():
    m, cfg = setup(TABLE1_MASSES)
    s1 = math.sqrt(0.42**2 + 0.42 * 0.29 + 0.29**2)
    assert abs(cfg.r[0] - s1 * cfg.l / m.M) < 1e-14
    assert abs(math.sin(cfg.theta[0]) - (-0.42 + 0.29) / (2.0 * s1)) < 1e-13
    assert all(0.0 <= th < TWO_PI for th in cfg.theta)


def test_centre_of_mass_and_equilateral_for_unequal_masses():
    for masses in ((1.0, 2.0, 3.0), TABLE1_MASSES, (0.1, 0.75, 0.15)):
        m, cfg = setup(masses)
        t = np.linspace(0.0, cfg.T, 17)
        q = cfg.positions(t)
        centre = np.tensordot(m.as_array(), q, axes=1)
        assert np.max(np.abs(centre)) < 1e-14
        for i, j in ((0, 1), (0, 2), (1, 2)):
            assert np.allclose(np.linalg.norm(q[i] - q[j], axis=-1), cfg.l, rtol=1e-13, atol=0.0)


def test_primaries_obey_newton():
    m, cfg = setup((1.0, 2.0, 3.0))
    t = np.linspace(0.0, cfg.T, 9)
    for i in (1, 2, 3):
        acc = newton_acceleration(cfg, m, i, t)
        assert np.allclose(acc, -cfg.omega**2 * primary_position(cfg, i, t), rtol=1e-12, atol=1e-12)


def test_primary_position_and_velocity():
    _, cfg = setup()
    assert np.allclose(primary_position(cfg, 1, 0.0), (cfg.r[0], 0.0), atol=1e-15)
    assert np.allclose(primary_velocity(cfg, 1, 0.0), (0.0, TWO_PI * cfg.r[0]), atol=1e-14)

    rng = np.random.default_rng(7)
    t = rng.uniform(0.0, 1.0, 100)
    for i in (1, 2, 3):
        q = primary_position(cfg, i, t)
        v = primary_velocity(cfg, i, t)
        assert np.allclose(primary_position(cfg, i, t + cfg.T), q, atol=1e-14)
        assert np.allclose(primary_position(cfg, i, t + cfg.T / 2), -q, atol=1e-14)
        assert np.allclose(np.linalg.norm(v, axis=-1), TWO_PI * cfg.r[i - 1], rtol=1e-13)
        assert np.max(np.abs(np.sum(q * v, axis=-1))) < 1e-13

    with raises(ValueError):
        primary_position(cfg, 4, 0.0)


def test_potential_is_constant_on_the_rigid_rotation():
    m, cfg = setup((1.0, 2.0, 3.0))
    values = potential_U(cfg, m, np.linspace(0.0, 1.0, 11))
    expected = m.pair_sum / cfg.l
    assert np.allclose(values, expected, rtol=1e-13)


def test_rotation_and_permutation():
    m, cfg = setup((1.0, 2.0, 3.0))
    rotated = cfg.rotated(0.3)
    assert np.allclose(rotated.position(2, 0.0), cfg.position(2, 0.3 / cfg.omega), atol=1e-14)
    permuted = m.permuted((2, 0, 1))
    assert (permuted.m1, permuted.m2, permuted.m3) == (3.0, 1.0, 2.0)


def test_primary_field_from_config_and_fixed_centre():
    m, cfg = setup()
    field = PrimaryField.from_config(cfg, m)
    assert np.allclose(field.positions(0.25), cfg.positions(0.25))
    assert field.total_strength == 3.0

    pinned = PrimaryField.fixed_center(2.0, 1.0)
    assert np.allclose(pinned.positions(np.linspace(0, 1, 5)), 0.0)
    assert not np.any(pinned.with_strengths([0.0]).active)
    with raises(ValueError):
        PrimaryField.fixed_center(0.0, 1.0)
