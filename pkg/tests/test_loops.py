import json
import math

import numpy as np

from tests.helpers import TABLE1_MASSES, raises, random_loop, setup

from restricted_orbits.config import TWO_PI
from restricted_orbits.errors import GridTooCoarse, LoopFormatError
from restricted_orbits.loops import (
    CircularLoopParams,
    EllipticLoopParams,
    FourierLoop,
    SampledLoop,
    fourier_loop_from_dict,
    fourier_loop_to_dict,
    l2_squared,
    loop_position,
    loop_velocity,
    min_separation,
    project_to_fourier,
    read_fourier_loop,
    sample_loop,
    separations_on_grid,
    sobolev_norm,
    velocity_l2_squared,
    write_fourier_loop,
)


def test_elliptic_loop_at_phase_zero():
    _, cfg = setup()
    p = EllipticLoopParams(a=0.2, b=0.2, theta=0.0)
    assert np.allclose(loop_position(p, cfg, 0.0), cfg.position(1, 0.0) + np.array([0.2, 0.0]), atol=1e-15)


def test_test_loops_are_antisymmetric():
    _, cfg = setup(TABLE1_MASSES)
    t = np.linspace(0.0, 1.0, 64, endpoint=False)
    for p in (EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20), CircularLoopParams(a=0.17, theta=1.0)):
        assert np.allclose(loop_position(p, cfg, t + 0.5), -loop_position(p, cfg, t), atol=1e-14)


def test_elliptic_relative_distance():
    _, cfg = setup(TABLE1_MASSES)
    a, b, th = 0.13, 0.49, math.pi / 20
    p = EllipticLoopParams(a=a, b=b, theta=th)
    t = np.linspace(0.0, 1.0, 50)
    rel = np.linalg.norm(loop_position(p, cfg, t) - cfg.position(1, t), axis=-1)
    expected = np.sqrt(0.5 * (a * a + b * b) + 0.5 * (a * a - b * b) * np.cos(2 * TWO_PI * t - 2 * th))
    assert np.allclose(rel, expected, rtol=1e-13)


def test_circular_loop_distance_and_cancellation():
    _, cfg = setup()
    t = np.linspace(0.0, 1.0, 40)
    p = CircularLoopParams(a=0.17, theta=0.4)
    rel = np.linalg.norm(loop_position(p, cfg, t) - cfg.position(1, t), axis=-1)
    assert np.allclose(rel, 0.17, rtol=1e-13)

    cancel = CircularLoopParams(a=cfg.r[0], theta=cfg.theta[0] + math.pi)
    assert np.max(np.abs(loop_position(cancel, cfg, t))) < 1e-14


def test_relative_speeds():
    _, cfg = setup(TABLE1_MASSES)
    t = np.linspace(0.0, 1.0, 33)
    a = 0.2
    circ = CircularLoopParams(a=a, theta=0.7)
    speed2 = np.sum((loop_velocity(circ, cfg, t) - cfg.velocity(1, t)) ** 2, axis=-1)
    assert np.allclose(speed2, (TWO_PI * a) ** 2, rtol=1e-13)

    a, b, th = 0.13, 0.49, math.pi / 20
    ell = EllipticLoopParams(a=a, b=b, theta=th)
    speed2 = np.sum((loop_velocity(ell, cfg, t) - cfg.velocity(1, t)) ** 2, axis=-1)
    expected = TWO_PI**2 * (0.5 * (a * a + b * b) - 0.5 * (a * a - b * b) * np.cos(2 * TWO_PI * t - 2 * th))
    assert np.allclose(speed2, expected, rtol=1e-12)


def test_fourier_velocity_matches_finite_difference():
    loop = random_loop(np.random.default_rng(3), K=5)
    t = np.linspace(0.0, 1.0, 13)
    h = 1e-6
    numeric = (loop.position(t + h) - loop.position(t - h)) / (2 * h)
    assert np.allclose(loop.velocity(t), numeric, atol=1e-8)

    single = FourierLoop(T=2.0, cos=[[0, 0], [1.0, 0]], sin=[[0, 0], [0, 0]])
    assert np.allclose(single.velocity(0.1), [-3 * math.pi * math.sin(3 * math.pi * 0.1), 0.0])


def test_fourier_loop_validation():
    with raises(LoopFormatError):
        FourierLoop(T=1.0, cos=np.zeros((3, 2)), sin=np.zeros((2, 2)))
    with raises(LoopFormatError):
        FourierLoop(T=-1.0, cos=np.zeros((1, 2)), sin=np.zeros((1, 2)))
    with raises(LoopFormatError):
        FourierLoop(T=1.0, cos=[[math.inf, 0.0]], sin=[[0.0, 0.0]])
    loop = FourierLoop.zeros(1.0, 4)
    assert loop.K == 4 and list(loop.harmonics) == [1, 3, 5, 7]
    assert not loop.cos.flags.writeable


def test_projection_reconstructs_first_harmonic_loops():
    _, cfg = setup(TABLE1_MASSES)
    t = np.linspace(0.0, 1.0, 37)
    for p in (EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20), CircularLoopParams(a=0.17, theta=1.2)):
        for K in (1, 4):
            loop = project_to_fourier(p, K, 64, cfg)
            assert np.max(np.abs(loop.position(t) - loop_position(p, cfg, t))) < 1e-12


def test_projection_enforces_symmetry():
    zero = project_to_fourier(lambda t: np.zeros((np.size(t), 2)), 4, 32, T=1.0)
    assert np.all(zero.coefficients() == 0.0)

    # constant plus second harmonic: neither survives the odd projection
    def asymmetric(t):
        return np.stack([1.0 + np.cos(2 * TWO_PI * t), np.sin(TWO_PI * t)], axis=-1)

    loop = project_to_fourier(asymmetric, 4, 64, T=1.0)
    t = np.linspace(0.0, 1.0, 21)
    assert np.allclose(loop.position(t + 0.5), -loop.position(t), atol=1e-15)
    assert np.allclose(loop.position(t), np.stack([0 * t, np.sin(TWO_PI * t)], axis=-1), atol=1e-13)


def test_projection_grid_too_coarse():
    _, cfg = setup()
    with raises(GridTooCoarse):
        project_to_fourier(CircularLoopParams(a=0.1), 16, 32, cfg)


def test_min_separation_of_test_loops():
    _, cfg = setup(TABLE1_MASSES)
    circ = CircularLoopParams(a=0.17, theta=math.pi / 2)
    assert abs(min_separation(circ, cfg)[0] - 0.17) < 1e-12
    ell = EllipticLoopParams(a=0.13, b=0.49, theta=math.pi / 20)
    assert abs(min_separation(ell, cfg)[0] - 0.13) < 1e-9


def test_min_separation_detects_constructed_collision():
    _, cfg = setup()
    t_star = 0.3
    # passes through q1(t*) with the relative curve sin(2π(t − t*)) · (c, 0)
    touching = project_to_fourier(
        lambda t: cfg.position(1, t) + 0.1 * np.stack([np.sin(TWO_PI * (t - t_star)), 0 * t], axis=-1),
        2, 64, T=1.0,
    )
    assert min_separation(touching, cfg)[0] < 1e-9
    with raises(ValueError):
        min_separation(touching, cfg, N=32)


def test_min_separation_late_collision_with_second_primary():
    _, cfg = setup()
    t_star = 0.83
    touching = project_to_fourier(
        lambda t: cfg.position(2, t) + 0.2 * np.stack([0 * t, np.sin(TWO_PI * (t - t_star))], axis=-1),
        2, 64, T=1.0,
    )
    seps = min_separation(touching, cfg)
    assert seps[1] < 1e-9
    grid = separations_on_grid(touching, cfg, np.arange(256) / 256)
    assert np.all(seps <= grid.min(axis=1) + 1e-15)


def test_norms_and_poincare_wirtinger():
    rng = np.random.default_rng(11)
    for _ in range(20):
        loop = random_loop(rng, T=1.7, K=5)
        t = np.arange(512) * (loop.T / 512)
        q, v = loop.position(t), loop.velocity(t)
        assert abs(l2_squared(loop) - loop.T / 512 * np.sum(q * q)) < 1e-12
        assert abs(velocity_l2_squared(loop) - loop.T / 512 * np.sum(v * v)) < 1e-10
        assert l2_squared(loop) <= (loop.T / TWO_PI) ** 2 * velocity_l2_squared(loop) * (1 + 1e-12)
        assert sobolev_norm(loop) > 0


def test_loop_transformations():
    loop = random_loop(np.random.default_rng(5), K=3)
    t = np.linspace(0.0, 1.0, 9)
    assert np.allclose(loop.reversed().position(t), loop.position(-t))
    c, s = math.cos(0.5), math.sin(0.5)
    assert np.allclose(loop.rotated(0.5).position(t), loop.position(t) @ np.array([[c, -s], [s, c]]).T)
    padded = loop.with_harmonics(6)
    assert padded.K == 6 and np.allclose(padded.position(t), loop.position(t))
    assert np.allclose(FourierLoop.from_coefficients(1.0, loop.coefficients()).coefficients(), loop.coefficients())


def test_fourier_file_round_trip(tmp_path):
    loop = random_loop(np.random.default_rng(1), K=4)
    path = tmp_path / "loop.json"
    write_fourier_loop(loop, path)
    back = read_fourier_loop(path)
    assert back.T == loop.T
    assert np.allclose(back.coefficients(), loop.coefficients(), rtol=1e-15, atol=0.0)


def test_fourier_file_errors(tmp_path):
    data = fourier_loop_to_dict(FourierLoop.zeros(1.0, 2))
    with raises(LoopFormatError, match="symmetry violation"):
        fourier_loop_from_dict({**data, "harmonics": [1, 2]})
    with raises(LoopFormatError, match="K = 3"):
        fourier_loop_from_dict({**data, "K": 3})

    broken = tmp_path / "broken.json"
    broken.write_text('{"T": 1.0,\n "K": }')
    with raises(LoopFormatError, match="line 2"):
        read_fourier_loop(broken)
    with raises(LoopFormatError):
        read_fourier_loop(tmp_path / "missing.json")

    assert json.loads(json.dumps(data))["K"] == 2


def test_sampled_loop_csv(tmp_path):
    _, cfg = setup()
    sampled = sample_loop(CircularLoopParams(a=0.1), cfg, 16)
    assert sampled.N == 16 and abs(sampled.T - 1.0) < 1e-15
    path = tmp_path / "loop.csv"
    sampled.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,x,y"
    back = SampledLoop.from_csv(path)
    assert np.array_equal(back.positions, sampled.positions)

    with raises(LoopFormatError):
        SampledLoop(times=np.arange(4), positions=np.zeros((4, 2)))
    with raises(LoopFormatError):
        SampledLoop(times=np.array([0, 1, 2, 3, 4, 5, 6, 8.0]), positions=np.zeros((8, 2)))
