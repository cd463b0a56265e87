"""
Shared helpers for the test modules.
"""

import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

# Add project root to path
PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from restricted_orbits.config import lagrange_orbits, masses_new
from restricted_orbits.loops import CircularLoopParams, FourierLoop, project_to_fourier

EQUAL = (1.0, 1.0, 1.0)
TABLE1_MASSES = (0.29, 0.42, 0.29)
TABLE3_MASSES = (0.10, 0.75, 0.15)


@contextmanager
def raises(error_type, match=None):
    """Assert that the block raises ``error_type`` (optionally with ``match`` in the message)."""
    try:
        yield
    except error_type as e:
        if match is not None and match not in str(e):
            raise AssertionError(f"{type(e).__name__} message {str(e)!r} lacks {match!r}") from e
        return
    raise AssertionError(f"{error_type.__name__} was not raised")


def setup(masses=EQUAL, T=1.0):
    m = masses_new(*masses)
    return m, lagrange_orbits(m, T)


def random_loop(rng, T=1.0, K=6, scale=0.05, decay=2.0) -> FourierLoop:
    """Mean-zero loop with coefficients shrinking like k^-decay."""
    k = (2 * np.arange(K) + 1)[:, None]
    return FourierLoop(
        T=T,
        cos=scale * rng.standard_normal((K, 2)) / k**decay,
        sin=scale * rng.standard_normal((K, 2)) / k**decay,
    )


def loop_near_primary(rng, cfg, a=0.1, theta=0.0, K=6, wiggle=2e-3) -> FourierLoop:
    """Circular test loop around primary 1 with a small random perturbation."""
    base = project_to_fourier(CircularLoopParams(a=a, theta=theta), K, 64, cfg)
    noise = random_loop(rng, cfg.T, K, scale=wiggle)
    return FourierLoop(T=cfg.T, cos=base.cos + noise.cos, sin=base.sin + noise.sin)
