"""Shared fixtures: canonical configurations and reusable sampled records."""

import numpy as np
import pytest

from cvbell.config import RunConfig

# The reference operating point used across the suite: 1.1 dB squeezing,
# purity 0.98, eta 0.95, 17.5 dB dark clearance, canonical angles.
REFERENCE_B = 2.295726607286971


@pytest.fixture(scope="session")
def default_config() -> RunConfig:
    return RunConfig()


@pytest.fixture(scope="session")
def small_run(default_config):
    """One full sampled Bell run at n = 20000, calibrated, reused by the
    sampler/analysis/CLI layers to keep the suite fast."""
    from cvbell.circuit import build_bell_state
    from cvbell.sampler import calibrate, sample_bell_run

    config = default_config.replace(n_samples=20_000, seed=4242)
    gamma4 = build_bell_state(config.sampling_circuit_config())
    raw = sample_bell_run(
        gamma4, config.angles, config.n_samples, config.noise_config(), config.seed
    )
    calibrated = [calibrate(rs, keep_raw=True) for rs in raw]
    return config, raw, calibrated


def assert_angles_equal(a, b):
    np.testing.assert_allclose(
        [a.theta_a, a.theta_a_prime, a.theta_b, a.theta_b_prime],
        [b.theta_a, b.theta_a_prime, b.theta_b, b.theta_b_prime],
        rtol=0.0,
        atol=1e-15,
    )
