import math

import pytest

import jpdkit as j

TWO_PI = 2.0 * math.pi


@pytest.fixture
def jpc_resonator():
    """Slightly overcoupled resonator matching the measured JPC bands."""
    return j.resonator_rates(4.0e4, 1.2e5, TWO_PI * 5.17e9)


def make_trace(params, span_linewidths=20.0, count=1001, concentration=2.0,
               distortion=None, seed=None):
    """Synthetic reflection trace centered on the resonance."""
    span = span_linewidths * params.kappa / TWO_PI
    grid = j.SweepGrid(center=params.f0_hz, span=span, count=count,
                       concentration=concentration)
    freqs = j.synth_grid(grid)
    if distortion is None:
        distortion = j.DistortionParams()
    return j.simulate_reflection(params, freqs, distortion, seed=seed)
