import numpy as np
import pytest

from battdmd import AgingSpec, CellSpec, TimeSeries, hppc_protocol, simulate_cell


def series_of(v, i=None, dt=1.0):
    """Wrap raw arrays as a TimeSeries without the measurement plausibility window."""
    v = np.asarray(v, dtype=float)
    if i is None:
        i = np.zeros_like(v)
    t = np.arange(v.size, dtype=float) * dt
    return TimeSeries(t, np.asarray(i, dtype=float), v, v_window=None)


def recurrence_series(coeffs, x0, length, inputs=None, b=0.0):
    """Generate x_{k+1} = sum_j coeffs[j] * x_{k-j} + b * u_k; returns the sequence."""
    coeffs = np.asarray(coeffs, dtype=float)
    d = coeffs.size
    x = np.zeros(length)
    x[:d] = x0
    for k in range(d, length):
        acc = 0.0
        for j in range(d):
            acc += coeffs[j] * x[k - 1 - j]
        if inputs is not None:
            acc += b * inputs[k - 1]
        x[k] = acc
    return x


def poles_to_coeffs(poles):
    """Recurrence coefficients [a1..ad] with x_{k+1} = a1 x_k + ... + ad x_{k-d+1}."""
    poly = np.poly(np.asarray(poles))  # monic, highest power first
    return (-poly[1:]).real


@pytest.fixture(scope="session")
def healthy_cell():
    return CellSpec()


@pytest.fixture(scope="session")
def hppc_record_small(healthy_cell):
    """Two-level pulse record, ~19k samples; enough structure for unit tests."""
    script = hppc_protocol(healthy_cell, repetitions=2)
    return simulate_cell(healthy_cell, AgingSpec(), script, dt=1.0)


@pytest.fixture(scope="session")
def hppc_record_sweep(healthy_cell):
    """Five-level pulse record used by the comparative-claim tests."""
    script = hppc_protocol(healthy_cell, repetitions=5)
    return simulate_cell(healthy_cell, AgingSpec(), script, dt=1.0)
