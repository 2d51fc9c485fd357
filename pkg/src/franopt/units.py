"""Unit conversions used across the package.

Everything downstream works in Watts and nats; these helpers are the single
place where dBm / dB / bits enter or leave.
"""

import numpy as np

# 1 nat = log2(e) bits
NATS_TO_BITS = float(np.log2(np.e))


def dbm_to_watts(p_dbm):
    """30 dBm -> 1.0 W."""
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def noise_power_w(density_dbm_hz, bandwidth_hz):
    """Thermal noise power over a bandwidth: -174 dBm/Hz x 10 MHz -> ~3.98e-14 W."""
    return dbm_to_watts(density_dbm_hz) * float(bandwidth_hz)


def nats_to_bits(r_nats):
    return np.asarray(r_nats, dtype=float) * NATS_TO_BITS


def bits_to_nats(r_bits):
    return np.asarray(r_bits, dtype=float) / NATS_TO_BITS
