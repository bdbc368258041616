"""Shared independent oracles and acceptance-line reporting."""

import math

import numpy as np

from cryoreadout.device import EXP_CAP

# one "[ACCEPTANCE nn] PASS/FAIL - ..." line per criterion, filled in by
# tests/test_acceptance.py and printed after capture ends
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])


def grid_search_operating_point(network, params, step=1e-4):
    """Brute-force DC solution on a (v_be, v_ce) grid.

    Independent of the Newton path: evaluates the raw node equations on a
    dense grid.  For each v_be the collector-node residual picks the best
    v_ce cell, then the base-node residual picks the best v_be; this nested
    argmin avoids mixing the two residuals' very different current scales.

    The v_be range is bounded above by the divider's Thevenin voltage (the
    base node cannot sit above it) and by the v_be at which the collector
    current would exceed the supply's reach through the collector resistor
    (plus margin) -- beyond that both residuals grow monotonically.
    """
    vbe_cap = math.log(network.v_supply / (network.r_collector * params.i_sat)) \
        * params.v_teff + 0.05
    vbe_hi = min(network.thevenin_voltage, 0.995 * EXP_CAP * params.v_teff,
                 vbe_cap)
    vbe = np.arange(0.0, vbe_hi + step, step)
    vce = np.arange(0.0, network.v_supply + step, step)
    early = 1.0 + vce / params.v_early

    best = (np.inf, None, None)
    chunk = 512
    for k0 in range(0, vbe.size, chunk):
        vb = vbe[k0:k0 + chunk]
        a = params.i_sat * np.exp(vb / params.v_teff)      # per-v_be junction factor
        ic = a[:, None] * early[None, :]
        f2 = (network.v_supply - vce[None, :]
              - (ic / params.beta_f + ic) * network.r_emitter) \
            / network.r_collector - ic
        j = np.argmin(np.abs(f2), axis=1)
        ic_best = ic[np.arange(vb.size), j]
        ib = ic_best / params.beta_f
        v_b = vb + (ib + ic_best) * network.r_emitter
        f1 = (network.v_supply - v_b) / network.r_upper \
            - v_b / network.r_lower - ib
        k = int(np.argmin(np.abs(f1)))
        if abs(f1[k]) < best[0]:
            best = (abs(f1[k]), vb[k], vce[j[k]])
    return best[1], best[2]


def dft_fundamental_rms(x, samples_per_period):
    """RMS amplitude of the fundamental of a periodic record.

    The record must contain an integer number of periods of length
    ``samples_per_period``; the fundamental bin is then exact.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    assert n % samples_per_period == 0
    m = n // samples_per_period       # fundamental bin index
    c = np.fft.rfft(x)[m] * 2.0 / n
    return abs(c) / np.sqrt(2.0)
