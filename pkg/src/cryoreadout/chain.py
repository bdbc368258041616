"""Frequency-domain model of the analog amplification chain.

Each stage is a minimum-phase rational response with real corner
frequencies:

    H(f) = gain_factor * prod (1 + j f/f_zero) / prod (1 + j f/f_pole)
                       * prod (j f/f_c) / (1 + j f/f_c)      [hp_corners]

``hp_corners`` entries are single-pole high-pass (coupling) sections;
``zeros``/``poles`` form shelving pairs such as a partially bypassed
emitter resistor.  Noise accumulates through a cascade by the Friis rule
on noise temperatures, with available power gain taken as |H|^2 at the
evaluation frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .device import BiasNetwork, SmallSignalParams

__all__ = [
    "StageResponse",
    "ChainResponse",
    "CouplingNetwork",
    "corner_frequency",
    "capacitive_division",
    "hbt_stage_response",
    "unity_gain_load",
    "fixed_gain_stage",
    "cascade",
    "default_chain",
    "s21_db",
    "snr_db",
]

DEFAULT_REFERENCE_FREQUENCY = 10e6   # Hz, mid-band for gain/noise bookkeeping

# second-stage (band-limited 40 dB block) defaults; the low corner sits at
# 40 kHz so the two-stage response stays within 1 dB of flat at 100 kHz
SECOND_STAGE_F_LOW = 40e3
FIRST_STAGE_NOISE_K = 2.0
SECOND_STAGE_NOISE_K = 6.0


@dataclass(frozen=True)
class CouplingNetwork:
    """Signal-source coupling: cell capacitance, cable parasitics, load."""

    c_cell: float = 1e-12        # F
    c_parasitic: float = 10e-12  # F
    r_input: float = 50.0        # ohm

    def __post_init__(self):
        if self.c_cell <= 0 or self.c_parasitic <= 0 or self.r_input <= 0:
            raise ValueError("coupling network values must be positive")


@dataclass(frozen=True)
class StageResponse:
    gain_factor: float
    poles: tuple[float, ...] = ()
    zeros: tuple[float, ...] = ()
    hp_corners: tuple[float, ...] = ()
    noise_temperature: float = 0.0        # K, input-referred
    input_noise_density: float | None = None   # V/sqrt(Hz), optional alternative

    def __post_init__(self):
        for f in (*self.poles, *self.zeros, *self.hp_corners):
            if f <= 0:
                raise ValueError("corner frequencies must be positive")

    def evaluate(self, f):
        """Complex response at frequency/frequencies ``f`` (Hz)."""
        f = np.asarray(f, dtype=float)
        h = np.full(f.shape, self.gain_factor, dtype=complex)
        for fz in self.zeros:
            h = h * (1.0 + 1j * f / fz)
        for fp in self.poles:
            h = h / (1.0 + 1j * f / fp)
        for fc in self.hp_corners:
            x = 1j * f / fc
            h = h * x / (1.0 + x)
        return h if h.shape else complex(h)


@dataclass(frozen=True)
class ChainResponse:
    stages: tuple[StageResponse, ...]

    def __post_init__(self):
        if not self.stages:
            raise ValueError("cascade needs at least one stage")

    def evaluate(self, f):
        h = self.stages[0].evaluate(f)
        for s in self.stages[1:]:
            h = h * s.evaluate(f)
        return h

    def total_noise_temperature(self, f_ref: float = DEFAULT_REFERENCE_FREQUENCY):
        """Friis accumulation of stage noise temperatures at ``f_ref``."""
        t_total = 0.0
        g_run = 1.0
        for k, s in enumerate(self.stages):
            t_total += s.noise_temperature / g_run
            g = abs(s.evaluate(f_ref)) ** 2
            if g == 0.0 and k < len(self.stages) - 1:
                raise ValueError(
                    f"stage {k} has zero gain at {f_ref:g} Hz; "
                    "noise accumulation undefined")
            g_run *= g
        return t_total


def corner_frequency(net: CouplingNetwork) -> float:
    """RC corner 1/(2*pi*R*C_p) of the cable/load network."""
    return 1.0 / (2.0 * math.pi * net.r_input * net.c_parasitic)


def capacitive_division(delta_q: float, net: CouplingNetwork) -> float:
    """Source voltage V_ac = delta_q / (C_0 + C_p)."""
    if delta_q < 0:
        raise ValueError("delta_q must be non-negative")
    return delta_q / (net.c_cell + net.c_parasitic)


def _hbt_corners(ss: SmallSignalParams, net: BiasNetwork, load_resistance,
                 source_resistance):
    """Corner frequencies of the common-emitter stage, Hz."""
    beta = ss.g_m * ss.r_pi
    r_bias = net.thevenin_resistance
    # input coupling: C_in against source + (bias divider || base input);
    # the emitter is bypassed above f_p3, so the base input is just r_pi
    r_in = 1.0 / (1.0 / r_bias + 1.0 / ss.r_pi)
    f_c1 = 1.0 / (2.0 * math.pi * net.c_in * (source_resistance + r_in))
    # output coupling: C_out against collector resistor + load
    f_c2 = 1.0 / (2.0 * math.pi * net.c_out * (net.r_collector + load_resistance))
    # emitter bypass shelf: zero where C_bypass shorts R_emitter, pole set by
    # the resistance seen from the emitter node
    f_z3 = 1.0 / (2.0 * math.pi * net.c_bypass * net.r_emitter)
    r_src_base = 1.0 / (1.0 / r_bias + 1.0 / source_resistance) \
        if source_resistance > 0 else 0.0
    r_emitter_side = (ss.r_pi + r_src_base) / (beta + 1.0)
    r_seen = 1.0 / (1.0 / net.r_emitter + 1.0 / r_emitter_side)
    f_p3 = 1.0 / (2.0 * math.pi * net.c_bypass * r_seen)
    return f_c1, f_c2, f_z3, f_p3


def hbt_stage_response(ss: SmallSignalParams, net: BiasNetwork,
                       load_resistance: float,
                       source_resistance: float = 50.0,
                       noise_temperature: float = 2.0) -> StageResponse:
    """Common-emitter stage response.

    Mid-band gain is -g_m*(R_c || r_o || R_load) with the emitter resistor
    fully bypassed; below the bypass shelf the gain drops to the degenerated
    value, and the two coupling capacitors add high-pass corners.
    """
    if load_resistance <= 0:
        raise ValueError("load resistance must be positive")
    r_par = 1.0 / (1.0 / net.r_collector + 1.0 / ss.r_o + 1.0 / load_resistance)
    a_mid = ss.g_m * r_par
    f_c1, f_c2, f_z3, f_p3 = _hbt_corners(ss, net, load_resistance,
                                          source_resistance)
    # gain_factor is low-frequency referenced; the f_z3/f_p3 shelf raises it
    # to the fully bypassed value a_mid at mid-band
    return StageResponse(
        gain_factor=-a_mid * f_z3 / f_p3,
        zeros=(f_z3,),
        poles=(f_p3,),
        hp_corners=(f_c1, f_c2),
        noise_temperature=noise_temperature,
    )


def unity_gain_load(ss: SmallSignalParams, net: BiasNetwork,
                    source_resistance: float = 50.0,
                    f_ref: float = DEFAULT_REFERENCE_FREQUENCY) -> float:
    """Load resistance for which the stage reaches unity gain at ``f_ref``.

    Fixed-point iteration: the output coupling corner depends weakly on the
    load, so a few passes suffice.
    """
    r_load = 1.0 / ss.g_m
    for _ in range(40):
        stage = hbt_stage_response(ss, net, r_load, source_resistance)
        h = abs(stage.evaluate(f_ref))
        # |H| scales with R_c||r_o||R_load; invert that relation for R_load
        r_par = 1.0 / (1.0 / net.r_collector + 1.0 / ss.r_o + 1.0 / r_load)
        r_par_target = r_par / h
        inv = 1.0 / r_par_target - 1.0 / net.r_collector - 1.0 / ss.r_o
        if inv <= 0:
            raise ValueError("unity gain unreachable: stage too weak at f_ref")
        r_new = 1.0 / inv
        if abs(r_new - r_load) <= 1e-12 * r_load:
            r_load = r_new
            break
        r_load = r_new
    return r_load


def fixed_gain_stage(gain_db: float, f_low: float, f_high: float,
                     noise_temperature: float = 0.0) -> StageResponse:
    """Band-limited fixed-gain block: one high-pass corner at ``f_low``, one
    low-pass pole at ``f_high``, mid-band gain 10^(gain_db/20)."""
    if not f_low < f_high:
        raise ValueError("need f_low < f_high")
    return StageResponse(
        gain_factor=10.0 ** (gain_db / 20.0),
        poles=(f_high,),
        hp_corners=(f_low,),
        noise_temperature=noise_temperature,
    )


def cascade(stages) -> ChainResponse:
    return ChainResponse(stages=tuple(stages))


def s21_db(chain: ChainResponse, frequencies):
    """Voltage-ratio transmission in dB at each frequency."""
    frequencies = np.asarray(frequencies, dtype=float)
    if np.any(frequencies <= 0):
        raise ValueError("frequencies must be positive")
    mag = np.abs(chain.evaluate(frequencies))
    db = 20.0 * np.log10(mag)
    return list(zip(frequencies.tolist(), db.tolist()))


def default_chain(stage: str = "both",
                  second_stage_gain_db: float = 40.0,
                  second_stage_f_low: float = SECOND_STAGE_F_LOW,
                  second_stage_f_high: float = 1.5e9,
                  source_resistance: float = 50.0) -> ChainResponse:
    """Default amplifier chain: unity-gain HBT first stage plus a 40 dB
    band-limited second stage.

    ``stage`` selects "first" (HBT only) or "both".  The second-stage low
    corner defaults to 40 kHz so the cascade stays within 1 dB of flat down
    to 100 kHz.
    """
    from . import device

    net = device.default_network()
    params = device.default_transistor(net)
    op = device.solve_operating_point(net, params)
    ss = device.small_signal(op, params)
    r_load = unity_gain_load(ss, net, source_resistance)
    first = hbt_stage_response(ss, net, r_load, source_resistance,
                               noise_temperature=FIRST_STAGE_NOISE_K)
    if stage == "first":
        return cascade([first])
    if stage != "both":
        raise ValueError("stage must be 'first' or 'both'")
    second = fixed_gain_stage(second_stage_gain_db, second_stage_f_low,
                              second_stage_f_high,
                              noise_temperature=SECOND_STAGE_NOISE_K)
    return cascade([first, second])


def snr_db(signal_rms: float, input_noise_density: float, bandwidth: float) -> float:
    """SNR of an RMS signal against white noise of the given density over
    the given bandwidth."""
    if signal_rms <= 0 or input_noise_density <= 0 or bandwidth <= 0:
        raise ValueError("all arguments must be positive")
    return 20.0 * math.log10(signal_rms / (input_noise_density * math.sqrt(bandwidth)))
