"""Time-domain synthesis through the amplifier chain and software lock-in.

The synthesized record is the source waveform filtered by the chain's
frequency response (applied via FFT) plus additive white Gaussian noise of
the configured input-referred density, filtered by the same response.
Demodulation mixes with unit-RMS sine/cosine references at the modulation
frequency and low-passes with a cascade of identical single-pole IIR
sections, reading the final settled value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .chain import ChainResponse, CouplingNetwork
from .source import (CellGeometry, DriveWaveform, EnsembleParams,
                     image_charge_waveform, rydberg_population,
                     stark_excitation_fraction)

__all__ = [
    "SynthesisConfig",
    "LockInResult",
    "synthesize",
    "demodulate",
    "sweep_vbc",
    "sweep_fm",
]

MIN_SAMPLES_PER_PERIOD = 16
MIN_PERIODS = 200
MIN_TIME_CONSTANTS = 20.0


@dataclass(frozen=True)
class SynthesisConfig:
    """Per-run synthesis/demodulation settings.

    ``sample_rate`` and ``duration`` of None mean per-point auto-scaling:
    16 samples per modulation period and max(20 time constants, 200
    periods).
    """

    sample_rate: float | None = None
    duration: float | None = None
    noise_seed: int = 0
    input_noise_density: float = 35e-12   # V/sqrt(Hz), referred to chain input
    time_constant: float = 1e-3           # lock-in time constant, s
    filter_order: int = 4

    def __post_init__(self):
        if self.time_constant <= 0:
            raise ValueError("time_constant must be positive")
        if self.filter_order < 1:
            raise ValueError("filter_order must be >= 1")
        if self.input_noise_density < 0:
            raise ValueError("input_noise_density must be non-negative")


@dataclass(frozen=True)
class LockInResult:
    amplitude_r: float    # RMS convention
    phase: float          # radians, in (-pi, pi]
    f_ref: float
    time_constant: float


def _resolve_sampling(cfg: SynthesisConfig, f_m: float):
    """Samples per period and period count for one sweep point."""
    if cfg.sample_rate is None:
        spp = MIN_SAMPLES_PER_PERIOD
    else:
        spp = int(round(cfg.sample_rate / f_m))
        if spp < 10:
            raise ValueError(
                f"sample rate {cfg.sample_rate:g} cannot resolve f_m={f_m:g}")
    if cfg.duration is None:
        n_per = max(int(math.ceil(MIN_TIME_CONSTANTS * cfg.time_constant * f_m)),
                    MIN_PERIODS)
    else:
        n_per = int(math.ceil(cfg.duration * f_m))
        if n_per / f_m < MIN_TIME_CONSTANTS * cfg.time_constant:
            raise ValueError("duration shorter than 20 lock-in time constants")
    return spp, n_per


def synthesize(v_source, chain: ChainResponse | None, cfg: SynthesisConfig,
               sample_rate: float | None = None, rng=None):
    """Filter a sampled source voltage through the chain and add noise.

    ``sample_rate`` overrides cfg.sample_rate (used by the auto-scaling
    sweeps).  Deterministic for a fixed seed/rng.
    """
    v_source = np.asarray(v_source, dtype=float)
    fs = sample_rate if sample_rate is not None else cfg.sample_rate
    if fs is None:
        raise ValueError("sample rate not resolved")
    n = v_source.size
    spectrum = np.fft.rfft(v_source)
    if chain is not None:
        h = chain.evaluate(np.fft.rfftfreq(n, 1.0 / fs))
        spectrum = spectrum * h
    out = np.fft.irfft(spectrum, n)
    if cfg.input_noise_density > 0:
        if rng is None:
            rng = np.random.default_rng(cfg.noise_seed)
        sigma = cfg.input_noise_density * math.sqrt(fs / 2.0)
        noise = rng.normal(0.0, sigma, n)
        if chain is not None:
            noise = np.fft.irfft(np.fft.rfft(noise) * h, n)
        out = out + noise
    return out


def demodulate(x, f_ref: float, time_constant: float, filter_order: int = 4,
               sample_rate: float | None = None) -> LockInResult:
    """Lock-in demodulation of a sampled record.

    Quadrature mixing with unit-RMS references followed by ``filter_order``
    cascaded single-pole low-pass sections; the settled final value gives
    R = sqrt(X^2 + Y^2) (RMS convention) and the phase relative to a sine
    reference.
    """
    x = np.asarray(x, dtype=float)
    if sample_rate is None:
        raise ValueError("sample_rate is required")
    if sample_rate < 10.0 * f_ref:
        raise ValueError(f"f_ref={f_ref:g} unresolvable at fs={sample_rate:g}")
    if x.size / sample_rate < MIN_TIME_CONSTANTS * time_constant:
        raise ValueError("record shorter than 20 time constants")
    t = np.arange(x.size) / sample_rate
    w = 2.0 * math.pi * f_ref
    xi = x * (math.sqrt(2.0) * np.sin(w * t))
    xq = x * (math.sqrt(2.0) * np.cos(w * t))
    a = math.exp(-1.0 / (sample_rate * time_constant))
    b_coef, a_coef = [1.0 - a], [1.0, -a]
    for _ in range(filter_order):
        xi = lfilter(b_coef, a_coef, xi)
        xq = lfilter(b_coef, a_coef, xq)
    x_f, y_f = xi[-1], xq[-1]
    phase = math.atan2(y_f, x_f)
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    return LockInResult(amplitude_r=float(math.hypot(x_f, y_f)), phase=phase,
                        f_ref=f_ref, time_constant=time_constant)


def _run_point(index, f_m, duty, excitation_rate, scale, ens, geom, coupling,
               chain, cfg):
    """Full pipeline for one sweep point; RNG stream keyed by (seed, index)."""
    drive = DriveWaveform(f_m=f_m, duty=duty, excitation_rate=excitation_rate)
    spp, n_per = _resolve_sampling(cfg, f_m)
    fs = spp * f_m
    _, rho = rydberg_population(drive, ens, excitation_scale=scale,
                                n_periods=n_per, samples_per_period=spp)
    _, v_ac = image_charge_waveform(rho, geom, ens.n_s, coupling.c_parasitic)
    rng = np.random.default_rng((cfg.noise_seed, index))
    v_out = synthesize(v_ac, chain, cfg, sample_rate=fs, rng=rng)
    return demodulate(v_out, f_m, cfg.time_constant, cfg.filter_order,
                      sample_rate=fs)


def sweep_vbc(v_bc_grid, drive: DriveWaveform, ens: EnsembleParams,
              geom: CellGeometry, coupling: CouplingNetwork,
              chain: ChainResponse | None, cfg: SynthesisConfig):
    """Resonance sweep: lock-in amplitude versus bottom-plate voltage."""
    v_bc_grid = list(v_bc_grid)
    if any(b < a for a, b in zip(v_bc_grid, v_bc_grid[1:])):
        raise ValueError("v_bc grid must be sorted ascending")
    out = []
    for k, v_bc in enumerate(v_bc_grid):
        scale = stark_excitation_fraction(v_bc, ens)
        res = _run_point(k, drive.f_m, drive.duty, drive.excitation_rate,
                         scale, ens, geom, coupling, chain, cfg)
        out.append((v_bc, res))
    return out


def sweep_fm(f_m_grid, ens: EnsembleParams, geom: CellGeometry,
             coupling: CouplingNetwork, chain: ChainResponse | None,
             cfg: SynthesisConfig, duty: float = 0.5,
             excitation_rate: float | None = None,
             v_bc: float | None = None):
    """Modulation-frequency sweep at fixed bottom-plate voltage (default:
    on resonance)."""
    f_m_grid = list(f_m_grid)
    if any(b < a for a, b in zip(f_m_grid, f_m_grid[1:])):
        raise ValueError("f_m grid must be sorted ascending")
    scale = 1.0 if v_bc is None else stark_excitation_fraction(v_bc, ens)
    out = []
    for k, f_m in enumerate(f_m_grid):
        res = _run_point(k, f_m, duty, excitation_rate, scale, ens, geom,
                         coupling, chain, cfg)
        out.append((f_m, res))
    return out
