"""Receiver processing: OFDM demodulation, CSI estimation, equalization, BER/EVM.

The passive attack path uses the raw matched-filter CFR estimate
H_hat[k,m] = X*[k] Y[k,m] / |X[k]|^2 (no pilot correction needed to form the
power series); the intended-receiver path adds pilot-based common-phase
tracking and zero-forcing equalization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dopplerveil.waveform import (BasebandSignal, SymbolGrid, KIND_DATA,
                                  _axis_levels, qam_energy)


@dataclass
class CfrSeries:
    """Per-subcarrier complex CFR and power at uniformly spaced symbol instants."""
    subcarriers: np.ndarray  # signed k, one per row
    h_hat: np.ndarray  # complex, shape (K, M)
    power: np.ndarray  # |h_hat|^2
    t_s: np.ndarray  # timestamps, strictly increasing, uniform
    csi_rate_hz: float


def ofdm_demodulate(sig: BasebandSignal, n_subcarriers: int,
                    cp_len: int) -> SymbolGrid:
    """Strip the CP per symbol and forward-DFT with 1/sqrt(N) scaling."""
    n = n_subcarriers
    sym_len = n + cp_len
    if len(sig.samples) % sym_len:
        raise ValueError("sample count not divisible by the symbol length")
    blocks = sig.samples.reshape(-1, sym_len)[:, cp_len:]
    values = (np.fft.fft(blocks, axis=1) / np.sqrt(n)).T
    kinds = np.full(values.shape, KIND_DATA, dtype=np.uint8)
    return SymbolGrid(values=values, kinds=kinds)


def estimate_cfr(y: SymbolGrid, x_known: np.ndarray, used_bins: np.ndarray,
                 used_k: np.ndarray, decimation: int,
                 t0: float, t_sym_s: float) -> CfrSeries:
    """Matched-filter CFR estimate X* Y / |X|^2, decimated to the CSI rate."""
    x_used = x_known[used_bins]
    if np.any(np.abs(x_used) == 0):
        raise ValueError("known symbol is zero on a used subcarrier")
    cols = np.arange(0, y.n_symbols, decimation)
    y_used = y.values[used_bins][:, cols]
    h_hat = np.conj(x_used)[:, None] * y_used / (np.abs(x_used) ** 2)[:, None]
    t_s = t0 + (cols + 0.5) * t_sym_s
    return CfrSeries(
        subcarriers=np.asarray(used_k),
        h_hat=h_hat,
        power=np.abs(h_hat) ** 2,
        t_s=t_s,
        csi_rate_hz=1.0 / (decimation * t_sym_s),
    )


def pilot_phase_correct(y_values: np.ndarray, pilot_bins: np.ndarray,
                        pilot_ref: np.ndarray,
                        h_ref: np.ndarray | None = None):
    """Remove the per-symbol common phase estimated from the pilots.

    pilot_ref holds the known pilot values (per bin); h_ref, when given, is the
    channel estimate used to reference the pilots (per bin).  Returns the
    corrected grid values and the removed phase per symbol.
    """
    expected = pilot_ref if h_ref is None else pilot_ref * h_ref[pilot_bins]
    inner = np.sum(y_values[pilot_bins, :] * np.conj(expected)[:, None], axis=0)
    if np.all(inner == 0):
        raise ValueError("all pilots are zero; cannot track phase")
    theta = np.angle(inner)
    return y_values * np.exp(-1j * theta)[None, :], theta


def equalize_demap(y_values: np.ndarray, h_ref: np.ndarray,
                   data_bins: np.ndarray, order: int):
    """Zero-forcing equalization and Gray demapping on the data subcarriers.

    Returns (bits, equalized data symbols in transmit order).
    """
    if np.any(np.abs(h_ref[data_bins]) == 0):
        raise ValueError("zero channel estimate on a data subcarrier")
    eq = y_values[data_bins, :] / h_ref[data_bins][:, None]
    syms = eq.T.reshape(-1)  # symbol-major, matching frame_stream bit order
    return demap(syms, order), syms


def demap(symbols: np.ndarray, order: int) -> np.ndarray:
    """Minimum-distance Gray demapping (per-axis slicing)."""
    side = int(round(np.sqrt(order)))
    half = int(np.log2(side))
    scale = np.sqrt(qam_energy(order))
    levels = _axis_levels(order)
    order_by_level = np.argsort(levels)  # gray words sorted by ascending level

    def axis_bits(vals):
        lev_idx = np.clip(np.round((vals * scale + (side - 1)) / 2.0),
                          0, side - 1).astype(np.int64)
        words = order_by_level[lev_idx]
        return ((words[:, None] >> np.arange(half - 1, -1, -1)) & 1)

    i_bits = axis_bits(symbols.real)
    q_bits = axis_bits(symbols.imag)
    return np.concatenate([i_bits, q_bits], axis=1).reshape(-1)


def ber(bits: np.ndarray, ref_bits: np.ndarray) -> float:
    """Hamming distance / length."""
    bits = np.asarray(bits).ravel()
    ref_bits = np.asarray(ref_bits).ravel()
    if len(bits) != len(ref_bits):
        raise ValueError("bit sequences must have equal length")
    return float(np.mean(bits != ref_bits))


def evm_rms(eq_symbols: np.ndarray, tx_symbols: np.ndarray) -> float:
    """RMS error vector magnitude relative to RMS ideal power, as a fraction."""
    err = np.mean(np.abs(eq_symbols - tx_symbols) ** 2)
    ref = np.mean(np.abs(tx_symbols) ** 2)
    return float(np.sqrt(err / ref))


def dump_cfr_csv(series: CfrSeries, path) -> None:
    """CSV dump (t, k, re, im, power)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t_s,k,re,im,power\n")
        for j, t in enumerate(series.t_s):
            for i, k in enumerate(series.subcarriers):
                h = series.h_hat[i, j]
                fh.write(f"{t:.9e},{int(k)},{h.real:.9e},{h.imag:.9e},"
                         f"{series.power[i, j]:.9e}\n")


def dump_cfr_bin(series: CfrSeries, path) -> None:
    """Compact binary dump: one ASCII header line, then row-major float32 data.

    Header fields: K (subcarrier rows), M (time columns), dtype, layout, the
    CSI rate, start time, and the signed subcarrier list.  Data is K x M
    complex values stored as interleaved re,im float32, row-major.
    """
    k, m = series.h_hat.shape
    ks = " ".join(str(int(v)) for v in series.subcarriers)
    header = (f"CFRBIN1 k={k} m={m} dtype=f32 layout=row-major fields=re,im "
              f"rate_hz={series.csi_rate_hz:.9e} t0_s={series.t_s[0]:.9e} "
              f"subcarriers={ks}\n")
    inter = np.empty((k, m, 2), dtype="<f4")
    inter[:, :, 0] = series.h_hat.real
    inter[:, :, 1] = series.h_hat.imag
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(inter.tobytes())
