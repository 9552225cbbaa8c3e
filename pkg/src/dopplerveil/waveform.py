"""OFDM baseband transmit chain: QAM mapping, known-symbol table, IDFT, framing.

The IDFT uses 1/sqrt(N) scaling so the modulate/demodulate pair is unitary and
Parseval holds exactly between the subcarrier grid and the CP-stripped time
samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Per-cell kind codes for SymbolGrid.kinds
KIND_NULL = 0
KIND_DATA = 1
KIND_PILOT = 2
KIND_PREAMBLE = 3

# Seed of the fixed QPSK known-symbol table used for the preamble and pilots.
# Any fixed table works for CSI estimation; this constant pins ours.
KNOWN_TABLE_SEED = 0x0211_5EED

PREAMBLE_SYMBOLS = 7


@dataclass
class SymbolGrid:
    """Complex QAM values indexed (subcarrier bin k: 0..N-1, OFDM symbol m)."""
    values: np.ndarray  # complex, shape (N, M)
    kinds: np.ndarray  # uint8, shape (N, M)

    @property
    def n_subcarriers(self) -> int:
        return self.values.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.values.shape[1]


@dataclass
class BasebandSignal:
    samples: np.ndarray  # complex
    sample_rate_hz: float
    t0: float = 0.0

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.sample_rate_hz


def _axis_levels(order: int) -> np.ndarray:
    """Per-axis PAM levels in Gray-coded bit order, descending from +(L-1)."""
    side = int(round(np.sqrt(order)))
    idx = np.arange(side)
    gray = idx ^ (idx >> 1)
    levels = np.empty(side)
    levels[gray] = (side - 1) - 2 * idx
    return levels


def qam_energy(order: int) -> float:
    side = int(round(np.sqrt(order)))
    return 2.0 * (side * side - 1) / 3.0


def qam_map(bits: np.ndarray, order: int) -> np.ndarray:
    """Gray-mapped square QAM with unit average symbol energy.

    QPSK corner convention: bits 00 -> (1+1j)/sqrt(2).
    """
    if order not in (4, 16, 64):
        raise ValueError(f"unsupported QAM order {order}")
    bits = np.asarray(bits, dtype=np.int64).ravel()
    b = int(np.log2(order))
    if len(bits) % b:
        raise ValueError(f"bit count {len(bits)} not divisible by {b}")
    half = b // 2
    words = bits.reshape(-1, b)
    weights = 1 << np.arange(half - 1, -1, -1)
    i_idx = words[:, :half] @ weights
    q_idx = words[:, half:] @ weights
    levels = _axis_levels(order)
    scale = 1.0 / np.sqrt(qam_energy(order))
    return (levels[i_idx] + 1j * levels[q_idx]) * scale


def constellation(order: int) -> np.ndarray:
    """All constellation points indexed by their bit word (MSB-first)."""
    b = int(np.log2(order))
    words = np.array([[(w >> (b - 1 - i)) & 1 for i in range(b)]
                      for w in range(order)])
    return qam_map(words.ravel(), order)


def known_symbol_table(n_subcarriers: int, used_bins: np.ndarray) -> np.ndarray:
    """Fixed pseudo-random QPSK values on the used bins, zero elsewhere."""
    rng = np.random.default_rng(KNOWN_TABLE_SEED)
    table = np.zeros(n_subcarriers, dtype=complex)
    signs = rng.integers(0, 2, size=(len(used_bins), 2)) * 2 - 1
    table[used_bins] = (signs[:, 0] + 1j * signs[:, 1]) / np.sqrt(2.0)
    return table


def build_preamble_grid(n_subcarriers: int, used_bins: np.ndarray) -> SymbolGrid:
    """Seven identical known QPSK symbols on all used subcarriers."""
    table = known_symbol_table(n_subcarriers, used_bins)
    values = np.tile(table[:, None], (1, PREAMBLE_SYMBOLS))
    kinds = np.zeros_like(values, dtype=np.uint8)
    kinds[used_bins, :] = KIND_PREAMBLE
    return SymbolGrid(values=values, kinds=kinds)


def ofdm_modulate(grid: SymbolGrid, cp_len: int,
                  sample_rate_hz: float, t0: float = 0.0) -> BasebandSignal:
    """IDFT each grid column with 1/sqrt(N) scaling and prepend the cyclic prefix."""
    if grid.n_symbols < 1:
        raise ValueError("grid needs at least one symbol column")
    n = grid.n_subcarriers
    body = np.fft.ifft(grid.values, axis=0) * np.sqrt(n)
    if cp_len:
        sym = np.concatenate([body[-cp_len:, :], body], axis=0)
    else:
        sym = body
    samples = sym.T.reshape(-1)
    return BasebandSignal(samples=samples, sample_rate_hz=sample_rate_hz, t0=t0)


def frame_stream(cfg, derived, payload_bits=None, known_symbol_mode: bool = False,
                 n_symbols: int | None = None, t0: float = 0.0):
    """Build one frame (preamble + data) or a continuous known-symbol stream.

    Known-symbol mode repeats the preamble table in every column so the passive
    receiver can match-filter each OFDM symbol; payload mode yields the 7-symbol
    preamble followed by QAM data columns with pilots from the known table.
    Returns (SymbolGrid, BasebandSignal).
    """
    n = cfg.n_subcarriers
    table = known_symbol_table(n, derived.used_bins)
    if known_symbol_mode:
        m = n_symbols if n_symbols is not None else derived.n_symbols
        values = np.tile(table[:, None], (1, m))
        kinds = np.zeros((n, m), dtype=np.uint8)
        kinds[derived.used_bins, :] = KIND_PREAMBLE
    else:
        if payload_bits is None:
            raise ValueError("payload mode needs payload_bits")
        bits = np.asarray(payload_bits, dtype=np.int64).ravel()
        bps = int(np.log2(cfg.qam_order))
        per_sym = len(derived.data_bins) * bps
        if len(bits) < per_sym:
            raise ValueError("payload shorter than one OFDM symbol")
        n_data_sym = len(bits) // per_sym
        bits = bits[: n_data_sym * per_sym]
        syms = qam_map(bits, cfg.qam_order).reshape(n_data_sym, -1).T
        m = PREAMBLE_SYMBOLS + n_data_sym
        values = np.zeros((n, m), dtype=complex)
        kinds = np.zeros((n, m), dtype=np.uint8)
        values[:, :PREAMBLE_SYMBOLS] = table[:, None]
        kinds[derived.used_bins, :PREAMBLE_SYMBOLS] = KIND_PREAMBLE
        values[derived.data_bins, PREAMBLE_SYMBOLS:] = syms
        kinds[derived.data_bins, PREAMBLE_SYMBOLS:] = KIND_DATA
        values[derived.pilot_bins, PREAMBLE_SYMBOLS:] = \
            table[derived.pilot_bins][:, None]
        kinds[derived.pilot_bins, PREAMBLE_SYMBOLS:] = KIND_PILOT
    grid = SymbolGrid(values=values, kinds=kinds)
    sig = ofdm_modulate(grid, cfg.cp_len, derived.sample_rate_hz, t0=t0)
    return grid, sig


def symbol_midtimes(n_symbols: int, t_sym_s: float, t0: float = 0.0) -> np.ndarray:
    return t0 + (np.arange(n_symbols) + 0.5) * t_sym_s


def dump_iq(sig: BasebandSignal, path) -> None:
    """Interleaved little-endian float32 I/Q, with a sidecar header text file."""
    path = str(path)
    inter = np.empty(2 * len(sig.samples), dtype="<f4")
    inter[0::2] = sig.samples.real
    inter[1::2] = sig.samples.imag
    inter.tofile(path)
    with open(path + ".txt", "w", encoding="utf-8") as fh:
        fh.write("format = interleaved little-endian float32 I/Q\n")
        fh.write(f"sample_rate_hz = {sig.sample_rate_hz:.9e}\n")
        fh.write(f"n_samples = {len(sig.samples)}\n")
        fh.write(f"t0_s = {sig.t0:.9e}\n")
