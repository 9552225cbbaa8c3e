"""OFDM micro-Doppler privacy simulator.

Simulates a walking human illuminated by an 802.11-style OFDM transmitter,
the CSI-based passive receiver that extracts the micro-Doppler spectrogram,
and two transmit-side defenses: FM smearing and per-subcarrier path-length
spoofing.
"""

from dopplerveil.scenario import ScenarioConfig, load_scenario, derive_streams

__all__ = ["ScenarioConfig", "load_scenario", "derive_streams"]
__version__ = "0.1.0"
