"""DFT-s-OFDM link simulation with oscillator phase noise and PTRS-based phase tracking."""

__version__ = "0.1.0"
