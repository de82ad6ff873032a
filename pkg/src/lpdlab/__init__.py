"""lpdlab: LP decoding of LDPC codes, success certificates, and exponent thresholds."""

__version__ = "0.1.0"
