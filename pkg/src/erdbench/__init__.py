"""ERD detection toolkit: standard band-power ERD% and streaming energy-ratio
detection for sensorimotor EEG, with a synthetic EEG source for verification."""

__version__ = "0.1.0"
