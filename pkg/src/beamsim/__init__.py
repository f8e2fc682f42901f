"""Q-learning beam tracking and digital weight optimization for mmWave multi-UAV links."""

__version__ = "0.1.0"
