"""Blind (self-calibrating) low-rank quantum state tomography.

Recovers a sparse calibration vector and a low-rank density matrix jointly
from linear measurement data, via sparse de-mixing hard thresholding (SDT)
or constrained alternating least squares (ALS-BT), plus the measurement
simulators and benchmark harness around them.
"""

__version__ = "0.1.0"
