"""Desk-scale probabilistic maturity detection.

A small, fully deterministic stack: exact Beta-distribution math, a
maturity-aware Hungarian matcher, a varifocal/L1/GIoU/Beta-NLL composite
loss, a minimal reverse-mode autograd engine, a toy query-based detector,
a synthetic scene generator, and a detection/calibration evaluation kit.
"""

__version__ = "0.1.0"
