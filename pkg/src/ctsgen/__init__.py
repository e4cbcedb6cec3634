"""Constrained time-series generation toolkit.

Generators (sliding-window constrained optimization, denoising-diffusion
variants with trend/fixed-point conditioning, penalty training and
training-free gradient guidance), a declarative constraint model, and the
evaluation metrics used to score generated series.
"""

__version__ = "0.1.0"
