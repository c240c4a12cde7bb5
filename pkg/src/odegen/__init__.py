"""odegen: continuous-time motion dynamics and two-stage video generation.

Everything runs on a self-contained float64 reverse-mode autodiff core; no
deep-learning framework is involved.
"""

__version__ = "0.1.0"
