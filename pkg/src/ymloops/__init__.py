"""Finite-N U(N) lattice Yang-Mills Wilson loops: character state sums,
Weingarten surface sums, local channel models and master loop checks."""

__version__ = "0.1.0"

from .state_sum import ActionSpec, RefusalError  # noqa: E402,F401
