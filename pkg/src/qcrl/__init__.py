"""Robust quantum control pulses: susceptibilities, exact gradients and level-set traversal."""
from .dynamics import ControlTerm, NoiseTerm, SystemModel, propagate
from .errors import (BranchAmbiguity, ContractViolation, DimensionMismatch, IrregularPoint, MaxItersExceeded,
                     NoDescent, OutOfRange, QCRLError, StepToleranceExceeded, TraversalAborted, Unsupported)
from .levelset import ConstraintSet, TraversalConfig, gov_step, optimize_beginning, ripv_run
from .models import build_preset, build_single_qubit, build_two_qubit_xy

__version__ = "0.1.0"
