"""Core Engine Package"""
from .values import Value, WeightBasis
from .model import LocalModel, TransformRecord
from .foliation import LogVectorField
from .timeline import Timeline, Verdict
from .driver import Problem, Trace, check, fuzz, load_problem, parse_problem, run
