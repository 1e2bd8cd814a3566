"""Latency-optimal placement of CNN layers on networked compute units."""

from .errors import (BudgetExceeded, DisconnectedTopology, GenerationExhausted, IncompleteAssignment,
                     Infeasible, MissingDeviceClass, NoPlacementFound, PlacementError, ProfileError,
                     UnknownFixture, UnknownProfile, UnreachableHop, UnsupportedFormat, ValidationError)
from .latency import (EvalConventions, LatencyBreakdown, PAPER_COMPAT, Placement, check_feasibility,
                      evaluate, transmission_time)
from .model import (CnnSpec, DeviceClass, GateProfile, LayerSpec, PlacementProblem, SharingGroup,
                    derive_exit_probabilities, validate_problem)
from .topology import Topology, Vertex
from .linearize import IlpModel, linearize
from .solver import Solution, SolverConfig, solve
from .fixtures import builtin_fixture, fixture_names

__version__ = "0.1.0"
