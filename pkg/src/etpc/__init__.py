"""Event-triggered parameterized control of disturbed discrete-time linear systems."""

from .basis import BasisSet, monomial_basis, tabulated_basis
from .plant import DisturbanceSource, SystemModel
from .horizon import HorizonData, QcqpProblem, assemble_qcqp, compute_horizon
from .qcqp import SolveReport, solve
from .feasibility import Certificate, build_certificate
from .trigger import TriggerConfig
from .controllers import ClfController, EmulationController, ZohController, make_controller
from .sim import SimTrace, IetStats, run_closed_loop, iet_stats, guub_report

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "monomial_basis",
    "tabulated_basis",
    "DisturbanceSource",
    "SystemModel",
    "HorizonData",
    "QcqpProblem",
    "assemble_qcqp",
    "compute_horizon",
    "SolveReport",
    "solve",
    "Certificate",
    "build_certificate",
    "TriggerConfig",
    "ClfController",
    "EmulationController",
    "ZohController",
    "make_controller",
    "SimTrace",
    "IetStats",
    "run_closed_loop",
    "iet_stats",
    "guub_report",
]
