"""Extremal flows and the Moser homotopy."""

from .extremals import ExtremalTrajectory, FlowConfig, extremal_flow, extremal_rhs, zermelo_closed_flow
from .integrate import IntegratorStats, OdeSolution, StepSizeUnderflow, StopIntegration, dopri5, rk4
from .moser import (
    GeneratedSystem,
    MoserFamily,
    TransportBlowUp,
    TransportConfig,
    generate_commuting_system,
    moser_field,
    moser_transport,
)

__all__ = [
    "ExtremalTrajectory", "FlowConfig", "GeneratedSystem", "IntegratorStats", "MoserFamily", "OdeSolution",
    "StepSizeUnderflow", "StopIntegration", "TransportBlowUp", "TransportConfig", "dopri5", "extremal_flow",
    "extremal_rhs", "generate_commuting_system", "moser_field", "moser_transport", "rk4", "zermelo_closed_flow",
]
