"""Impedance-matched spin-echo memory: an inhomogeneous spin ensemble in a single-ended cavity.

Modules:
    model      parameters, unit conventions, cooperativity and regime classification
    analytic   closed-form reflection, impedance matching, efficiencies, dip widths
    noise      collective and spontaneous noise budget, cavity design numbers
    dynamics   time-domain input-output simulation with pi pulses
    protocol   storage/retrieval runs, sweeps and suppression scans
    cli        command-line front end (``spinmem``)
"""

__version__ = "0.1.0"

from .model import (C_LIGHT, CavityParams, DistKind, EnsembleParams, FrequencyConvention, Geometry, Regime,
                    ValidationError, classify_regime, cooperativity, derive)
from .analytic import (absorption_efficiency, impedance_match_kappa, reflection, reflection_amplitude,
                       steady_state_oracle, strong_coupling_match, total_efficiency, weak_coupling_match)
from .dynamics import GaussianPulse, discretize, energy_ledger, evolve
from .protocol import (ProtocolConfig, echo_group_delay, reference_config, run_protocol, suppression_scan,
                       sweep_efficiency)

__all__ = [
    "C_LIGHT", "CavityParams", "DistKind", "EnsembleParams", "FrequencyConvention", "Geometry", "Regime",
    "ValidationError", "classify_regime", "cooperativity", "derive", "absorption_efficiency",
    "impedance_match_kappa", "reflection", "reflection_amplitude", "steady_state_oracle", "strong_coupling_match",
    "total_efficiency", "weak_coupling_match", "GaussianPulse", "discretize", "energy_ledger", "evolve",
    "ProtocolConfig", "echo_group_delay", "reference_config", "run_protocol", "suppression_scan", "sweep_efficiency",
]
