"""Observability analysis, state reconstruction and observers for finite quantum systems."""

__version__ = "0.1.0"

from .channels import (Effect, KrausChannel, Outcome, apply_channel, dual_apply, effects_of,
                       effective_observable_from_outcomes, has_repetition_property,
                       identity_channel, luders_channel, selective_update)
from .disturbance import (disturbance, minimal_disturbance_probe, optimal_probe_qubit,
                          small_time_disturbance, worst_case_state)
from .dynamics import (ControlSchedule, evolve_density, measured_trajectory, output_value,
                       propagator, selective_probability)
from .indirect import (IndirectSetup, effective_observable_exact,
                       effective_observable_first_order, effective_observable_series,
                       indirect_channel)
from .lie import (OperatorSubspace, ad_orbit, decompose_state, dynamical_lie_algebra,
                  indistinguishable, is_observable, observability_spaces,
                  selective_observability_spaces, span_closure)
from .observer import run_observer, sliding_gramian, uniform_observability_check
from .reconstruction import candidate_control_search, gramian, reconstruct
from .scenario import Scenario, ScenarioError, parse_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
