"""Simulation and numerical certification of dissipativity with dynamic supply rates."""

from .certify import (ClassKBound, CouplingReport, DissipationReport, DiagonalPowers, Evidence, IntegralOfStatic,
                      Quadratic, StorageFn, StrictnessSpec, check_dissipation, check_monotone_V,
                      check_storage_bounds, coupling_affine, coupling_quadruplet, ioni_check, passivity_indices_check,
                      passivity_margin, small_gain_check, stability_verdict)
from .kernel import BACKEND
from .models import (AlgebraicLoopError, DimensionError, FeedbackSystem, LinearRealization, ModelError, StaticMap,
                     SystemDef, eval_dynamics, eval_output, frequency_response, make_feedback)
from .operators import (AuxiliarySystem, InitialRule, PermutationH, Quadruplet, SupplyRate, aux_trace, invert_supply,
                        quadruplet_supply, supply_trace, swap_supply)
from .scenarios import list_scenarios, run_scenario
from .sim import (DivergenceError, EnsembleMember, InputSignal, SimConfig, Trajectory, gen_input, random_ensemble,
                  simulate_closed, simulate_open)

__version__ = "0.1.0"
