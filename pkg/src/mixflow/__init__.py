"""Multicomponent fluid mixtures: thermodynamics, entropic variables, transport and a 1-D solver."""

from .errors import (ConsistencyError, ConvergenceError, DomainError, MixflowError, OverflowGuardError,
                     ValidationError)
from .species import (GibbsDerivs, ReferenceState, SpeciesParams, ValidationReport, Variant, cv_species, enthalpy,
                      gibbs, gibbs_derivs, validate_species)
from .mixture import (ConservedState, MixtureModel, MixtureState, chemical_potentials, conserved_from_primal,
                      entropy_density_neg, entropy_h, free_energy, grad_h, heat_capacity, hess_h, internal_energy,
                      make_model, p_bounds, pressure, temperature_from_energy, volume_fractions)
from .dual import DualState, grad_hstar, hess_hstar, hstar_value, pressure_dual
from .entropic import (Basis, EntropicState, P_grads, P_map, R_drho, R_jacobian, R_map, build_basis,
                       from_entropic, scalar_M, to_entropic)
from .transport import (EnergyCoeffs, OnsagerInputs, OnsagerMatrices, PowerLaw, build_onsager, default_M,
                        energy_coeffs, fluxes_entropic, fluxes_primal)
from .solver import (BoundarySpec, CFLViolation, Diagnostics, DomainExit, FieldState, FixedPointDiverged, Grid1D,
                     RobinCooling, Solver, SolverInputs, StepConfig, diagnostics_truncation, init_from_primal, run,
                     step)
from .analysis import (AsymptoticFit, CoeffGrowthSpec, DominanceReport, FitUnreliable, GrowthWindow,
                       InfeasibleWindow, NoDominantSpecies, check_growth, dominant_species, fit_asymptotics,
                       growth_window)

__version__ = "0.1.0"
