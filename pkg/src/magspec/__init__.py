"""Spectral lab for magnetic and non-magnetic Schrodinger operators on planar grids.

The magnetic operator ``-[(dx + i n phi_y)^2 + (dy - i n phi_x)^2]`` and its
non-magnetic partner ``-Delta + n * Delta(phi)`` are discretised on masked
uniform grids with Dirichlet conditions, and their ground energies are compared
as the scale ``n`` grows.
"""

__version__ = "0.1.0"

from .assembly import (GeneralizedPair, OperatorMatrix, assemble_magnetic, assemble_nonmagnetic,
                       assemble_weighted_form, dump_triplets, link_phase, link_phases,
                       plaquette_holonomy)
from .eigensolve import (EigenResult, SolverOpts, dense_ground_vector, dense_oracle, ground_state,
                         ground_state_generalized, rayleigh)
from .errors import (MagspecError, InvalidSpec, EmptyMask, ResolutionTooCoarse, InvalidParams,
                     NegativeScale, NonAdjacent, WeightOverflow, NoConvergence, MassNotPD, TooLarge,
                     ZeroVector, TooFewRecords, WrongWeightTag, SupportViolation, ParseError,
                     ValidationError, MissingColumn, TooFewRows)
from .grid import CompactSetSpec, DomainSpec, GridDomain, area, build_grid, neighborhood_grid
from .potential_p import (NeighborhoodFamily, lambda_shrinking, poincare_bound,
                          property_p_verdict)
from .semiclassical import (FluxPoint, KatoReport, SweepRecord, Verdict, classify_limit,
                            classify_values, flux_scan, kato_report, lavine_ocarroll_residual,
                            paramagnetic_check, sweep)
from .weights import (Weight, make_weight, scaled, subharmonicity_check, vanishing_set)
