"""Exact-simulation laboratory for spacetime area-law bounds on correlations.

Dense, desk-scale simulation of measured spin lattices: labeled tensor-space
linear algebra, finite-range Hamiltonians, purified quantum instruments,
scheduled measurement experiments with entangling-rate and area-law bound
checks, switched-coupling detector harvesting, and process-matrix correlation
measures.
"""

from .qcore import (DensityMatrix, HermitianOperator, HilbertFactorization,
                    ProbabilityDistribution, PureState, UnitaryOperator,
                    classical_mutual_information, hermitian_exponential,
                    operator_norm, partial_trace, partial_trace_pure,
                    quantum_mutual_information, schmidt_decomposition, space,
                    tensor_product, von_neumann_entropy)
from .lattice import (DimensionCapError, LatticeSpec, LatticeTerm,
                      LocalHamiltonian, RegionSplit, ball_size, boundary_terms,
                      evolution_unitary, region_split, split_hamiltonian,
                      strength_norm, trotter_sequence)
from .instruments import (Instrument, PurifiedInstrument, SettingDistribution,
                          controlled_instrument, deferred_outcome_distribution,
                          purify, validate_instrument)
from .experiment import (AreaLawParams, MeasurementSchedule, RegionGeometry,
                         ScheduleEntry, SpacetimeRegion, TripartiteSplit,
                         alice_mutual_information, area_law_bound,
                         area_law_bound_1d, entropy_chain_report,
                         measure_entropy_step, outcome_correlations,
                         run_experiment, sie_step_bound,
                         signaling_capacity_bound, uniform_schedule)
from .harvesting import (DetectorCoupling, DetectorSpec, SwitchedHamiltonian,
                         detector_mutual_information, evolve_switched,
                         harvesting_bound)
from .processmatrix import (ChoiMatrix, CorrelationEstimate, OptimizerBudget,
                            ProbingScheme, ProcessMatrix, choi_from_map,
                            correlation_gap_process, estimate_max_correlation,
                            final_ancilla_state, map_from_choi, probability_rule,
                            process_from_channel, process_from_state,
                            teleport_probe, validate_process)

__version__ = "0.1.0"
