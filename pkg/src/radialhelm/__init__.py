"""Load-flow solvers for radial and weakly meshed distribution networks.

Implements the holomorphic-embedding method with three interchangeable
per-order linear-solve backends (retained LU, backward/forward sweep,
constant DLF operator), four baseline methods (backward-forward sweep,
direct approach, implicit Z-bus, Newton-Raphson), case ingestion, and a
per-step timing benchmark harness.
"""

from . import _kernels
from .continuation import (AccelState, RationalApproximant, Trend, accel_update,
                           check_convergence, detect_nonexistence, new_accel_state,
                           pade_matrix_method)
from .errors import RadialHelmError
from .ingest import (Scenario, apply_scenario, load_case_native, load_scenario,
                     parse_matpower_case, serialize_case_native,
                     serialize_scenario, split_zip_load)
from .netmodel import (AdmittanceSplit, Branch, Bus, IncidenceStructure,
                       NetworkCase, Topology, ZipScale, assemble_admittance,
                       build_incidence, classify_topology, zip_current_injection)
from .series_engine import (EmbeddingData, SeriesState, advance, assemble_rhs,
                            build_embedding, germ, reciprocal_step)
from .solvers import (SolveConfig, SolveReport, Status, StepTimings,
                      bibc_matrix, bcbv_matrix, helm_coefficients,
                      prepare_dlf_backend, prepare_lu_backend, prepare_method,
                      prepare_sweep_backend, solve, solve_bfs, solve_direct,
                      solve_helm, solve_implicit_z, solve_newton_raphson)
from .bench import (BenchConfig, BenchReport, compare_voltages, emit_report,
                    emit_solve_report, parallel_step5_projection, run_benchmark)

__version__ = "0.1.0"

kernel_backends = _kernels.available
