"""freebench: random matrix workbench for (amalgamated) free products.

A small numpy/scipy library with four layers:

* ``ncpoly``: non-commutative *-polynomials, evaluation on Hermitian
  matrix tuples, traces and norms;
* ``moments``: an exact symbolic moment oracle for free products (with
  abelian atomic amalgamation) and conditional-expectation norms;
* ``atomic`` / ``models``: block embeddings of atomic algebras, Haar
  unitaries on their commutants, and the composite random matrix model
  "deterministic first factor, conjugated second factor";
* ``verify`` / ``geometry``: Monte Carlo hypothesis reports (norm
  bounds, law convergence, concentration scaling, external averaging,
  collapse) and microstate geometry (coverings, concentration
  functions, the dichotomy check).

The ``freebench`` CLI (see ``runner``) drives all of it from a JSON
config.  Narrative walkthroughs live in the ``demos/`` directory.
"""

__version__ = "0.1.0"

from .atomic import AtomicAlgebra, AtomicElement, BlockPlan, EmptyPlan, block_plan, embed
from .config import ConfigError, ExperimentConfig, load_config, parse_config, parse_polynomial
from .geometry import (
    FiniteMeasure,
    PointCloud,
    concentration_function,
    covering_number,
    dichotomy_check,
    empirical_concentration,
    in_neighborhood,
)
from .models import (
    DTensorAbelian,
    ModelSpec,
    QuantileDiagonal,
    SeededGue,
    compatible_microstate,
    gue_matrix,
    haar_commutant_unitary,
    haar_unitary,
    quantile_diagonal,
    sample_model,
)
from .moments import (
    DiscreteSelfAdjoint,
    MatrixBlock,
    MomentOracle,
    SemicircularFamily,
    base_moment,
    catalan,
    semicircle_density_moment,
)
from .ncpoly import (
    GenId,
    MatrixTuple,
    NcPolynomial,
    NormBounds,
    evaluate,
    hs_norm2,
    nc_adjoint,
    nc_mul,
    normalized_trace,
    op_norm,
    read_tuple,
    write_tuple,
)
from .seeds import derive_seed
from .verify import (
    CollapseResult,
    EstimatorResult,
    HypothesisReport,
    ReportRow,
    check_norm_bounds,
    collapse_test,
    concentration_report,
    convergence_report,
    estimate_moment,
    external_averaging_report,
)
