"""Exact and sampled L_q discrepancies of point sets under dyadic (XOR) shifts."""

from .discrepancy import (
    INF,
    DiscrepancyResult,
    l2_exact,
    lemma62_check,
    linf_exact,
    local_discrepancy,
    lq,
    lq_grid,
    truncated_grid,
    uniform_error_bound,
)
from .decomposition import (
    MicroLocalTable,
    error_term,
    error_term_bound,
    micro_local,
    micro_local_table,
    truncated_discrepancy,
    verify_decomposition,
)
from .dyadic import DyadicPoint, DyadicScalar, ElementaryBox, rademacher, xor_shift
from .errors import CertificationError, GuardError
from .mean import (
    MeanDiscrepancyEstimate,
    conditional_mean,
    error_term_norms,
    linf_chain,
    mean_lq,
    mean_lq_multi,
    principal_term_direct,
    principal_term_mq,
    shift_search,
)
from .pointsets import (
    GeneratorMatrices,
    PointSet,
    check_net,
    generate_bitrev_net,
    generate_digital_net,
    net_family,
    random_point_set,
    read_point_set,
    shift_set,
    write_point_set,
)
from .rademacher import RademacherPolynomial, khinchin_check, lemma31_bounds, lemma32_bound
from .theorems import TheoremReport, j_sigma, nearest_int_dist, theorem_bounds, verify_theorem

__version__ = "0.1.0"
