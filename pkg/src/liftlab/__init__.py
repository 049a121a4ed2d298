"""Desk-scale laboratory for query-to-communication lifting.

Exact discrepancy of small two-party gadgets, min-entropy bookkeeping for
block-composed distributions, value classification (safe / heavy / light /
dangerous), and faithful protocol-to-decision-tree simulations, all at sizes
where every claim can be checked against brute force.
"""

from .core import (
    BOT,
    CoordSet,
    DecisionTree,
    Gadget,
    ProtocolTree,
    RandomizedProtocol,
    Restriction,
    SearchProblem,
    SimulationConstants,
    decision_tree_run,
    det_desk,
    det_paper,
    gadget_block_eval,
    gadget_xor_eval,
    make_gadget,
    protocol_run,
    rand_desk,
    rand_paper,
)
from .disc import DiscrepancyReport, ProductDistribution, canonical_rectangle_opt, disc_exact, gadget_delta, reduce_product
from .dist import (
    Marginal,
    UniformSubset,
    binomial_sum_bound,
    condition,
    deficiency,
    is_sparse,
    minimal_sparsity,
    multiplicative_uniformity_check,
    statistical_distance,
    structured_check,
    uniform_marginals_check,
    vazirani_check,
    xor_bias,
)
from .errors import ConditioningError, GuardError, InputError, LiftlabError, SimulationFailure
from .kernels import BACKEND as KERNEL_BACKEND
from .safety import (
    canonical_recovery_event,
    heaviness,
    is_almost_uniform,
    is_dangerous,
    is_light,
    is_recoverable,
    is_safe,
    main_lemma_estimate,
    skew_bias_check,
    zx_dist,
)

__version__ = "0.1.0"
