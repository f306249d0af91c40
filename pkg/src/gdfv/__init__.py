"""Max-plus matrix-vector products by dominance reporting, and HMM decoding built on them."""

from ._backend import BACKENDS, get_backend, set_backend, use_backend
from ._forest import DEFAULT_MEM_BUDGET, MemoryBudgetError
from .dominance import (
    DominanceTable,
    DominanceTree,
    PointSet,
    QueryStats,
    build_table,
    build_tree,
    dominated_by_scan,
    query_table,
    query_tree,
    report_all_dominating_pairs,
    tree_bounds,
)
from .extended import NEG_INF, Triple, lift_matrix_entry, lift_vector_entry, lower
from .hmm import (
    DecodeResult,
    GdfvDecoder,
    HiddenMarkovModel,
    InvalidModelError,
    Trellis,
    backtrack,
    block_width,
    brute_force_decode,
    gdfv_decode,
    gdfv_preprocess,
    gdfv_table_decode,
    joint_log_prob,
    viterbi_baseline,
)
from .maxplus import (
    MulResult,
    MulStats,
    SingleWriteViolation,
    SplicedMultiplier,
    multiply_block,
    multiply_spliced,
    multiply_spliced_table,
    multiply_trivial,
    preprocess_block,
    preprocess_spliced,
    preprocess_spliced_table,
)

__version__ = "0.1.0"
