from app.services.kernel.dependence import caratheodory_reduce, positive_linear_dependent
from app.services.kernel.linalg import (
    VecFamily,
    basis_subset,
    is_independent,
    matrix_rank,
    null_combination,
    num_rank,
)
from app.services.kernel.simplex import LPResult, LPStatus, find_feasible, solve_lp

__all__ = [
    "LPResult",
    "LPStatus",
    "VecFamily",
    "basis_subset",
    "caratheodory_reduce",
    "find_feasible",
    "is_independent",
    "matrix_rank",
    "null_combination",
    "num_rank",
    "positive_linear_dependent",
    "solve_lp",
]
