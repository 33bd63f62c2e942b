from app.services.bilevel.service import (
    calmness_sufficient_conditions,
    check_partial_calmness,
    default_grid,
    pessimistic_existence_report,
    phi_opt_pess,
    solve_optimistic,
)
