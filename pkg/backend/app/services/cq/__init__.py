from app.services.cq.service import (
    active_set,
    build_solution_system,
    check_cq,
    check_licq,
    check_mfcq,
    check_rcpld,
    check_rcpld_S_via_multipliers,
    check_rcrcq,
    realizable_supports,
)
