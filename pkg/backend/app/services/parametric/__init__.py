from app.services.parametric.service import (
    LowerLevelSolver,
    export_scan_csv,
    grid_points,
    hypotheses_of,
    lipschitz_scan,
    s_map_probes,
    scan,
    solve_lower,
)
