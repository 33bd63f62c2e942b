from app.services.geometry.service import (
    estimate_rregularity,
    inner_semicontinuity_probe,
    multiplier_bound_scan,
    multiplier_probe,
    project,
    residual,
    uniform_rregularity_scan,
)
from app.services.geometry.solver import (
    DistanceObjective,
    ExpressionObjective,
    SliceConstraints,
    SliceResult,
    SliceSolver,
)
