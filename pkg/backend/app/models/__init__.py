"""
Domain models: parametric constraint systems and problems.
"""
from app.models.problem import BilevelProblem, Box, ParametricProblem, ProblemFlags
from app.models.system import VALUE_LABEL, ParametricSystem, ValueFunctionConstraint, ValueMode
