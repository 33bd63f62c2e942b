"""
Positive-linear dependence tests and the Caratheodory-type reduction.

A pair of families ``(a^i)_{i in pos}``, ``(b^j)_{j in free}`` is positive-linearly
dependent when some combination ``sum alpha_i a^i + sum beta_j b^j = 0`` with
``alpha >= 0`` is nontrivial.
"""
from typing import Dict, Hashable, Mapping, Optional, Tuple

import numpy as np

from app.core.exceptions import DimensionMismatchError, PreconditionViolation
from app.core.logging import get_logger
from app.schemas.kernel import CaratheodoryResult, PLDCertificate
from app.services.kernel.linalg import (
    VecFamily,
    is_independent,
    matrix_rank,
    null_combination,
    orthonormal_span,
)
from app.services.kernel.simplex import find_feasible

logger = get_logger(__name__)

CERTIFICATE_RESIDUAL = 1e-8
RECONSTRUCTION_TOL = 1e-9


def _certificate(
    pos: VecFamily, free: VecFamily, alpha: np.ndarray, beta: np.ndarray
) -> PLDCertificate:
    norm = float(np.abs(alpha).sum() + np.abs(beta).sum())
    alpha = alpha / norm
    beta = beta / norm
    combo = alpha @ pos.matrix + beta @ free.matrix
    return PLDCertificate(
        alphas={str(label): float(a) for label, a in zip(pos.labels, alpha)},
        betas={str(label): float(b) for label, b in zip(free.labels, beta)},
        norm=float(np.abs(alpha).sum() + np.abs(beta).sum()),
        residual=float(np.linalg.norm(combo)),
    )


def positive_linear_dependent(
    pos: VecFamily, free: VecFamily, tol: float = 1e-8, tol_rank: float = 1e-8
) -> Tuple[bool, Optional[PLDCertificate]]:
    """Decide positive-linear dependence of ``(pos, free)``.

    Dependence either lives in ``free`` alone (it is linearly dependent) or
    needs some ``alpha != 0``; normalising ``sum alpha = 1`` and projecting the
    ``pos`` vectors onto the orthogonal complement of ``span(free)`` turns the
    latter into a phase-1 LP over the simplex.
    """
    if pos.dim != free.dim:
        raise DimensionMismatchError(f"families of dimension {pos.dim} and {free.dim}")
    if len(pos) == 0 and len(free) == 0:
        raise PreconditionViolation("both families are empty")

    if len(free) and not is_independent(free, tol_rank):
        beta = null_combination(free.matrix)
        cert = _certificate(pos, free, np.zeros(len(pos)), beta)
        logger.debug("free family linearly dependent", extra={"labels": [str(l) for l in free.labels]})
        return True, cert

    if len(pos) == 0:
        return False, None

    basis = orthonormal_span(free.matrix, tol_rank) if len(free) else np.zeros((pos.dim, 0))
    projected = pos.matrix - (pos.matrix @ basis) @ basis.T

    k = len(pos)
    A_eq = np.vstack([projected.T, np.ones((1, k))])
    b_eq = np.concatenate([np.zeros(pos.dim), [1.0]])
    result = find_feasible(A_eq, b_eq, tol=tol)
    if not result.feasible:
        return False, None

    alpha = result.x
    combo = alpha @ pos.matrix
    if len(free):
        beta, *_ = np.linalg.lstsq(free.matrix.T, -combo, rcond=None)
    else:
        beta = np.zeros(0)
    cert = _certificate(pos, free, alpha, beta)
    if cert.residual > max(CERTIFICATE_RESIDUAL, tol):
        logger.debug(
            "dependence certificate residual above threshold",
            extra={"residual": cert.residual},
        )
    return True, cert


def caratheodory_reduce(
    z: np.ndarray,
    indep: VecFamily,
    positive: VecFamily,
    coeffs: Mapping[Hashable, float],
    tol_rank: float = 1e-8,
) -> CaratheodoryResult:
    """Shrink a positive representation of ``z`` to a linearly independent one.

    Starting from ``z = sum_{indep} c_i v^i + sum_{positive} c_i w^i`` with
    ``c > 0`` on ``positive``, repeatedly step along a null-space direction of
    the active family until a positive coefficient reaches zero, then drop it.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.any(z):
        raise PreconditionViolation("z must be nonzero")
    if indep.dim != z.shape[0] or positive.dim != z.shape[0]:
        raise DimensionMismatchError("z and families must share the dimension")
    if len(indep) and not is_independent(indep, tol_rank):
        raise PreconditionViolation("indep family is linearly dependent")

    family = indep.union(positive)
    c: Dict[Hashable, float] = {label: float(coeffs.get(label, 0.0)) for label in family.labels}
    recon = np.array([c[label] for label in family.labels]) @ family.matrix
    scale = max(1.0, float(np.linalg.norm(z)))
    if np.linalg.norm(recon - z) > RECONSTRUCTION_TOL * scale:
        raise PreconditionViolation(
            "coefficients do not reproduce z", residual=float(np.linalg.norm(recon - z))
        )
    if any(c[label] < 0 for label in positive.labels):
        raise PreconditionViolation("coefficients on the positive family must be nonnegative")

    kept = [label for label in positive.labels if c[label] > 0]
    while True:
        active = VecFamily.of(
            [(l, indep.vector(l)) for l in indep.labels] + [(l, positive.vector(l)) for l in kept],
            dim=z.shape[0],
        )
        if matrix_rank(active.matrix, tol_rank) == len(active):
            break
        direction = dict(zip(active.labels, null_combination(active.matrix)))
        # orient so that later labels are dropped first
        last = next((l for l in reversed(kept) if abs(direction[l]) > tol_rank), None)
        if last is not None and direction[last] < 0:
            direction = {l: -v for l, v in direction.items()}
        steps = [(c[l] / direction[l], i, l) for i, l in enumerate(kept) if direction[l] > tol_rank]
        if not steps:
            # the null vector is supported on indep only, impossible for an independent indep
            raise PreconditionViolation("degenerate null direction")
        t, _, drop = min(steps)
        for label in active.labels:
            c[label] -= t * direction[label]
        c[drop] = 0.0
        kept.remove(drop)

    kept = [l for l in kept if c[l] > 1e-12 * scale]
    final = VecFamily.of(
        [(l, indep.vector(l)) for l in indep.labels] + [(l, positive.vector(l)) for l in kept],
        dim=z.shape[0],
    )
    if len(final):
        solved, *_ = np.linalg.lstsq(final.matrix.T, z, rcond=None)
    else:
        solved = np.zeros(0)
    coefficients = {str(label): float(v) for label, v in zip(final.labels, solved)}
    residual = float(np.linalg.norm(solved @ final.matrix - z)) if len(final) else float(np.linalg.norm(z))
    return CaratheodoryResult(
        kept_positive_labels=[str(l) for l in kept],
        coefficients=coefficients,
        residual=residual,
    )
