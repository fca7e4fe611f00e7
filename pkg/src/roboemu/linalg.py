"""Small dense solves with closed forms for 1x1 and 2x2 systems.

``numpy.linalg`` spends most of its time on call overhead for the tiny
systems that appear inside every derivative evaluation.
"""

from __future__ import annotations

import numpy as np

LinAlgError = np.linalg.LinAlgError


def inv(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if n == 1:
        a = A[0, 0]
        if a == 0.0:
            raise LinAlgError("singular matrix")
        return np.array([[1.0 / a]])
    if n == 2:
        a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
        det = a * d - b * c
        # relative test: cancellation leaves ~eps residue at a singularity
        if abs(det) <= 1e-13 * (abs(a * d) + abs(b * c)):
            raise LinAlgError("singular matrix")
        return np.array([[d, -b], [-c, a]]) / det
    return np.linalg.inv(A)


def solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if n <= 2:
        return inv(A) @ b
    return np.linalg.solve(A, b)
