import numpy as np

SINGULAR_RTOL = 1e-13


def solve_checked(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve a x = b, tolerating exactly decoupled zero modes.

    Returns ``(x, divergent)``.  A singular ``a`` is fine when ``b`` has no
    component along the null direction (a decoupled, undriven state); the
    minimum-norm solution is returned then.  Otherwise the response is
    infinite and ``x`` is all-NaN with ``divergent=True``.
    """
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] > SINGULAR_RTOL * s[0]:
        return np.linalg.solve(a, b), False
    x = np.linalg.lstsq(a, b, rcond=SINGULAR_RTOL)[0]
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    if np.linalg.norm(a @ x - b) <= 1e-9 * scale:
        return x, False
    return np.full(b.shape, np.nan, dtype=complex), True
