"""Independent reference computations used by the tests.

Deliberately separate from the library code paths they check: a plain
alternating-least-squares CP fitter, exhaustive sign-pattern enumeration
for tiny lasso problems, and a zoom-in grid search for variational
optima.
"""

import itertools

import numpy as np


def _khatri_rao(mats):
    out = mats[0]
    for m in mats[1:]:
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, out.shape[1])
    return out


def _unfold(values, mode):
    return np.moveaxis(values, mode, 0).reshape(values.shape[mode], -1)


def als_cp_residual(values, rank, seed=0, iters=3000, tol=1e-15, restarts=3):
    """Best relative residual of a rank-``rank`` ALS CP fit.

    Unregularized ALS on the fully observed array, multiple seeded
    restarts, returning min over restarts of ||fit - X||_F / ||X||_F.
    """
    values = np.asarray(values, dtype=np.float64)
    d = values.ndim
    norm_x = np.linalg.norm(values)
    best = np.inf
    for rs in range(restarts):
        rng = np.random.default_rng(seed * 1000 + rs)
        factors = [rng.standard_normal((n, rank)) for n in values.shape]
        prev = np.inf
        for _ in range(iters):
            for k in range(d):
                others = [factors[m] for m in range(d) if m != k]
                # kr rows follow the unfolding's column order (later modes fastest)
                kr = _khatri_rao(others)
                gram = np.ones((rank, rank))
                for m in range(d):
                    if m != k:
                        gram *= factors[m].T @ factors[m]
                rhs = _unfold(values, k) @ kr
                factors[k] = np.linalg.solve(gram + 1e-13 * np.eye(rank), rhs.T).T
            fit = _khatri_rao([factors[0]]) @ _khatri_rao(factors[1:]).T
            resid = np.linalg.norm(fit.reshape(values.shape) - values) / norm_x
            if abs(prev - resid) < tol:
                break
            prev = resid
        best = min(best, resid)
    return best


def active_set_lasso(A, y, lam):
    """Exact lasso solution by enumerating all sign patterns (tiny n only)."""
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = A.shape[1]
    best_c, best_obj = None, np.inf
    for signs in itertools.product((-1, 0, 1), repeat=n):
        s = np.asarray(signs, dtype=np.float64)
        support = s != 0
        c = np.zeros(n)
        if np.any(support):
            As = A[:, support]
            try:
                c_s = np.linalg.solve(As.T @ As, As.T @ y - lam * s[support])
            except np.linalg.LinAlgError:
                continue
            if np.any(np.sign(c_s) != s[support]):
                continue
            c[support] = c_s
        grad = A.T @ (A @ c - y)
        if np.any(np.abs(grad[~support]) > lam + 1e-9):
            continue
        obj = 0.5 * np.sum((A @ c - y) ** 2) + lam * np.sum(np.abs(c))
        if obj < best_obj:
            best_obj, best_c = obj, c
    return best_c


def zoom_maximize(fn, lo, hi, levels=7, points=33):
    """Dense grid search with repeated zooming, for 1-2 dim maximization.

    ``lo``/``hi`` are arrays bounding the search box.  Returns the best
    point found.  Deterministic.
    """
    lo = np.asarray(lo, dtype=np.float64).copy()
    hi = np.asarray(hi, dtype=np.float64).copy()
    ndim = lo.size
    best_x, best_f = None, -np.inf
    for _ in range(levels):
        axes = [np.linspace(lo[i], hi[i], points) for i in range(ndim)]
        for combo in itertools.product(*axes):
            x = np.asarray(combo)
            f = fn(x)
            if f > best_f:
                best_f, best_x = f, x
        span = (hi - lo) / (points - 1)
        lo = best_x - 2.0 * span
        hi = best_x + 2.0 * span
    return best_x
