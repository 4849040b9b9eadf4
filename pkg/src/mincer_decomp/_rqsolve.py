"""Linear quantile regression solver.

Three stages:

1. optional preprocessing for large samples: observations whose residual
   sign is predictable from a pilot fit on a subsample are fixed at their
   dual bound and removed from the LP, with a sign check on the full sample
   afterwards (the idea of Portnoy and Koenker, 1997);
2. a Mehrotra predictor-corrector interior point method on the bounded dual
   ``max y'a  s.t.  X'a = b,  0 <= a <= 1``;
3. refinement to an exact basic solution by simplex pivots along the edges
   of the check-loss polyhedron.  Every pivot strictly lowers the objective,
   and the loop stops when no edge leaving the current basis is a descent
   direction.
"""
import numpy as np
from numba import njit

from .errors import ConvergenceError, NumericalError

MAX_ITER = 200
GAP_TOL = 1e-9
STEP_DAMP = 0.99995
PREPROCESS_MIN_N = 5000
REDUCED_MAX_ITER = 60


def check_loss(r, tau):
    """Sum of ``rho_tau(r) = r * (tau - 1{r < 0})``."""
    r = np.asarray(r, dtype=float)
    return float(np.sum(r * (tau - (r < 0))))


@njit(cache=True, error_model="numpy")
def _newton(X, d, rd, rp, x, s, z, w, rxz, rsw, dx, dz, dw):
    n, p = X.shape
    M = np.zeros((p, p))
    rhs = rp.copy()
    for i in range(n):
        rho = rd[i] - rxz[i] / x[i] + rsw[i] / s[i]
        dx[i] = rho  # scratch
        for j in range(p):
            v = X[i, j] * d[i]
            rhs[j] += v * rho
            for k in range(j + 1):
                M[j, k] += v * X[i, k]
    for j in range(p):
        for k in range(j):
            M[k, j] = M[j, k]
    dl = np.linalg.solve(M, rhs)
    for i in range(n):
        xd = 0.0
        for j in range(p):
            xd += X[i, j] * dl[j]
        dx[i] = d[i] * (xd - dx[i])
        dz[i] = (rxz[i] - z[i] * dx[i]) / x[i]
        dw[i] = (rsw[i] + w[i] * dx[i]) / s[i]
    return dl


@njit(cache=True, error_model="numpy")
def _steps(x, s, z, w, dx, dz, dw):
    ap = 1.0
    ad = 1.0
    for i in range(len(x)):
        if dx[i] < 0.0:
            ap = min(ap, -x[i] / dx[i])
        elif dx[i] > 0.0:
            ap = min(ap, s[i] / dx[i])
        if dz[i] < 0.0:
            ad = min(ad, -z[i] / dz[i])
        if dw[i] < 0.0:
            ad = min(ad, -w[i] / dw[i])
    return ap, ad


@njit(cache=True, error_model="numpy")
def _ipm_kernel(X, y, tau, target, max_iter, tol):
    n, p = X.shape
    x = np.full(n, 1.0 - tau)
    s = 1.0 - x
    lam = np.linalg.solve(X.T @ X, -(X.T @ y))
    r = -y - X @ lam
    scale = np.mean(np.abs(r))
    if scale == 0.0:
        scale = np.mean(np.abs(y))
        if scale == 0.0:
            scale = 1.0
    z = np.maximum(r, 0.0) + 0.1 * scale
    w = np.maximum(-r, 0.0) + 0.1 * scale
    bnorm = 1.0 + np.max(np.abs(target))
    d = np.empty(n)
    rd = np.empty(n)
    rxz = np.empty(n)
    rsw = np.empty(n)
    dx = np.empty(n)
    dz = np.empty(n)
    dw = np.empty(n)
    gap = np.inf
    for it in range(max_iter):
        gap = x @ z + s @ w
        pobj = -(y @ x)
        rp = target - X.T @ x
        xl = X @ lam
        for i in range(n):
            rd[i] = -y[i] - xl[i] - z[i] + w[i]
        if not np.isfinite(gap):
            return lam, 2, gap
        if gap <= tol * (1.0 + abs(pobj)) and np.max(np.abs(rp)) <= 1e-8 * bnorm:
            return lam, 0, gap
        for i in range(n):
            d[i] = 1.0 / (z[i] / x[i] + w[i] / s[i])
            rxz[i] = -x[i] * z[i]
            rsw[i] = -s[i] * w[i]
        # predictor
        _newton(X, d, rd, rp, x, s, z, w, rxz, rsw, dx, dz, dw)
        ap, ad = _steps(x, s, z, w, dx, dz, dw)
        gap_aff = 0.0
        for i in range(n):
            gap_aff += (x[i] + ap * dx[i]) * (z[i] + ad * dz[i])
            gap_aff += (s[i] - ap * dx[i]) * (w[i] + ad * dw[i])
        sigma_mu = (gap_aff / gap) ** 3 * gap / (2 * n)
        # corrector
        for i in range(n):
            rxz[i] = sigma_mu - x[i] * z[i] - dx[i] * dz[i]
            rsw[i] = sigma_mu - s[i] * w[i] + dx[i] * dw[i]
        dl = _newton(X, d, rd, rp, x, s, z, w, rxz, rsw, dx, dz, dw)
        ap, ad = _steps(x, s, z, w, dx, dz, dw)
        ap *= STEP_DAMP
        ad *= STEP_DAMP
        for i in range(n):
            x[i] += ap * dx[i]
            s[i] = 1.0 - x[i]
            z[i] += ad * dz[i]
            w[i] += ad * dw[i]
        lam += ad * dl
    return lam, 1, gap


def interior_point(X, y, tau, target=None, max_iter=MAX_ITER, tol=GAP_TOL):
    """Solve the dual LP by a primal-dual interior point method.

    ``target`` is the right-hand side of the equality constraints; it defaults
    to ``(1 - tau) X'1``, which gives the usual quantile regression.  Returns
    the coefficient vector (the negated equality multipliers).
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if target is None:
        target = (1.0 - tau) * X.sum(axis=0)
    target = np.ascontiguousarray(target, dtype=float)
    try:
        lam, status, gap = _ipm_kernel(X, y, float(tau), target, int(max_iter), float(tol))
    except (np.linalg.LinAlgError, ZeroDivisionError) as exc:
        raise ConvergenceError(f"interior point hit a singular Newton system ({exc})",
                               tau=tau) from exc
    if status != 0 or not np.all(np.isfinite(lam)):
        raise ConvergenceError(f"interior point did not converge in {max_iter} iterations "
                               f"(duality gap {gap:.3g})", gap=gap, tau=tau)
    return -lam


def _select_basis(X, order, tol=1e-9):
    """First ``p`` rows along ``order`` that are linearly independent."""
    p = X.shape[1]
    cand = X[order]
    norms = np.linalg.norm(cand, axis=1)
    norms[norms == 0] = np.inf
    chosen = []
    Q = np.empty((p, 0))
    for _ in range(p):
        resid = cand - (cand @ Q) @ Q.T
        rel = np.linalg.norm(resid, axis=1) / norms
        rel[chosen] = 0.0
        ok = np.flatnonzero(rel > tol)
        if len(ok) == 0:
            raise NumericalError("cannot find a nonsingular basis")
        k = int(ok[0])
        chosen.append(k)
        v = resid[k] / np.linalg.norm(resid[k])
        Q = np.column_stack([Q, v])
    return order[np.array(chosen)]


def refine_vertex(X, y, tau, beta, fixed_grad=None, max_pivots=None):
    """Move ``beta`` to an optimal basic solution by simplex pivots.

    Starts from the basis of the ``p`` smallest absolute residuals.  At each
    step the one-sided derivative of the objective is evaluated exactly along
    the ``2p`` edges that release one basic observation; the steepest descent
    edge is followed to the breakpoint that minimizes the objective along it.

    ``fixed_grad`` is the (constant) gradient contributed by observations that
    were removed from the problem with a known residual sign.
    """
    n, p = X.shape
    ymax = np.max(np.abs(y))
    rtol = 1e-10 * (ymax if ymax > 0 else 1.0)
    r = y - X @ beta
    basis = _select_basis(X, np.argsort(np.abs(r), kind="stable"))
    max_pivots = max_pivots or 50 * n + 100
    for _ in range(max_pivots):
        Xh = X[basis]
        beta = np.linalg.solve(Xh, y[basis])
        r = y - X @ beta
        zero = np.abs(r) <= rtol
        zero[basis] = True
        psi = np.where(r < 0, tau - 1.0, tau)
        psi[zero] = 0.0
        D = np.linalg.inv(Xh)            # column k: X_h delta_k = e_k
        G = X @ D                        # G[i, k] = x_i' delta_k
        lin = -(psi @ G)
        if fixed_grad is not None:
            lin += fixed_grad @ D
        Gz = G[zero]
        best = (0.0, None, None)
        for sign in (1.0, -1.0):
            # moving along sign*delta_k changes residual i by -sign*G[i, k]
            kink = np.maximum(-tau * sign * Gz, (1.0 - tau) * sign * Gz).sum(axis=0)
            deriv = sign * lin + kink
            k = int(np.argmin(deriv))
            if deriv[k] < best[0] - 1e-12 * (1.0 + np.abs(deriv).max()):
                best = (deriv[k], k, sign)
        slope0, k, sign = best
        if k is None:
            return beta
        g = sign * G[:, k]
        mask = ~zero & (g != 0)
        t = r[mask] / g[mask]
        pos = t > 0
        idx = np.flatnonzero(mask)[pos]
        t = t[pos]
        order = np.argsort(t, kind="stable")
        cum = slope0 + np.cumsum(np.abs(g[idx[order]]))
        hit = np.flatnonzero(cum >= 0)
        if len(hit) == 0:
            raise NumericalError("check-loss objective is unbounded along an edge")
        basis = basis.copy()
        basis[k] = idx[order[hit[0]]]
    raise ConvergenceError("vertex refinement exceeded its pivot budget", tau=tau)


def _polish(X, y, tau, beta, fixed_grad=None):
    """Vertex refinement, kept only if it does not worsen the objective."""
    def objective(b):
        val = check_loss(y - X @ b, tau)
        return val if fixed_grad is None else val + fixed_grad @ b

    vertex = refine_vertex(X, y, tau, beta, fixed_grad)
    start = objective(beta)
    if objective(vertex) <= start + 1e-12 * (1.0 + abs(start)):
        return vertex
    return beta


def _pilot_band(X, sub, resid):
    """Approximate standard error of the pilot fit at every design point.

    A sandwich form with a local residual scale (fitted |residual| on X) so
    that the band widens where the conditional distribution is spread out.
    """
    Xs = X[sub]
    absr = np.abs(resid)
    floor = 0.1 * np.mean(absr) if np.any(absr > 0) else 1.0
    scale = np.maximum(Xs @ np.linalg.lstsq(Xs, absr, rcond=None)[0], floor)
    D1 = (Xs / scale[:, None]).T @ Xs
    D1inv = np.linalg.inv(D1)
    S = D1inv @ (Xs.T @ Xs) @ D1inv
    L = np.linalg.cholesky((S + S.T) / 2)
    return np.sqrt(np.sum((X @ L) ** 2, axis=1))


@njit(cache=True, error_model="numpy")
def _residual_ratio(X, y, beta, band):
    n, p = X.shape
    t = np.empty(n)
    for i in range(n):
        r = y[i]
        for j in range(p):
            r -= X[i, j] * beta[j]
        t[i] = r / band[i]
    return t


@njit(cache=True, error_model="numpy")
def _reduce(X, y, state):
    """Free rows plus gradient and dual-target offsets of the fixed rows."""
    n, p = X.shape
    nfree = 0
    for i in range(n):
        if state[i] == 0:
            nfree += 1
    Xf = np.empty((nfree, p))
    yf = np.empty(nfree)
    above = np.zeros(p)
    below = np.zeros(p)
    k = 0
    for i in range(n):
        if state[i] == 0:
            Xf[k] = X[i]
            yf[k] = y[i]
            k += 1
        elif state[i] > 0:
            above += X[i]
        else:
            below += X[i]
    return Xf, yf, above, below


@njit(cache=True, error_model="numpy")
def _release_violations(X, y, beta, state):
    """Free every fixed row whose residual sign disagrees; return the count."""
    n, p = X.shape
    bad = 0
    for i in range(n):
        if state[i] == 0:
            continue
        r = y[i]
        for j in range(p):
            r -= X[i, j] * beta[j]
        if (state[i] > 0 and r < 0.0) or (state[i] < 0 and r > 0.0):
            state[i] = 0
            bad += 1
    return bad


def _solve_preprocessed(X, y, tau, seed=20240601, m_factor=0.7, keep_factor=1.0):
    """Solve on a reduced problem with sign-predicted observations held fixed.

    The returned solution is checked against every fixed sign on the full
    sample, so it is optimal for the full problem.
    """
    n, p = X.shape
    rng = np.random.default_rng(seed)
    total = X.T @ np.ones(n)
    m = int(round(m_factor * ((p + 1) * n) ** (2.0 / 3.0)))
    while m < n // 2:
        sub = np.sort(rng.choice(n, size=m, replace=False))
        try:
            pilot = interior_point(X[sub], y[sub], tau, max_iter=REDUCED_MAX_ITER, tol=1e-6)
        except ConvergenceError:
            m *= 2
            continue
        band = _pilot_band(X, sub, y[sub] - X[sub] @ pilot)
        t = _residual_ratio(X, y, pilot, np.maximum(band, np.finfo(float).eps))
        keep = keep_factor * m
        k_lo = int(max(0, np.floor(n * tau - keep / 2.0)))
        k_hi = int(min(n - 1, np.ceil(n * tau + keep / 2.0)))
        part = np.partition(t, [k_lo, k_hi])
        state = np.zeros(n, dtype=np.int8)
        state[t < part[k_lo]] = -1
        state[t > part[k_hi]] = 1
        for _ in range(20):
            Xf, yf, above, below = _reduce(X, y, state)
            try:
                beta = interior_point(Xf, yf, tau, target=(1.0 - tau) * total - above,
                                      max_iter=REDUCED_MAX_ITER)
                beta = _polish(Xf, yf, tau, beta, (1.0 - tau) * below - tau * above)
            except (ConvergenceError, NumericalError, np.linalg.LinAlgError):
                break
            nbad = _release_violations(X, y, beta, state)
            if nbad == 0:
                return beta
            if nbad > 0.1 * keep:
                break
        m *= 2
    return _polish(X, y, tau, interior_point(X, y, tau))


def solve_rq(X, y, tau, preprocess=None):
    """Quantile regression coefficients at ``tau`` (an exact basic solution)."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if preprocess is None:
        preprocess = X.shape[0] >= PREPROCESS_MIN_N
    if preprocess:
        return _solve_preprocessed(X, y, tau)
    return _polish(X, y, tau, interior_point(X, y, tau))
