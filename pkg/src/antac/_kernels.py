"""Compiled numeric kernels.

Everything here is numba-jitted with ``nogil=True`` so that batch drivers can
run chunks of independent work items on a plain thread pool. Kernels never
touch shared mutable state: each work item writes only into its own output
slots, which keeps results byte-identical for any worker count.
"""

import math

import numpy as np
from numba import njit

# Status codes written by the pair kernel.
PAIR_OK = 0
PAIR_SINGULAR_PSI = 1
PAIR_NOT_FINITE = 2

# Column layout of the per-pair output row (see ``estimate_pair_block``).
PAIR_NCOLS = 22
(
    COL_STATUS,
    COL_PSI_II,
    COL_PSI_IJ,
    COL_PSI_JJ,
    COL_OMEGA_II,
    COL_OMEGA_IJ,
    COL_OMEGA_JJ,
    COL_FISHER,
    COL_Z,
    COL_PVALUE,
    COL_PARTIAL,
    COL_THETA_I,
    COL_THETA_J,
    COL_KKT_I,
    COL_KKT_J,
    COL_ITERS_I,
    COL_ITERS_J,
    COL_CONV_I,
    COL_CONV_J,
    COL_SWEEPS,
    COL_DF,
    COL_REFIT,
) = range(PAIR_NCOLS)


@njit(cache=True, nogil=True)
def cholesky_lower(a, pivot_tol):
    """Lower Cholesky factor of a symmetric matrix.

    Returns (L, k) where k is -1 on success or the index of the first pivot
    that fell at or below ``pivot_tol``.
    """
    p = a.shape[0]
    lower = np.zeros((p, p))
    for j in range(p):
        s = a[j, j]
        for k in range(j):
            s -= lower[j, k] * lower[j, k]
        if s <= pivot_tol:
            return lower, j
        lower[j, j] = math.sqrt(s)
        for i in range(j + 1, p):
            t = a[i, j]
            for k in range(j):
                t -= lower[i, k] * lower[j, k]
            lower[i, j] = t / lower[j, j]
    return lower, -1


@njit(cache=True, nogil=True)
def spd_solve(a, b):
    """Solve a @ x = b in place for a small SPD matrix.

    ``a`` is destroyed (lower Cholesky factor), ``b`` (s x k) receives the
    solution. Returns 0 on success, -1 when a pivot degenerates (collinear
    selected columns).
    """
    s = a.shape[0]
    for j in range(s):
        diag = a[j, j]
        for k in range(j):
            diag -= a[j, k] * a[j, k]
        if diag <= 1e-12:
            return -1
        diag = math.sqrt(diag)
        a[j, j] = diag
        for i in range(j + 1, s):
            t = a[i, j]
            for k in range(j):
                t -= a[i, k] * a[j, k]
            a[i, j] = t / diag
    for c in range(b.shape[1]):
        for i in range(s):
            t = b[i, c]
            for k in range(i):
                t -= a[i, k] * b[k, c]
            b[i, c] = t / a[i, i]
        for i in range(s - 1, -1, -1):
            t = b[i, c]
            for k in range(i + 1, s):
                t -= a[k, i] * b[k, c]
            b[i, c] = t / a[i, i]
    return 0


@njit(cache=True, nogil=True)
def refit_ols(gram, cross, coef):
    """Replace ``coef`` by the least-squares refit on its nonzero support.

    ``gram``/``cross`` are the standardized Gram and cross products of the
    penalized problem, so the refit happens in the same coordinates. Returns
    the support size on success and -1 on a degenerate support (coef is then
    left at the penalized solution).
    """
    m = coef.shape[0]
    size = 0
    for k in range(m):
        if coef[k] != 0.0:
            size += 1
    if size == 0:
        return 0
    support = np.empty(size, np.int64)
    t = 0
    for k in range(m):
        if coef[k] != 0.0:
            support[t] = k
            t += 1
    sub = np.empty((size, size))
    rhs = np.empty((size, 1))
    for a in range(size):
        sa = support[a]
        for b in range(size):
            sub[a, b] = gram[sa, support[b]]
        rhs[a, 0] = cross[sa]
    if spd_solve(sub, rhs) != 0:
        return -1
    for a in range(size):
        coef[support[a]] = rhs[a, 0]
    return size


@njit(cache=True, nogil=True)
def cd_lasso(gram, cross, coef, resid_corr, active, penalty, tol, max_sweeps):
    """Cyclic coordinate descent for the standardized lasso.

    ``gram`` is W'W/n with unit diagonal on active coordinates and ``cross``
    is W'R/n. ``resid_corr`` holds cross - gram @ coef and is kept in sync
    incrementally; both ``coef`` and ``resid_corr`` are updated in place.
    Ties at the soft-threshold kink resolve to exactly zero. Returns the
    number of sweeps performed.
    """
    m = coef.shape[0]
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        max_step = 0.0
        for k in range(m):
            if active[k] == 0:
                continue
            z = coef[k] + resid_corr[k]
            if z > penalty:
                new = z - penalty
            elif z < -penalty:
                new = z + penalty
            else:
                new = 0.0
            step = new - coef[k]
            if step != 0.0:
                coef[k] = new
                for t in range(m):
                    resid_corr[t] -= gram[k, t] * step
                astep = abs(step)
                if astep > max_step:
                    max_step = astep
        if max_step <= tol:
            break
    return sweeps


@njit(cache=True, nogil=True)
def scaled_lasso_gram(
    gram,
    cross,
    resp_sq,
    lam,
    theta_floor,
    active,
    coef,
    obj_hist,
    theta_tol,
    max_outer,
    cd_tol,
    max_sweeps,
):
    """Alternating minimization of the scaled-lasso objective on Gram inputs.

    Jointly minimizes ||R - W d||^2 / (2 n theta) + theta / 2 + lam * ||d||_1
    by alternating an inner lasso at penalty lam * theta with the exact noise
    update theta = ||R - W d|| / sqrt(n). ``resp_sq`` is ||R||^2 / n. ``coef``
    must enter as zeros and holds the standardized solution on exit;
    ``obj_hist`` must have length >= max_outer and receives the objective
    after each outer iteration.

    Returns (theta, outer_iters, total_sweeps, converged, kkt_residual).
    """
    m = coef.shape[0]
    resid_corr = cross.copy()
    theta = math.sqrt(resp_sq)
    if theta < theta_floor:
        theta = theta_floor
    total_sweeps = 0
    outer = 0
    converged = False
    for it in range(max_outer):
        outer = it + 1
        penalty = lam * theta
        total_sweeps += cd_lasso(
            gram, cross, coef, resid_corr, active, penalty, cd_tol, max_sweeps
        )
        # ||R - W d||^2 / n = resp_sq - cross.d - d.resid_corr
        quad = resp_sq
        l1 = 0.0
        for k in range(m):
            quad -= (cross[k] + resid_corr[k]) * coef[k]
            l1 += abs(coef[k])
        if quad < 0.0:
            quad = 0.0
        theta_new = math.sqrt(quad)
        if theta_new < theta_floor:
            theta_new = theta_floor
        obj_hist[it] = quad / (2.0 * theta_new) + theta_new / 2.0 + lam * l1
        rel = abs(theta_new - theta) / max(theta_new, theta_floor)
        theta = theta_new
        if rel <= theta_tol:
            converged = True
            break
    # Worst KKT violation at the final penalty lam * theta.
    penalty = lam * theta
    kkt = 0.0
    for k in range(m):
        if active[k] == 0:
            continue
        if coef[k] > 0.0:
            v = abs(resid_corr[k] - penalty)
        elif coef[k] < 0.0:
            v = abs(resid_corr[k] + penalty)
        else:
            v = abs(resid_corr[k]) - penalty
            if v < 0.0:
                v = 0.0
        if v > kkt:
            kkt = v
    return theta, outer, total_sweeps, converged, kkt


@njit(cache=True, nogil=True)
def solve_columns_block(
    gram,
    cross,
    resp_sq,
    active,
    lam,
    theta_tol,
    max_outer,
    cd_tol,
    max_sweeps,
    n_samples,
    refit,
    col_start,
    col_end,
    coef_out,
    theta_out,
    kkt_out,
    iters_out,
    conv_out,
    sweeps_out,
    refit_out,
):
    """Scaled-lasso solves for a contiguous block of response columns.

    Shared standardized design Gram ``gram`` (m x m), per-column standardized
    cross products ``cross`` (m x ncols, Fortran order) and squared response
    norms ``resp_sq``. With ``refit`` nonzero, each solution is replaced by
    its least-squares refit on the selected support (noise levels keep the
    penalized estimate). Writes one solution per column into the output
    arrays.
    """
    max_outer_i = int(max_outer)
    obj_hist = np.empty(max_outer_i)
    for j in range(col_start, col_end):
        coef = coef_out[:, j]
        theta_floor = 1e-12 * (1.0 + math.sqrt(resp_sq[j]))
        theta, outer, sweeps, conv, kkt = scaled_lasso_gram(
            gram,
            cross[:, j],
            resp_sq[j],
            lam,
            theta_floor,
            active,
            coef,
            obj_hist,
            theta_tol,
            max_outer_i,
            cd_tol,
            max_sweeps,
        )
        refit_out[j] = 0
        if refit != 0:
            size = 0
            for k in range(coef.shape[0]):
                if coef[k] != 0.0:
                    size += 1
            if 0 < size < n_samples:
                if refit_ols(gram, cross[:, j], coef) >= 0:
                    refit_out[j] = 1
            elif size == 0:
                refit_out[j] = 1
        theta_out[j] = theta
        kkt_out[j] = kkt
        iters_out[j] = outer
        conv_out[j] = 1 if conv else 0
        sweeps_out[j] = sweeps
    return 0


@njit(cache=True, nogil=True)
def estimate_pair_block(
    gram,
    zmat,
    active_col,
    pairs,
    lam,
    theta_tol,
    max_outer,
    cd_tol,
    max_sweeps,
    det_tol,
    refit,
    idx_start,
    idx_end,
    out,
    beta_out,
    keep_beta,
):
    """Per-edge estimation for a block of node pairs.

    For pair (i, j) both remaining columns of ``zmat`` (n x p, Fortran order)
    act as the design; each of the two columns i and j is regressed on it by
    the scaled lasso, residual cross products form the 2x2 matrix whose
    inverse carries the edge estimate and its inference quantities. ``gram``
    is Z'Z/n over all p columns; the pair design Gram is sliced from it.
    Inactive columns (flagged upstream or with vanishing norm) keep zero
    coefficients and never enter the penalized problem.

    With ``refit`` nonzero, both coefficient vectors are replaced by the
    joint least-squares refit on the union of the two selected supports and
    the residual cross products divide by n - |support| instead of n, which
    removes the fitted-noise deflation of the penalized residuals. On a
    degenerate refit the penalized solution and plain 1/n scaling are kept.

    One row of ``out`` per pair, columns per the COL_* layout. If
    ``keep_beta`` is nonzero, original-scale coefficients are written into
    ``beta_out[idx - idx_start]`` with rows indexed by the pair complement in
    increasing column order.
    """
    n = zmat.shape[0]
    p = gram.shape[0]
    m = p - 2
    max_outer_i = int(max_outer)
    for idx in range(idx_start, idx_end):
        i = pairs[idx, 0]
        j = pairs[idx, 1]
        cols = np.empty(m, np.int64)
        t = 0
        for k in range(p):
            if k != i and k != j:
                cols[t] = k
                t += 1
        scale = np.empty(m)
        active = np.empty(m, np.uint8)
        for a in range(m):
            g = gram[cols[a], cols[a]]
            if active_col[cols[a]] != 0 and g > 1e-24:
                scale[a] = 1.0 / math.sqrt(g)
                active[a] = 1
            else:
                scale[a] = 0.0
                active[a] = 0
        sub = np.empty((m, m))
        for a in range(m):
            ca = cols[a]
            for b in range(m):
                sub[a, b] = gram[ca, cols[b]] * scale[a] * scale[b]
            if active[a] == 0:
                sub[a, a] = 1.0
        obj_hist = np.empty(max_outer_i)
        coef_i = np.zeros(m)
        coef_j = np.zeros(m)
        cross_i = np.empty(m)
        cross_j = np.empty(m)
        theta_pair = np.empty(2)
        kkt_pair = np.empty(2)
        iters_pair = np.empty(2)
        conv_pair = np.empty(2)
        sweeps_total = 0
        for which in range(2):
            target = i if which == 0 else j
            coef = coef_i if which == 0 else coef_j
            cross = cross_i if which == 0 else cross_j
            for a in range(m):
                cross[a] = gram[cols[a], target] * scale[a]
            resp_sq = gram[target, target]
            theta_floor = 1e-12 * (1.0 + math.sqrt(resp_sq))
            theta, outer, sweeps, conv, kkt = scaled_lasso_gram(
                sub,
                cross,
                resp_sq,
                lam,
                theta_floor,
                active,
                coef,
                obj_hist,
                theta_tol,
                max_outer_i,
                cd_tol,
                max_sweeps,
            )
            theta_pair[which] = theta
            kkt_pair[which] = kkt
            iters_pair[which] = outer
            conv_pair[which] = 1.0 if conv else 0.0
            sweeps_total += sweeps
        # Joint refit on the union support.
        df = 0
        refit_ok = 0
        if refit != 0:
            size = 0
            for a in range(m):
                if coef_i[a] != 0.0 or coef_j[a] != 0.0:
                    size += 1
            if size == 0:
                refit_ok = 1
            elif size < n - 2:
                support = np.empty(size, np.int64)
                t = 0
                for a in range(m):
                    if coef_i[a] != 0.0 or coef_j[a] != 0.0:
                        support[t] = a
                        t += 1
                small = np.empty((size, size))
                rhs = np.empty((size, 2))
                for a in range(size):
                    sa = support[a]
                    for b in range(size):
                        small[a, b] = sub[sa, support[b]]
                    rhs[a, 0] = cross_i[sa]
                    rhs[a, 1] = cross_j[sa]
                if spd_solve(small, rhs) == 0:
                    refit_ok = 1
                    df = size
                    for a in range(m):
                        coef_i[a] = 0.0
                        coef_j[a] = 0.0
                    for a in range(size):
                        coef_i[support[a]] = rhs[a, 0]
                        coef_j[support[a]] = rhs[a, 1]
        denom = float(n - df) if refit_ok == 1 else float(n)
        # Residuals in the original scale: eps_m = Z_m - Z_complement b_m.
        eps_i = np.empty(n)
        eps_j = np.empty(n)
        for r in range(n):
            eps_i[r] = zmat[r, i]
            eps_j[r] = zmat[r, j]
        for a in range(m):
            b_i = coef_i[a] * scale[a]
            b_j = coef_j[a] * scale[a]
            ca = cols[a]
            if b_i != 0.0:
                for r in range(n):
                    eps_i[r] -= b_i * zmat[r, ca]
            if b_j != 0.0:
                for r in range(n):
                    eps_j[r] -= b_j * zmat[r, ca]
            if keep_beta != 0:
                beta_out[idx - idx_start, a, 0] = b_i
                beta_out[idx - idx_start, a, 1] = b_j
        psi_ii = 0.0
        psi_jj = 0.0
        psi_ij = 0.0
        for r in range(n):
            psi_ii += eps_i[r] * eps_i[r]
            psi_jj += eps_j[r] * eps_j[r]
            psi_ij += eps_i[r] * eps_j[r]
        psi_ii /= denom
        psi_jj /= denom
        psi_ij /= denom
        out[idx, COL_DF] = df
        out[idx, COL_REFIT] = refit_ok
        out[idx, COL_PSI_II] = psi_ii
        out[idx, COL_PSI_IJ] = psi_ij
        out[idx, COL_PSI_JJ] = psi_jj
        out[idx, COL_THETA_I] = theta_pair[0]
        out[idx, COL_THETA_J] = theta_pair[1]
        out[idx, COL_KKT_I] = kkt_pair[0]
        out[idx, COL_KKT_J] = kkt_pair[1]
        out[idx, COL_ITERS_I] = iters_pair[0]
        out[idx, COL_ITERS_J] = iters_pair[1]
        out[idx, COL_CONV_I] = conv_pair[0]
        out[idx, COL_CONV_J] = conv_pair[1]
        out[idx, COL_SWEEPS] = sweeps_total
        if not (math.isfinite(psi_ii) and math.isfinite(psi_jj) and math.isfinite(psi_ij)):
            out[idx, COL_STATUS] = PAIR_NOT_FINITE
            continue
        det = psi_ii * psi_jj - psi_ij * psi_ij
        if det <= det_tol:
            out[idx, COL_STATUS] = PAIR_SINGULAR_PSI
            continue
        omega_ii = psi_jj / det
        omega_jj = psi_ii / det
        omega_ij = -psi_ij / det
        fisher = omega_ii * omega_jj + omega_ij * omega_ij
        z = omega_ij * math.sqrt(n / fisher)
        pvalue = math.erfc(abs(z) / math.sqrt(2.0))
        partial = -omega_ij / math.sqrt(omega_ii * omega_jj)
        out[idx, COL_STATUS] = PAIR_OK
        out[idx, COL_OMEGA_II] = omega_ii
        out[idx, COL_OMEGA_IJ] = omega_ij
        out[idx, COL_OMEGA_JJ] = omega_jj
        out[idx, COL_FISHER] = fisher
        out[idx, COL_Z] = z
        out[idx, COL_PVALUE] = pvalue
        out[idx, COL_PARTIAL] = partial
    return 0
