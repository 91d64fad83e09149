"""Pure-Python stepping kernel.

Twin of the compiled Cython kernel in kernel.pyx: same algorithm, same
operation order, bit-identical results. Keep the two in lockstep when
editing either.

Integrator: adaptive TR-BDF2 (trapezoidal stage + BDF2 stage, both with
the same stage coefficient), full-Newton stage solves with analytic
Jacobian and dense partial-pivot LU, third-order embedded error estimate
filtered through the stage matrix. Linear invariants of the flux field
(gas content + vented - injected) are preserved to Newton tolerance by
construction, which is what keeps the mass-balance residual at roundoff.

State layout:  y = [G_0..G_{nn-1}, v_0..v_{nl-1}, injected, vented]
  G_i   gas content of free node i, standard volume (m3) relative to rest
  v_l   lobe volume (m3)

Node pressure is algebraic:  p_i = (G_i + S0_i - S_i) * PA / denom_i
with S_i the lobe-volume sum at node i and denom_i = clin_i*PA + S_i.

Lobe volumes relax toward the branch equilibrium with time constant tau;
a fold crossing of the node pressure is a snap event, located by bisecting
the accepted step down to dt_min.

Kinds: boundary 0 = fixed zero gauge (vent/ambient, flow counts as
vented), 1 = pressure ramp wave (flow counts as injected). Event kinds:
1 = SNAP_THROUGH, 2 = SNAP_BACK. Branch: 0 = PRE_SNAP, 1 = POST_SNAP.

Status codes: 0 ok, 1 step failure (tolerance unreachable at dt_min),
2 non-finite state, 3 max steps exceeded.
"""

import math

PA = 101325.0
FALL_FRACTION = 0.05  # flyback share of the pressure ramp wave period

GAMMA = 2.0 - math.sqrt(2.0)
G2 = GAMMA / 2.0
D2 = (1.0 - GAMMA) / (2.0 - GAMMA)
C1 = 1.0 / (GAMMA * (2.0 - GAMMA))
C0 = -((1.0 - GAMMA) * (1.0 - GAMMA)) / (GAMMA * (2.0 - GAMMA))
# embedded third-order weights (interpolatory quadrature at nodes 0, gamma, 1)
B1 = 1.0 / (2.0 * (2.0 - GAMMA))
B3 = D2
BH1 = 0.5 - 1.0 / (6.0 * GAMMA)
BH2 = 1.0 / (6.0 * GAMMA * (1.0 - GAMMA))
BH3 = (2.0 - 3.0 * GAMMA) / (6.0 * (1.0 - GAMMA))
E1 = B1 - BH1
E2 = B1 - BH2
E3 = B3 - BH3

NEWTON_TOL = 0.03
NEWTON_MAXIT = 20
# cap on |dv_eq/dp| in Jacobian assembly, in units of fold span over
# threshold gap; the equilibrium slope is sqrt-singular at the fold and an
# uncapped value destroys the Newton direction without helping accuracy
DVEQ_CAP = 50.0

STATUS_OK = 0
STATUS_STEP_FAILURE = 1
STATUS_NONFINITE = 2
STATUS_MAX_STEPS = 3


def integrate(pack):
    """Run the network ODE. `pack` is a snapnet.netsim.KernelPack.

    Returns (status, ts, ys, branches, events, stats) where ts is a list of
    sample times, ys the state row per sample, branches the per-lobe branch
    row per sample, events a list of (t, lobe, kind, p_node) tuples and
    stats a dict of counters.
    """
    nn = pack.nn
    nl = pack.nl
    ne = pack.ne
    nb = pack.nb
    nfs = pack.nfs
    ny = nn + nl + 2
    i_inj = nn + nl
    i_vnt = nn + nl + 1

    clin = [float(x) for x in pack.node_clin]
    s0 = [float(x) for x in pack.node_s0]
    lnode = [int(x) for x in pack.lobe_node]
    lc3 = [float(x) for x in pack.lobe_c3]
    lc2 = [float(x) for x in pack.lobe_c2]
    lc1 = [float(x) for x in pack.lobe_c1]
    lc0 = [float(x) for x in pack.lobe_c0]
    lvlo = [float(x) for x in pack.lobe_v_fold_lo]
    lvhi = [float(x) for x in pack.lobe_v_fold_hi]
    lpst = [float(x) for x in pack.lobe_p_snap_through]
    lpsb = [float(x) for x in pack.lobe_p_snap_back]
    ltau = [float(x) for x in pack.lobe_tau]
    lsatlo = [float(x) for x in pack.lobe_sat_lo]
    lsathi = [float(x) for x in pack.lobe_sat_hi]
    veq_tol = [1e-13 * (lsathi[l] - lsatlo[l]) for l in range(nl)]
    slope_floor = [
        (lpst[l] - lpsb[l]) / (lvhi[l] - lvlo[l]) / DVEQ_CAP for l in range(nl)
    ]
    ea = [int(x) for x in pack.edge_a]
    eb = [int(x) for x in pack.edge_b]
    er = [float(x) for x in pack.edge_r]
    bkind = [int(x) for x in pack.bnd_kind]
    bamp = [float(x) for x in pack.bnd_amp]
    bfreq = [float(x) for x in pack.bnd_freq]
    fnode = [int(x) for x in pack.flow_node]
    famp = [float(x) for x in pack.flow_amp]
    ftgt = [float(x) for x in pack.flow_target]
    fdel = [float(x) for x in pack.flow_delay]
    ffreq = [float(x) for x in pack.flow_freq]
    # node -> lobe adjacency (CSR)
    adj_off = [int(x) for x in pack.adj_off]
    adj_idx = [int(x) for x in pack.adj_idx]
    bp = [float(x) for x in pack.breakpoints]
    nbp = len(bp)

    dt_min = float(pack.dt_min)
    dt_max = float(pack.dt_max)
    rtol = float(pack.rtol)
    atol = float(pack.atol)
    max_steps = int(pack.max_steps)

    y = [float(x) for x in pack.y0]
    branch = [int(x) for x in pack.branch0]

    # work storage
    s_sum = [0.0] * nn
    denom = [0.0] * nn
    p = [0.0] * nn
    alpha = [0.0] * nn
    beta = [0.0] * nn
    pb = [0.0] * nb
    veq = [0.0] * nl
    dveq = [0.0] * nl
    mat = [[0.0] * ny for _ in range(ny)]
    piv = [0] * ny
    wts = [0.0] * ny

    nfev = 0
    njev = 0
    naccept = 0
    nreject = 0

    def bnd_pressure(b, t):
        if bkind[b] == 0:
            return 0.0
        a = bamp[b]
        f = bfreq[b]
        if f == 0.0:
            return a
        period = 1.0 / f
        u = math.fmod(t, period)
        t_rise = period * (1.0 - FALL_FRACTION)
        if u < t_rise:
            return -a + 2.0 * a * (u / t_rise)
        return a - 2.0 * a * ((u - t_rise) / (period - t_rise))

    def flow_value(s, t):
        a = famp[s]
        if a == 0.0:
            return 0.0
        t_inj = ftgt[s] / a
        if ffreq[s] > 0.0:
            u = math.fmod(t, 1.0 / ffreq[s])
        else:
            u = t
        if u < t_inj:
            return a
        if u < t_inj + fdel[s]:
            return 0.0
        if u < 2.0 * t_inj + fdel[s]:
            return -a
        return 0.0

    def cubic(l, v):
        return ((lc3[l] * v + lc2[l]) * v + lc1[l]) * v + lc0[l]

    def dcubic(l, v):
        return (3.0 * lc3[l] * v + 2.0 * lc2[l]) * v + lc1[l]

    def lobe_equilibrium(l, pn, warm):
        """Equilibrium volume target and its pressure sensitivity on the
        current branch, clamped at the fold and at the saturation bounds."""
        if branch[l] == 0:
            if pn >= lpst[l]:
                return lvlo[l], 0.0
            lo = lsatlo[l]
            if cubic(l, lo) >= pn:
                return lo, 0.0
            hi = lvlo[l]
        else:
            if pn <= lpsb[l]:
                return lvhi[l], 0.0
            hi = lsathi[l]
            if cubic(l, hi) <= pn:
                return hi, 0.0
            lo = lvhi[l]
        v = warm
        if v <= lo or v >= hi:
            v = 0.5 * (lo + hi)
        tol = veq_tol[l]
        for _ in range(100):
            fv = cubic(l, v) - pn
            if fv > 0.0:
                hi = v
            else:
                lo = v
            d = dcubic(l, v)
            if d > 0.0:
                vn = v - fv / d
                if not (lo < vn < hi):
                    vn = 0.5 * (lo + hi)
            else:
                vn = 0.5 * (lo + hi)
            if abs(vn - v) <= tol:
                v = vn
                break
            v = vn
        d = dcubic(l, v)
        fl = slope_floor[l]
        if d < fl:
            d = fl
        return v, 1.0 / d

    def eval_rhs(t, yy, dy, want_jac):
        """Fill dy; when want_jac also fill mat with df/dy. Returns False on
        non-finite pressure."""
        nonlocal nfev, njev
        nfev += 1
        for i in range(nn):
            s_sum[i] = 0.0
        for l in range(nl):
            s_sum[lnode[l]] += yy[nn + l]
        for i in range(nn):
            den = clin[i] * PA + s_sum[i]
            denom[i] = den
            num = yy[i] + (s0[i] - s_sum[i])
            pi = num * PA / den
            p[i] = pi
            if want_jac:
                alpha[i] = PA / den
                beta[i] = -(pi + PA) / den
        for b in range(nb):
            pb[b] = bnd_pressure(b, t)
        for k in range(ny):
            dy[k] = 0.0
        if want_jac:
            njev += 1
            for r in range(ny):
                row = mat[r]
                for c in range(ny):
                    row[c] = 0.0
        for s in range(nfs):
            q = flow_value(s, t)
            dy[fnode[s]] += q
            dy[i_inj] += q
        for e in range(ne):
            a = ea[e]
            b = eb[e]
            pa_ = p[a] if a < nn else pb[a - nn]
            pb_ = p[b] if b < nn else pb[b - nn]
            q = (pa_ - pb_) / er[e]
            if a < nn:
                dy[a] -= q
            elif bkind[a - nn] == 0:
                dy[i_vnt] -= q
            else:
                dy[i_inj] += q
            if b < nn:
                dy[b] += q
            elif bkind[b - nn] == 0:
                dy[i_vnt] += q
            else:
                dy[i_inj] -= q
            if want_jac:
                g = 1.0 / er[e]
                if a < nn:
                    row_a = a
                elif bkind[a - nn] == 0:
                    row_a = i_vnt
                else:
                    row_a = i_inj
                if b < nn:
                    row_b = b
                elif bkind[b - nn] == 0:
                    row_b = i_vnt
                else:
                    row_b = i_inj
                # d q / d (columns of p_a)
                if a < nn:
                    mat[row_a][a] -= g * alpha[a]
                    mat[row_b][a] += g * alpha[a]
                    for kk in range(adj_off[a], adj_off[a + 1]):
                        col = nn + adj_idx[kk]
                        mat[row_a][col] -= g * beta[a]
                        mat[row_b][col] += g * beta[a]
                if b < nn:
                    mat[row_a][b] += g * alpha[b]
                    mat[row_b][b] -= g * alpha[b]
                    for kk in range(adj_off[b], adj_off[b + 1]):
                        col = nn + adj_idx[kk]
                        mat[row_a][col] += g * beta[b]
                        mat[row_b][col] -= g * beta[b]
        for l in range(nl):
            i = lnode[l]
            ve, dv = lobe_equilibrium(l, p[i], yy[nn + l])
            veq[l] = ve
            dveq[l] = dv
            itau = 1.0 / ltau[l]
            dy[nn + l] = (ve - yy[nn + l]) * itau
            if want_jac:
                row = nn + l
                mat[row][row] -= itau
                g = dv * itau
                mat[row][i] += g * alpha[i]
                for kk in range(adj_off[i], adj_off[i + 1]):
                    col = nn + adj_idx[kk]
                    mat[row][col] += g * beta[i]
        for i in range(nn):
            if not math.isfinite(p[i]):
                return False
        return True

    def lu_factor(n):
        for k in range(n):
            amax = abs(mat[k][k])
            pidx = k
            for i in range(k + 1, n):
                a = abs(mat[i][k])
                if a > amax:
                    amax = a
                    pidx = i
            if amax == 0.0:
                return False
            piv[k] = pidx
            if pidx != k:
                mat[k], mat[pidx] = mat[pidx], mat[k]
            akk = mat[k][k]
            row_k = mat[k]
            for i in range(k + 1, n):
                row_i = mat[i]
                lik = row_i[k] / akk
                row_i[k] = lik
                if lik != 0.0:
                    for j in range(k + 1, n):
                        row_i[j] -= lik * row_k[j]
        return True

    def lu_solve_full(n, x):
        for k in range(n):
            pidx = piv[k]
            if pidx != k:
                x[k], x[pidx] = x[pidx], x[k]
        for k in range(n):
            xk = x[k]
            if xk != 0.0:
                for i in range(k + 1, n):
                    x[i] -= mat[i][k] * xk
        for k in range(n - 1, -1, -1):
            xk = x[k]
            row_k = mat[k]
            for j in range(k + 1, n):
                xk -= row_k[j] * x[j]
            x[k] = xk / row_k[k]
        return x

    def wrms(x):
        acc = 0.0
        for i in range(ny):
            r = x[i] / wts[i]
            acc += r * r
        return math.sqrt(acc / ny)

    f0 = [0.0] * ny
    f1 = [0.0] * ny
    f2 = [0.0] * ny
    fz = [0.0] * ny
    rhs_c = [0.0] * ny
    z = [0.0] * ny
    dz = [0.0] * ny
    est = [0.0] * ny

    def solve_stage(t_stage, coef, f_out):
        """Solve z = rhs_c + coef*f(t_stage, z) by full Newton; z holds the
        predictor on entry and the solution on exit. Fills f_out with
        f(t_stage, z). Returns True on convergence (matrix left factored)."""
        prev = 0.0
        for it in range(NEWTON_MAXIT):
            okf = eval_rhs(t_stage, z, fz, True)
            if not okf:
                return False
            for r in range(ny):
                row = mat[r]
                for c in range(ny):
                    row[c] = -coef * row[c]
                row[r] += 1.0
            if not lu_factor(ny):
                return False
            for i in range(ny):
                dz[i] = rhs_c[i] + coef * fz[i] - z[i]
            lu_solve_full(ny, dz)
            bad = False
            for i in range(ny):
                if not math.isfinite(dz[i]):
                    bad = True
                    break
                z[i] += dz[i]
            if bad:
                return False
            nrm = wrms(dz)
            if nrm < NEWTON_TOL:
                okf = eval_rhs(t_stage, z, f_out, False)
                return okf
            if it > 2 and nrm > 4.0 * prev:
                return False
            prev = nrm
        return False

    def step_core(t, h, want_err):
        """One TR-BDF2 step from (t, y). Returns (ok, z2, err)."""
        # trapezoidal stage to t + gamma*h
        ch = G2 * h
        for i in range(ny):
            rhs_c[i] = y[i] + ch * f0[i]
            z[i] = y[i] + (GAMMA * h) * f0[i]
        if not solve_stage(t + GAMMA * h, ch, f1):
            return False, None, 0.0
        z1 = z[:]
        # BDF2 stage to t + h
        ch = D2 * h
        for i in range(ny):
            rhs_c[i] = C1 * z1[i] + C0 * y[i]
            z[i] = rhs_c[i] + ch * f1[i]
        if not solve_stage(t + h, ch, f2):
            return False, None, 0.0
        err = 0.0
        if want_err:
            for i in range(ny):
                est[i] = h * (E1 * f0[i] + E2 * f1[i] + E3 * f2[i])
            lu_solve_full(ny, est)
            err = wrms(est)
            if not math.isfinite(err):
                return False, None, 0.0
        return True, z[:], err

    def node_pressures(yy):
        for i in range(nn):
            s_sum[i] = 0.0
        for l in range(nl):
            s_sum[lnode[l]] += yy[nn + l]
        for i in range(nn):
            den = clin[i] * PA + s_sum[i]
            num = yy[i] + (s0[i] - s_sum[i])
            p[i] = num * PA / den

    def crossed(l, yy):
        node_pressures(yy)
        pn = p[lnode[l]]
        if branch[l] == 0:
            return 1 if pn > lpst[l] else 0
        return 2 if pn < lpsb[l] else 0

    ts = [0.0]
    ys = [y[:]]
    branches = [branch[:]]
    events = []

    t = 0.0
    ibp = 0
    h = 10.0 * dt_min
    if h > dt_max:
        h = dt_max
    status = STATUS_OK
    fail_t = -1.0
    fail_h = 0.0
    fail_err = 0.0

    while ibp < nbp:
        if naccept + nreject >= max_steps:
            status = STATUS_MAX_STEPS
            break
        for i in range(ny):
            wts[i] = atol + rtol * abs(y[i])
        if not eval_rhs(t, y, f0, False):
            status = STATUS_NONFINITE
            break
        hb = bp[ibp] - t
        if h < hb:
            h_try = h
            hit = False
        else:
            h_try = hb
            hit = True
        # dt_min is the controller floor; inside the landing zone of a
        # breakpoint the step may legitimately shrink below it
        h_floor = 1e-3 * dt_min if hb < dt_min else dt_min
        ok, z2, err = step_core(t, h_try, True)
        if not ok:
            nreject += 1
            if h_try <= h_floor * (1.0 + 1e-9):
                status = STATUS_STEP_FAILURE
                fail_t, fail_h, fail_err = t, h_try, -1.0
                break
            h = 0.5 * h_try
            if h < h_floor:
                h = h_floor
            continue
        if err > 1.0:
            nreject += 1
            if h_try <= h_floor * (1.0 + 1e-9):
                status = STATUS_STEP_FAILURE
                fail_t, fail_h, fail_err = t, h_try, err
                break
            fac = 0.9 * pow(err, -1.0 / 3.0)
            if fac < 0.1:
                fac = 0.1
            if fac > 0.5:
                fac = 0.5
            h = h_try * fac
            if h < h_floor:
                h = h_floor
            continue
        naccept += 1
        any_cross = 0
        for l in range(nl):
            if crossed(l, z2) != 0:
                any_cross = 1
                break
        if any_cross == 0:
            t = bp[ibp] if hit else t + h_try
            y = z2
            ts.append(t)
            ys.append(y[:])
            branches.append(branch[:])
            if err < 1e-12:
                fac = 5.0
            else:
                fac = 0.9 * pow(err, -1.0 / 3.0)
                if fac < 0.2:
                    fac = 0.2
                if fac > 5.0:
                    fac = 5.0
            h = h_try * fac
            if h < dt_min:
                h = dt_min
            if h > dt_max:
                h = dt_max
            while ibp < nbp and bp[ibp] <= t:
                ibp += 1
            continue
        # snap event inside this step: bisect the crossing to dt_min
        lo = 0.0
        hi = h_try
        y_hi = z2
        y_lo = None
        while hi - lo > dt_min:
            mid = 0.5 * (lo + hi)
            ok, zm, _ = step_core(t, mid, False)
            if not ok:
                hi = mid
                y_hi = None
                continue
            cm = 0
            for l in range(nl):
                if crossed(l, zm) != 0:
                    cm = 1
                    break
            if cm:
                hi = mid
                y_hi = zm
            else:
                lo = mid
                y_lo = zm
        if y_hi is None:
            ok, y_hi, _ = step_core(t, hi, False)
            if not ok:
                # the crossing step itself will not converge; fall back to
                # the last converged pre-crossing state and let the outer
                # loop re-approach the fold with fresh, smaller steps
                if y_lo is None:
                    status = STATUS_STEP_FAILURE
                    fail_t, fail_h, fail_err = t, hi, -1.0
                    break
                t = t + lo
                y = y_lo
                ts.append(t)
                ys.append(y[:])
                branches.append(branch[:])
                h = dt_min
                while ibp < nbp and bp[ibp] <= t:
                    ibp += 1
                continue
        t = t + hi
        y = y_hi
        tau_new = 0.0
        for l in range(nl):
            kind = crossed(l, y)
            if kind != 0:
                node_pressures(y)
                events.append((t, l, kind, p[lnode[l]]))
                branch[l] = 1 - branch[l]
                if tau_new == 0.0 or ltau[l] < tau_new:
                    tau_new = ltau[l]
        ts.append(t)
        ys.append(y[:])
        branches.append(branch[:])
        h = tau_new / 5.0
        if h > h_try:
            h = h_try
        if h < dt_min:
            h = dt_min
        if h > dt_max:
            h = dt_max
        while ibp < nbp and bp[ibp] <= t:
            ibp += 1

    stats = {
        "naccept": naccept,
        "nreject": nreject,
        "nfev": nfev,
        "njev": njev,
    }
    if status != STATUS_OK:
        stats["fail_t"] = fail_t
        stats["fail_h"] = fail_h
        stats["fail_err"] = fail_err
    return status, ts, ys, branches, events, stats
