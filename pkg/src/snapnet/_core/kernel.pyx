# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel.

Twin of the pure-Python kernel in pykernel.py: same algorithm, same
floating-point operation order, bit-identical results (the extension is
built with -ffp-contract=off so no fused multiply-adds sneak in). Keep the
two in lockstep when editing either; the parity test suite compares them
sample-for-sample.
"""

from libc.math cimport fabs, fmod, isfinite, pow, sqrt

import numpy as np


cdef double PA = 101325.0
cdef double FALL_FRACTION = 0.05

cdef double GAMMA = 2.0 - sqrt(2.0)
cdef double G2 = GAMMA / 2.0
cdef double D2 = (1.0 - GAMMA) / (2.0 - GAMMA)
cdef double C1 = 1.0 / (GAMMA * (2.0 - GAMMA))
cdef double C0 = -((1.0 - GAMMA) * (1.0 - GAMMA)) / (GAMMA * (2.0 - GAMMA))
cdef double B1 = 1.0 / (2.0 * (2.0 - GAMMA))
cdef double B3 = D2
cdef double BH1 = 0.5 - 1.0 / (6.0 * GAMMA)
cdef double BH2 = 1.0 / (6.0 * GAMMA * (1.0 - GAMMA))
cdef double BH3 = (2.0 - 3.0 * GAMMA) / (6.0 * (1.0 - GAMMA))
cdef double E1 = B1 - BH1
cdef double E2 = B1 - BH2
cdef double E3 = B3 - BH3

cdef double NEWTON_TOL = 0.03
cdef int NEWTON_MAXIT = 20
cdef double DVEQ_CAP = 50.0

STATUS_OK = 0
STATUS_STEP_FAILURE = 1
STATUS_NONFINITE = 2
STATUS_MAX_STEPS = 3


cdef class _State:
    cdef int nn, nl, ne, nb, nfs, ny, i_inj, i_vnt, nbp
    cdef double[:] clin, s0
    cdef int[:] lnode
    cdef double[:] lc3, lc2, lc1, lc0, lvlo, lvhi, lpst, lpsb, ltau
    cdef double[:] lsatlo, lsathi, veq_tol, slope_floor
    cdef int[:] ea, eb
    cdef double[:] er
    cdef int[:] bkind
    cdef double[:] bamp, bfreq
    cdef int[:] fnode
    cdef double[:] famp, ftgt, fdel, ffreq
    cdef int[:] adj_off, adj_idx
    cdef double[:] bp
    cdef double dt_min, dt_max, rtol, atol
    cdef long max_steps

    cdef double[:] y
    cdef int[:] branch
    cdef double[:] s_sum, denom, p, alpha, beta, pb, veq, dveq
    cdef double[:, :] mat
    cdef int[:] piv
    cdef double[:] wts
    cdef double[:] f0, f1, f2, fz, rhs_c, z, dz, est, z1, y_tmp

    cdef long nfev, njev, naccept, nreject

    cdef double bnd_pressure(self, int b, double t):
        cdef double a, f, period, u, t_rise
        if self.bkind[b] == 0:
            return 0.0
        a = self.bamp[b]
        f = self.bfreq[b]
        if f == 0.0:
            return a
        period = 1.0 / f
        u = fmod(t, period)
        t_rise = period * (1.0 - FALL_FRACTION)
        if u < t_rise:
            return -a + 2.0 * a * (u / t_rise)
        return a - 2.0 * a * ((u - t_rise) / (period - t_rise))

    cdef double flow_value(self, int s, double t):
        cdef double a, t_inj, u
        a = self.famp[s]
        if a == 0.0:
            return 0.0
        t_inj = self.ftgt[s] / a
        if self.ffreq[s] > 0.0:
            u = fmod(t, 1.0 / self.ffreq[s])
        else:
            u = t
        if u < t_inj:
            return a
        if u < t_inj + self.fdel[s]:
            return 0.0
        if u < 2.0 * t_inj + self.fdel[s]:
            return -a
        return 0.0

    cdef double cubic(self, int l, double v):
        return ((self.lc3[l] * v + self.lc2[l]) * v + self.lc1[l]) * v + self.lc0[l]

    cdef double dcubic(self, int l, double v):
        return (3.0 * self.lc3[l] * v + 2.0 * self.lc2[l]) * v + self.lc1[l]

    cdef void lobe_equilibrium(self, int l, double pn, double warm,
                               double* ve_out, double* dv_out):
        cdef double lo, hi, v, tol, fv, d, vn, fl
        cdef int it
        if self.branch[l] == 0:
            if pn >= self.lpst[l]:
                ve_out[0] = self.lvlo[l]
                dv_out[0] = 0.0
                return
            lo = self.lsatlo[l]
            if self.cubic(l, lo) >= pn:
                ve_out[0] = lo
                dv_out[0] = 0.0
                return
            hi = self.lvlo[l]
        else:
            if pn <= self.lpsb[l]:
                ve_out[0] = self.lvhi[l]
                dv_out[0] = 0.0
                return
            hi = self.lsathi[l]
            if self.cubic(l, hi) <= pn:
                ve_out[0] = hi
                dv_out[0] = 0.0
                return
            lo = self.lvhi[l]
        v = warm
        if v <= lo or v >= hi:
            v = 0.5 * (lo + hi)
        tol = self.veq_tol[l]
        for it in range(100):
            fv = self.cubic(l, v) - pn
            if fv > 0.0:
                hi = v
            else:
                lo = v
            d = self.dcubic(l, v)
            if d > 0.0:
                vn = v - fv / d
                if not (lo < vn < hi):
                    vn = 0.5 * (lo + hi)
            else:
                vn = 0.5 * (lo + hi)
            if fabs(vn - v) <= tol:
                v = vn
                break
            v = vn
        d = self.dcubic(l, v)
        fl = self.slope_floor[l]
        if d < fl:
            d = fl
        ve_out[0] = v
        dv_out[0] = 1.0 / d

    cdef bint eval_rhs(self, double t, double[:] yy, double[:] dy, bint want_jac):
        cdef int i, l, b, s, e, a, k, kk, col, r, c, row_a, row_b
        cdef double den, num, pi, q, pa_, pb_, g, ve, dv, itau
        cdef int nn = self.nn, nl = self.nl, ny = self.ny
        cdef double ve_buf, dv_buf
        self.nfev += 1
        for i in range(nn):
            self.s_sum[i] = 0.0
        for l in range(nl):
            self.s_sum[self.lnode[l]] += yy[nn + l]
        for i in range(nn):
            den = self.clin[i] * PA + self.s_sum[i]
            self.denom[i] = den
            num = yy[i] + (self.s0[i] - self.s_sum[i])
            pi = num * PA / den
            self.p[i] = pi
            if want_jac:
                self.alpha[i] = PA / den
                self.beta[i] = -(pi + PA) / den
        for b in range(self.nb):
            self.pb[b] = self.bnd_pressure(b, t)
        for k in range(ny):
            dy[k] = 0.0
        if want_jac:
            self.njev += 1
            for r in range(ny):
                for c in range(ny):
                    self.mat[r, c] = 0.0
        for s in range(self.nfs):
            q = self.flow_value(s, t)
            dy[self.fnode[s]] += q
            dy[self.i_inj] += q
        for e in range(self.ne):
            a = self.ea[e]
            b = self.eb[e]
            pa_ = self.p[a] if a < nn else self.pb[a - nn]
            pb_ = self.p[b] if b < nn else self.pb[b - nn]
            q = (pa_ - pb_) / self.er[e]
            if a < nn:
                dy[a] -= q
            elif self.bkind[a - nn] == 0:
                dy[self.i_vnt] -= q
            else:
                dy[self.i_inj] += q
            if b < nn:
                dy[b] += q
            elif self.bkind[b - nn] == 0:
                dy[self.i_vnt] += q
            else:
                dy[self.i_inj] -= q
            if want_jac:
                g = 1.0 / self.er[e]
                if a < nn:
                    row_a = a
                elif self.bkind[a - nn] == 0:
                    row_a = self.i_vnt
                else:
                    row_a = self.i_inj
                if b < nn:
                    row_b = b
                elif self.bkind[b - nn] == 0:
                    row_b = self.i_vnt
                else:
                    row_b = self.i_inj
                if a < nn:
                    self.mat[row_a, a] -= g * self.alpha[a]
                    self.mat[row_b, a] += g * self.alpha[a]
                    for kk in range(self.adj_off[a], self.adj_off[a + 1]):
                        col = nn + self.adj_idx[kk]
                        self.mat[row_a, col] -= g * self.beta[a]
                        self.mat[row_b, col] += g * self.beta[a]
                if b < nn:
                    self.mat[row_a, b] += g * self.alpha[b]
                    self.mat[row_b, b] -= g * self.alpha[b]
                    for kk in range(self.adj_off[b], self.adj_off[b + 1]):
                        col = nn + self.adj_idx[kk]
                        self.mat[row_a, col] += g * self.beta[b]
                        self.mat[row_b, col] -= g * self.beta[b]
        for l in range(nl):
            i = self.lnode[l]
            self.lobe_equilibrium(l, self.p[i], yy[nn + l], &ve_buf, &dv_buf)
            self.veq[l] = ve_buf
            self.dveq[l] = dv_buf
            itau = 1.0 / self.ltau[l]
            dy[nn + l] = (ve_buf - yy[nn + l]) * itau
            if want_jac:
                r = nn + l
                self.mat[r, r] -= itau
                g = dv_buf * itau
                self.mat[r, i] += g * self.alpha[i]
                for kk in range(self.adj_off[i], self.adj_off[i + 1]):
                    col = nn + self.adj_idx[kk]
                    self.mat[r, col] += g * self.beta[i]
        for i in range(nn):
            if not isfinite(self.p[i]):
                return False
        return True

    cdef bint lu_factor(self, int n):
        cdef int k, i, j, pidx
        cdef double amax, a, akk, lik, tmp
        for k in range(n):
            amax = fabs(self.mat[k, k])
            pidx = k
            for i in range(k + 1, n):
                a = fabs(self.mat[i, k])
                if a > amax:
                    amax = a
                    pidx = i
            if amax == 0.0:
                return False
            self.piv[k] = pidx
            if pidx != k:
                for j in range(n):
                    tmp = self.mat[k, j]
                    self.mat[k, j] = self.mat[pidx, j]
                    self.mat[pidx, j] = tmp
            akk = self.mat[k, k]
            for i in range(k + 1, n):
                lik = self.mat[i, k] / akk
                self.mat[i, k] = lik
                if lik != 0.0:
                    for j in range(k + 1, n):
                        self.mat[i, j] -= lik * self.mat[k, j]
        return True

    cdef void lu_solve_full(self, int n, double[:] x):
        cdef int k, i, j, pidx
        cdef double xk, tmp
        for k in range(n):
            pidx = self.piv[k]
            if pidx != k:
                tmp = x[k]
                x[k] = x[pidx]
                x[pidx] = tmp
        for k in range(n):
            xk = x[k]
            if xk != 0.0:
                for i in range(k + 1, n):
                    x[i] -= self.mat[i, k] * xk
        for k in range(n - 1, -1, -1):
            xk = x[k]
            for j in range(k + 1, n):
                xk -= self.mat[k, j] * x[j]
            x[k] = xk / self.mat[k, k]

    cdef double wrms(self, double[:] x):
        cdef double acc = 0.0, r
        cdef int i
        for i in range(self.ny):
            r = x[i] / self.wts[i]
            acc += r * r
        return sqrt(acc / self.ny)

    cdef bint solve_stage(self, double t_stage, double coef, double[:] f_out):
        cdef double prev = 0.0, nrm
        cdef int it, i, r, c
        cdef bint okf, bad
        for it in range(NEWTON_MAXIT):
            okf = self.eval_rhs(t_stage, self.z, self.fz, True)
            if not okf:
                return False
            for r in range(self.ny):
                for c in range(self.ny):
                    self.mat[r, c] = -coef * self.mat[r, c]
                self.mat[r, r] += 1.0
            if not self.lu_factor(self.ny):
                return False
            for i in range(self.ny):
                self.dz[i] = self.rhs_c[i] + coef * self.fz[i] - self.z[i]
            self.lu_solve_full(self.ny, self.dz)
            bad = False
            for i in range(self.ny):
                if not isfinite(self.dz[i]):
                    bad = True
                    break
                self.z[i] += self.dz[i]
            if bad:
                return False
            nrm = self.wrms(self.dz)
            if nrm < NEWTON_TOL:
                okf = self.eval_rhs(t_stage, self.z, f_out, False)
                return okf
            if it > 2 and nrm > 4.0 * prev:
                return False
            prev = nrm
        return False

    cdef bint step_core(self, double t, double h, bint want_err,
                        double[:] z_out, double* err_out):
        cdef double ch, err
        cdef int i
        ch = G2 * h
        for i in range(self.ny):
            self.rhs_c[i] = self.y[i] + ch * self.f0[i]
            self.z[i] = self.y[i] + (GAMMA * h) * self.f0[i]
        if not self.solve_stage(t + GAMMA * h, ch, self.f1):
            return False
        for i in range(self.ny):
            self.z1[i] = self.z[i]
        ch = D2 * h
        for i in range(self.ny):
            self.rhs_c[i] = C1 * self.z1[i] + C0 * self.y[i]
            self.z[i] = self.rhs_c[i] + ch * self.f1[i]
        if not self.solve_stage(t + h, ch, self.f2):
            return False
        err = 0.0
        if want_err:
            for i in range(self.ny):
                self.est[i] = h * (E1 * self.f0[i] + E2 * self.f1[i] + E3 * self.f2[i])
            self.lu_solve_full(self.ny, self.est)
            err = self.wrms(self.est)
            if not isfinite(err):
                return False
        for i in range(self.ny):
            z_out[i] = self.z[i]
        err_out[0] = err
        return True

    cdef void node_pressures(self, double[:] yy):
        cdef int i, l
        cdef double den, num
        for i in range(self.nn):
            self.s_sum[i] = 0.0
        for l in range(self.nl):
            self.s_sum[self.lnode[l]] += yy[self.nn + l]
        for i in range(self.nn):
            den = self.clin[i] * PA + self.s_sum[i]
            num = yy[i] + (self.s0[i] - self.s_sum[i])
            self.p[i] = num * PA / den

    cdef int crossed(self, int l, double[:] yy):
        cdef double pn
        self.node_pressures(yy)
        pn = self.p[self.lnode[l]]
        if self.branch[l] == 0:
            return 1 if pn > self.lpst[l] else 0
        return 2 if pn < self.lpsb[l] else 0


def integrate(pack):
    """Run the network ODE; same contract as pykernel.integrate."""
    cdef _State st = _State()
    cdef int i, l

    st.nn = int(pack.nn)
    st.nl = int(pack.nl)
    st.ne = int(pack.ne)
    st.nb = int(pack.nb)
    st.nfs = int(pack.nfs)
    st.ny = st.nn + st.nl + 2
    st.i_inj = st.nn + st.nl
    st.i_vnt = st.nn + st.nl + 1

    st.clin = np.ascontiguousarray(pack.node_clin, dtype=np.float64)
    st.s0 = np.ascontiguousarray(pack.node_s0, dtype=np.float64)
    st.lnode = np.ascontiguousarray(pack.lobe_node, dtype=np.int32)
    st.lc3 = np.ascontiguousarray(pack.lobe_c3, dtype=np.float64)
    st.lc2 = np.ascontiguousarray(pack.lobe_c2, dtype=np.float64)
    st.lc1 = np.ascontiguousarray(pack.lobe_c1, dtype=np.float64)
    st.lc0 = np.ascontiguousarray(pack.lobe_c0, dtype=np.float64)
    st.lvlo = np.ascontiguousarray(pack.lobe_v_fold_lo, dtype=np.float64)
    st.lvhi = np.ascontiguousarray(pack.lobe_v_fold_hi, dtype=np.float64)
    st.lpst = np.ascontiguousarray(pack.lobe_p_snap_through, dtype=np.float64)
    st.lpsb = np.ascontiguousarray(pack.lobe_p_snap_back, dtype=np.float64)
    st.ltau = np.ascontiguousarray(pack.lobe_tau, dtype=np.float64)
    st.lsatlo = np.ascontiguousarray(pack.lobe_sat_lo, dtype=np.float64)
    st.lsathi = np.ascontiguousarray(pack.lobe_sat_hi, dtype=np.float64)

    veq_tol = np.empty(st.nl, dtype=np.float64)
    slope_floor = np.empty(st.nl, dtype=np.float64)
    for l in range(st.nl):
        veq_tol[l] = 1e-13 * (st.lsathi[l] - st.lsatlo[l])
        slope_floor[l] = (st.lpst[l] - st.lpsb[l]) / (st.lvhi[l] - st.lvlo[l]) / DVEQ_CAP
    st.veq_tol = veq_tol
    st.slope_floor = slope_floor

    st.ea = np.ascontiguousarray(pack.edge_a, dtype=np.int32)
    st.eb = np.ascontiguousarray(pack.edge_b, dtype=np.int32)
    st.er = np.ascontiguousarray(pack.edge_r, dtype=np.float64)
    st.bkind = np.ascontiguousarray(pack.bnd_kind, dtype=np.int32)
    st.bamp = np.ascontiguousarray(pack.bnd_amp, dtype=np.float64)
    st.bfreq = np.ascontiguousarray(pack.bnd_freq, dtype=np.float64)
    st.fnode = np.ascontiguousarray(pack.flow_node, dtype=np.int32)
    st.famp = np.ascontiguousarray(pack.flow_amp, dtype=np.float64)
    st.ftgt = np.ascontiguousarray(pack.flow_target, dtype=np.float64)
    st.fdel = np.ascontiguousarray(pack.flow_delay, dtype=np.float64)
    st.ffreq = np.ascontiguousarray(pack.flow_freq, dtype=np.float64)
    st.adj_off = np.ascontiguousarray(pack.adj_off, dtype=np.int32)
    st.adj_idx = np.ascontiguousarray(pack.adj_idx, dtype=np.int32)
    bp_arr = np.ascontiguousarray(pack.breakpoints, dtype=np.float64)
    st.bp = bp_arr
    st.nbp = len(bp_arr)

    st.dt_min = float(pack.dt_min)
    st.dt_max = float(pack.dt_max)
    st.rtol = float(pack.rtol)
    st.atol = float(pack.atol)
    st.max_steps = int(pack.max_steps)

    y_arr = np.array(pack.y0, dtype=np.float64).copy()
    st.y = y_arr
    branch_arr = np.array(pack.branch0, dtype=np.int32).copy()
    st.branch = branch_arr

    cdef int ny = st.ny
    st.s_sum = np.zeros(st.nn)
    st.denom = np.zeros(st.nn)
    st.p = np.zeros(st.nn)
    st.alpha = np.zeros(st.nn)
    st.beta = np.zeros(st.nn)
    st.pb = np.zeros(max(st.nb, 1))
    st.veq = np.zeros(max(st.nl, 1))
    st.dveq = np.zeros(max(st.nl, 1))
    st.mat = np.zeros((ny, ny))
    st.piv = np.zeros(ny, dtype=np.int32)
    st.wts = np.zeros(ny)
    st.f0 = np.zeros(ny)
    st.f1 = np.zeros(ny)
    st.f2 = np.zeros(ny)
    st.fz = np.zeros(ny)
    st.rhs_c = np.zeros(ny)
    st.z = np.zeros(ny)
    st.dz = np.zeros(ny)
    st.est = np.zeros(ny)
    st.z1 = np.zeros(ny)
    st.nfev = 0
    st.njev = 0
    st.naccept = 0
    st.nreject = 0

    z2_arr = np.zeros(ny)
    zm_arr = np.zeros(ny)
    yhi_arr = np.zeros(ny)
    ylo_arr = np.zeros(ny)
    cdef double[:] z2 = z2_arr
    cdef double[:] zm = zm_arr
    cdef double[:] y_hi_v = yhi_arr
    cdef double[:] y_lo_v = ylo_arr

    ts = [0.0]
    ys = [np.array(y_arr).tolist()]
    branches = [np.array(branch_arr).tolist()]
    events = []

    cdef double t = 0.0
    cdef int ibp = 0
    cdef double h = 10.0 * st.dt_min
    if h > st.dt_max:
        h = st.dt_max
    cdef int status = 0
    cdef double fail_t = -1.0, fail_h = 0.0, fail_err = 0.0

    cdef double hb, h_try, h_floor, err, fac, lo, hi, mid, tau_new
    cdef bint hit, ok, have_hi, have_lo
    cdef int any_cross, cm, kind

    while ibp < st.nbp:
        if st.naccept + st.nreject >= st.max_steps:
            status = 3
            break
        for i in range(ny):
            st.wts[i] = st.atol + st.rtol * fabs(st.y[i])
        if not st.eval_rhs(t, st.y, st.f0, False):
            status = 2
            break
        hb = st.bp[ibp] - t
        if h < hb:
            h_try = h
            hit = False
        else:
            h_try = hb
            hit = True
        h_floor = 1e-3 * st.dt_min if hb < st.dt_min else st.dt_min
        ok = st.step_core(t, h_try, True, z2, &err)
        if not ok:
            st.nreject += 1
            if h_try <= h_floor * (1.0 + 1e-9):
                status = 1
                fail_t = t
                fail_h = h_try
                fail_err = -1.0
                break
            h = 0.5 * h_try
            if h < h_floor:
                h = h_floor
            continue
        if err > 1.0:
            st.nreject += 1
            if h_try <= h_floor * (1.0 + 1e-9):
                status = 1
                fail_t = t
                fail_h = h_try
                fail_err = err
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
        st.naccept += 1
        any_cross = 0
        for l in range(st.nl):
            if st.crossed(l, z2) != 0:
                any_cross = 1
                break
        if any_cross == 0:
            t = st.bp[ibp] if hit else t + h_try
            for i in range(ny):
                st.y[i] = z2[i]
            ts.append(t)
            ys.append(np.array(y_arr).tolist())
            branches.append(np.array(branch_arr).tolist())
            if err < 1e-12:
                fac = 5.0
            else:
                fac = 0.9 * pow(err, -1.0 / 3.0)
                if fac < 0.2:
                    fac = 0.2
                if fac > 5.0:
                    fac = 5.0
            h = h_try * fac
            if h < st.dt_min:
                h = st.dt_min
            if h > st.dt_max:
                h = st.dt_max
            while ibp < st.nbp and st.bp[ibp] <= t:
                ibp += 1
            continue
        # snap event inside this step: bisect the crossing to dt_min
        lo = 0.0
        hi = h_try
        for i in range(ny):
            y_hi_v[i] = z2[i]
        have_hi = True
        have_lo = False
        while hi - lo > st.dt_min:
            mid = 0.5 * (lo + hi)
            ok = st.step_core(t, mid, False, zm, &err)
            if not ok:
                hi = mid
                have_hi = False
                continue
            cm = 0
            for l in range(st.nl):
                if st.crossed(l, zm) != 0:
                    cm = 1
                    break
            if cm:
                hi = mid
                for i in range(ny):
                    y_hi_v[i] = zm[i]
                have_hi = True
            else:
                lo = mid
                for i in range(ny):
                    y_lo_v[i] = zm[i]
                have_lo = True
        if not have_hi:
            ok = st.step_core(t, hi, False, y_hi_v, &err)
            if not ok:
                if not have_lo:
                    status = 1
                    fail_t = t
                    fail_h = hi
                    fail_err = -1.0
                    break
                t = t + lo
                for i in range(ny):
                    st.y[i] = y_lo_v[i]
                ts.append(t)
                ys.append(np.array(y_arr).tolist())
                branches.append(np.array(branch_arr).tolist())
                h = st.dt_min
                while ibp < st.nbp and st.bp[ibp] <= t:
                    ibp += 1
                continue
        t = t + hi
        for i in range(ny):
            st.y[i] = y_hi_v[i]
        tau_new = 0.0
        for l in range(st.nl):
            kind = st.crossed(l, st.y)
            if kind != 0:
                st.node_pressures(st.y)
                events.append((t, l, kind, st.p[st.lnode[l]]))
                st.branch[l] = 1 - st.branch[l]
                if tau_new == 0.0 or st.ltau[l] < tau_new:
                    tau_new = st.ltau[l]
        ts.append(t)
        ys.append(np.array(y_arr).tolist())
        branches.append(np.array(branch_arr).tolist())
        h = tau_new / 5.0
        if h > h_try:
            h = h_try
        if h < st.dt_min:
            h = st.dt_min
        if h > st.dt_max:
            h = st.dt_max
        while ibp < st.nbp and st.bp[ibp] <= t:
            ibp += 1

    stats = {
        "naccept": st.naccept,
        "nreject": st.nreject,
        "nfev": st.nfev,
        "njev": st.njev,
    }
    if status != 0:
        stats["fail_t"] = fail_t
        stats["fail_h"] = fail_h
        stats["fail_err"] = fail_err
    return status, ts, ys, branches, events, stats
