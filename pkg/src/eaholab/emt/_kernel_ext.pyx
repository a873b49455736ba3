# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel; arithmetic mirrors ``_kernel_py`` line by line."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, atan2, fabs

cnp.import_array()

cdef enum:
    AHO = 0
    EAHO = 1
    DROOP = 2
    P_G1 = 0
    P_G2 = 1
    P_WP = 2
    P_WQ = 3
    P_PREF = 4
    P_QREF = 5
    P_W0 = 6
    P_VP0 = 7
    P_LF = 8
    P_RF = 9
    P_K = 10
    N_IG_STATE = 0
    N_CONNECTED = 1
    N_RLOAD = 2
    N_LG = 3
    N_RG = 4
    N_VG = 5
    N_WG = 6
    OBS_PER_INV = 10

cdef double DIVERGENCE_BOUND = 1e15


cdef void _rhs(const double[::1] x, const long[::1] kinds, const long[::1] offsets,
               const double[:, ::1] inv, const double[::1] net,
               double[::1] dx, double[::1] aux) noexcept nogil:
    cdef Py_ssize_t n = kinds.shape[0]
    cdef Py_ssize_t nx = x.shape[0]
    cdef Py_ssize_t j, o, si, a, ii
    cdef double theta_g = x[nx - 1]
    cdef bint connected = net[N_CONNECTED] > 0.5
    cdef double r_load = net[N_RLOAD]
    cdef bint ig_state = net[N_IG_STATE] > 0.5
    cdef double vg = net[N_VG] * cos(theta_g)
    cdef double s_i = 0.0, sum_y = 0.0, sum_g = 0.0
    cdef double pc, qc, th, pf, qf, x1, x2, i, vp, va, vb, p, q, w, vp2, iar, ibr, g, amp, w0, dva, dvb
    cdef double ig = 0.0, v_pcc, yg, i_load
    cdef long kind

    for j in range(n):
        o = offsets[j]
        kind = kinds[j]
        if kind == DROOP:
            th = x[o]
            pf = x[o + 1]
            qf = x[o + 2]
            x1 = x[o + 3]
            x2 = x[o + 4]
            i = x[o + 5]
            vp = inv[j, P_VP0] + inv[j, P_G2] * (inv[j, P_QREF] - qf)
            va = vp * cos(th)
            vb = vp * sin(th)
            p = 0.5 * (va * i + vb * x2)
            q = 0.5 * (vb * i - va * x2)
            w = inv[j, P_W0] + inv[j, P_G1] * (inv[j, P_PREF] - pf)
            dx[o] = w
            dx[o + 1] = inv[j, P_WP] * (p - pf)
            dx[o + 2] = inv[j, P_WQ] * (q - qf)
            pc = pf
            qc = qf
            si = o + 3
        else:
            va = x[o]
            vb = x[o + 1]
            x1 = x[o + 2]
            x2 = x[o + 3]
            i = x[o + 4]
            vp2 = va * va + vb * vb
            iar = 2.0 * (inv[j, P_PREF] * va + inv[j, P_QREF] * vb) / vp2
            ibr = 2.0 * (inv[j, P_PREF] * vb - inv[j, P_QREF] * va) / vp2
            if kind == EAHO:
                g = inv[j, P_G1] * 0.5 * vp2
            else:
                g = inv[j, P_G1]
            amp = inv[j, P_G2] * (inv[j, P_VP0] * inv[j, P_VP0] - vp2)
            w0 = inv[j, P_W0]
            dva = amp * va - w0 * vb - g * (ibr - x2)
            dvb = w0 * va + amp * vb + g * (iar - i)
            dx[o] = dva
            dx[o + 1] = dvb
            w = (dvb * va - dva * vb) / vp2
            p = 0.5 * (va * i + vb * x2)
            q = 0.5 * (vb * i - va * x2)
            pc = p
            qc = q
            si = o + 2
        dx[si] = w * (inv[j, P_K] * (i - x1) - x2)
        dx[si + 1] = w * x1
        a = 7 * j
        aux[a] = va
        aux[a + 1] = vb
        aux[a + 2] = w
        aux[a + 3] = p
        aux[a + 4] = q
        aux[a + 5] = pc
        aux[a + 6] = qc
        s_i += i
        sum_y += 1.0 / inv[j, P_LF]
        sum_g += (va - inv[j, P_RF] * i) / inv[j, P_LF]

    if connected:
        if ig_state:
            ig = x[nx - 2]
            v_pcc = r_load * (s_i - ig)
            dx[nx - 2] = (v_pcc - vg - net[N_RG] * ig) / net[N_LG]
        else:
            ig = s_i
            if net[N_LG] > 0.0:
                yg = 1.0 / net[N_LG]
                v_pcc = (sum_g + (vg + net[N_RG] * s_i) * yg) / (sum_y + yg)
            else:
                v_pcc = vg + net[N_RG] * s_i
    else:
        v_pcc = r_load * s_i
        if ig_state:
            dx[nx - 2] = 0.0
    if r_load > 0.0:
        i_load = v_pcc / r_load
    else:
        i_load = 0.0

    for j in range(n):
        o = offsets[j]
        if kinds[j] == DROOP:
            ii = o + 5
        else:
            ii = o + 4
        dx[ii] = (aux[7 * j] - v_pcc - inv[j, P_RF] * x[ii]) / inv[j, P_LF]
    dx[nx - 1] = net[N_WG]
    a = 7 * n
    aux[a] = v_pcc
    aux[a + 1] = ig
    aux[a + 2] = i_load


cdef void _observe(const double[::1] x, const long[::1] kinds, const long[::1] offsets,
                   const double[::1] aux, double t, double[:, ::1] obs, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t n = kinds.shape[0]
    cdef Py_ssize_t j, o, c, a
    cdef double va, vb
    obs[r, 0] = t
    for j in range(n):
        o = offsets[j]
        c = 1 + OBS_PER_INV * j
        a = 7 * j
        va = aux[a]
        vb = aux[a + 1]
        obs[r, c] = va
        obs[r, c + 1] = vb
        obs[r, c + 2] = sqrt(va * va + vb * vb)
        obs[r, c + 3] = atan2(vb, va)
        obs[r, c + 4] = aux[a + 2]
        obs[r, c + 5] = aux[a + 3]
        obs[r, c + 6] = aux[a + 4]
        if kinds[j] == DROOP:
            obs[r, c + 7] = x[o + 5]
        else:
            obs[r, c + 7] = x[o + 4]
        obs[r, c + 8] = aux[a + 5]
        obs[r, c + 9] = aux[a + 6]
    c = 1 + OBS_PER_INV * n
    a = 7 * n
    obs[r, c] = aux[a]
    obs[r, c + 1] = aux[a + 1]
    obs[r, c + 2] = aux[a + 2]


def integrate(double[::1] x, const long[::1] kinds, const long[::1] offsets,
              const double[:, ::1] inv, const double[::1] net,
              double t0, double dt, long nsteps, long k0, long decim,
              double[:, ::1] obs, long row0):
    """See ``_kernel_py.integrate``."""
    cdef Py_ssize_t nx = x.shape[0]
    cdef Py_ssize_t n = kinds.shape[0]
    cdef double[::1] xs = np.array(x, dtype=np.float64)
    cdef double[::1] k1 = np.zeros(nx)
    cdef double[::1] k2 = np.zeros(nx)
    cdef double[::1] k3 = np.zeros(nx)
    cdef double[::1] k4 = np.zeros(nx)
    cdef double[::1] tmp = np.zeros(nx)
    cdef double[::1] aux = np.zeros(7 * n + 3)
    cdef double[::1] swap
    cdef long rows = 0, failed = -1, k
    cdef Py_ssize_t m
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0, v
    cdef bint ok
    with nogil:
        for k in range(nsteps):
            _rhs(xs, kinds, offsets, inv, net, k1, aux)
            if (k0 + k) % decim == 0:
                _observe(xs, kinds, offsets, aux, t0 + k * dt, obs, row0 + rows)
                rows += 1
            for m in range(nx):
                tmp[m] = xs[m] + h2 * k1[m]
            _rhs(tmp, kinds, offsets, inv, net, k2, aux)
            for m in range(nx):
                tmp[m] = xs[m] + h2 * k2[m]
            _rhs(tmp, kinds, offsets, inv, net, k3, aux)
            for m in range(nx):
                tmp[m] = xs[m] + dt * k3[m]
            _rhs(tmp, kinds, offsets, inv, net, k4, aux)
            ok = True
            for m in range(nx):
                v = xs[m] + h6 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
                tmp[m] = v
                if not fabs(v) < DIVERGENCE_BOUND:
                    ok = False
            if not ok:
                failed = k
                break
            swap = xs
            xs = tmp
            tmp = swap
    for m in range(nx):
        x[m] = xs[m]
    return rows, failed


def observe(const double[::1] x, const long[::1] kinds, const long[::1] offsets,
            const double[:, ::1] inv, const double[::1] net, double t,
            double[:, ::1] obs, long row):
    cdef Py_ssize_t nx = x.shape[0]
    cdef double[::1] dx = np.zeros(nx)
    cdef double[::1] aux = np.zeros(7 * kinds.shape[0] + 3)
    _rhs(x, kinds, offsets, inv, net, dx, aux)
    _observe(x, kinds, offsets, aux, t, obs, row)


def derivative(const double[::1] x, const long[::1] kinds, const long[::1] offsets,
               const double[:, ::1] inv, const double[::1] net):
    cdef double[::1] dx = np.zeros(x.shape[0])
    cdef double[::1] aux = np.zeros(7 * kinds.shape[0] + 3)
    _rhs(x, kinds, offsets, inv, net, dx, aux)
    return list(dx)
