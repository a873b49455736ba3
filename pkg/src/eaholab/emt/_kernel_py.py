"""Pure-Python integration kernel.

Reference implementation of the compiled ``_kernel_ext`` module; both expose
:func:`integrate` with the same arguments and the same arithmetic, so they
agree to rounding.

Flat layout (built by :mod:`eaholab.emt.network`)
-------------------------------------------------
``kinds[j]``      0 aho, 1 eaho, 2 droop
``offsets[j]``    first state index of inverter j
``inv[j, :]``     see the ``P_*`` column constants
``net``           see the ``N_*`` constants
state             per inverter (osc: v_a, v_b, x1, x2, i) or
                  (droop: theta, p_f, q_f, x1, x2, i); then i_g when the grid
                  branch is a state; grid phase last.
observation row   t, per inverter (v_a, v_b, v_p, theta, omega, p, q, i,
                  p_ctrl, q_ctrl), where p_ctrl/q_ctrl are the powers the
                  control law acts on (the filter states for droop),
                  then v_pcc, i_g, i_load.
"""
import math

AHO, EAHO, DROOP = 0, 1, 2

P_G1, P_G2, P_WP, P_WQ, P_PREF, P_QREF, P_W0, P_VP0, P_LF, P_RF, P_K = range(11)
N_PARAMS = 11
N_IG_STATE, N_CONNECTED, N_RLOAD, N_LG, N_RG, N_VG, N_WG = range(7)
N_NET = 7
OBS_PER_INV = 10
DIVERGENCE_BOUND = 1e15


def _rhs(x, kinds, offsets, inv, net, dx, aux):
    """Fill ``dx`` with the state derivative; ``aux`` receives per-inverter
    (v_a, v_b, omega, p, q, p_ctrl, q_ctrl) followed by (v_pcc, i_g, i_load)."""
    n = len(kinds)
    nx = len(x)
    theta_g = x[nx - 1]
    connected = net[N_CONNECTED] > 0.5
    r_load = net[N_RLOAD]
    ig_state = net[N_IG_STATE] > 0.5
    vg = net[N_VG] * math.cos(theta_g)

    s_i = 0.0
    sum_y = 0.0
    sum_g = 0.0
    for j in range(n):
        o = offsets[j]
        row = inv[j]
        kind = kinds[j]
        if kind == DROOP:
            th = x[o]
            pf = x[o + 1]
            qf = x[o + 2]
            x1 = x[o + 3]
            x2 = x[o + 4]
            i = x[o + 5]
            vp = row[P_VP0] + row[P_G2] * (row[P_QREF] - qf)
            va = vp * math.cos(th)
            vb = vp * math.sin(th)
            p = 0.5 * (va * i + vb * x2)
            q = 0.5 * (vb * i - va * x2)
            w = row[P_W0] + row[P_G1] * (row[P_PREF] - pf)
            dx[o] = w
            dx[o + 1] = row[P_WP] * (p - pf)
            dx[o + 2] = row[P_WQ] * (q - qf)
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
            iar = 2.0 * (row[P_PREF] * va + row[P_QREF] * vb) / vp2
            ibr = 2.0 * (row[P_PREF] * vb - row[P_QREF] * va) / vp2
            if kind == EAHO:
                g = row[P_G1] * 0.5 * vp2
            else:
                g = row[P_G1]
            amp = row[P_G2] * (row[P_VP0] * row[P_VP0] - vp2)
            w0 = row[P_W0]
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
        dx[si] = w * (row[P_K] * (i - x1) - x2)
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
        sum_y += 1.0 / row[P_LF]
        sum_g += (va - row[P_RF] * i) / row[P_LF]

    ig = 0.0
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
    i_load = v_pcc / r_load if r_load > 0.0 else 0.0

    for j in range(n):
        o = offsets[j]
        row = inv[j]
        ii = o + 5 if kinds[j] == DROOP else o + 4
        dx[ii] = (aux[7 * j] - v_pcc - row[P_RF] * x[ii]) / row[P_LF]
    dx[nx - 1] = net[N_WG]
    a = 7 * n
    aux[a] = v_pcc
    aux[a + 1] = ig
    aux[a + 2] = i_load


def _observe(x, kinds, offsets, aux, t, obs, r):
    n = len(kinds)
    obs[r][0] = t
    for j in range(n):
        o = offsets[j]
        c = 1 + OBS_PER_INV * j
        a = 7 * j
        va = aux[a]
        vb = aux[a + 1]
        obs[r][c] = va
        obs[r][c + 1] = vb
        obs[r][c + 2] = math.sqrt(va * va + vb * vb)
        obs[r][c + 3] = math.atan2(vb, va)
        obs[r][c + 4] = aux[a + 2]
        obs[r][c + 5] = aux[a + 3]
        obs[r][c + 6] = aux[a + 4]
        obs[r][c + 7] = x[o + 5] if kinds[j] == DROOP else x[o + 4]
        obs[r][c + 8] = aux[a + 5]
        obs[r][c + 9] = aux[a + 6]
    c = 1 + OBS_PER_INV * n
    a = 7 * n
    obs[r][c] = aux[a]
    obs[r][c + 1] = aux[a + 1]
    obs[r][c + 2] = aux[a + 2]


def integrate(x, kinds, offsets, inv, net, t0, dt, nsteps, k0, decim, obs, row0):
    """Advance ``x`` in place by ``nsteps`` classical RK4 steps.

    Before step k the state is logged into ``obs[row]`` when ``(k0 + k)`` is
    a multiple of ``decim``. Returns ``(rows_written, failed_step)`` where
    ``failed_step`` is -1 on success; on failure ``x`` holds the last
    finite state.
    """
    nx = len(x)
    n = len(kinds)
    kinds = [int(k) for k in kinds]
    offsets = [int(o) for o in offsets]
    inv = [list(map(float, row)) for row in inv]
    net = [float(v) for v in net]
    xs = [float(v) for v in x]
    k1 = [0.0] * nx
    k2 = [0.0] * nx
    k3 = [0.0] * nx
    k4 = [0.0] * nx
    tmp = [0.0] * nx
    aux = [0.0] * (7 * n + 3)
    rows = 0
    failed = -1
    h2 = 0.5 * dt
    h6 = dt / 6.0
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
            if not abs(v) < DIVERGENCE_BOUND:
                ok = False
        if not ok:
            failed = k
            break
        xs, tmp = tmp, xs
    for m in range(nx):
        x[m] = xs[m]
    return rows, failed


def observe(x, kinds, offsets, inv, net, t, obs, row):
    """Log a single state (used for the final sample of a run)."""
    nx = len(x)
    n = len(kinds)
    kinds = [int(k) for k in kinds]
    offsets = [int(o) for o in offsets]
    inv = [list(map(float, r)) for r in inv]
    net = [float(v) for v in net]
    xs = [float(v) for v in x]
    dx = [0.0] * nx
    aux = [0.0] * (7 * n + 3)
    _rhs(xs, kinds, offsets, inv, net, dx, aux)
    _observe(xs, kinds, offsets, aux, t, obs, row)


def derivative(x, kinds, offsets, inv, net):
    """State derivative as a list (test and bookkeeping helper)."""
    n = len(kinds)
    dx = [0.0] * len(x)
    aux = [0.0] * (7 * n + 3)
    _rhs([float(v) for v in x], [int(k) for k in kinds], [int(o) for o in offsets],
         [list(map(float, r)) for r in inv], [float(v) for v in net], dx, aux)
    return dx
