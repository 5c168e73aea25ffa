"""Compiled inner loops: metric evaluation, geodesic stepping and ray quadrature.

Geodesics of the conformal metric ``g = exp(2*lam) |dx|^2`` are integrated in
chart arclength ``s``.  The state is ``(x, y, c, s)`` with ``(c, s)`` the unit
chart direction ``(cos theta, sin theta)``; carrying the direction vector
instead of the angle keeps trigonometry out of the inner loop::

    x' = c,  y' = s,  k = lam_y c - lam_x s,  c' = -k s,  s' = k c,
    dt/ds = exp(lam)

where ``t`` is Riemannian arclength.  Integrals along a ray use Simpson's rule
per RK4 step with the midpoint state taken from cubic Hermite interpolation of
the step end points, which keeps the quadrature fourth order.  The boundary
crossing inside the last step is located by Newton iteration on ``|x|^2 - R^2``
safeguarded by bisection.

Metric and grid parameters travel as one flat float array::

    [kind, kappa, eps, bump_cx, bump_cy, bump_width, radius, origin, spacing]

``kind`` is 0 (Euclidean), 1 (constant curvature) or 2 (perturbed).  With
``kappa == 0`` the base factor is taken as 1 rather than 4, so a perturbed
flat metric is a perturbation of the Euclidean one.
"""

import math

import numpy as np
from numba import njit

LOG2 = math.log(2.0)


@njit(cache=True, inline="always")
def lam_and_grad(x, y, mp):
    kind = mp[0]
    if kind == 0.0:
        return 0.0, 0.0, 0.0
    kappa = mp[1]
    r2 = x * x + y * y
    den = 1.0 + kappa * r2
    lam = LOG2 - math.log(den) if kappa != 0.0 else 0.0
    lx = -2.0 * kappa * x / den
    ly = -2.0 * kappa * y / den
    if kind == 2.0:
        eps = mp[2]
        dxc = x - mp[3]
        dyc = y - mp[4]
        w2 = mp[5] * mp[5]
        R2 = mp[6] * mp[6]
        gau = math.exp(-(dxc * dxc + dyc * dyc) / (2.0 * w2))
        sb = 1.0 - r2 / R2
        if sb < 0.0:
            sb = 0.0
        bump = sb * sb * gau
        bx = -4.0 * sb * x / R2 * gau - sb * sb * gau * dxc / w2
        by = -4.0 * sb * y / R2 * gau - sb * sb * gau * dyc / w2
        lam += 0.5 * eps * bump
        lx += 0.5 * eps * bx
        ly += 0.5 * eps * by
    return lam, lx, ly


@njit(cache=True, inline="always")
def _curv(x, y, c, s, mp):
    lam, lx, ly = lam_and_grad(x, y, mp)
    return ly * c - lx * s


@njit(cache=True, inline="always")
def rk4_step(x, y, c, s, h, mp):
    k1 = _curv(x, y, c, s, mp)
    c2 = c - 0.5 * h * k1 * s
    s2 = s + 0.5 * h * k1 * c
    x2 = x + 0.5 * h * c
    y2 = y + 0.5 * h * s
    k2 = _curv(x2, y2, c2, s2, mp)
    c3 = c - 0.5 * h * k2 * s2
    s3 = s + 0.5 * h * k2 * c2
    x3 = x + 0.5 * h * c2
    y3 = y + 0.5 * h * s2
    k3 = _curv(x3, y3, c3, s3, mp)
    c4 = c - h * k3 * s3
    s4 = s + h * k3 * c3
    x4 = x + h * c3
    y4 = y + h * s3
    k4 = _curv(x4, y4, c4, s4, mp)
    xn = x + h * (c + 2.0 * c2 + 2.0 * c3 + c4) / 6.0
    yn = y + h * (s + 2.0 * s2 + 2.0 * s3 + s4) / 6.0
    cn = c - h * (k1 * s + 2.0 * k2 * s2 + 2.0 * k3 * s3 + k4 * s4) / 6.0
    sn = s + h * (k1 * c + 2.0 * k2 * c2 + 2.0 * k3 * c3 + k4 * c4) / 6.0
    nrm = math.sqrt(cn * cn + sn * sn)
    return xn, yn, cn / nrm, sn / nrm


@njit(cache=True, inline="always")
def _hermite_mid(p0, d0, p1, d1, h):
    return 0.5 * (p0 + p1) + h * (d0 - d1) / 8.0


@njit(cache=True, inline="always")
def _lagrange_weights(t):
    w0 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w2 = -(t + 1.0) * t * (t - 2.0) / 2.0
    w3 = (t + 1.0) * t * (t - 1.0) / 6.0
    return w0, w1, w2, w3


@njit(cache=True, inline="always")
def _stencil(u, n):
    i = int(math.floor(u))
    if i < 1:
        i = 1
    if i > n - 3:
        i = n - 3
    return i, u - i


@njit(cache=True, inline="always")
def interp2(arr, x, y, origin, step):
    """Tensor cubic Lagrange interpolation of one complex grid ``(ny, nx)``."""
    n = arr.shape[0]
    ix, tx = _stencil((x - origin) / step, n)
    iy, ty = _stencil((y - origin) / step, n)
    wx0, wx1, wx2, wx3 = _lagrange_weights(tx)
    wy = _lagrange_weights(ty)
    acc = 0j
    for b in range(4):
        row = iy - 1 + b
        acc += wy[b] * (
            wx0 * arr[row, ix - 1] + wx1 * arr[row, ix] + wx2 * arr[row, ix + 1] + wx3 * arr[row, ix + 2]
        )
    return acc


@njit(cache=True, inline="always")
def _integrands(x, y, c, s, mp, coef, m_lo, full, out):
    """Evaluate all integrands at one state, times ``exp(lam)``; returns ``exp(lam)``.

    Modal fields are ``sum_m coef[j, m] exp(i (m_lo + m) theta)``; full fields
    are sampled on the angular grid and interpolated periodically in theta.
    """
    origin = mp[7]
    step = mp[8]
    lam, lx, ly = lam_and_grad(x, y, mp)
    el = math.exp(lam)
    n = coef.shape[2] if coef.shape[0] > 0 else full.shape[2]
    ix, tx = _stencil((x - origin) / step, n)
    iy, ty = _stencil((y - origin) / step, n)
    wx = _lagrange_weights(tx)
    wy = _lagrange_weights(ty)
    nf = coef.shape[0]
    nm = coef.shape[1]
    if nf > 0:
        z = complex(c, s)
        zb = complex(c, -s)
        base = 1.0 + 0j
        if m_lo < 0:
            for _ in range(-m_lo):
                base *= zb
        else:
            for _ in range(m_lo):
                base *= z
        for j in range(nf):
            acc = 0j
            ph = base
            for m in range(nm):
                v = 0j
                for b in range(4):
                    row = iy - 1 + b
                    v += wy[b] * (
                        wx[0] * coef[j, m, row, ix - 1]
                        + wx[1] * coef[j, m, row, ix]
                        + wx[2] * coef[j, m, row, ix + 1]
                        + wx[3] * coef[j, m, row, ix + 2]
                    )
                acc += v * ph
                ph *= z
            out[j] = acc * el
    if full.shape[0] > 0:
        nth = full.shape[1]
        th = math.atan2(s, c)
        ut = th / (2.0 * math.pi) * nth
        it = int(math.floor(ut))
        tt = ut - it
        wt = _lagrange_weights(tt)
        for j in range(full.shape[0]):
            acc = 0j
            for q in range(4):
                if wt[q] == 0.0:
                    continue
                k = (it - 1 + q) % nth
                v = 0j
                for b in range(4):
                    row = iy - 1 + b
                    v += wy[b] * (
                        wx[0] * full[j, k, row, ix - 1]
                        + wx[1] * full[j, k, row, ix]
                        + wx[2] * full[j, k, row, ix + 1]
                        + wx[3] * full[j, k, row, ix + 2]
                    )
                acc += wt[q] * v
            out[nf + j] = acc * el
    return el


@njit(cache=True)
def _crossing(x, y, c, s, h, mp, tol):
    """Chart step length in ``[0, h]`` at which the ray leaves the disc."""
    R2 = mp[6] * mp[6]
    lo = 0.0
    hi = h
    # initial guess from the straight chord
    b = x * c + y * s
    disc = b * b - (x * x + y * y - R2)
    g = -b + math.sqrt(disc) if disc > 0.0 else 0.5 * h
    if g <= lo or g >= hi:
        g = 0.5 * (lo + hi)
    for _ in range(60):
        xb, yb, cb, sb = rk4_step(x, y, c, s, g, mp)
        f = xb * xb + yb * yb - R2
        if f > 0.0:
            hi = g
        else:
            lo = g
        df = 2.0 * (xb * cb + yb * sb)
        gn = g - f / df if df != 0.0 else 0.5 * (lo + hi)
        if not (lo < gn < hi):
            gn = 0.5 * (lo + hi)
        if abs(gn - g) < tol or hi - lo < tol:
            g = gn
            break
        g = gn
    return g


@njit(cache=True)
def trace_rays(
    x0, y0, th0, mp, h, tol, max_steps,
    coef, m_lo, full, atten, use_atten,
    out_int, out_tau, out_exit, out_att,
):
    """Trace every start state to the boundary and integrate the given fields.

    ``out_int[i, j]`` receives ``int_0^tau F_j exp(int_0^t a) dt`` when
    ``use_atten`` is set (``a`` interpolated from ``atten``), otherwise the
    plain integral.  ``out_tau`` is the Riemannian exit time, ``out_exit`` the
    exit state ``(x, y, theta)`` and ``out_att`` the total ``int a dt``.
    Returns the number of rays stopped by ``max_steps``.
    """
    R2 = mp[6] * mp[6]
    origin = mp[7]
    step = mp[8]
    nfield = coef.shape[0] + full.shape[0]
    f0 = np.empty(nfield, dtype=np.complex128)
    fm = np.empty(nfield, dtype=np.complex128)
    f1 = np.empty(nfield, dtype=np.complex128)
    acc = np.empty(nfield, dtype=np.complex128)
    trapped = 0
    for i in range(x0.shape[0]):
        x = x0[i]
        y = y0[i]
        c = math.cos(th0[i])
        s = math.sin(th0[i])
        for j in range(nfield):
            acc[j] = 0j
        tau = 0.0
        A = 0j
        e0 = _integrands(x, y, c, s, mp, coef, m_lo, full, f0)
        a0 = 0j
        if use_atten:
            a0 = interp2(atten, x, y, origin, step) * e0
        k0 = _curv(x, y, c, s, mp)
        done = False
        nstep = 0
        while not done:
            xn, yn, cn, sn = rk4_step(x, y, c, s, h, mp)
            hh = h
            if xn * xn + yn * yn > R2:
                hh = _crossing(x, y, c, s, h, mp, tol)
                xn, yn, cn, sn = rk4_step(x, y, c, s, hh, mp)
                xm, ym, cm, sm = rk4_step(x, y, c, s, 0.5 * hh, mp)
                k1 = _curv(xn, yn, cn, sn, mp)
                done = True
            else:
                k1 = _curv(xn, yn, cn, sn, mp)
                xm = _hermite_mid(x, c, xn, cn, hh)
                ym = _hermite_mid(y, s, yn, sn, hh)
                cm = _hermite_mid(c, -k0 * s, cn, -k1 * sn, hh)
                sm = _hermite_mid(s, k0 * c, sn, k1 * cn, hh)
                nm = math.sqrt(cm * cm + sm * sm)
                cm /= nm
                sm /= nm
            em = _integrands(xm, ym, cm, sm, mp, coef, m_lo, full, fm)
            e1 = _integrands(xn, yn, cn, sn, mp, coef, m_lo, full, f1)
            tau += hh * (e0 + 4.0 * em + e1) / 6.0
            if use_atten:
                am = interp2(atten, xm, ym, origin, step) * em
                a1 = interp2(atten, xn, yn, origin, step) * e1
                Am = A + hh * (5.0 * a0 + 8.0 * am - a1) / 24.0
                A1 = A + hh * (a0 + 4.0 * am + a1) / 6.0
                g0 = np.exp(A)
                gm = np.exp(Am)
                g1 = np.exp(A1)
                for j in range(nfield):
                    acc[j] += hh * (f0[j] * g0 + 4.0 * fm[j] * gm + f1[j] * g1) / 6.0
                A = A1
                a0 = a1
            else:
                for j in range(nfield):
                    acc[j] += hh * (f0[j] + 4.0 * fm[j] + f1[j]) / 6.0
            x = xn
            y = yn
            c = cn
            s = sn
            k0 = k1
            e0 = e1
            for j in range(nfield):
                f0[j] = f1[j]
            nstep += 1
            if nstep >= max_steps and not done:
                trapped += 1
                done = True
        for j in range(nfield):
            out_int[i, j] = acc[j]
        out_tau[i] = tau
        out_exit[i, 0] = x
        out_exit[i, 1] = y
        out_exit[i, 2] = math.atan2(s, c)
        out_att[i] = A
    return trapped


@njit(cache=True, inline="always")
def _step_with_time(x, y, c, s, h, mp):
    # RK4 on (x, y, c, s, t); the time component integrates exp(lam)
    lam1, lx, ly = lam_and_grad(x, y, mp)
    k1 = ly * c - lx * s
    c2 = c - 0.5 * h * k1 * s
    s2 = s + 0.5 * h * k1 * c
    x2 = x + 0.5 * h * c
    y2 = y + 0.5 * h * s
    lam2, lx, ly = lam_and_grad(x2, y2, mp)
    k2 = ly * c2 - lx * s2
    c3 = c - 0.5 * h * k2 * s2
    s3 = s + 0.5 * h * k2 * c2
    x3 = x + 0.5 * h * c2
    y3 = y + 0.5 * h * s2
    lam3, lx, ly = lam_and_grad(x3, y3, mp)
    k3 = ly * c3 - lx * s3
    c4 = c - h * k3 * s3
    s4 = s + h * k3 * c3
    x4 = x + h * c3
    y4 = y + h * s3
    lam4, lx, ly = lam_and_grad(x4, y4, mp)
    k4 = ly * c4 - lx * s4
    dt = h * (math.exp(lam1) + 2.0 * math.exp(lam2) + 2.0 * math.exp(lam3) + math.exp(lam4)) / 6.0
    xn = x + h * (c + 2.0 * c2 + 2.0 * c3 + c4) / 6.0
    yn = y + h * (s + 2.0 * s2 + 2.0 * s3 + s4) / 6.0
    cn = c - h * (k1 * s + 2.0 * k2 * s2 + 2.0 * k3 * s3 + k4 * s4) / 6.0
    sn = s + h * (k1 * c + 2.0 * k2 * c2 + 2.0 * k3 * c3 + k4 * c4) / 6.0
    nrm = math.sqrt(cn * cn + sn * sn)
    return xn, yn, cn / nrm, sn / nrm, dt


@njit(cache=True)
def flow_time(x0, y0, th0, mp, t, h, out):
    """Advance each state by Riemannian time ``t`` (negative allowed).

    Riemannian time is integrated alongside the chart arclength; the final
    partial step is found by bisection so the elapsed time equals ``|t|``.
    Backward flow reverses the direction, flows forward and reverses back.
    Returns the largest ``|x|^2`` seen along the way.
    """
    sgn = 1.0 if t >= 0.0 else -1.0
    target = abs(t)
    rmax = 0.0
    for i in range(x0.shape[0]):
        x = x0[i]
        y = y0[i]
        c = sgn * math.cos(th0[i])
        s = sgn * math.sin(th0[i])
        el = 0.0
        while True:
            xn, yn, cn, sn, dt = _step_with_time(x, y, c, s, h, mp)
            if el + dt >= target:
                lo = 0.0
                hi = h
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    xb, yb, cb, sb, db = _step_with_time(x, y, c, s, mid, mp)
                    if el + db >= target:
                        hi = mid
                    else:
                        lo = mid
                    if hi - lo < 1e-15:
                        break
                x, y, c, s, dt = _step_with_time(x, y, c, s, 0.5 * (lo + hi), mp)
                r2 = x * x + y * y
                if r2 > rmax:
                    rmax = r2
                break
            x = xn
            y = yn
            c = cn
            s = sn
            el += dt
            r2 = x * x + y * y
            if r2 > rmax:
                rmax = r2
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = math.atan2(sgn * s, sgn * c)
    return rmax


@njit(cache=True)
def interp_grid_points(arr, xs, ys, origin, step, out):
    """Cubic interpolation of a stack of grids ``(nf, ny, nx)`` at points."""
    n = arr.shape[1]
    for p in range(xs.shape[0]):
        ix, tx = _stencil((xs[p] - origin) / step, n)
        iy, ty = _stencil((ys[p] - origin) / step, n)
        wx = _lagrange_weights(tx)
        wy = _lagrange_weights(ty)
        for j in range(arr.shape[0]):
            v = 0j
            for b in range(4):
                row = iy - 1 + b
                v += wy[b] * (
                    wx[0] * arr[j, row, ix - 1]
                    + wx[1] * arr[j, row, ix]
                    + wx[2] * arr[j, row, ix + 1]
                    + wx[3] * arr[j, row, ix + 2]
                )
            out[p, j] = v


@njit(cache=True)
def trace_path(x, y, th, mp, h, tol, max_steps, out):
    """Record the states of one forward ray at every step, up to the exit.

    ``out`` has shape ``(max_steps + 2, 4)`` and receives ``(x, y, theta, t)``.
    Returns the number of rows written.
    """
    R2 = mp[6] * mp[6]
    c = math.cos(th)
    s = math.sin(th)
    t = 0.0
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = th
    out[0, 3] = 0.0
    n = 1
    while n < max_steps + 1:
        xn, yn, cn, sn, dt = _step_with_time(x, y, c, s, h, mp)
        if xn * xn + yn * yn > R2:
            hh = _crossing(x, y, c, s, h, mp, tol)
            xn, yn, cn, sn, dt = _step_with_time(x, y, c, s, hh, mp)
            out[n, 0] = xn
            out[n, 1] = yn
            out[n, 2] = math.atan2(sn, cn)
            out[n, 3] = t + dt
            return n + 1
        x, y, c, s = xn, yn, cn, sn
        t += dt
        out[n, 0] = x
        out[n, 1] = y
        out[n, 2] = math.atan2(s, c)
        out[n, 3] = t
        n += 1
    return -1


@njit(cache=True)
def ray_samples(x0, y0, th0, mp, h, tol, max_steps, atten, use_atten, offsets, pts, wts, count_only):
    """Quadrature nodes and weights of every ray, for repeated linear maps.

    With ``count_only`` set, only ``offsets`` is filled (``offsets[i+1]-offsets[i]``
    samples for ray ``i``).  Otherwise ``pts[k] = (x, y, cos, sin)`` and
    ``wts[k]`` hold Simpson weights that already include ``dt/ds = exp(lam)``
    and the attenuation factor ``exp(int_0^t a)``.
    """
    R2 = mp[6] * mp[6]
    origin = mp[7]
    step = mp[8]
    offsets[0] = 0
    for i in range(x0.shape[0]):
        x = x0[i]
        y = y0[i]
        c = math.cos(th0[i])
        s = math.sin(th0[i])
        k = offsets[i]
        lam, lx, ly = lam_and_grad(x, y, mp)
        e0 = math.exp(lam)
        A = 0j
        a0 = 0j
        if use_atten:
            a0 = interp2(atten, x, y, origin, step) * e0
        if not count_only:
            pts[k, 0] = x
            pts[k, 1] = y
            pts[k, 2] = c
            pts[k, 3] = s
            wts[k] = 0j
        k0 = ly * c - lx * s
        done = False
        nstep = 0
        while not done:
            xn, yn, cn, sn = rk4_step(x, y, c, s, h, mp)
            hh = h
            if xn * xn + yn * yn > R2:
                hh = _crossing(x, y, c, s, h, mp, tol)
                xn, yn, cn, sn = rk4_step(x, y, c, s, hh, mp)
                xm, ym, cm, sm = rk4_step(x, y, c, s, 0.5 * hh, mp)
                done = True
            else:
                k1 = _curv(xn, yn, cn, sn, mp)
                xm = _hermite_mid(x, c, xn, cn, hh)
                ym = _hermite_mid(y, s, yn, sn, hh)
                cm = _hermite_mid(c, -k0 * s, cn, -k1 * sn, hh)
                sm = _hermite_mid(s, k0 * c, sn, k1 * cn, hh)
                nm = math.sqrt(cm * cm + sm * sm)
                cm /= nm
                sm /= nm
                k0 = k1
            lam, lx, ly = lam_and_grad(xm, ym, mp)
            em = math.exp(lam)
            lam, lx, ly = lam_and_grad(xn, yn, mp)
            e1 = math.exp(lam)
            g0 = 1.0 + 0j
            gm = 1.0 + 0j
            g1 = 1.0 + 0j
            if use_atten:
                am = interp2(atten, xm, ym, origin, step) * em
                a1 = interp2(atten, xn, yn, origin, step) * e1
                Am = A + hh * (5.0 * a0 + 8.0 * am - a1) / 24.0
                A1 = A + hh * (a0 + 4.0 * am + a1) / 6.0
                g0 = np.exp(A)
                gm = np.exp(Am)
                g1 = np.exp(A1)
                A = A1
                a0 = a1
            if not count_only:
                wts[k] += hh * e0 * g0 / 6.0
                pts[k + 1, 0] = xm
                pts[k + 1, 1] = ym
                pts[k + 1, 2] = cm
                pts[k + 1, 3] = sm
                wts[k + 1] = 4.0 * hh * em * gm / 6.0
                pts[k + 2, 0] = xn
                pts[k + 2, 1] = yn
                pts[k + 2, 2] = cn
                pts[k + 2, 3] = sn
                wts[k + 2] = hh * e1 * g1 / 6.0
            k += 2
            x = xn
            y = yn
            c = cn
            s = sn
            e0 = e1
            nstep += 1
            if nstep >= max_steps:
                done = True
        offsets[i + 1] = k + 1


@njit(cache=True)
def samples_apply_deg1(offsets, pts, wts, f, a1, a2, mp, out):
    """Sum ``w * (f + exp(-lam) (a1 cos + a2 sin))`` over the samples of each ray."""
    origin = mp[7]
    step = mp[8]
    n = f.shape[0]
    for i in range(offsets.shape[0] - 1):
        acc = 0j
        for k in range(offsets[i], offsets[i + 1]):
            x = pts[k, 0]
            y = pts[k, 1]
            ix, tx = _stencil((x - origin) / step, n)
            iy, ty = _stencil((y - origin) / step, n)
            wx = _lagrange_weights(tx)
            wy = _lagrange_weights(ty)
            vf = 0j
            v1 = 0j
            v2 = 0j
            for b in range(4):
                row = iy - 1 + b
                for q in range(4):
                    ww = wy[b] * wx[q]
                    col = ix - 1 + q
                    vf += ww * f[row, col]
                    v1 += ww * a1[row, col]
                    v2 += ww * a2[row, col]
            lam, lx, ly = lam_and_grad(x, y, mp)
            el = math.exp(-lam)
            acc += wts[k] * (vf + el * (pts[k, 2] * v1 + pts[k, 3] * v2))
        out[i] = acc


@njit(cache=True)
def samples_scatter_deg1(offsets, pts, wts, g, mp, f, a1, a2):
    """Exact (unconjugated) transpose of :func:`samples_apply_deg1`; accumulates."""
    origin = mp[7]
    step = mp[8]
    n = f.shape[0]
    for i in range(offsets.shape[0] - 1):
        gi = g[i]
        if gi == 0:
            continue
        for k in range(offsets[i], offsets[i + 1]):
            x = pts[k, 0]
            y = pts[k, 1]
            ix, tx = _stencil((x - origin) / step, n)
            iy, ty = _stencil((y - origin) / step, n)
            wx = _lagrange_weights(tx)
            wy = _lagrange_weights(ty)
            lam, lx, ly = lam_and_grad(x, y, mp)
            el = math.exp(-lam)
            v = wts[k] * gi
            v1 = v * el * pts[k, 2]
            v2 = v * el * pts[k, 3]
            for b in range(4):
                row = iy - 1 + b
                for q in range(4):
                    ww = wy[b] * wx[q]
                    col = ix - 1 + q
                    f[row, col] += ww * v
                    a1[row, col] += ww * v1
                    a2[row, col] += ww * v2


@njit(cache=True)
def interp_table(tab, u, v, periodic_v, out):
    """Cubic interpolation of ``tab (n0, n1)`` at fractional indices ``(u, v)``.

    Axis 0 is periodic.  Axis 1 is periodic when ``periodic_v`` is set and
    otherwise clamped: indices are clipped to ``[0, n1 - 1]`` and the stencil
    is shifted inwards at the ends.
    """
    n0 = tab.shape[0]
    n1 = tab.shape[1]
    for p in range(u.shape[0]):
        i = int(math.floor(u[p]))
        wi = _lagrange_weights(u[p] - i)
        vv = v[p]
        if periodic_v:
            k = int(math.floor(vv))
            wk = _lagrange_weights(vv - k)
        else:
            if vv < 0.0:
                vv = 0.0
            if vv > n1 - 1.0:
                vv = n1 - 1.0
            k, tk = _stencil(vv, n1)
            wk = _lagrange_weights(tk)
        acc = 0j
        for a in range(4):
            ii = (i - 1 + a) % n0
            row = 0j
            for b in range(4):
                kk = k - 1 + b
                if periodic_v:
                    kk = kk % n1
                row += wk[b] * tab[ii, kk]
            acc += wi[a] * row
        out[p] = acc
