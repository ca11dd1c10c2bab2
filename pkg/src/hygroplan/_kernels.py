"""Compiled right-hand sides for the forward and sensitivity systems.

State is dimensionless: ``y = P_v / p_ref`` (equal to relative humidity when
``p_ref = P_s(T)``), time is ``s = t / t_ref``.  The kernels work in
dimensional quantities internally and rescale once at the end.

Boundary treatment
------------------
The drift term (coefficient ``a``) is oriented toward the exposed surface,
so the total flux in the +x direction is ``j = -d du/dx - a u``; this keeps
the operator dissipative and the field bounded by the ambient range for any
``a >= 0``.  Inlet face (x = 0): the total flux must equal the convective
exchange ``h (p_amb - u_surf)``.  The surface value is
reconstructed to second order from the first two cell centres,
``du/dx(0) ~ (-8 u_s + 9 u_0 - u_1) / (3 dx)``, and the resulting linear
equation is solved for ``u_s``.  Outlet face (x = L): the total flux is
imposed to be exactly zero.

The sensitivity kernel differentiates this very discretisation with respect
to (d0, d1, a) using central differences for the sensitivity fluxes; the
chain-rule terms through the storage slope c(u) and the permeability d(u)
are included.
"""

import numpy as np

from ._compat import njit

# parameter codes shared with the sensitivity module
PARAM_D0 = 0
PARAM_D1 = 1
PARAM_A = 2


@njit(cache=False, inline="always")
def _bernoulli(z):
    # B(z) = z / (exp(z) - 1), series near 0 to avoid cancellation
    if abs(z) < 1e-5:
        return 1.0 - 0.5 * z + z * z / 12.0
    return z / np.expm1(z)


@njit(cache=False, inline="always")
def _poly(coeffs, x):
    acc = 0.0
    for k in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * x + coeffs[k]
    return acc


@njit(cache=False)
def _forward_fluxes(u, j, dx, d0, d1, a, h, pamb, ps):
    """Fill the n+1 face fluxes [kg/(m^2 s)] for cell states ``u`` [Pa]."""
    n = u.shape[0]
    # inlet: solve for the surface value under the convective balance;
    # drift (coefficient a) is oriented toward the exposed surface
    db = d0 + d1 * u[0] / ps
    beta = (9.0 * u[0] - u[1]) / (3.0 * dx)
    q = 8.0 * db / (3.0 * dx) - a + h
    us = (h * pamb + db * beta) / q
    j[0] = h * (pamb - us)
    for i in range(1, n):
        df = d0 + 0.5 * d1 * (u[i - 1] + u[i]) / ps
        pe = -a * dx / df
        j[i] = (df / dx) * (_bernoulli(-pe) * u[i - 1] - _bernoulli(pe) * u[i])
    j[n] = 0.0


@njit(cache=False)
def forward_rhs(s, y, dy, args):
    """du*/ds for the forward convection-diffusion system."""
    (dx, d0, d1, a, h, pamb, ps, fp, src, t_ref) = args
    n = y.shape[0]
    u = np.empty(n)
    for i in range(n):
        u[i] = ps * y[i]
    j = np.empty(n + 1)
    _forward_fluxes(u, j, dx, d0, d1, a, h, pamb, ps)
    scale = t_ref / ps
    for i in range(n):
        c = _poly(fp, y[i]) / ps
        dy[i] = scale * ((j[i] - j[i + 1]) / dx + src[i]) / c


@njit(cache=False)
def coupled_rhs(s, y, dy, args):
    """Forward field plus one linearised sensitivity PDE per parameter.

    State layout: ``y[0:n]`` is u* and ``y[(1+m)*n : ...]`` block ``m`` holds
    ``z_m = p_scale_m * (du*/dp_m)``.
    """
    (dx, d0, d1, a, h, pamb, ps, fp, fpp, t_ref, pcodes, pscales) = args
    m = pcodes.shape[0]
    n = y.shape[0] // (1 + m)

    u = np.empty(n)
    for i in range(n):
        u[i] = ps * y[i]
    j = np.empty(n + 1)
    _forward_fluxes(u, j, dx, d0, d1, a, h, pamb, ps)

    cc = np.empty(n)
    ut = np.empty(n)  # du/dt [Pa/s]
    for i in range(n):
        cc[i] = _poly(fp, y[i]) / ps
        ut[i] = (j[i] - j[i + 1]) / (dx * cc[i])
    scale = t_ref / ps
    for i in range(n):
        dy[i] = scale * ut[i]

    # pieces of the inlet surface solve reused by every parameter
    db = d0 + d1 * u[0] / ps
    beta = (9.0 * u[0] - u[1]) / (3.0 * dx)
    q0 = 8.0 * db / (3.0 * dx) - a + h
    us = (h * pamb + db * beta) / q0

    sarr = np.empty(n)
    g = np.empty(n + 1)
    for b in range(m):
        code = pcodes[b]
        pscale = pscales[b]
        off = (1 + b) * n
        # dimensional sensitivity field s = du/dp
        for i in range(n):
            sarr[i] = y[off + i] * ps / pscale

        # inlet: differentiate the surface solve
        ddb = (d1 / ps) * sarr[0]
        if code == PARAM_D0:
            ddb += 1.0
        elif code == PARAM_D1:
            ddb += u[0] / ps
        dbeta = (9.0 * sarr[0] - sarr[1]) / (3.0 * dx)
        dn = ddb * beta + db * dbeta
        dq = 8.0 * ddb / (3.0 * dx)
        if code == PARAM_A:
            dq -= 1.0
        dus = (dn - us * dq) / q0
        g[0] = -h * dus

        for i in range(1, n):
            uf = 0.5 * (u[i - 1] + u[i])
            uxf = (u[i] - u[i - 1]) / dx
            sf = 0.5 * (sarr[i - 1] + sarr[i])
            sxf = (sarr[i] - sarr[i - 1]) / dx
            df = d0 + d1 * uf / ps
            dd = (d1 / ps) * sf
            adv = -a * sf
            if code == PARAM_D0:
                dd += 1.0
            elif code == PARAM_D1:
                dd += uf / ps
            else:  # PARAM_A
                adv -= uf
            g[i] = -(dd * uxf + df * sxf) + adv
        g[n] = 0.0  # the outlet flux is identically zero for every p

        zscale = t_ref * pscale / ps
        for i in range(n):
            fpp_i = _poly(fpp, y[i]) / (ps * ps)
            st = (g[i] - g[i + 1]) / (dx * cc[i]) - fpp_i * sarr[i] * ut[i] / cc[i]
            dy[off + i] = zscale * st
