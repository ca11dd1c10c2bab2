"""Embedded adaptive Runge-Kutta time integrator.

Bogacki-Shampine 3(2) pair: four stages, FSAL, third-order propagation with
a second-order error estimate.  Step-size selection uses a PI controller on
the weighted RMS error norm; dense output within an accepted step is cubic
Hermite interpolation on the stage derivatives at the step ends.

The right-hand side is passed as ``rhs(t, y, dy, args)`` filling ``dy`` in
place, with ``args`` an arbitrary tuple of scalars and arrays.  When numba
is available both the rhs and this loop compile to machine code.
"""

from __future__ import annotations

import numpy as np

from ._compat import njit

# PI controller exponents for an order-3 local error estimate.
_ALPHA = 0.7 / 3.0
_BETA = 0.4 / 3.0
_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_TOO_MANY_STEPS = 2


@njit(cache=False)
def _error_norm(err, y, ynew, rtol, atol):
    n = err.shape[0]
    acc = 0.0
    for i in range(n):
        ay = abs(y[i])
        az = abs(ynew[i])
        sc = atol + rtol * (ay if ay > az else az)
        q = err[i] / sc
        acc += q * q
    return np.sqrt(acc / n)


@njit(cache=False)
def _march(rhs, args, t0, t1, y0, rtol, atol, out_t, y_out, max_steps):
    """Integrate from t0 to t1, writing states at ``out_t`` into ``y_out``.

    Returns (status, accepted, rejected, t_reached).  ``out_t`` must be sorted and lie
    within [t0, t1]; ``y0`` is overwritten with the final state.
    """
    n = y0.shape[0]
    span = t1 - t0
    eps = 1e-12 * max(abs(t0), abs(t1), span)

    y = y0
    f0 = np.empty(n)
    rhs(t0, y, f0, args)

    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    ynew = np.empty(n)
    ytmp = np.empty(n)
    err = np.empty(n)

    idx = 0
    n_out = out_t.shape[0]
    while idx < n_out and out_t[idx] <= t0 + eps:
        for i in range(n):
            y_out[idx, i] = y[i]
        idx += 1

    # initial step from the magnitude of the first derivative
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d1 > 1e-300 and d0 > 1e-300:
        h = 0.01 * d0 / d1
    else:
        h = 1e-6 * span
    if h > span:
        h = span

    t = t0
    accepted = 0
    rejected = 0
    err_prev = 1.0
    hmin = 1e-13 * span

    while t < t1 - eps:
        if h > t1 - t:
            h = t1 - t
        if h < hmin:
            return STATUS_STEP_UNDERFLOW, accepted, rejected, t
        if accepted + rejected > max_steps:
            return STATUS_TOO_MANY_STEPS, accepted, rejected, t

        for i in range(n):
            ytmp[i] = y[i] + 0.5 * h * f0[i]
        rhs(t + 0.5 * h, ytmp, k2, args)
        for i in range(n):
            ytmp[i] = y[i] + 0.75 * h * k2[i]
        rhs(t + 0.75 * h, ytmp, k3, args)
        for i in range(n):
            ynew[i] = y[i] + h * (
                (2.0 / 9.0) * f0[i] + (1.0 / 3.0) * k2[i] + (4.0 / 9.0) * k3[i]
            )
        rhs(t + h, ynew, k4, args)
        for i in range(n):
            err[i] = h * (
                (-5.0 / 72.0) * f0[i]
                + (1.0 / 12.0) * k2[i]
                + (1.0 / 9.0) * k3[i]
                - (1.0 / 8.0) * k4[i]
            )
        e = _error_norm(err, y, ynew, rtol, atol)

        if e <= 1.0:
            # dense output: cubic Hermite on (y, f0) -- (ynew, k4)
            while idx < n_out and out_t[idx] <= t + h + eps:
                th = (out_t[idx] - t) / h
                if th > 1.0:
                    th = 1.0
                h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th)
                h10 = th * (1.0 - th) * (1.0 - th)
                h01 = th * th * (3.0 - 2.0 * th)
                h11 = th * th * (th - 1.0)
                for i in range(n):
                    y_out[idx, i] = (
                        h00 * y[i]
                        + h10 * h * f0[i]
                        + h01 * ynew[i]
                        + h11 * h * k4[i]
                    )
                idx += 1
            t += h
            for i in range(n):
                y[i] = ynew[i]
                f0[i] = k4[i]  # FSAL
            accepted += 1
            if e < 1e-10:
                e = 1e-10
            fac = _SAFETY * e ** (-_ALPHA) * err_prev**_BETA
            if fac < _FAC_MIN:
                fac = _FAC_MIN
            elif fac > _FAC_MAX:
                fac = _FAC_MAX
            h *= fac
            err_prev = e
        else:
            rejected += 1
            fac = _SAFETY * e ** (-1.0 / 3.0)
            if fac < 0.1:
                fac = 0.1
            elif fac > 0.9:
                fac = 0.9
            h *= fac

    while idx < n_out:
        for i in range(n):
            y_out[idx, i] = y[i]
        idx += 1
    return STATUS_OK, accepted, rejected, t1


def march_segment(rhs, args, t0, t1, y0, rtol, atol, out_t, max_steps=20_000_000):
    """Python-facing wrapper around the compiled loop.

    ``y0`` is updated in place to the state at ``t1``.  Returns
    ``(y_out, accepted, rejected)`` or raises on integrator failure.
    """
    from .errors import SolverFailure

    out_t = np.ascontiguousarray(out_t, dtype=float)
    y_out = np.empty((out_t.shape[0], y0.shape[0]))
    status, acc, rej, t_end = _march(
        rhs, args, float(t0), float(t1), y0, float(rtol), float(atol), out_t, y_out, max_steps
    )
    if status == STATUS_STEP_UNDERFLOW:
        raise SolverFailure(
            f"step-size underflow integrating [{t0}, {t1}]", last_time=t_end
        )
    if status == STATUS_TOO_MANY_STEPS:
        raise SolverFailure(
            f"step budget exhausted integrating [{t0}, {t1}]", last_time=t_end
        )
    return y_out, acc, rej
