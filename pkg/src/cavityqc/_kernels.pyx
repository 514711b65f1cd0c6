# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) propagation of ``dY/dt = -i H(t) Y`` for one
atom-cavity pair. Same algorithm and return contract as ``_fallback.propagate``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, sqrt, fabs, pow

cnp.import_array()

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176
cdef double A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784
cdef double B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9, MIN_FACTOR = 0.2, MAX_FACTOR = 5.0


cdef struct Params:
    int cutoff
    double delta
    double omega0
    double tau
    double tc
    int ndrive
    double *xi0
    double *det
    double *ws
    double *phi
    double *taus
    double *tcs
    long *rwa
    double omega_cav


cdef inline void coefficients(Params *p, double t, double *om, double complex *c) nogil:
    cdef double x = (t - p.tc) / p.tau
    cdef double env, ang, cs
    cdef int k
    om[0] = p.omega0 * exp(-x * x)
    c[0] = 0.0
    for k in range(p.ndrive):
        x = (t - p.tcs[k]) / p.taus[k]
        env = p.xi0[k] * exp(-x * x)
        if env == 0.0:
            continue
        if p.rwa[k]:
            ang = p.det[k] * t + p.phi[k]
            c[0] = c[0] - 0.5 * env * (cos(ang) - 1j * sin(ang))
        else:
            cs = cos(p.ws[k] * t + p.phi[k])
            ang = p.omega_cav * t
            c[0] = c[0] - env * cs * (cos(ang) + 1j * sin(ang))


cdef void rhs(Params *p, double t, double complex[:, ::1] y, double complex[:, ::1] out) nogil:
    """out = -i H(t) y, H assembled on the fly from its sparse structure."""
    cdef double om, hd = 0.5 * p.delta
    cdef double complex c, cc, acc
    cdef int n, j, g, e, m = y.shape[1], cut = p.cutoff
    coefficients(p, t, &om, &c)
    cc = c.conjugate()
    for n in range(cut):
        g = 3 * n + 1
        e = 3 * n + 2
        for j in range(m):
            out[3 * n, j] = 0.0
            acc = -hd * y[g, j] + cc * y[e, j]
            if n > 0:
                acc = acc + om * sqrt(<double>n) * y[3 * (n - 1) + 2, j]
            out[g, j] = -1j * acc
            acc = hd * y[e, j] + c * y[g, j]
            if n + 1 < cut:
                acc = acc + om * sqrt(<double>(n + 1)) * y[3 * (n + 1) + 1, j]
            out[e, j] = -1j * acc


def propagate(y0, double t0, double t1, double delta, int cutoff, double omega0, double tau,
              double tc, xi0, det, ws, phi, taus, tcs, rwa, double omega_cav, double rtol,
              double atol, double max_step, double h0, sample_times, long max_steps):
    cdef cnp.ndarray[double, ndim=1, mode="c"] a_xi0 = np.ascontiguousarray(xi0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] a_det = np.ascontiguousarray(det, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] a_ws = np.ascontiguousarray(ws, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] a_phi = np.ascontiguousarray(phi, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] a_taus = np.ascontiguousarray(taus, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] a_tcs = np.ascontiguousarray(tcs, dtype=np.float64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] a_rwa = np.ascontiguousarray(rwa, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] st = np.ascontiguousarray(sample_times, dtype=np.float64)
    cdef Params p
    p.cutoff = cutoff
    p.delta = delta
    p.omega0 = omega0
    p.tau = tau
    p.tc = tc
    p.ndrive = a_xi0.shape[0]
    p.xi0 = &a_xi0[0] if p.ndrive else NULL
    p.det = &a_det[0] if p.ndrive else NULL
    p.ws = &a_ws[0] if p.ndrive else NULL
    p.phi = &a_phi[0] if p.ndrive else NULL
    p.taus = &a_taus[0] if p.ndrive else NULL
    p.tcs = &a_tcs[0] if p.ndrive else NULL
    p.rwa = &a_rwa[0] if p.ndrive else NULL
    p.omega_cav = omega_cav

    yarr = np.array(y0, dtype=np.complex128, order="C", copy=True)
    orig_shape = yarr.shape
    if yarr.ndim == 1:
        yarr = yarr.reshape(-1, 1)
    cdef int d = yarr.shape[0], m = yarr.shape[1]
    cdef int nsamp = st.shape[0]
    samples = np.empty((nsamp, d, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] sv = samples
    cdef double complex[:, ::1] y = yarr
    cdef double complex[:, ::1] ys = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] k1 = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] k2 = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] k3 = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] k4 = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] k5 = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] k6 = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] k7 = np.empty((d, m), dtype=np.complex128)
    cdef double complex[:, ::1] tmp
    cdef double t = t0, h, h_try, target, en, r, sc, fac
    cdef long nsteps = 0, nrej = 0
    cdef int isamp = 0, status = 0, i, j
    cdef bint hit
    cdef double complex errc

    h_try = min(h0, max_step, t1 - t0)
    with nogil:
        rhs(&p, t, y, k1)
        while t < t1:
            if nsteps + nrej >= max_steps:
                status = 1
                break
            target = st[isamp] if isamp < nsamp else t1
            hit = t + h_try >= target
            h = target - t if hit else h_try

            for i in range(d):
                for j in range(m):
                    ys[i, j] = y[i, j] + h * A21 * k1[i, j]
            rhs(&p, t + C2 * h, ys, k2)
            for i in range(d):
                for j in range(m):
                    ys[i, j] = y[i, j] + h * (A31 * k1[i, j] + A32 * k2[i, j])
            rhs(&p, t + C3 * h, ys, k3)
            for i in range(d):
                for j in range(m):
                    ys[i, j] = y[i, j] + h * (A41 * k1[i, j] + A42 * k2[i, j] + A43 * k3[i, j])
            rhs(&p, t + C4 * h, ys, k4)
            for i in range(d):
                for j in range(m):
                    ys[i, j] = y[i, j] + h * (A51 * k1[i, j] + A52 * k2[i, j] + A53 * k3[i, j]
                                              + A54 * k4[i, j])
            rhs(&p, t + C5 * h, ys, k5)
            for i in range(d):
                for j in range(m):
                    ys[i, j] = y[i, j] + h * (A61 * k1[i, j] + A62 * k2[i, j] + A63 * k3[i, j]
                                              + A64 * k4[i, j] + A65 * k5[i, j])
            rhs(&p, t + h, ys, k6)
            for i in range(d):
                for j in range(m):
                    ys[i, j] = y[i, j] + h * (B1 * k1[i, j] + B3 * k3[i, j] + B4 * k4[i, j]
                                              + B5 * k5[i, j] + B6 * k6[i, j])
            rhs(&p, t + h, ys, k7)

            en = 0.0
            for i in range(d):
                for j in range(m):
                    errc = h * (E1 * k1[i, j] + E3 * k3[i, j] + E4 * k4[i, j] + E5 * k5[i, j]
                                + E6 * k6[i, j] + E7 * k7[i, j])
                    sc = atol + rtol * max(abs(y[i, j]), abs(ys[i, j]))
                    r = abs(errc) / sc
                    if r > en:
                        en = r

            if en <= 1.0:
                t = target if hit else t + h
                for i in range(d):
                    for j in range(m):
                        y[i, j] = ys[i, j]
                tmp = k1
                k1 = k7
                k7 = tmp
                nsteps += 1
                if hit and isamp < nsamp:
                    for i in range(d):
                        for j in range(m):
                            sv[isamp, i, j] = y[i, j]
                    isamp += 1
                if not hit:
                    if en == 0.0:
                        fac = MAX_FACTOR
                    else:
                        fac = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * pow(en, -0.2)))
                    h_try = min(h * fac, max_step)
            else:
                nrej += 1
                h_try = h * max(MIN_FACTOR, SAFETY * pow(en, -0.2))
                if h_try < 1e-16 * max(1e-12, fabs(t)):
                    status = 2
                    break

    out = np.asarray(y).reshape(orig_shape).copy()
    samp = samples.reshape((nsamp,) + orig_shape)
    return out, samp, nsteps, nrej, status
