"""Pure-numpy Dormand-Prince 5(4) propagation of ``dY/dt = -i H(t) Y``.

Mirrors ``_kernels.pyx`` step for step; used when the compiled extension is
unavailable or disabled.
"""
import numpy as np

# Dormand-Prince tableau
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B = A[6]
# fifth-order minus fourth-order weights
E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

SAFETY, MIN_FACTOR, MAX_FACTOR = 0.9, 0.2, 5.0
STATUS_OK, STATUS_MAX_STEPS, STATUS_UNDERFLOW = 0, 1, 2


class _PairRHS:
    def __init__(self, cutoff, delta, omega0, tau, tc, xi0, det, ws, phi, taus, tcs, rwa,
                 omega_cav):
        d = 3 * cutoff
        self.jc = np.zeros((d, d))
        self.dz = np.zeros(d)
        self.raise_idx = (np.arange(cutoff) * 3 + 2, np.arange(cutoff) * 3 + 1)
        for n in range(cutoff):
            self.dz[3 * n + 1] = -0.5
            self.dz[3 * n + 2] = 0.5
            if n + 1 < cutoff:
                e, g1 = 3 * n + 2, 3 * (n + 1) + 1
                self.jc[e, g1] = self.jc[g1, e] = np.sqrt(n + 1)
        self.delta = delta
        self.omega0, self.tau, self.tc = omega0, tau, tc
        self.drives = list(zip(xi0, det, ws, phi, taus, tcs, rwa))
        self.omega_cav = omega_cav
        self.d = d

    def hamiltonian(self, t):
        om = self.omega0 * np.exp(-(((t - self.tc) / self.tau) ** 2))
        h = (om * self.jc).astype(complex)
        h[np.diag_indices(self.d)] = self.delta * self.dz
        c = 0j
        for xi0, det, ws, phi, taus, tcs, rwa in self.drives:
            env = xi0 * np.exp(-(((t - tcs) / taus) ** 2))
            if rwa:
                c += -0.5 * env * np.exp(-1j * (det * t + phi))
            else:
                c += -env * np.cos(ws * t + phi) * np.exp(1j * self.omega_cav * t)
        if c != 0:
            h[self.raise_idx] += c
            h[self.raise_idx[::-1]] += np.conj(c)
        return h

    def __call__(self, t, y):
        return -1j * (self.hamiltonian(t) @ y)


def propagate(y0, t0, t1, delta, cutoff, omega0, tau, tc, xi0, det, ws, phi, taus, tcs, rwa,
              omega_cav, rtol, atol, max_step, h0, sample_times, max_steps):
    """Integrate from ``t0`` to ``t1``; returns ``(y, samples, nsteps, nrejected, status)``.

    ``sample_times`` must be sorted and lie in ``(t0, t1]``; the step size is
    clipped so every sample time is hit exactly.
    """
    f = _PairRHS(cutoff, delta, omega0, tau, tc, xi0, det, ws, phi, taus, tcs, rwa, omega_cav)
    y = np.array(y0, dtype=complex, copy=True)
    samples = np.empty((len(sample_times),) + y.shape, dtype=complex)
    t = t0
    h_try = min(h0, max_step, t1 - t0)
    nsteps = nrej = 0
    isamp = 0
    k = [None] * 7
    k[0] = f(t, y)
    while t < t1:
        if nsteps + nrej >= max_steps:
            return y, samples, nsteps, nrej, STATUS_MAX_STEPS
        target = sample_times[isamp] if isamp < len(sample_times) else t1
        hit = t + h_try >= target
        h = target - t if hit else h_try
        for s in range(1, 7):
            ys = y.copy()
            for j, a in enumerate(A[s]):
                if a:
                    ys += (h * a) * k[j]
            k[s] = f(t + C[s] * h, ys)
        # the last stage input is the fifth-order solution (FSAL)
        err = sum(h * e * kk for e, kk in zip(E, k) if e)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(ys))
        en = float(np.max(np.abs(err) / scale))
        if en <= 1.0:
            t = target if hit else t + h
            y = ys
            k[0] = k[6]
            nsteps += 1
            if hit and isamp < len(sample_times):
                samples[isamp] = y
                isamp += 1
            fac = MAX_FACTOR if en == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * en ** -0.2))
            if not hit:
                h_try = min(h * fac, max_step)
        else:
            nrej += 1
            h_try = h * max(MIN_FACTOR, SAFETY * en ** -0.2)
            if h_try < 1e-16 * max(1e-12, abs(t)):
                return y, samples, nsteps, nrej, STATUS_UNDERFLOW
    return y, samples, nsteps, nrej, STATUS_OK
