# cython: boundscheck=False, wraparound=False, cdivision=True
"""Euler-Maruyama inner loop for the damped harmonic oscillator.

Consumes pre-drawn float32 standard normals (one per step) and writes the
position every ``k``-th step. The chunk length must be a multiple of ``k``.
"""

import numpy as np
cimport numpy as cnp


def em_chunk(double z, double v,
             double dt, double gamma, double omega2, double q,
             const float[::1] noise, Py_ssize_t k,
             double[::1] out, Py_ssize_t out_start):
    """Advance (z, v) through len(noise) steps, decimating by k into out.

    Update per step (pre-update state on the right):
        z' = z + v*dt
        v' = v - (gamma*v + omega2*z)*dt + q*xi

    Returns the advanced (z, v); writes len(noise)//k samples starting at
    out[out_start].
    """
    cdef Py_ssize_t n = noise.shape[0]
    cdef Py_ssize_t nblocks = n // k
    cdef Py_ssize_t b, j, i = 0, pos = out_start
    cdef double zn

    if nblocks * k != n:
        raise ValueError("noise chunk length must be a multiple of k")

    for b in range(nblocks):
        for j in range(k):
            zn = z + v * dt
            v = v - (gamma * v + omega2 * z) * dt + q * <double>noise[i]
            z = zn
            i += 1
        out[pos] = z
        pos += 1
    return z, v
