# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled solve kernel: a 2-D Nelder-Mead lattice ensemble specialized to
the steady-state residual objective.

Mirrors the pure-Python fallback operation for operation (same IEEE
arithmetic, same branch structure, same libm tanh), so both backends return
bit-identical results. Keep the two in sync when changing either.
"""

from libc.math cimport tanh, fabs, isfinite

BACKEND = "compiled"

DEF NDIM = 2
DEF NPTS = 3

cdef double INF = float("inf")

# search box: z in [0, 1]; a unbounded, gridded over the default [-2, 2] box
cdef double Z_LO = 0.0
cdef double Z_HI = 1.0
cdef double A_GRID_LO = -2.0
cdef double A_GRID_HI = 2.0


cdef inline double _obj(double v, double delta, double z, double a) nogil:
    cdef double t = 0.5 * (a / v)
    return fabs(a * tanh(t * (1.0 - z)) - 1.0) + fabs(
        a * tanh(t * (1.0 + z)) - 1.0 - delta
    )


cdef inline double _clip_z(double z) nogil:
    if z < Z_LO:
        return Z_LO
    if z > Z_HI:
        return Z_HI
    return z


cdef inline double _feval(double v, double delta, double z, double a) nogil:
    cdef double val = _obj(v, delta, z, a)
    if not isfinite(val):
        return INF
    return val


cdef int _nelder_mead(double v, double delta, double z0, double a0,
                      double ftol, double xtol, int max_evals,
                      double* out_z, double* out_a, double* out_f) nogil:
    cdef double verts[NPTS][NDIM]
    cdef double fvals[NPTS]
    cdef double tmpv[NDIM]
    cdef double tmpf
    cdef double centroid[NDIM]
    cdef double reflect[NDIM]
    cdef double other[NDIM]
    cdef double f_r, f_o, fspread, xspread, d, step
    cdef int evals = 0
    cdef int i, j, k, all_inf

    # initial simplex: start point plus a 10%-of-box step per dimension
    verts[0][0] = _clip_z(z0)
    verts[0][1] = a0
    step = 0.1 * (Z_HI - Z_LO)
    verts[1][0] = verts[0][0]
    verts[1][1] = verts[0][1]
    if verts[1][0] + step > Z_HI:
        verts[1][0] = verts[1][0] - step
    else:
        verts[1][0] = verts[1][0] + step
    verts[1][0] = _clip_z(verts[1][0])
    step = 0.1 * (A_GRID_HI - A_GRID_LO)
    verts[2][0] = verts[0][0]
    verts[2][1] = verts[0][1] + step

    for i in range(NPTS):
        fvals[i] = _feval(v, delta, verts[i][0], verts[i][1])
        evals += 1
    all_inf = 1
    for i in range(NPTS):
        if fvals[i] != INF:
            all_inf = 0
    if all_inf:
        out_z[0] = verts[0][0]
        out_a[0] = verts[0][1]
        out_f[0] = INF
        return evals

    while True:
        # stable insertion sort by objective value
        for i in range(1, NPTS):
            tmpf = fvals[i]
            for j in range(NDIM):
                tmpv[j] = verts[i][j]
            k = i - 1
            while k >= 0 and fvals[k] > tmpf:
                fvals[k + 1] = fvals[k]
                for j in range(NDIM):
                    verts[k + 1][j] = verts[k][j]
                k -= 1
            fvals[k + 1] = tmpf
            for j in range(NDIM):
                verts[k + 1][j] = tmpv[j]

        fspread = fvals[NPTS - 1] - fvals[0]
        xspread = 0.0
        for i in range(1, NPTS):
            for j in range(NDIM):
                d = fabs(verts[i][j] - verts[0][j])
                if d > xspread:
                    xspread = d
        if fspread <= ftol and xspread <= xtol:
            break
        if evals >= max_evals:
            break

        for j in range(NDIM):
            centroid[j] = 0.0
        for i in range(NPTS - 1):
            for j in range(NDIM):
                centroid[j] += verts[i][j]
        for j in range(NDIM):
            centroid[j] = centroid[j] / (NPTS - 1)

        for j in range(NDIM):
            reflect[j] = centroid[j] + 1.0 * (centroid[j] - verts[NPTS - 1][j])
        reflect[0] = _clip_z(reflect[0])
        f_r = _feval(v, delta, reflect[0], reflect[1])
        evals += 1

        if f_r < fvals[0]:
            for j in range(NDIM):
                other[j] = centroid[j] + 2.0 * (centroid[j] - verts[NPTS - 1][j])
            other[0] = _clip_z(other[0])
            f_o = _feval(v, delta, other[0], other[1])
            evals += 1
            if f_o < f_r:
                for j in range(NDIM):
                    verts[NPTS - 1][j] = other[j]
                fvals[NPTS - 1] = f_o
            else:
                for j in range(NDIM):
                    verts[NPTS - 1][j] = reflect[j]
                fvals[NPTS - 1] = f_r
        elif f_r < fvals[NPTS - 2]:
            for j in range(NDIM):
                verts[NPTS - 1][j] = reflect[j]
            fvals[NPTS - 1] = f_r
        else:
            if f_r < fvals[NPTS - 1]:
                for j in range(NDIM):
                    other[j] = centroid[j] + 0.5 * (centroid[j] - verts[NPTS - 1][j])
            else:
                for j in range(NDIM):
                    other[j] = centroid[j] - 0.5 * (centroid[j] - verts[NPTS - 1][j])
            other[0] = _clip_z(other[0])
            f_o = _feval(v, delta, other[0], other[1])
            evals += 1
            if f_o < f_r and f_o < fvals[NPTS - 1]:
                for j in range(NDIM):
                    verts[NPTS - 1][j] = other[j]
                fvals[NPTS - 1] = f_o
            else:
                for i in range(1, NPTS):
                    for j in range(NDIM):
                        verts[i][j] = verts[0][j] + 0.5 * (verts[i][j] - verts[0][j])
                    verts[i][0] = _clip_z(verts[i][0])
                    fvals[i] = _feval(v, delta, verts[i][0], verts[i][1])
                    evals += 1

    k = 0
    for i in range(1, NPTS):
        if fvals[i] < fvals[k]:
            k = i
    out_z[0] = verts[k][0]
    out_a[0] = verts[k][1]
    out_f[0] = fvals[k]
    return evals


def objective_value(double v, double delta, double z, double a):
    return _obj(v, delta, z, a)


def solve_lattice(double v, double delta, int nbins_z, int nbins_a,
                  double ftol, double xtol, int max_evals):
    """Best (z, a, fit, evals) over the grid-center Nelder-Mead ensemble."""
    cdef double wz = (Z_HI - Z_LO) / nbins_z
    cdef double wa = (A_GRID_HI - A_GRID_LO) / nbins_a
    cdef double z0, a0, rz, ra, rf
    cdef double best_z = 0.0, best_a = 0.0, best_f = INF
    cdef int kz, ka, total = 0, have = 0
    for kz in range(nbins_z):
        z0 = Z_LO + (kz + 0.5) * wz
        for ka in range(nbins_a):
            a0 = A_GRID_LO + (ka + 0.5) * wa
            with nogil:
                total += _nelder_mead(v, delta, z0, a0, ftol, xtol, max_evals,
                                      &rz, &ra, &rf)
            if have == 0 or rf < best_f:
                best_z, best_a, best_f = rz, ra, rf
                have = 1
    return best_z, best_a, best_f, total
