# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tableau kernels.  Same layout, rules and status codes as ``_simplex_py``."""

cdef double PIVOT_TOL = 1e-9
cdef Py_ssize_t BLAND_AFTER = 50


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t nr = T.shape[0], nc = T.shape[1]
    cdef Py_ssize_t i, k
    cdef double inv = 1.0 / T[r, j]
    cdef double f
    for k in range(nc):
        T[r, k] *= inv
    T[r, j] = 1.0
    for i in range(nr):
        if i == r:
            continue
        f = T[i, j]
        if f == 0.0:
            continue
        for k in range(nc):
            T[i, k] -= f * T[r, k]
        T[i, j] = 0.0


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    with nogil:
        _pivot(T, r, j)


def primal(double[:, ::1] T, Py_ssize_t[::1] basis, Py_ssize_t n_enter, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t it = 0
    cdef int status
    with nogil:
        status = _primal(T, basis, n_enter, tol, max_iter, &it)
    return status, it


def dual(double[:, ::1] T, Py_ssize_t[::1] basis, Py_ssize_t n_enter, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t it = 0
    cdef int status
    with nogil:
        status = _dual(T, basis, n_enter, tol, max_iter, &it)
    return status, it


cdef inline double _pos(double x) noexcept nogil:
    return x if x > 0.0 else 0.0


cdef int _primal(double[:, ::1] T, Py_ssize_t[::1] basis, Py_ssize_t n_enter, double tol,
                 Py_ssize_t max_iter, Py_ssize_t* iters) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef Py_ssize_t it, i, j, r, stall = 0
    cdef double dj, best, ratio, rmin, piv, a, bound
    cdef bint bland
    for it in range(max_iter):
        bland = stall > BLAND_AFTER
        j = -1
        best = -tol
        for i in range(n_enter):
            dj = T[m, i]
            if dj < best:
                j = i
                if bland:
                    break
                best = dj
        if j < 0:
            iters[0] = it
            return 0
        r = -1
        rmin = 0.0
        if bland:
            # textbook ratio test, ties to the lowest basic index
            for i in range(m):
                a = T[i, j]
                if a > PIVOT_TOL:
                    ratio = _pos(T[i, rhs]) / a
                    if r < 0 or ratio < rmin - 1e-12 * (1.0 + rmin):
                        r = i
                        rmin = ratio
                    elif ratio <= rmin + 1e-12 * (1.0 + rmin) and basis[i] < basis[r]:
                        r = i
        else:
            # Harris: relaxed bound first, then the largest pivot within it
            bound = -1.0
            for i in range(m):
                a = T[i, j]
                if a > PIVOT_TOL:
                    ratio = (_pos(T[i, rhs]) + tol) / a
                    if bound < 0.0 or ratio < bound:
                        bound = ratio
            piv = 0.0
            for i in range(m):
                a = T[i, j]
                if a > PIVOT_TOL and _pos(T[i, rhs]) / a <= bound and a > piv:
                    r = i
                    piv = a
            if r >= 0:
                rmin = _pos(T[r, rhs]) / T[r, j]
        if r < 0:
            iters[0] = it
            return 1
        if rmin * (-T[m, j]) <= tol * tol:
            stall += 1
        else:
            stall = 0
        _pivot(T, r, j)
        basis[r] = j
    iters[0] = max_iter
    return 2


cdef int _dual(double[:, ::1] T, Py_ssize_t[::1] basis, Py_ssize_t n_enter, double tol,
               Py_ssize_t max_iter, Py_ssize_t* iters) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef Py_ssize_t it, i, j, r, stall = 0
    cdef double best, ratio, rmin, piv, a, bound
    cdef bint bland
    for it in range(max_iter):
        bland = stall > BLAND_AFTER
        r = -1
        best = -tol
        for i in range(m):
            if T[i, rhs] < -tol:
                if bland:
                    if r < 0 or basis[i] < basis[r]:
                        r = i
                elif T[i, rhs] < best:
                    r = i
                    best = T[i, rhs]
        if r < 0:
            iters[0] = it
            return 0
        j = -1
        rmin = 0.0
        if bland:
            for i in range(n_enter):
                a = -T[r, i]
                if a > PIVOT_TOL:
                    ratio = _pos(T[m, i]) / a
                    if j < 0 or ratio < rmin - 1e-12 * (1.0 + rmin):
                        j = i
                        rmin = ratio
        else:
            bound = -1.0
            for i in range(n_enter):
                a = -T[r, i]
                if a > PIVOT_TOL:
                    ratio = (_pos(T[m, i]) + PIVOT_TOL) / a
                    if bound < 0.0 or ratio < bound:
                        bound = ratio
            piv = 0.0
            for i in range(n_enter):
                a = -T[r, i]
                if a > PIVOT_TOL and _pos(T[m, i]) / a <= bound and a > piv:
                    j = i
                    piv = a
            if j >= 0:
                rmin = _pos(T[m, j]) / (-T[r, j])
        if j < 0:
            if T[r, rhs] > -PIVOT_TOL:
                # round-off sized shortfall with no usable pivot: absorb it
                T[r, rhs] = 0.0
                continue
            iters[0] = it
            return 1
        if rmin <= tol:
            stall += 1
        else:
            stall = 0
        _pivot(T, r, j)
        basis[r] = j
    iters[0] = max_iter
    return 2
