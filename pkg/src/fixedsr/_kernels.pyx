# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same functions and semantics as ``_kernels_py``."""

from libc.math cimport sin, cos, sqrt, exp, log, tan, pow, fabs, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline Py_ssize_t _max(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a > b else b


cdef int* _as_ints(tokens, Py_ssize_t n) except NULL:
    cdef int* buf = <int*> malloc((n + 1) * sizeof(int))
    cdef Py_ssize_t i
    if buf == NULL:
        raise MemoryError()
    for i in range(n):
        buf[i] = tokens[i]
    return buf


def prefix_depth(tokens, int nu, int nb):
    cdef Py_ssize_t n = len(tokens)
    if n == 0:
        raise ValueError("empty token sequence")
    cdef int* toks = _as_ints(tokens, n)
    cdef Py_ssize_t* slots = <Py_ssize_t*> malloc((n + 2) * sizeof(Py_ssize_t))
    cdef Py_ssize_t ns = 1, pos, d, depth = 0
    cdef int t, nop = nu + nb
    slots[0] = 0
    try:
        for pos in range(n):
            if ns == 0:
                raise ValueError(f"token at position {pos} follows a complete expression")
            ns -= 1
            d = slots[ns]
            if d > depth:
                depth = d
            t = toks[pos]
            if t < nu:
                slots[ns] = d + 1
                ns += 1
            elif t < nop:
                slots[ns] = d + 1
                slots[ns + 1] = d + 1
                ns += 2
        if ns > 0:
            return _max(depth, slots[ns - 1]), False
        return depth, True
    finally:
        free(toks)
        free(slots)


def postfix_depth(tokens, int nu, int nb):
    cdef Py_ssize_t n = len(tokens)
    if n == 0:
        raise ValueError("empty token sequence")
    cdef int* toks = _as_ints(tokens, n)
    cdef Py_ssize_t* stack = <Py_ssize_t*> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t k = 0, pos, b, m
    cdef int t, nop = nu + nb
    try:
        for pos in range(n):
            t = toks[pos]
            if t < nu:
                if k == 0:
                    raise ValueError(f"unary operator at position {pos} has no operand")
                stack[k - 1] += 1
            elif t < nop:
                if k < 2:
                    raise ValueError(f"binary operator at position {pos} has fewer than two operands")
                k -= 1
                b = stack[k]
                stack[k - 1] = _max(stack[k - 1], b) + 1
            else:
                stack[k] = 0
                k += 1
        m = stack[0]
        for pos in range(1, k):
            if stack[pos] > m:
                m = stack[pos]
        return m, k == 1
    finally:
        free(toks)
        free(stack)


def postfix_fold(stack):
    cdef Py_ssize_t i, n = len(stack)
    if n == 0:
        raise ValueError("empty stack")
    cdef Py_ssize_t acc = stack[n - 1], d
    for i in range(n - 2, -1, -1):
        d = stack[i]
        acc = _max(d, acc) + 1
    return acc


def subtree_spans(tokens, int nu, int nb, bint postfix):
    cdef Py_ssize_t n = len(tokens)
    if n == 0:
        raise ValueError("empty token sequence")
    cdef int* toks = _as_ints(tokens, n)
    cdef Py_ssize_t* sa = <Py_ssize_t*> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* sd = <Py_ssize_t*> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t k = 0, i, d1, d2
    cdef int t, nop = nu + nb
    starts = [0] * n
    stops = [0] * n
    depths = [0] * n
    try:
        if postfix:
            for i in range(n):
                t = toks[i]
                if t < nu:
                    if k < 1:
                        raise ValueError("incomplete expression")
                    sd[k - 1] += 1
                elif t < nop:
                    if k < 2:
                        raise ValueError("incomplete expression")
                    k -= 1
                    d2 = sd[k]
                    sd[k - 1] = _max(sd[k - 1], d2) + 1
                else:
                    sa[k] = i
                    sd[k] = 0
                    k += 1
                starts[i] = sa[k - 1]
                stops[i] = i
                depths[i] = sd[k - 1]
        else:
            for i in range(n - 1, -1, -1):
                t = toks[i]
                if t < nu:
                    if k < 1:
                        raise ValueError("incomplete expression")
                    sd[k - 1] += 1
                elif t < nop:
                    if k < 2:
                        raise ValueError("incomplete expression")
                    k -= 1
                    d1 = sd[k]
                    sd[k - 1] = _max(sd[k - 1], d1) + 1
                else:
                    sa[k] = i
                    sd[k] = 0
                    k += 1
                starts[i] = i
                stops[i] = sa[k - 1]
                depths[i] = sd[k - 1]
        if k != 1:
            raise ValueError("incomplete expression")
        return starts, stops, depths
    finally:
        free(toks)
        free(sa)
        free(sd)


cdef inline int _pick(double u, int n_un, int n_bin, int n_leaf,
                      bint allow_bin, bint allow_un, bint allow_leaf) nogil:
    cdef int count = 0, j
    if allow_un:
        count += n_un
    if allow_bin:
        count += n_bin
    if allow_leaf:
        count += n_leaf
    if count == 0:
        return -1
    j = <int> (u * count)
    if j >= count:
        j = count - 1
    if allow_un:
        if j < n_un:
            return j
        j -= n_un
    if allow_bin:
        if j < n_bin:
            return n_un + j
        j -= n_bin
    return n_un + n_bin + j


def rollout_prefix(int N, int nu, int nb, int nl, const double[:] u):
    cdef Py_ssize_t cap = u.shape[0]
    cdef int* out = <int*> malloc((cap + 1) * sizeof(int))
    cdef int* slots = <int*> malloc((cap + 2) * sizeof(int))
    cdef Py_ssize_t ns = 1, pos = 0, i
    cdef int d, placed = 0, t
    cdef bint ops_ok, leaf_ok
    slots[0] = 0
    try:
        while ns > 0:
            if pos >= cap:
                raise ValueError("uniform buffer exhausted")
            d = slots[ns - 1]
            ops_ok = d + 1 <= N
            leaf_ok = not (ns == 1 and (placed if placed > d else d) < N)
            t = _pick(u[pos], nu, nb, nl, ops_ok and nb > 0, ops_ok and nu > 0, leaf_ok)
            if t < 0:
                raise ValueError(f"no legal token at step {pos}")
            ns -= 1
            if d > placed:
                placed = d
            if t < nu:
                slots[ns] = d + 1
                ns += 1
            elif t < nu + nb:
                slots[ns] = d + 1
                slots[ns + 1] = d + 1
                ns += 2
            out[pos] = t
            pos += 1
        return tuple([out[i] for i in range(pos)])
    finally:
        free(out)
        free(slots)


def rollout_postfix(int N, int nu, int nb, int nl, const double[:] u):
    cdef Py_ssize_t cap = u.shape[0]
    cdef int* out = <int*> malloc((cap + 1) * sizeof(int))
    cdef int* stack = <int*> malloc((cap + 1) * sizeof(int))
    cdef int* pm = <int*> malloc((cap + 1) * sizeof(int))
    cdef Py_ssize_t pos = 0, i
    cdef int k = 0, top, below, mc_leaf, mc_un, t, v, a, b
    cdef bint leaf_ok, un_ok, bin_ok
    try:
        while not (k == 1 and stack[0] == N):
            if pos >= cap:
                raise ValueError("uniform buffer exhausted")
            if k == 0:
                leaf_ok = True
                un_ok = False
                bin_ok = False
            else:
                top = stack[k - 1]
                below = pm[k - 2] if k >= 2 else -1
                mc_leaf = below if below > top + k else top + k
                leaf_ok = nb > 0 and mc_leaf <= N
                if k == 1:
                    mc_un = top + 1
                else:
                    mc_un = below if below > top + k else top + k
                un_ok = nu > 0 and mc_un <= N
                bin_ok = nb > 0 and k >= 2
            t = _pick(u[pos], nu, nb, nl, bin_ok, un_ok, leaf_ok)
            if t < 0:
                raise ValueError(f"no legal token at step {pos}")
            if t < nu:
                stack[k - 1] += 1
                v = stack[k - 1] + k
                pm[k - 1] = v if (k == 1 or v > pm[k - 2]) else pm[k - 2]
            elif t < nu + nb:
                k -= 1
                b = stack[k]
                a = stack[k - 1]
                stack[k - 1] = (a if a > b else b) + 1
                v = stack[k - 1] + k
                pm[k - 1] = v if (k == 1 or v > pm[k - 2]) else pm[k - 2]
            else:
                stack[k] = 0
                v = k + 1
                pm[k] = v if (k == 0 or v > pm[k - 1]) else pm[k - 1]
                k += 1
            out[pos] = t
            pos += 1
        return tuple([out[i] for i in range(pos)])
    finally:
        free(out)
        free(stack)
        free(pm)


cdef inline double _unary(int op, double a) nogil:
    if op == 0:
        return sin(a)
    elif op == 1:
        return cos(a)
    elif op == 2:
        return sqrt(a)
    elif op == 3:
        return exp(a)
    elif op == 4:
        return log(a)
    elif op == 5:
        return tan(a)
    elif op == 6:
        return -a
    return fabs(a)


cdef inline double _binary(int op, double a, double b) nogil:
    if op == 0:
        return a + b
    elif op == 1:
        return a - b
    elif op == 2:
        return a * b
    elif op == 3:
        return a / b
    return pow(a, b)


cdef Py_ssize_t _check_program(const int* toks, Py_ssize_t ntok, const int[:] kinds,
                               bint postfix, Py_ssize_t* nconst) except -1:
    """Validate arity and return the peak stack height."""
    cdef Py_ssize_t idx, i, k = 0, kmax = 0
    cdef int kind
    nconst[0] = 0
    for idx in range(ntok):
        i = idx if postfix else ntok - 1 - idx
        kind = kinds[toks[i]]
        if kind >= 2:
            k += 1
            if kind == 3:
                nconst[0] += 1
        elif kind == 0:
            if k < 1:
                raise ValueError("stack underflow")
        else:
            if k < 2:
                raise ValueError("stack underflow")
            k -= 1
        if k > kmax:
            kmax = k
    if k != 1:
        raise ValueError("incomplete expression")
    return kmax


cdef void _run(const int* toks, Py_ssize_t ntok, const int[:] kinds, const int[:] args,
               const double[:, ::1] cols, const double* consts, Py_ssize_t nconst,
               bint postfix, double* buf) noexcept nogil:
    """Stack machine over rows of ``buf`` (kmax x n); the result lands in row 0."""
    cdef Py_ssize_t n = cols.shape[1]
    cdef Py_ssize_t idx, i, r, k = 0, ci
    cdef int t, kind, op
    cdef double c
    cdef double* top
    cdef double* sec
    ci = 0 if postfix else nconst - 1
    for idx in range(ntok):
        i = idx if postfix else ntok - 1 - idx
        t = toks[i]
        kind = kinds[t]
        op = args[t]
        if kind == 2:
            top = buf + k * n
            for r in range(n):
                top[r] = cols[op, r]
            k += 1
        elif kind == 3:
            c = consts[ci]
            if postfix:
                ci += 1
            else:
                ci -= 1
            top = buf + k * n
            for r in range(n):
                top[r] = c
            k += 1
        elif kind == 0:
            top = buf + (k - 1) * n
            for r in range(n):
                top[r] = _unary(op, top[r])
        else:
            # postfix: (second, top) = (a, b); prefix: (top, second) = (a, b)
            top = buf + (k - 1) * n
            sec = buf + (k - 2) * n
            if postfix:
                for r in range(n):
                    sec[r] = _binary(op, sec[r], top[r])
            else:
                for r in range(n):
                    sec[r] = _binary(op, top[r], sec[r])
            k -= 1


def evaluate(tokens, const int[:] kinds, const int[:] args, const double[:, ::1] cols,
             const double[:] consts, bint postfix):
    cdef Py_ssize_t ntok = len(tokens)
    cdef Py_ssize_t n = cols.shape[1]
    cdef Py_ssize_t nconst, kmax
    if ntok == 0:
        raise ValueError("empty token sequence")
    cdef int* toks = _as_ints(tokens, ntok)
    cdef double[:, ::1] buf
    cdef double[::1] cbuf
    cdef double* cptr = NULL
    try:
        kmax = _check_program(toks, ntok, kinds, postfix, &nconst)
        if nconst != consts.shape[0]:
            raise ValueError(f"expected {nconst} constants, got {consts.shape[0]}")
        cbuf = np.array(consts, dtype=np.float64)
        if nconst > 0:
            cptr = &cbuf[0]
        out = np.empty((kmax, n), dtype=np.float64)
        buf = out
        with nogil:
            _run(toks, ntok, kinds, args, cols, cptr, nconst, postfix, &buf[0, 0])
        return np.array(out[0])
    finally:
        free(toks)


cdef double _cost(const int* toks, Py_ssize_t ntok, const int[:] kinds, const int[:] args,
                  const double[:, ::1] cols, const double[:] y, const double* c,
                  Py_ssize_t k, bint postfix, double* buf, double* res) noexcept nogil:
    """Residuals ``f(x; c) - y`` into ``res``; returns their squared norm."""
    cdef Py_ssize_t r, n = cols.shape[1]
    cdef double s = 0.0, d
    _run(toks, ntok, kinds, args, cols, c, k, postfix, buf)
    for r in range(n):
        d = buf[r] - y[r]
        res[r] = d
        s += d * d
    return s


cdef int _solve(double* A, double* b, Py_ssize_t k) noexcept nogil:
    """Gaussian elimination with partial pivoting, in place; 1 if singular."""
    cdef Py_ssize_t i, j, col, piv
    cdef double best, f, tmp
    for col in range(k):
        piv = col
        best = fabs(A[col * k + col])
        for i in range(col + 1, k):
            if fabs(A[i * k + col]) > best:
                best = fabs(A[i * k + col])
                piv = i
        if best == 0.0:
            return 1
        if piv != col:
            for j in range(k):
                tmp = A[col * k + j]
                A[col * k + j] = A[piv * k + j]
                A[piv * k + j] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for i in range(col + 1, k):
            f = A[i * k + col] / A[col * k + col]
            for j in range(col, k):
                A[i * k + j] -= f * A[col * k + j]
            b[i] -= f * b[col]
    for i in range(k - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, k):
            tmp -= A[i * k + j] * b[j]
        b[i] = tmp / A[i * k + i]
    return 0


def fit_lm(tokens, const int[:] kinds, const int[:] args, const double[:, ::1] cols,
           const double[:] y, const double[:] c0, int iterations, double lam0,
           double factor, double rel_step, bint postfix):
    """Levenberg-Marquardt on the constants; returns ``(consts, cost)``.

    ``cost`` is the squared residual norm (``inf`` if the seed is non-finite).
    Every attempted step counts as an iteration.
    """
    cdef Py_ssize_t ntok = len(tokens)
    cdef Py_ssize_t n = cols.shape[1]
    cdef Py_ssize_t k, kmax, i, j, r, it
    if ntok == 0:
        raise ValueError("empty token sequence")
    cdef int* toks = _as_ints(tokens, ntok)
    cdef double* mem = NULL
    cdef double *buf, *res, *res_new, *J, *A, *g, *c, *c_new, *cj
    cdef double cost, cost_new, lam = lam0, h, ci, up, s
    cdef bint have_j = False, finite, singular
    try:
        kmax = _check_program(toks, ntok, kinds, postfix, &k)
        if k != c0.shape[0]:
            raise ValueError(f"expected {k} constants, got {c0.shape[0]}")
        if y.shape[0] != n:
            raise ValueError("label length differs from row count")
        mem = <double*> malloc((kmax * n + 2 * n + k * n + 2 * k * k + 4 * k + 1) * sizeof(double))
        if mem == NULL:
            raise MemoryError()
        buf = mem
        res = buf + kmax * n
        res_new = res + n
        J = res_new + n
        A = J + k * n
        g = A + k * k
        c = g + k
        c_new = c + k
        cj = c_new + k
        for i in range(k):
            c[i] = c0[i]
        with nogil:
            cost = _cost(toks, ntok, kinds, args, cols, y, c, k, postfix, buf, res)
            if cost == cost and cost != INFINITY and k > 0:
                for it in range(iterations):
                    if not have_j:
                        # J[i, r]: central difference of the prediction in constant i
                        for i in range(k):
                            cj[i] = c[i]
                        for i in range(k):
                            ci = c[i]
                            h = rel_step * (fabs(ci) if fabs(ci) > 1.0 else 1.0)
                            cj[i] = ci + h
                            _run(toks, ntok, kinds, args, cols, cj, k, postfix, buf)
                            for r in range(n):
                                J[i * n + r] = buf[r]
                            cj[i] = ci - h
                            _run(toks, ntok, kinds, args, cols, cj, k, postfix, buf)
                            for r in range(n):
                                J[i * n + r] = (J[i * n + r] - buf[r]) / (2.0 * h)
                            cj[i] = ci
                        have_j = True
                    finite = True
                    for i in range(k):
                        s = 0.0
                        for r in range(n):
                            s += J[i * n + r] * res[r]
                        g[i] = -s
                        if not (s == s and s != INFINITY and s != -INFINITY):
                            finite = False
                        for j in range(k):
                            s = 0.0
                            for r in range(n):
                                s += J[i * n + r] * J[j * n + r]
                            A[i * k + j] = s
                            if not (s == s and s != INFINITY and s != -INFINITY):
                                finite = False
                        A[i * k + i] += lam
                    if not finite:
                        break
                    singular = _solve(A, g, k)
                    if singular:
                        lam *= factor
                        continue
                    for i in range(k):
                        c_new[i] = c[i] + g[i]
                    cost_new = _cost(toks, ntok, kinds, args, cols, y, c_new, k, postfix, buf, res_new)
                    if cost_new == cost_new and cost_new != INFINITY and cost_new < cost:
                        for i in range(k):
                            c[i] = c_new[i]
                        for r in range(n):
                            res[r] = res_new[r]
                        cost = cost_new
                        lam /= factor
                        have_j = False
                    else:
                        lam *= factor
            elif not (cost == cost):
                cost = INFINITY
        return np.array([c[i] for i in range(k)], dtype=np.float64), cost
    finally:
        free(toks)
        free(mem)
