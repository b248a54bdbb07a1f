# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: network simplex for dense transportation problems and
monotone (quantile) coupling on the line.

The pure-Python twin lives in ``_kernels_py.py``; both must return the same
values to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow

cnp.import_array()

DEF STATE_UPPER = -1
DEF STATE_TREE = 0
DEF STATE_LOWER = 1
DEF DIR_UP = 1
DEF DIR_DOWN = -1


cdef class _Simplex:
    cdef Py_ssize_t m, n, N, root, narcs, block, next_arc
    cdef const double[:, ::1] C
    cdef double art
    cdef double eps
    cdef double[::1] flow
    cdef signed char[::1] state
    cdef double[::1] pi
    cdef Py_ssize_t[::1] parent, pred, thread, rev_thread, succ_num, last_succ
    cdef Py_ssize_t[::1] art_src, art_tgt
    cdef double[::1] art_cost
    cdef signed char[::1] pred_dir
    cdef Py_ssize_t[::1] dirty
    # pivot scratch
    cdef Py_ssize_t in_arc, join, u_in, v_in, u_out, v_out
    cdef double delta

    def __init__(self, const double[::1] a, const double[::1] b, const double[:, ::1] C):
        cdef Py_ssize_t u, e
        cdef double cmax = 0.0
        cdef Py_ssize_t i, j
        self.m = a.shape[0]
        self.n = b.shape[0]
        self.N = self.m + self.n
        self.root = self.N
        self.narcs = self.m * self.n
        self.C = C
        for i in range(self.m):
            for j in range(self.n):
                if fabs(C[i, j]) > cmax:
                    cmax = fabs(C[i, j])
        if cmax == 0.0:
            cmax = 1.0
        self.art = 2.0 * cmax * (self.N + 1)
        self.eps = 1e-14 * self.art
        self.block = max(<Py_ssize_t>sqrt(<double>self.narcs), 10)
        self.next_arc = 0

        self.flow = np.zeros(self.narcs + self.N, dtype=np.float64)
        self.state = np.full(self.narcs + self.N, STATE_LOWER, dtype=np.int8)
        self.pi = np.zeros(self.N + 1, dtype=np.float64)
        self.parent = np.zeros(self.N + 1, dtype=np.intp)
        self.pred = np.zeros(self.N + 1, dtype=np.intp)
        self.thread = np.zeros(self.N + 1, dtype=np.intp)
        self.rev_thread = np.zeros(self.N + 1, dtype=np.intp)
        self.succ_num = np.zeros(self.N + 1, dtype=np.intp)
        self.last_succ = np.zeros(self.N + 1, dtype=np.intp)
        self.pred_dir = np.zeros(self.N + 1, dtype=np.int8)
        self.art_src = np.zeros(self.N, dtype=np.intp)
        self.art_tgt = np.zeros(self.N, dtype=np.intp)
        self.art_cost = np.zeros(self.N, dtype=np.float64)
        self.dirty = np.zeros(self.N + 2, dtype=np.intp)

        # initial tree: every node hangs off the artificial root
        self.parent[self.root] = -1
        self.pred[self.root] = -1
        self.thread[self.root] = 0
        self.rev_thread[0] = self.root
        self.succ_num[self.root] = self.N + 1
        self.last_succ[self.root] = self.root - 1
        self.pi[self.root] = 0.0
        for u in range(self.N):
            e = self.narcs + u
            self.parent[u] = self.root
            self.pred[u] = e
            self.thread[u] = u + 1
            self.rev_thread[u + 1] = u
            self.succ_num[u] = 1
            self.last_succ[u] = u
            self.state[e] = STATE_TREE
            if u < self.m:
                self.pred_dir[u] = DIR_UP
                self.pi[u] = 0.0
                self.art_src[u] = u
                self.art_tgt[u] = self.root
                self.flow[e] = a[u]
                self.art_cost[u] = 0.0
            else:
                self.pred_dir[u] = DIR_DOWN
                self.pi[u] = self.art
                self.art_src[u] = self.root
                self.art_tgt[u] = u
                self.flow[e] = b[u - self.m]
                self.art_cost[u] = self.art

    cdef inline Py_ssize_t src(self, Py_ssize_t e) nogil:
        if e < self.narcs:
            return e // self.n
        return self.art_src[e - self.narcs]

    cdef inline Py_ssize_t tgt(self, Py_ssize_t e) nogil:
        if e < self.narcs:
            return self.m + e % self.n
        return self.art_tgt[e - self.narcs]

    cdef inline double cost(self, Py_ssize_t e) nogil:
        if e < self.narcs:
            return self.C[e // self.n, e % self.n]
        return self.art_cost[e - self.narcs]

    cdef bint find_entering(self) nogil:
        cdef double c, best = 0.0
        cdef Py_ssize_t cnt = self.block
        cdef Py_ssize_t e, i, j
        cdef Py_ssize_t n = self.n
        cdef Py_ssize_t m = self.m
        cdef bint found = False
        e = self.next_arc
        while e < self.narcs:
            if self.state[e] != STATE_TREE:
                i = e // n
                j = e - i * n
                c = self.state[e] * (self.C[i, j] + self.pi[i] - self.pi[m + j])
                if c < best:
                    best = c
                    self.in_arc = e
            cnt -= 1
            if cnt == 0:
                if best < -self.eps:
                    self.next_arc = e + 1
                    return True
                cnt = self.block
            e += 1
        e = 0
        while e < self.next_arc:
            if self.state[e] != STATE_TREE:
                i = e // n
                j = e - i * n
                c = self.state[e] * (self.C[i, j] + self.pi[i] - self.pi[m + j])
                if c < best:
                    best = c
                    self.in_arc = e
            cnt -= 1
            if cnt == 0:
                if best < -self.eps:
                    self.next_arc = e + 1
                    return True
                cnt = self.block
            e += 1
        if best < -self.eps:
            self.next_arc = e
            return True
        return False

    cdef void find_join(self) nogil:
        cdef Py_ssize_t u = self.src(self.in_arc)
        cdef Py_ssize_t v = self.tgt(self.in_arc)
        while u != v:
            if self.succ_num[u] < self.succ_num[v]:
                u = self.parent[u]
            else:
                v = self.parent[v]
        self.join = u

    cdef bint find_leaving(self) nogil:
        cdef Py_ssize_t first, second, u, e
        cdef double d
        cdef int result = 0
        cdef double INF = 1e308
        if self.state[self.in_arc] == STATE_LOWER:
            first = self.src(self.in_arc)
            second = self.tgt(self.in_arc)
        else:
            first = self.tgt(self.in_arc)
            second = self.src(self.in_arc)
        self.delta = INF
        u = first
        while u != self.join:
            e = self.pred[u]
            if self.pred_dir[u] == DIR_UP:
                d = self.flow[e]
            else:
                d = INF
            if d < self.delta:
                self.delta = d
                self.u_out = u
                result = 1
            u = self.parent[u]
        u = second
        while u != self.join:
            e = self.pred[u]
            if self.pred_dir[u] == DIR_DOWN:
                d = self.flow[e]
            else:
                d = INF
            if d <= self.delta:
                self.delta = d
                self.u_out = u
                result = 2
            u = self.parent[u]
        if result == 1:
            self.u_in = first
            self.v_in = second
        else:
            self.u_in = second
            self.v_in = first
        return result != 0

    cdef void change_flow(self) nogil:
        cdef double val
        cdef Py_ssize_t u
        if self.delta > 0:
            val = self.state[self.in_arc] * self.delta
            self.flow[self.in_arc] += val
            u = self.src(self.in_arc)
            while u != self.join:
                self.flow[self.pred[u]] -= self.pred_dir[u] * val
                u = self.parent[u]
            u = self.tgt(self.in_arc)
            while u != self.join:
                self.flow[self.pred[u]] += self.pred_dir[u] * val
                u = self.parent[u]
        self.state[self.in_arc] = STATE_TREE
        self.flow[self.pred[self.u_out]] = 0.0
        self.state[self.pred[self.u_out]] = STATE_LOWER

    cdef void update_tree(self) nogil:
        cdef Py_ssize_t old_rev_thread = self.rev_thread[self.u_out]
        cdef Py_ssize_t old_succ_num = self.succ_num[self.u_out]
        cdef Py_ssize_t old_last_succ = self.last_succ[self.u_out]
        cdef Py_ssize_t after, thread_continue, stem, par_stem, next_stem
        cdef Py_ssize_t last, before, ndirty, k, u, p
        cdef Py_ssize_t tmp_sc, tmp_ls, up_limit_out, last_succ_out
        self.v_out = self.parent[self.u_out]

        if self.u_in == self.u_out:
            self.parent[self.u_in] = self.v_in
            self.pred[self.u_in] = self.in_arc
            self.pred_dir[self.u_in] = DIR_UP if self.u_in == self.src(self.in_arc) else DIR_DOWN
            if self.thread[self.v_in] != self.u_out:
                after = self.thread[old_last_succ]
                self.thread[old_rev_thread] = after
                self.rev_thread[after] = old_rev_thread
                after = self.thread[self.v_in]
                self.thread[self.v_in] = self.u_out
                self.rev_thread[self.u_out] = self.v_in
                self.thread[old_last_succ] = after
                self.rev_thread[after] = old_last_succ
        else:
            if old_rev_thread == self.v_in:
                thread_continue = self.thread[old_last_succ]
            else:
                thread_continue = self.thread[self.v_in]
            stem = self.u_in
            par_stem = self.v_in
            last = self.last_succ[self.u_in]
            after = self.thread[last]
            self.thread[self.v_in] = self.u_in
            ndirty = 0
            self.dirty[ndirty] = self.v_in
            ndirty += 1
            while stem != self.u_out:
                next_stem = self.parent[stem]
                self.thread[last] = next_stem
                self.dirty[ndirty] = last
                ndirty += 1
                before = self.rev_thread[stem]
                self.thread[before] = after
                self.rev_thread[after] = before
                self.parent[stem] = par_stem
                par_stem = stem
                stem = next_stem
                if self.last_succ[stem] == self.last_succ[par_stem]:
                    last = self.rev_thread[par_stem]
                else:
                    last = self.last_succ[stem]
                after = self.thread[last]
            self.parent[self.u_out] = par_stem
            self.thread[last] = thread_continue
            self.rev_thread[thread_continue] = last
            self.last_succ[self.u_out] = last
            if old_rev_thread != self.v_in:
                self.thread[old_rev_thread] = after
                self.rev_thread[after] = old_rev_thread
            for k in range(ndirty):
                u = self.dirty[k]
                self.rev_thread[self.thread[u]] = u
            tmp_sc = 0
            tmp_ls = self.last_succ[self.u_out]
            u = self.u_out
            p = self.parent[u]
            while u != self.u_in:
                self.pred[u] = self.pred[p]
                self.pred_dir[u] = -self.pred_dir[p]
                tmp_sc += self.succ_num[u] - self.succ_num[p]
                self.succ_num[u] = tmp_sc
                self.last_succ[p] = tmp_ls
                u = p
                p = self.parent[u]
            self.pred[self.u_in] = self.in_arc
            self.pred_dir[self.u_in] = DIR_UP if self.u_in == self.src(self.in_arc) else DIR_DOWN
            self.succ_num[self.u_in] = old_succ_num

        if self.last_succ[self.join] == self.v_in:
            up_limit_out = self.join
        else:
            up_limit_out = -1
        last_succ_out = self.last_succ[self.u_out]
        u = self.v_in
        while u != -1 and self.last_succ[u] == self.v_in:
            self.last_succ[u] = last_succ_out
            u = self.parent[u]
        if self.join != old_rev_thread and self.v_in != old_rev_thread:
            u = self.v_out
            while u != up_limit_out and self.last_succ[u] == old_last_succ:
                self.last_succ[u] = old_rev_thread
                u = self.parent[u]
        elif last_succ_out != old_last_succ:
            u = self.v_out
            while u != up_limit_out and self.last_succ[u] == old_last_succ:
                self.last_succ[u] = last_succ_out
                u = self.parent[u]
        u = self.v_in
        while u != self.join:
            self.succ_num[u] += old_succ_num
            u = self.parent[u]
        u = self.v_out
        while u != self.join:
            self.succ_num[u] -= old_succ_num
            u = self.parent[u]

    cdef void update_potential(self) nogil:
        cdef double sigma = (self.pi[self.v_in] - self.pi[self.u_in]
                             - self.pred_dir[self.u_in] * self.cost(self.in_arc))
        cdef Py_ssize_t end = self.thread[self.last_succ[self.u_in]]
        cdef Py_ssize_t u = self.u_in
        while u != end:
            self.pi[u] += sigma
            u = self.thread[u]

    cdef long run(self, long max_iter) nogil:
        cdef long it = 0
        while self.find_entering():
            self.find_join()
            if not self.find_leaving():
                return -2
            self.change_flow()
            self.update_tree()
            self.update_potential()
            it += 1
            if max_iter > 0 and it >= max_iter:
                return -1
        return it


def network_simplex(a, b, C, long max_iter=0):
    """Solve min <C, P> over P >= 0 with P 1 = a, P^T 1 = b.

    ``a`` and ``b`` must have equal sums (the caller rebalances).  Returns
    ``(rows, cols, mass, u, v, n_iter)`` where the triplets list the basic
    cells carrying positive mass and ``u``/``v`` are dual potentials with
    ``C[i, j] - u[i] - v[j] >= -tol`` at termination.  ``n_iter`` is -1 if
    the iteration cap was hit.
    """
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef _Simplex S = _Simplex(av, bv, Cv)
    cdef long it
    cdef Py_ssize_t e, k = 0, m = S.m, n = S.n
    with nogil:
        it = S.run(max_iter)
    if it == -2:
        raise RuntimeError("network simplex: unbounded cycle")
    rows = []
    cols = []
    mass = []
    for e in range(S.narcs):
        if S.state[e] == STATE_TREE and S.flow[e] > 0.0:
            rows.append(e // n)
            cols.append(e % n)
            mass.append(S.flow[e])
    pi = np.asarray(S.pi)
    # reduced cost c + pi_i - pi_j = 0 on the tree  =>  u = -pi_i, v = pi_j
    u = -pi[:m].copy()
    v = pi[m:m + n].copy()
    return (np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp),
            np.asarray(mass, dtype=np.float64), u, v, it)


def wasserstein_1d(x, wx, y, wy, double p):
    """Sum of mass * |x - y|^p under the monotone coupling.

    ``x`` and ``y`` sorted ascending; the weights must have equal totals.
    """
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] wxv = np.ascontiguousarray(wx, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] wyv = np.ascontiguousarray(wy, dtype=np.float64)
    cdef double out
    with nogil:
        out = _w1d(xv, wxv, yv, wyv, p)
    return out


cdef double _w1d(const double[::1] x, const double[::1] wx, const double[::1] y, const double[::1] wy,
                 double p) nogil:
    cdef Py_ssize_t i = 0, j = 0, nx = x.shape[0], ny = y.shape[0]
    cdef double rx, ry, mv, d, total = 0.0
    if nx == 0 or ny == 0:
        return 0.0
    rx = wx[0]
    ry = wy[0]
    while True:
        mv = rx if rx < ry else ry
        d = fabs(x[i] - y[j])
        if p == 2.0:
            total += mv * d * d
        elif p == 1.0:
            total += mv * d
        else:
            total += mv * pow(d, p)
        rx -= mv
        ry -= mv
        if rx <= 0.0:
            i += 1
            if i == nx:
                break
            rx = wx[i]
        if ry <= 0.0:
            j += 1
            if j == ny:
                break
            ry = wy[j]
    return total


def wasserstein_1d_batch(x, wx, y, WY, double p):
    """``wasserstein_1d`` against every row of ``WY`` (same support ``y``)."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] wxv = np.ascontiguousarray(wx, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] W = np.ascontiguousarray(WY, dtype=np.float64)
    cdef Py_ssize_t r, k = W.shape[0]
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for r in range(k):
            ov[r] = _w1d(xv, wxv, yv, W[r], p)
    return out
