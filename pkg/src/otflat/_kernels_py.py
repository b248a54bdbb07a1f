"""Pure-Python fallback for the compiled kernels in ``_kernels.pyx``.

Same algorithms, same return conventions; only practical for small
instances (a few hundred atoms per side).
"""
import math

import numpy as np

_UPPER, _TREE, _LOWER = -1, 0, 1
_UP, _DOWN = 1, -1


def network_simplex(a, b, C, max_iter=0):
    a = [float(t) for t in np.asarray(a, dtype=float)]
    b = [float(t) for t in np.asarray(b, dtype=float)]
    C = np.asarray(C, dtype=float)
    m, n = len(a), len(b)
    Cl = C.ravel().tolist()
    N = m + n
    root = N
    narcs = m * n
    cmax = float(np.abs(C).max()) if C.size else 0.0
    if cmax == 0.0:
        cmax = 1.0
    art = 2.0 * cmax * (N + 1)
    eps = 1e-14 * art
    block = max(int(math.sqrt(narcs)), 10)

    flow = [0.0] * (narcs + N)
    state = [_LOWER] * (narcs + N)
    pi = [0.0] * (N + 1)
    parent = [0] * (N + 1)
    pred = [0] * (N + 1)
    thread = [0] * (N + 1)
    rev_thread = [0] * (N + 1)
    succ_num = [0] * (N + 1)
    last_succ = [0] * (N + 1)
    pred_dir = [0] * (N + 1)
    art_src = [0] * N
    art_tgt = [0] * N
    art_cost = [0.0] * N

    parent[root] = -1
    pred[root] = -1
    thread[root] = 0
    rev_thread[0] = root
    succ_num[root] = N + 1
    last_succ[root] = root - 1
    for u in range(N):
        e = narcs + u
        parent[u] = root
        pred[u] = e
        thread[u] = u + 1
        rev_thread[u + 1] = u
        succ_num[u] = 1
        last_succ[u] = u
        state[e] = _TREE
        if u < m:
            pred_dir[u] = _UP
            art_src[u], art_tgt[u] = u, root
            flow[e] = a[u]
        else:
            pred_dir[u] = _DOWN
            pi[u] = art
            art_src[u], art_tgt[u] = root, u
            flow[e] = b[u - m]
            art_cost[u] = art

    def src(e):
        return e // n if e < narcs else art_src[e - narcs]

    def tgt(e):
        return m + e % n if e < narcs else art_tgt[e - narcs]

    def cost(e):
        return Cl[e] if e < narcs else art_cost[e - narcs]

    next_arc = 0
    it = 0
    while True:
        # block search pivot
        best = 0.0
        in_arc = -1
        cnt = block
        found = False
        order = list(range(next_arc, narcs)) + list(range(0, next_arc))
        stop_at = None
        for e in order:
            if state[e] != _TREE:
                i = e // n
                c = state[e] * (Cl[e] + pi[i] - pi[m + e - i * n])
                if c < best:
                    best = c
                    in_arc = e
            cnt -= 1
            if cnt == 0:
                if best < -eps:
                    stop_at = e + 1
                    found = True
                    break
                cnt = block
        if not found:
            if best < -eps:
                stop_at = next_arc
                found = True
        if not found:
            break
        next_arc = stop_at % narcs if narcs else 0

        # join node
        u, v = src(in_arc), tgt(in_arc)
        while u != v:
            if succ_num[u] < succ_num[v]:
                u = parent[u]
            else:
                v = parent[v]
        join = u

        # leaving arc
        if state[in_arc] == _LOWER:
            first, second = src(in_arc), tgt(in_arc)
        else:
            first, second = tgt(in_arc), src(in_arc)
        delta = math.inf
        result = 0
        u_out = -1
        u = first
        while u != join:
            d = flow[pred[u]] if pred_dir[u] == _UP else math.inf
            if d < delta:
                delta, u_out, result = d, u, 1
            u = parent[u]
        u = second
        while u != join:
            d = flow[pred[u]] if pred_dir[u] == _DOWN else math.inf
            if d <= delta:
                delta, u_out, result = d, u, 2
            u = parent[u]
        if result == 0 or math.isinf(delta):
            raise RuntimeError("network simplex: unbounded cycle")
        if result == 1:
            u_in, v_in = first, second
        else:
            u_in, v_in = second, first

        # change flow
        if delta > 0:
            val = state[in_arc] * delta
            flow[in_arc] += val
            u = src(in_arc)
            while u != join:
                flow[pred[u]] -= pred_dir[u] * val
                u = parent[u]
            u = tgt(in_arc)
            while u != join:
                flow[pred[u]] += pred_dir[u] * val
                u = parent[u]
        state[in_arc] = _TREE
        flow[pred[u_out]] = 0.0
        state[pred[u_out]] = _LOWER

        # update tree structure
        old_rev_thread = rev_thread[u_out]
        old_succ_num = succ_num[u_out]
        old_last_succ = last_succ[u_out]
        v_out = parent[u_out]
        if u_in == u_out:
            parent[u_in] = v_in
            pred[u_in] = in_arc
            pred_dir[u_in] = _UP if u_in == src(in_arc) else _DOWN
            if thread[v_in] != u_out:
                after = thread[old_last_succ]
                thread[old_rev_thread] = after
                rev_thread[after] = old_rev_thread
                after = thread[v_in]
                thread[v_in] = u_out
                rev_thread[u_out] = v_in
                thread[old_last_succ] = after
                rev_thread[after] = old_last_succ
        else:
            thread_continue = (thread[old_last_succ] if old_rev_thread == v_in
                               else thread[v_in])
            stem, par_stem = u_in, v_in
            last = last_succ[u_in]
            after = thread[last]
            thread[v_in] = u_in
            dirty = [v_in]
            while stem != u_out:
                next_stem = parent[stem]
                thread[last] = next_stem
                dirty.append(last)
                before = rev_thread[stem]
                thread[before] = after
                rev_thread[after] = before
                parent[stem] = par_stem
                par_stem = stem
                stem = next_stem
                last = (rev_thread[par_stem] if last_succ[stem] == last_succ[par_stem]
                        else last_succ[stem])
                after = thread[last]
            parent[u_out] = par_stem
            thread[last] = thread_continue
            rev_thread[thread_continue] = last
            last_succ[u_out] = last
            if old_rev_thread != v_in:
                thread[old_rev_thread] = after
                rev_thread[after] = old_rev_thread
            for u in dirty:
                rev_thread[thread[u]] = u
            tmp_sc = 0
            tmp_ls = last_succ[u_out]
            u = u_out
            p = parent[u]
            while u != u_in:
                pred[u] = pred[p]
                pred_dir[u] = -pred_dir[p]
                tmp_sc += succ_num[u] - succ_num[p]
                succ_num[u] = tmp_sc
                last_succ[p] = tmp_ls
                u = p
                p = parent[u]
            pred[u_in] = in_arc
            pred_dir[u_in] = _UP if u_in == src(in_arc) else _DOWN
            succ_num[u_in] = old_succ_num

        up_limit_out = join if last_succ[join] == v_in else -1
        last_succ_out = last_succ[u_out]
        u = v_in
        while u != -1 and last_succ[u] == v_in:
            last_succ[u] = last_succ_out
            u = parent[u]
        if join != old_rev_thread and v_in != old_rev_thread:
            u = v_out
            while u != up_limit_out and last_succ[u] == old_last_succ:
                last_succ[u] = old_rev_thread
                u = parent[u]
        elif last_succ_out != old_last_succ:
            u = v_out
            while u != up_limit_out and last_succ[u] == old_last_succ:
                last_succ[u] = last_succ_out
                u = parent[u]
        u = v_in
        while u != join:
            succ_num[u] += old_succ_num
            u = parent[u]
        u = v_out
        while u != join:
            succ_num[u] -= old_succ_num
            u = parent[u]

        # update potentials on the moved subtree
        sigma = pi[v_in] - pi[u_in] - pred_dir[u_in] * cost(in_arc)
        end = thread[last_succ[u_in]]
        u = u_in
        while u != end:
            pi[u] += sigma
            u = thread[u]

        it += 1
        if max_iter > 0 and it >= max_iter:
            it = -1
            break

    rows, cols, mass = [], [], []
    for e in range(narcs):
        if state[e] == _TREE and flow[e] > 0.0:
            rows.append(e // n)
            cols.append(e % n)
            mass.append(flow[e])
    pi = np.asarray(pi)
    return (np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp),
            np.asarray(mass, dtype=float), -pi[:m].copy(), pi[m:m + n].copy(), it)


def wasserstein_1d(x, wx, y, wy, p):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    wx = np.asarray(wx, dtype=float)
    wy = np.asarray(wy, dtype=float)
    if x.size == 0 or y.size == 0:
        return 0.0
    # quantile coupling: merge the two cumulative mass grids
    cx = np.cumsum(wx)
    cy = np.cumsum(wy)
    total = min(cx[-1], cy[-1])
    knots = np.unique(np.concatenate([[0.0], np.minimum(cx, total), np.minimum(cy, total)]))
    dm = np.diff(knots)
    mid = knots[:-1] + 0.5 * dm
    ix = np.minimum(np.searchsorted(cx, mid, side="right"), x.size - 1)
    iy = np.minimum(np.searchsorted(cy, mid, side="right"), y.size - 1)
    d = np.abs(x[ix] - y[iy])
    return float(np.sum(dm * d ** p))


def wasserstein_1d_batch(x, wx, y, WY, p):
    WY = np.atleast_2d(np.asarray(WY, dtype=float))
    return np.array([wasserstein_1d(x, wx, y, row, p) for row in WY])
