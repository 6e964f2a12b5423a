"""Compiled inner loops. Randomness is always drawn by the caller and passed in
as uniform arrays, so results depend only on the numpy stream."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _node_weights(b, values, perm_u, use_perm, z):
    n = z.shape[0]
    for u in range(n):
        for j in range(b):
            z[u, j] = values[j]
        if use_perm:
            # Fisher-Yates on the node's copy of the weight vector
            for i in range(b - 1, 0, -1):
                r = int(perm_u[u, i - 1] * (i + 1))
                if r > i:
                    r = i
                tmp = z[u, i]
                z[u, i] = z[u, r]
                z[u, r] = tmp


@njit(cache=True, nogil=True)
def grow_bary_into(n, b, choice_u, values, perm_u, use_perm, parent, slot, weight):
    """Grow a b-ary recursive tree by the external-node process.

    External nodes live in (ext_node, ext_slot) with swap-remove, so picking a
    uniform external is O(1).
    """
    z = np.empty((n, b))
    _node_weights(b, values, perm_u, use_perm, z)
    cap = n * (b - 1) + 1
    ext_node = np.empty(cap, np.int64)
    ext_slot = np.empty(cap, np.int64)
    for j in range(b):
        ext_node[j] = 0
        ext_slot[j] = j
    m = b
    parent[0] = -1
    slot[0] = -1
    weight[0] = 0.0
    for k in range(1, n):
        idx = int(choice_u[k - 1] * m)
        if idx >= m:
            idx = m - 1
        p = ext_node[idx]
        s = ext_slot[idx]
        parent[k] = p
        slot[k] = s
        weight[k] = z[p, s]
        m -= 1
        ext_node[idx] = ext_node[m]
        ext_slot[idx] = ext_slot[m]
        for j in range(b):
            ext_node[m] = k
            ext_slot[m] = j
            m += 1


@njit(cache=True, nogil=True)
def grow_linear_into(n, beta, choice_u, parent):
    """Attach node k to u with probability proportional to 1 + beta*deg(u).

    Fenwick tree over node weights; one O(log n) search and two updates per step.
    """
    size = 1
    while size < n:
        size <<= 1
    tree = np.zeros(size + 1)
    # node i lives at Fenwick index i + 1
    i = 1
    while i <= size:
        tree[i] += 1.0
        i += i & (-i)
    total = 1.0
    parent[0] = -1
    for k in range(1, n):
        target = choice_u[k - 1] * total
        pos = 0
        step = size
        while step > 0:
            nxt = pos + step
            if nxt <= size and tree[nxt] <= target:
                pos = nxt
                target -= tree[nxt]
            step >>= 1
        u = pos  # zero-based node index
        if u > k - 1:
            u = k - 1
        parent[k] = u
        if beta != 0.0:
            i = u + 1
            while i <= size:
                tree[i] += beta
                i += i & (-i)
        i = k + 1
        while i <= size:
            tree[i] += 1.0
            i += i & (-i)
        total += beta + 1.0


@njit(cache=True, nogil=True)
def subtree_sizes(parent):
    n = parent.shape[0]
    size = np.ones(n, np.int64)
    for k in range(n - 1, 0, -1):
        size[parent[k]] += size[k]
    return size


@njit(cache=True, nogil=True)
def path_and_wiener(parent, weight):
    """(P, W) from the edge decomposition with Neumaier-compensated sums.

    P = sum_e z_e s_e and W = sum_e z_e s_e (n - s_e); parent labels must be
    smaller than child labels.
    """
    n = parent.shape[0]
    size = subtree_sizes(parent)
    p_sum = 0.0
    p_c = 0.0
    w_sum = 0.0
    w_c = 0.0
    for k in range(1, n):
        s = size[k]
        x = weight[k] * s
        t = p_sum + x
        if abs(p_sum) >= abs(x):
            p_c += (p_sum - t) + x
        else:
            p_c += (x - t) + p_sum
        p_sum = t
        y = x * (n - s)
        t = w_sum + y
        if abs(w_sum) >= abs(y):
            w_c += (w_sum - t) + y
        else:
            w_c += (y - t) + w_sum
        w_sum = t
    return p_sum + p_c, w_sum + w_c


@njit(cache=True, nogil=True)
def bary_batch(n, b, choice_u, values, perm_u, use_perm, p_out, w_out, split_out, rootz_out):
    """Grow one tree per row of ``choice_u`` and record P, W, root split and root edge weights."""
    rows = choice_u.shape[0]
    parent = np.empty(n, np.int64)
    slot = np.empty(n, np.int64)
    weight = np.empty(n)
    for r in range(rows):
        if use_perm:
            grow_bary_into(n, b, choice_u[r], values, perm_u[r], True, parent, slot, weight)
        else:
            grow_bary_into(n, b, choice_u[r], values, perm_u[0], False, parent, slot, weight)
        p, w = path_and_wiener(parent, weight)
        p_out[r] = p
        w_out[r] = w
        size = subtree_sizes(parent)
        for j in range(b):
            split_out[r, j] = 0
            rootz_out[r, j] = 0.0
        for k in range(1, n):
            if parent[k] == 0:
                split_out[r, slot[k]] = size[k]
                rootz_out[r, slot[k]] = weight[k]


@njit(cache=True, nogil=True)
def linear_batch(n, beta, choice_u, p_out, w_out):
    rows = choice_u.shape[0]
    parent = np.empty(n, np.int64)
    weight = np.ones(n)
    weight[0] = 0.0
    for r in range(rows):
        grow_linear_into(n, beta, choice_u[r], parent)
        p, w = path_and_wiener(parent, weight)
        p_out[r] = p
        w_out[r] = w


@njit(cache=True, nogil=True)
def coupled_urn_runs(n, b, uniforms, traj_j, traj_i, record, final_j, final_i):
    """Monotone coupling of the sorted PU(b) chain J and the displayed
    PU(b+1) top-b kernel chain I, one shared uniform per step.

    Layout on [0, 1): for every index j where I may move to I + e_j only if J
    moves to J + e_j (I_j == J_j), I's interval for e_j is nested at the start
    of J's interval for e_j. All other I outcomes fill the remaining space and
    are below J whatever J does. Returns the number of ordering violations
    (always 0 when the kernels are dominated).
    """
    runs = uniforms.shape[0]
    x = np.zeros(b, np.int64)
    y = np.zeros(b, np.int64)
    px = np.zeros(b)
    py = np.zeros(b + 1)  # last entry: stay
    critical = np.zeros(b, np.bool_)
    start = np.zeros(b)
    violations = 0
    for r in range(runs):
        for j in range(b):
            x[j] = 0
            y[j] = 0
        if record:
            for j in range(b):
                traj_j[r, 0, j] = 0
                traj_i[r, 0, j] = 0
        for m in range(n):
            den_x = b + m * (b - 1.0)
            den_y = b + 1.0 + m * b
            sy = 0
            for j in range(b):
                sy += y[j]
            for j in range(b):
                # multiplicity counted at the first index of each block
                if j == 0 or x[j - 1] > x[j]:
                    cnt = 0
                    for i in range(j, b):
                        if x[i] == x[j]:
                            cnt += 1
                    px[j] = cnt * (1.0 + x[j] * (b - 1.0)) / den_x
                else:
                    px[j] = 0.0
                if j == 0 or y[j - 1] > y[j]:
                    cnt = 0
                    for i in range(j, b):
                        if y[i] == y[j]:
                            cnt += 1
                    py[j] = cnt * (1.0 + y[j] * b) / den_y
                else:
                    py[j] = 0.0
                critical[j] = py[j] > 0.0 and y[j] == x[j]
            py[b] = (1.0 + (m - sy) * b) / den_y
            # J by inverse cdf: critical indices first, then the rest
            u = uniforms[r, m]
            acc = 0.0
            for j in range(b):
                if critical[j]:
                    start[j] = acc
                    acc += px[j]
            jx = -1
            if u < acc:
                for j in range(b):
                    if critical[j] and u < start[j] + px[j]:
                        jx = j
                        break
            else:
                acc2 = acc
                for j in range(b):
                    if not critical[j] and px[j] > 0.0:
                        acc2 += px[j]
                        if u < acc2:
                            jx = j
                            break
            if jx < 0:
                # rounding at the top of [0, 1)
                for j in range(b - 1, -1, -1):
                    if px[j] > 0.0:
                        jx = j
                        break
            # I: nested critical intervals, remainder in the free space
            jy = -2
            for j in range(b):
                if critical[j] and u >= start[j] and u < start[j] + py[j]:
                    jy = j
                    break
            if jy == -2:
                free_before = u
                for j in range(b):
                    if critical[j]:
                        if u >= start[j] + py[j]:
                            free_before -= py[j]
                acc3 = 0.0
                for j in range(b + 1):
                    if j < b and critical[j]:
                        continue
                    acc3 += py[j]
                    if free_before < acc3:
                        jy = j
                        break
                if jy == -2:
                    jy = b  # rounding: stay
            x[jx] += 1
            if jy < b:
                y[jy] += 1
            for j in range(b):
                if y[j] > x[j]:
                    violations += 1
                    break
            if record:
                for j in range(b):
                    traj_j[r, m + 1, j] = x[j]
                    traj_i[r, m + 1, j] = y[j]
        for j in range(b):
            final_j[r, j] = x[j]
            final_i[r, j] = y[j]
    return violations
