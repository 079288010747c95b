# cython: language_level=3
"""Dense transportation-problem simplex, compiled kernel.

Direct transliteration of ``kpg_ot._simplex_py`` with the identical
deterministic pivot rules (Bland entering, lowest-flat-index leaving,
index-wise supply perturbation removed on exit), so both kernels return
bit-for-bit equal plans.  See the pure-python module for the algorithm
description.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

PERTURBATION = 1e-13

cdef double _PERT = 1e-13
cdef long _MAX_PIVOTS = 1000000


def solve_transportation(cost, supply, demand, opt_tol=None):
    """Return ``(flows, n_pivots)``; see ``kpg_ot._simplex_py.solve_transportation``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] cost_arr = np.ascontiguousarray(cost, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] supply_arr = np.ascontiguousarray(supply, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] demand_arr = np.ascontiguousarray(demand, dtype=np.float64)
    cdef long R = cost_arr.shape[0]
    cdef long C = cost_arr.shape[1]
    if supply_arr.shape[0] != R or demand_arr.shape[0] != C:
        raise ValueError("supply/demand shapes do not match the cost matrix")

    cdef double tol
    cdef double cmax = 0.0
    cdef long i, j, a, x, y, e, ei, ej
    cdef double f, ca, fl, theta
    if opt_tol is None:
        for i in range(R):
            for j in range(C):
                f = cost_arr[i, j]
                if f < 0.0:
                    f = -f
                if f > cmax:
                    cmax = f
        tol = 1e-12 * (1.0 + cmax)
    else:
        tol = float(opt_tol)

    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] s = np.empty(R, dtype=np.float64)
    cdef double ssum = 0.0
    cdef double dsum = 0.0
    for i in range(R):
        s[i] = supply_arr[i] * (1.0 + _PERT * (i + 1))
        ssum += s[i]
    for j in range(C):
        dsum += demand_arr[j]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] d = np.empty(C, dtype=np.float64)
    cdef double ratio
    if dsum > 0:
        ratio = ssum / dsum
        for j in range(C):
            d[j] = demand_arr[j] * ratio
    else:
        for j in range(C):
            d[j] = demand_arr[j]

    cdef long n_arcs = R + C - 1
    cdef long n_nodes = R + C
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] barc_i = np.zeros(n_arcs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] barc_j = np.zeros(n_arcs, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] bflow = np.zeros(n_arcs, dtype=np.float64)

    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] srem = s.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] drem = d.copy()
    i = 0
    j = 0
    for a in range(n_arcs):
        barc_i[a] = i
        barc_j[a] = j
        if srem[i] <= drem[j]:
            f = srem[i]
        else:
            f = drem[j]
        if f < 0.0:
            f = 0.0
        bflow[a] = f
        srem[i] -= f
        drem[j] -= f
        if (srem[i] <= drem[j] and i < R - 1) or j == C - 1:
            i += 1
        else:
            j += 1

    # CSR adjacency of the basis tree, rebuilt per pivot
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] adj_start = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] adj_node = np.zeros(2 * n_arcs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] adj_arc = np.zeros(2 * n_arcs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] fill = np.zeros(n_nodes, dtype=np.int64)

    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] parent_node = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] parent_arc = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] depth = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] order = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] visited = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] u = np.zeros(R, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] v = np.zeros(C, dtype=np.float64)

    # tree-walk step buffers (path length < n_nodes)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] step_frm = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] step_arc = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] tmp_frm = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] tmp_to = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] tmp_arc = np.zeros(n_nodes + 1, dtype=np.int64)

    cdef long n_pivots = 0
    cdef long head, tail, k, pos, cn, found, n_steps, n_tmp
    cdef long leave_slot, leave_flat, flat, frm
    cdef double rc

    while True:
        # adjacency
        for x in range(n_nodes):
            fill[x] = 0
        for a in range(n_arcs):
            fill[barc_i[a]] += 1
            fill[R + barc_j[a]] += 1
        adj_start[0] = 0
        for x in range(n_nodes):
            adj_start[x + 1] = adj_start[x] + fill[x]
            fill[x] = 0
        for a in range(n_arcs):
            x = barc_i[a]
            cn = R + barc_j[a]
            pos = adj_start[x] + fill[x]
            adj_node[pos] = cn
            adj_arc[pos] = a
            fill[x] += 1
            pos = adj_start[cn] + fill[cn]
            adj_node[pos] = x
            adj_arc[pos] = a
            fill[cn] += 1

        # duals via BFS from row 0
        for x in range(n_nodes):
            visited[x] = 0
        parent_node[0] = -1
        parent_arc[0] = -1
        depth[0] = 0
        visited[0] = 1
        u[0] = 0.0
        order[0] = 0
        head = 0
        tail = 1
        while head < tail:
            x = order[head]
            head += 1
            for k in range(adj_start[x], adj_start[x + 1]):
                y = adj_node[k]
                if visited[y] == 0:
                    a = adj_arc[k]
                    visited[y] = 1
                    parent_node[y] = x
                    parent_arc[y] = a
                    depth[y] = depth[x] + 1
                    ca = cost_arr[barc_i[a], barc_j[a]]
                    if y >= R:
                        v[y - R] = ca - u[x]
                    else:
                        u[y] = ca - v[x - R]
                    order[tail] = y
                    tail += 1

        # entering arc: lowest flat index with reduced cost < -tol
        found = 0
        e = 0
        for i in range(R):
            for j in range(C):
                rc = cost_arr[i, j] - u[i] - v[j]
                if rc < -tol:
                    e = i * C + j
                    found = 1
                    break
            if found:
                break
        if not found:
            break
        ei = e // C
        ej = e % C

        # tree walk from col node R+ej back to row node ei via the LCA
        n_steps = 0
        n_tmp = 0
        x = R + ej
        y = ei
        while depth[x] > depth[y]:
            step_frm[n_steps] = x
            step_arc[n_steps] = parent_arc[x]
            n_steps += 1
            x = parent_node[x]
        while depth[y] > depth[x]:
            tmp_frm[n_tmp] = y
            tmp_to[n_tmp] = parent_node[y]
            tmp_arc[n_tmp] = parent_arc[y]
            n_tmp += 1
            y = parent_node[y]
        while x != y:
            step_frm[n_steps] = x
            step_arc[n_steps] = parent_arc[x]
            n_steps += 1
            x = parent_node[x]
            tmp_frm[n_tmp] = y
            tmp_to[n_tmp] = parent_node[y]
            tmp_arc[n_tmp] = parent_arc[y]
            n_tmp += 1
            y = parent_node[y]
        for k in range(n_tmp - 1, -1, -1):
            step_frm[n_steps] = tmp_to[k]
            step_arc[n_steps] = tmp_arc[k]
            n_steps += 1

        # min-ratio over backward steps (col -> row traversals)
        theta = np.inf
        leave_slot = -1
        leave_flat = -1
        for k in range(n_steps):
            frm = step_frm[k]
            if frm >= R:
                a = step_arc[k]
                fl = bflow[a]
                flat = barc_i[a] * C + barc_j[a]
                if fl < theta or (fl == theta and flat < leave_flat):
                    theta = fl
                    leave_slot = a
                    leave_flat = flat
        for k in range(n_steps):
            a = step_arc[k]
            if step_frm[k] >= R:
                bflow[a] -= theta
            else:
                bflow[a] += theta
        barc_i[leave_slot] = ei
        barc_j[leave_slot] = ej
        bflow[leave_slot] = theta
        n_pivots += 1
        if n_pivots > _MAX_PIVOTS:
            raise RuntimeError("transportation simplex exceeded the pivot budget")

    # exact flows from the final tree under the true marginals
    for x in range(n_nodes):
        fill[x] = 0
    for a in range(n_arcs):
        fill[barc_i[a]] += 1
        fill[R + barc_j[a]] += 1
    adj_start[0] = 0
    for x in range(n_nodes):
        adj_start[x + 1] = adj_start[x] + fill[x]
        fill[x] = 0
    for a in range(n_arcs):
        x = barc_i[a]
        cn = R + barc_j[a]
        pos = adj_start[x] + fill[x]
        adj_node[pos] = cn
        adj_arc[pos] = a
        fill[x] += 1
        pos = adj_start[cn] + fill[cn]
        adj_node[pos] = x
        adj_arc[pos] = a
        fill[cn] += 1

    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] degree = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] node_val = np.zeros(n_nodes, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] arc_done = np.zeros(n_arcs, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] exact = np.zeros(n_arcs, dtype=np.float64)
    for x in range(n_nodes):
        degree[x] = adj_start[x + 1] - adj_start[x]
    for i in range(R):
        node_val[i] = supply_arr[i]
    for j in range(C):
        node_val[R + j] = demand_arr[j]

    head = 0
    tail = 0
    for x in range(n_nodes):
        if degree[x] == 1:
            order[tail] = x
            tail += 1
    while head < tail:
        x = order[head]
        head += 1
        if degree[x] != 1:
            continue
        for k in range(adj_start[x], adj_start[x + 1]):
            a = adj_arc[k]
            if arc_done[a] == 0:
                y = adj_node[k]
                exact[a] = node_val[x]
                arc_done[a] = 1
                node_val[y] -= node_val[x]
                node_val[x] = 0.0
                degree[x] -= 1
                degree[y] -= 1
                if degree[y] == 1:
                    order[tail] = y
                    tail += 1
                break

    flows_np = np.zeros((R, C), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] flows = flows_np
    for a in range(n_arcs):
        if exact[a] > 0.0:
            flows[barc_i[a], barc_j[a]] = exact[a]
    return flows_np, int(n_pivots)
