"""Dense transportation-problem simplex, pure-python fallback kernel.

Solves  min <cost, X>  s.t.  X >= 0, X 1 = supply, X^T 1 = demand  on a
complete bipartite graph, returning an exact vertex solution.

Pivoting is deterministic: the entering arc is the lowest flat index
(i * C + j) with reduced cost below -opt_tol (Bland's rule, which also
rules out cycling), and min-ratio ties pick the lowest-flat-index leaving
arc.  Supplies are perturbed index-wise to steer degenerate pivots; the
perturbation is removed on exit by re-solving the final basis tree against
the exact marginals, so returned flows are plain sums and differences of
the supply/demand values.

The compiled twin ``kpg_ot._simplex`` implements the identical pivot rules
so both kernels return bit-for-bit equal plans.
"""

import numpy as np

PERTURBATION = 1e-13
_MAX_PIVOTS = 1_000_000


def solve_transportation(cost, supply, demand, opt_tol=None):
    """Return ``(flows, n_pivots)`` for a dense transportation problem.

    ``supply`` and ``demand`` must balance (up to tiny rounding); entries
    may be zero.  ``flows`` is a dense (R, C) array with at most
    R + C - 1 positive entries.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    supply = np.ascontiguousarray(supply, dtype=np.float64)
    demand = np.ascontiguousarray(demand, dtype=np.float64)
    R, C = cost.shape
    if supply.shape != (R,) or demand.shape != (C,):
        raise ValueError("supply/demand shapes do not match the cost matrix")
    if opt_tol is None:
        opt_tol = 1e-12 * (1.0 + float(np.abs(cost).max(initial=0.0)))

    # perturbed marginals steer the pivot path only; exact flows are
    # recomputed from the final tree below.  Sums are sequential so the
    # compiled twin reproduces them bit-for-bit.
    s = supply * (1.0 + PERTURBATION * np.arange(1, R + 1))
    ssum = 0.0
    for i in range(R):
        ssum += s[i]
    dsum = 0.0
    for j in range(C):
        dsum += demand[j]
    d = demand * (ssum / dsum) if dsum > 0 else demand.copy()

    n_arcs = R + C - 1
    barc_i = np.zeros(n_arcs, dtype=np.int64)
    barc_j = np.zeros(n_arcs, dtype=np.int64)
    bflow = np.zeros(n_arcs, dtype=np.float64)

    # northwest-corner start: a staircase of arcs, always a spanning tree
    srem = s.copy()
    drem = d.copy()
    i = 0
    j = 0
    for a in range(n_arcs):
        barc_i[a] = i
        barc_j[a] = j
        f = srem[i] if srem[i] <= drem[j] else drem[j]
        if f < 0.0:
            f = 0.0
        bflow[a] = f
        srem[i] -= f
        drem[j] -= f
        if (srem[i] <= drem[j] and i < R - 1) or j == C - 1:
            i += 1
        else:
            j += 1

    n_nodes = R + C
    parent_node = np.zeros(n_nodes, dtype=np.int64)
    parent_arc = np.zeros(n_nodes, dtype=np.int64)
    depth = np.zeros(n_nodes, dtype=np.int64)
    order = np.zeros(n_nodes, dtype=np.int64)
    visited = np.zeros(n_nodes, dtype=np.int64)
    u = np.zeros(R, dtype=np.float64)
    v = np.zeros(C, dtype=np.float64)

    n_pivots = 0
    while True:
        # adjacency of the basis tree (nodes: rows 0..R-1, cols R..R+C-1)
        adj = [[] for _ in range(n_nodes)]
        for a in range(n_arcs):
            ri = int(barc_i[a])
            cn = R + int(barc_j[a])
            adj[ri].append((cn, a))
            adj[cn].append((ri, a))

        # duals from a BFS rooted at row 0 (u[0] = 0)
        visited[:] = 0
        parent_node[0] = -1
        parent_arc[0] = -1
        depth[0] = 0
        visited[0] = 1
        u[0] = 0.0
        order[0] = 0
        head = 0
        tail = 1
        while head < tail:
            x = int(order[head])
            head += 1
            for (y, a) in adj[x]:
                if not visited[y]:
                    visited[y] = 1
                    parent_node[y] = x
                    parent_arc[y] = a
                    depth[y] = depth[x] + 1
                    ca = cost[barc_i[a], barc_j[a]]
                    if y >= R:
                        v[y - R] = ca - u[x]
                    else:
                        u[y] = ca - v[x - R]
                    order[tail] = y
                    tail += 1

        # entering arc: lowest flat index with negative reduced cost
        rc = cost - u[:, None] - v[None, :]
        neg = rc.ravel() < -opt_tol
        if not neg.any():
            break
        e = int(np.argmax(neg))
        ei, ej = divmod(e, C)

        # tree walk from col node R+ej back to row node ei via the LCA
        steps = _tree_walk(R + ej, ei, parent_node, parent_arc, depth)

        # min-ratio over backward steps (col -> row traversals)
        theta = np.inf
        leave_slot = -1
        leave_flat = -1
        for (frm, _to, a) in steps:
            if frm >= R:  # traversing col -> row: flow decreases
                fl = bflow[a]
                flat = int(barc_i[a]) * C + int(barc_j[a])
                if fl < theta or (fl == theta and flat < leave_flat):
                    theta = fl
                    leave_slot = a
                    leave_flat = flat
        # apply the cycle update and swap the leaving arc for the entering one
        for (frm, _to, a) in steps:
            if frm >= R:
                bflow[a] -= theta
            else:
                bflow[a] += theta
        barc_i[leave_slot] = ei
        barc_j[leave_slot] = ej
        bflow[leave_slot] = theta
        n_pivots += 1
        if n_pivots > _MAX_PIVOTS:
            raise RuntimeError("transportation simplex exceeded the pivot budget")

    flows = _exact_tree_flows(R, C, barc_i, barc_j, supply, demand)
    return flows, n_pivots


def _tree_walk(start, end, parent_node, parent_arc, depth):
    """Steps ``(from_node, to_node, arc_slot)`` along the tree path start -> end."""
    up_a = []
    up_b = []
    x = start
    y = end
    while depth[x] > depth[y]:
        up_a.append((x, int(parent_node[x]), int(parent_arc[x])))
        x = int(parent_node[x])
    while depth[y] > depth[x]:
        up_b.append((y, int(parent_node[y]), int(parent_arc[y])))
        y = int(parent_node[y])
    while x != y:
        up_a.append((x, int(parent_node[x]), int(parent_arc[x])))
        x = int(parent_node[x])
        up_b.append((y, int(parent_node[y]), int(parent_arc[y])))
        y = int(parent_node[y])
    steps = list(up_a)
    for (frm, to, a) in reversed(up_b):
        steps.append((to, frm, a))
    return steps


def _exact_tree_flows(R, C, barc_i, barc_j, supply, demand):
    """Flows forced by the basis tree under the exact marginals.

    Leaf elimination: a leaf node's single tree arc must carry exactly the
    node's remaining mass.  Tiny negative values on degenerate arcs are
    rounding noise and are clamped to zero.
    """
    n_arcs = R + C - 1
    n_nodes = R + C
    adj = [[] for _ in range(n_nodes)]
    for a in range(n_arcs):
        ri = int(barc_i[a])
        cn = R + int(barc_j[a])
        adj[ri].append((cn, a))
        adj[cn].append((ri, a))
    degree = np.array([len(adj[x]) for x in range(n_nodes)], dtype=np.int64)
    node_val = np.concatenate([supply.astype(np.float64), demand.astype(np.float64)])
    arc_done = np.zeros(n_arcs, dtype=np.int64)
    exact = np.zeros(n_arcs, dtype=np.float64)

    queue = np.zeros(n_nodes, dtype=np.int64)
    head = 0
    tail = 0
    for x in range(n_nodes):
        if degree[x] == 1:
            queue[tail] = x
            tail += 1
    while head < tail:
        x = int(queue[head])
        head += 1
        if degree[x] != 1:
            continue
        for (y, a) in adj[x]:
            if not arc_done[a]:
                exact[a] = node_val[x]
                arc_done[a] = 1
                node_val[y] -= node_val[x]
                node_val[x] = 0.0
                degree[x] -= 1
                degree[y] -= 1
                if degree[y] == 1:
                    queue[tail] = y
                    tail += 1
                break

    flows = np.zeros((R, C), dtype=np.float64)
    for a in range(n_arcs):
        f = exact[a]
        if f > 0.0:
            flows[barc_i[a], barc_j[a]] = f
    return flows
