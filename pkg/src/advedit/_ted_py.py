"""Pure-Python Zhang-Shasha kernels (fallback for ``_ted_core``).

Trees arrive as postorder arrays: integer label ids, leftmost-leaf
descendants (``lml``) and keyroots, all 0-based. Costs are unit.
"""
import numpy as np


def treedist(lab_x, lml_x, kr_x, lab_y, lml_y, kr_y):
    """Return the ``(n, m)`` matrix of subtree-to-subtree edit distances."""
    lab_x = [int(v) for v in lab_x]
    lml_x = [int(v) for v in lml_x]
    lab_y = [int(v) for v in lab_y]
    lml_y = [int(v) for v in lml_y]
    n, m = len(lab_x), len(lab_y)
    td = [[0] * m for _ in range(n)]
    for i in kr_x:
        i = int(i)
        li = lml_x[i]
        rows = i - li + 2
        for j in kr_y:
            j = int(j)
            lj = lml_y[j]
            cols = j - lj + 2
            fd = [[0] * cols for _ in range(rows)]
            for b in range(1, cols):
                fd[0][b] = b
            for a in range(1, rows):
                p = li + a - 1
                lp = lml_x[p]
                row, prev = fd[a], fd[a - 1]
                row[0] = a
                tdp = td[p]
                for b in range(1, cols):
                    q = lj + b - 1
                    dele = prev[b] + 1
                    ins = row[b - 1] + 1
                    if lp == li and lml_y[q] == lj:
                        sub = prev[b - 1] + (lab_x[p] != lab_y[q])
                        v = dele if dele < ins else ins
                        if sub < v:
                            v = sub
                        row[b] = v
                        tdp[q] = v
                    else:
                        sub = fd[lp - li][lml_y[q] - lj] + tdp[q]
                        v = dele if dele < ins else ins
                        if sub < v:
                            v = sub
                        row[b] = v
    return np.array(td, dtype=np.int64).reshape(n, m)


def forest_table(i, j, lab_x, lml_x, lab_y, lml_y, td):
    """Forest-distance table for the subtrees rooted at ``i`` and ``j``."""
    li = int(lml_x[i])
    lj = int(lml_y[j])
    rows = i - li + 2
    cols = j - lj + 2
    fd = np.zeros((rows, cols), dtype=np.int64)
    fd[0, :] = np.arange(cols)
    fd[:, 0] = np.arange(rows)
    for a in range(1, rows):
        p = li + a - 1
        lp = int(lml_x[p])
        for b in range(1, cols):
            q = lj + b - 1
            v = min(fd[a - 1, b] + 1, fd[a, b - 1] + 1)
            if lp == li and lml_y[q] == lj:
                sub = fd[a - 1, b - 1] + (lab_x[p] != lab_y[q])
            else:
                sub = fd[lp - li, lml_y[q] - lj] + td[p, q]
            fd[a, b] = min(v, sub)
    return fd
