"""Pure numpy implementation of the hot kernels.

Used when the compiled extension is unavailable or when
``NOISYFB_PURE_PYTHON=1``. Semantics are the reference for the compiled
version; ``tests/test_kernels.py`` checks both agree.
"""

import numpy as np


def select_groups(dist, gap2, gap3):
    """Apply the group-selection rules to every row of a distance matrix.

    Parameters
    ----------
    dist : ndarray, shape (S, M)
        Transmitter distances (any per-row additive constant is irrelevant).
    gap2, gap3 : float
        Thresholds on ``d(3) - d(2)`` and ``d(4) - d(3)``.

    Returns
    -------
    k : ndarray of int8, shape (S,)
    members : ndarray of int32, shape (S, 4)
        Selected messages in rank order, padded with -1.
    """
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    S, M = dist.shape
    top = min(M, 4)
    order = np.argsort(dist, axis=1, kind="stable")[:, :top]
    d = np.take_along_axis(dist, order, axis=1)
    if M == 2:
        k = np.full(S, 2)
    else:
        rule1 = d[:, 2] - d[:, 1] >= gap2
        if M == 3:
            k = np.where(rule1, 2, 3)
        else:
            rule2 = d[:, 3] - d[:, 2] >= gap3
            k = np.where(rule1, 2, np.where(rule2, 3, 4))
    members = np.full((S, 4), -1, dtype=np.int32)
    members[:, :top] = order
    members[np.arange(4)[None, :] >= k[:, None]] = -1
    return k.astype(np.int8), members


#: number of (k, rank) slot categories; rest codeword ``r`` is category
#: ``N_SLOT_CATS + r``
N_SLOT_CATS = 20


def value_table(slot_vals, rest_vals):
    """Flatten ``slot_vals`` (5 x 4) and ``rest_vals`` into one lookup table
    indexed by category."""
    slot = np.zeros((5, 4))
    sv = np.asarray(slot_vals, dtype=np.float64)
    slot[:sv.shape[0], :sv.shape[1]] = sv
    return np.concatenate([slot.ravel(), np.asarray(rest_vals, dtype=np.float64)])


def message_categories(dist, gap2, gap3):
    """Category of every message's phase-II codeword, per sample.

    The member with the ``p``-th smallest index in a size-``k`` group gets
    ``4 k + p``; the ``r``-th non-member (ascending index) gets
    ``N_SLOT_CATS + r``.
    """
    k, members = select_groups(dist, gap2, gap3)
    S, M = np.shape(dist)
    j = np.arange(M)
    valid = members >= 0
    below = ((members[:, :, None] < j[None, None, :]) & valid[:, :, None]).sum(axis=1)
    cat = N_SLOT_CATS + j[None, :] - below
    rows = np.arange(S)
    k = k.astype(np.int64)
    # position of each member among the group sorted by index
    pos = ((members[:, None, :] < members[:, :, None]) & valid[:, None, :]).sum(axis=2)
    for p in range(4):
        m = members[:, p]
        ok = m >= 0
        cat[rows[ok], m[ok]] = 4 * k[ok] + pos[ok, p]
    return cat


def category_counts(dist, gap2, gap3):
    """``counts[j, c]``: number of samples assigning category ``c`` to ``j``."""
    cat = message_categories(dist, gap2, gap3)
    S, M = cat.shape
    ncat = N_SLOT_CATS + M
    flat = cat + ncat * np.arange(M)[None, :]
    return np.bincount(flat.ravel(), minlength=M * ncat).reshape(M, ncat)


def message_values(dist, gap2, gap3, slot_vals, rest_vals):
    """Per-sample phase-II correlations ``(y'', x''_j)`` for every message.

    ``slot_vals[k, p]`` is the correlation of the group codeword at rank
    ``p`` (group of size ``k``) with the received reserved slots;
    ``rest_vals[r]`` that of the ``r``-th rest codeword.
    """
    return value_table(slot_vals, rest_vals)[message_categories(dist, gap2, gap3)]


def counts_loglik(counts, slot_vals, rest_vals):
    """``log mean exp`` of the per-sample values given category counts."""
    counts = np.asarray(counts)
    M, ncat = counts.shape
    table = value_table(slot_vals, rest_vals)[:ncat]
    counts = counts[:, :table.size]
    S = counts[0].sum()
    masked = np.where(counts > 0, table[None, :], -np.inf)
    mx = masked.max(axis=1)
    acc = (counts * np.exp(masked - mx[:, None])).sum(axis=1)
    return mx + np.log(acc / S)


def mixture_loglik(dist, gap2, gap3, slot_vals, rest_vals):
    """``log mean_s exp((y'', x''_j(s)))`` for every message ``j``.

    Each message takes one of a few values, so the average is formed from
    category counts rather than per-sample exponentials.
    """
    return counts_loglik(category_counts(dist, gap2, gap3), slot_vals, rest_vals)


def parabolic_cut_grid_min(c1, c2, c3, t, rhs, xs, ys):
    """Smallest ``x^2 + y^2`` over grid points with
    ``c1 x + c2 y - c3 (y + t)_+^2 >= rhs``.

    ``c3 = inf`` turns the quadratic term into the hard wall ``y <= -t``.
    Returns ``(value, x, y)``; value is ``inf`` if no grid point is feasible.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    pos = np.maximum(ys + t, 0.0)
    if np.isinf(c3):
        pen = np.where(pos > 0, np.inf, 0.0)
    else:
        pen = c3 * pos * pos
    lhs = c1 * xs[:, None] + (c2 * ys - pen)[None, :]
    obj = xs[:, None] ** 2 + (ys ** 2)[None, :]
    obj = np.where(lhs >= rhs, obj, np.inf)
    flat = int(np.argmin(obj))
    i, j = divmod(flat, ys.size)
    return float(obj[i, j]), float(xs[i]), float(ys[j])
