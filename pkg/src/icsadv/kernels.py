"""Hot numeric kernels, each implemented twice.

Every kernel here has a vectorized pure-numpy implementation and a numba
``@njit`` twin. The module-level names (``gini_best_split``, ``sse_best_split``,
``tree_apply``, ``tank_loop``) are bound to one backend at import time based
on :data:`icsadv.accel.NUMBA_ENABLED`; the suffixed variants stay available
for tests and the benchmark harness.

The two backends are written op-for-op identical so their outputs agree
bitwise: split scans convert integer counts to float with the same formula
per candidate, cumulative sums run in the same order (stable mergesort
argsort on both sides), and best-candidate selection keeps the first
maximum. The cross-backend agreement test relies on this.

Split-scan conventions shared by both criteria:

* candidate thresholds are midpoints of consecutive distinct sorted values,
  kept only when the midpoint lies strictly below the upper value (adjacent
  floats can collapse the midpoint onto the upper value, which would leak
  the upper block into the left child);
* rows with value <= threshold go left;
* ties on gain break toward the lowest feature index, then the lowest
  threshold (scan order + strict improvement comparisons give this for free).
"""
from __future__ import annotations

import numpy as np

from .accel import NUMBA_ENABLED

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        raise RuntimeError("numba is not installed")


# ---------------------------------------------------------------------------
# classification split (Gini)
# ---------------------------------------------------------------------------


def gini_best_split_numpy(X, y, feature_indices):
    """Best (feature, threshold, gain) under Gini impurity for one node.

    X: (n, d) float64, y: (n,) int64 in {0, 1}, feature_indices: int64
    candidate feature columns in ascending order. Returns feature -1 when
    no candidate split exists. gain is parent impurity minus the
    sample-weighted child impurity.
    """
    n = X.shape[0]
    n1 = int(y.sum())
    n0 = n - n1
    fn = float(n)
    p0 = n0 / fn
    p1 = n1 / fn
    g_parent = 1.0 - p0 * p0 - p1 * p1

    best_feat = -1
    best_thr = 0.0
    best_gain = -1.0
    for j in feature_indices:
        col = X[:, j]
        order = np.argsort(col, kind="mergesort")
        sv = col[order]
        if sv[0] == sv[n - 1]:
            continue
        sy = y[order]
        cut = np.nonzero(sv[:-1] != sv[1:])[0]
        thr = (sv[cut] + sv[cut + 1]) * 0.5
        keep = thr < sv[cut + 1]
        cut = cut[keep]
        thr = thr[keep]
        if cut.size == 0:
            continue
        cum1 = np.cumsum(sy)
        nl = (cut + 1).astype(np.float64)
        n1l = cum1[cut].astype(np.float64)
        n0l = nl - n1l
        nr = fn - nl
        n1r = float(n1) - n1l
        n0r = nr - n1r
        p0l = n0l / nl
        p1l = n1l / nl
        gl = 1.0 - p0l * p0l - p1l * p1l
        p0r = n0r / nr
        p1r = n1r / nr
        gr = 1.0 - p0r * p0r - p1r * p1r
        gain = g_parent - ((nl / fn) * gl + (nr / fn) * gr)
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_feat = int(j)
            best_thr = float(thr[k])
            best_gain = float(gain[k])
    return best_feat, best_thr, best_gain


def _gini_best_split_loop(X, y, feature_indices):
    n = X.shape[0]
    n1 = 0
    for i in range(n):
        n1 += y[i]
    n0 = n - n1
    fn = float(n)
    p0 = n0 / fn
    p1 = n1 / fn
    g_parent = 1.0 - p0 * p0 - p1 * p1

    best_feat = -1
    best_thr = 0.0
    best_gain = -1.0
    for jj in range(feature_indices.shape[0]):
        j = feature_indices[jj]
        col = X[:, j].copy()
        order = np.argsort(col, kind="mergesort")
        sv = col[order]
        if sv[0] == sv[n - 1]:
            continue
        cum = 0
        for i in range(n - 1):
            cum += y[order[i]]
            if sv[i] == sv[i + 1]:
                continue
            thr = (sv[i] + sv[i + 1]) * 0.5
            if not thr < sv[i + 1]:
                continue
            nl = float(i + 1)
            n1l = float(cum)
            n0l = nl - n1l
            nr = fn - nl
            n1r = float(n1) - n1l
            n0r = nr - n1r
            p0l = n0l / nl
            p1l = n1l / nl
            gl = 1.0 - p0l * p0l - p1l * p1l
            p0r = n0r / nr
            p1r = n1r / nr
            gr = 1.0 - p0r * p0r - p1r * p1r
            gain = g_parent - ((nl / fn) * gl + (nr / fn) * gr)
            if gain > best_gain:
                best_feat = j
                best_thr = thr
                best_gain = gain
    return best_feat, best_thr, best_gain


# ---------------------------------------------------------------------------
# regression split (sum of squared errors)
# ---------------------------------------------------------------------------


def sse_best_split_numpy(X, r, feature_indices):
    """Best (feature, threshold, gain) by SSE reduction for one node.

    r is the float64 regression target. gain is parent SSE minus the sum
    of child SSEs (absolute reduction, not sample-weighted variance).
    """
    n = X.shape[0]
    fn = float(n)
    total_s = float(np.cumsum(r)[-1])
    total_q = float(np.cumsum(r * r)[-1])
    sse_parent = total_q - total_s * total_s / fn

    best_feat = -1
    best_thr = 0.0
    best_gain = -1.0
    for j in feature_indices:
        col = X[:, j]
        order = np.argsort(col, kind="mergesort")
        sv = col[order]
        if sv[0] == sv[n - 1]:
            continue
        sr = r[order]
        cut = np.nonzero(sv[:-1] != sv[1:])[0]
        thr = (sv[cut] + sv[cut + 1]) * 0.5
        keep = thr < sv[cut + 1]
        cut = cut[keep]
        thr = thr[keep]
        if cut.size == 0:
            continue
        cums = np.cumsum(sr)
        cumq = np.cumsum(sr * sr)
        nl = (cut + 1).astype(np.float64)
        sl = cums[cut]
        ql = cumq[cut]
        nr = fn - nl
        sse_l = ql - sl * sl / nl
        sr_sum = total_s - sl
        sse_r = (total_q - ql) - sr_sum * sr_sum / nr
        gain = sse_parent - (sse_l + sse_r)
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_feat = int(j)
            best_thr = float(thr[k])
            best_gain = float(gain[k])
    return best_feat, best_thr, best_gain


def _sse_best_split_loop(X, r, feature_indices):
    n = X.shape[0]
    fn = float(n)
    total_s = 0.0
    total_q = 0.0
    for i in range(n):
        total_s += r[i]
        total_q += r[i] * r[i]
    sse_parent = total_q - total_s * total_s / fn

    best_feat = -1
    best_thr = 0.0
    best_gain = -1.0
    for jj in range(feature_indices.shape[0]):
        j = feature_indices[jj]
        col = X[:, j].copy()
        order = np.argsort(col, kind="mergesort")
        sv = col[order]
        if sv[0] == sv[n - 1]:
            continue
        sl = 0.0
        ql = 0.0
        for i in range(n - 1):
            ri = r[order[i]]
            sl += ri
            ql += ri * ri
            if sv[i] == sv[i + 1]:
                continue
            thr = (sv[i] + sv[i + 1]) * 0.5
            if not thr < sv[i + 1]:
                continue
            nl = float(i + 1)
            nr = fn - nl
            sse_l = ql - sl * sl / nl
            sr_sum = total_s - sl
            sse_r = (total_q - ql) - sr_sum * sr_sum / nr
            gain = sse_parent - (sse_l + sse_r)
            if gain > best_gain:
                best_feat = j
                best_thr = thr
                best_gain = gain
    return best_feat, best_thr, best_gain


# ---------------------------------------------------------------------------
# batched tree traversal
# ---------------------------------------------------------------------------


def tree_apply_numpy(feature, threshold, left, right, value, X):
    """Evaluate an array-encoded binary tree on every row of X.

    feature[i] == -1 marks node i as a leaf carrying value[i]; internal
    nodes route rows with X[:, feature] <= threshold to ``left``.
    """
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        feat = feature[node]
        live = feat >= 0
        if not live.any():
            break
        lr = rows[live]
        ln = node[live]
        go_left = X[lr, feat[live]] <= threshold[ln]
        node[live] = np.where(go_left, left[ln], right[ln])
    return value[node]


def _tree_apply_loop(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


# ---------------------------------------------------------------------------
# tank farm step loop
# ---------------------------------------------------------------------------


def _tank_loop_py(
    level0,
    inflow_rate,
    outflow_rate,
    level_low,
    level_high,
    capacity,
    dt,
    level_noise,
    inflow_noise,
    outflow_noise,
    pump_flip,
    valve_flip,
    level_meas,
    inflow_meas,
    outflow_meas,
    pump_out,
    valve_out,
):
    """Shared step loop body; numba-compilable as written.

    Per step: read noisy level, run the hysteresis pump controller on the
    reading, apply actuator-flip overrides, integrate the true level from
    the (possibly forced) actuator states. Controller memory keeps its own
    command so forcing an actuator does not corrupt the hysteresis state.
    """
    n_steps = level_meas.shape[0]
    n_tanks = level_meas.shape[1]
    level = level0.copy()
    pump_cmd = np.zeros(n_tanks, dtype=np.int64)
    for t in range(n_steps):
        for k in range(n_tanks):
            meas = level[k] + level_noise[t, k]
            cmd = pump_cmd[k]
            if meas < level_low:
                cmd = 2
            elif meas > level_high:
                cmd = 0
            pump_cmd[k] = cmd
            if pump_flip[t, k]:
                pump_act = 0 if cmd >= 1 else 2
            else:
                pump_act = cmd
            valve_act = 0 if valve_flip[t, k] else 2
            q_in = inflow_rate if pump_act == 2 else 0.0
            q_out = outflow_rate if valve_act == 2 else 0.0
            level_meas[t, k] = meas
            inflow_meas[t, k] = q_in + inflow_noise[t, k]
            outflow_meas[t, k] = q_out + outflow_noise[t, k]
            pump_out[t, k] = pump_act
            valve_out[t, k] = valve_act
            level[k] += (q_in - q_out) * dt
            if level[k] < 0.0:
                level[k] = 0.0
            elif level[k] > capacity:
                level[k] = capacity


def tank_loop_numpy(level0, rates, noise, flips, n_steps):
    """Pure-python/numpy tank farm simulation.

    rates: (inflow_rate, outflow_rate, level_low, level_high, capacity, dt)
    noise: (level_noise, inflow_noise, outflow_noise), each (n_steps, n_tanks)
    flips: (pump_flip, valve_flip) boolean (n_steps, n_tanks)
    Returns (level_meas, inflow_meas, outflow_meas, pump, valve).
    """
    n_tanks = level0.shape[0]
    out = _alloc_trace(n_steps, n_tanks)
    _tank_loop_py(level0, *rates, *noise, *flips, *out)
    return out


def _alloc_trace(n_steps, n_tanks):
    return (
        np.empty((n_steps, n_tanks), dtype=np.float64),
        np.empty((n_steps, n_tanks), dtype=np.float64),
        np.empty((n_steps, n_tanks), dtype=np.float64),
        np.empty((n_steps, n_tanks), dtype=np.int64),
        np.empty((n_steps, n_tanks), dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    _gini_jit = njit(cache=True)(_gini_best_split_loop)
    _sse_jit = njit(cache=True)(_sse_best_split_loop)
    _tree_apply_jit = njit(cache=True)(_tree_apply_loop)
    _tank_loop_jit = njit(cache=True)(_tank_loop_py)

    def gini_best_split_numba(X, y, feature_indices):
        return _gini_jit(X, y, feature_indices)

    def sse_best_split_numba(X, r, feature_indices):
        return _sse_jit(X, r, feature_indices)

    def tree_apply_numba(feature, threshold, left, right, value, X):
        return _tree_apply_jit(feature, threshold, left, right, value, X)

    def tank_loop_numba(level0, rates, noise, flips, n_steps):
        n_tanks = level0.shape[0]
        out = _alloc_trace(n_steps, n_tanks)
        _tank_loop_jit(level0, *rates, *noise, *flips, *out)
        return out

    def warmup():
        """Force JIT compilation of every kernel on tiny inputs."""
        X = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]])
        y = np.array([0, 1, 0], dtype=np.int64)
        feats = np.arange(2, dtype=np.int64)
        gini_best_split_numba(X, y, feats)
        sse_best_split_numba(X, y.astype(np.float64), feats)
        tree_apply_numba(
            np.array([0, -1, -1], dtype=np.int64),
            np.array([0.5, 0.0, 0.0]),
            np.array([1, -1, -1], dtype=np.int64),
            np.array([2, -1, -1], dtype=np.int64),
            np.array([0.0, 0.0, 1.0]),
            X,
        )
        z = np.zeros((2, 1))
        f = np.zeros((2, 1), dtype=np.bool_)
        tank_loop_numba(
            np.array([0.5]), (1.0, 0.5, 0.3, 0.7, 1.0, 1.0), (z, z, z), (f, f), 2
        )


if NUMBA_ENABLED:
    gini_best_split = gini_best_split_numba
    sse_best_split = sse_best_split_numba
    tree_apply = tree_apply_numba
    tank_loop = tank_loop_numba
else:
    gini_best_split = gini_best_split_numpy
    sse_best_split = sse_best_split_numpy
    tree_apply = tree_apply_numpy
    tank_loop = tank_loop_numpy
