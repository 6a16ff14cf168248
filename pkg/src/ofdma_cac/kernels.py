"""Hot loops, each with a numba-compiled and a plain numpy/Python variant.

The numba variants are compiled from the same source as the Python ones
(or from a loop-level rewrite of a vectorized numpy routine) so both
backends produce identical results up to floating-point reassociation;
the simulator kernel is bit-identical across backends because it only
consumes pre-drawn uniforms.

Select the backend per call with ``backend="numba"|"numpy"`` or globally
with the ``OFDMA_CAC_DISABLE_NUMBA`` environment variable.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from .errors import ReducibleChain

GTH_PANEL = 48


# ---------------------------------------------------------------------------
# GTH state reduction
# ---------------------------------------------------------------------------

def _gth_panel_numpy(W, s, e):
    """Eliminate states ``s..e-1`` of ``W`` against columns ``< e``.

    Updates to the trailing block ``W[e:, e:]`` are deferred to the caller.
    Returns the index of a zero pivot, or -1.
    """
    for k in range(s, e):
        if k > s:
            W[k, e:] += W[k, s:k] @ W[s:k, e:]
        scale = W[k, k + 1:].sum()
        if not scale > 0.0:
            return k
        W[k + 1:, k] /= scale
        if k + 1 < e:
            W[k + 1:, k + 1:e] += np.outer(W[k + 1:, k], W[k, k + 1:e])
    return -1


def _gth_panel_loops(W, s, e):
    n = W.shape[0]
    for k in range(s, e):
        for p in range(s, k):
            w = W[k, p]
            if w != 0.0:
                for c in range(e, n):
                    W[k, c] += w * W[p, c]
        scale = 0.0
        for c in range(k + 1, n):
            scale += W[k, c]
        if not scale > 0.0:
            return k
        for r in range(k + 1, n):
            W[r, k] /= scale
        for r in range(k + 1, n):
            w = W[r, k]
            if w != 0.0:
                for c in range(k + 1, e):
                    W[r, c] += w * W[k, c]
    return -1


_gth_panel_numba = _accel.njit(_gth_panel_loops)


def gth_reduce(W, m, backend=None, panel=GTH_PANEL):
    """Eliminate the first ``m`` states of the dense matrix ``W`` in place.

    Grassmann-Taksar-Heyman reduction: pivots are recomputed as the sum of
    the remaining off-diagonal row entries, so no subtraction ever occurs.
    Diagonal entries are ignored on input and garbage on output. After the
    call, ``W[m:, m:]`` holds the off-diagonal part of the censored chain
    and ``W[i, p]`` for ``i > p, p < m`` the multipliers used by
    back-substitution.
    """
    backend = _accel.resolve_backend(backend)
    panel_fn = _gth_panel_numba if backend == "numba" else _gth_panel_numpy
    n = W.shape[0]
    if m > n - 1:
        raise ValueError("at least one state must remain")
    for s in range(0, m, panel):
        e = min(s + panel, m)
        bad = panel_fn(W, s, e)
        if bad >= 0:
            raise ReducibleChain(f"zero pivot at state {bad}: chain is reducible")
        if e < n:
            W[e:, e:] += W[e:, s:e] @ W[s:e, e:]
    return W


def gth_back_substitute(W, x_tail, m):
    """Unnormalized stationary weights of the ``m`` eliminated states.

    ``x_tail`` are the weights of states ``m..n-1`` of ``W``.
    """
    x = np.zeros(m)
    carry = x_tail @ W[m:, :m] if len(x_tail) else np.zeros(m)
    LT = np.ascontiguousarray(W[:m, :m].T)
    for p in range(m - 1, -1, -1):
        x[p] = carry[p] + LT[p, p + 1:m] @ x[p + 1:m]
    return x


def gth_solve_dense(P, backend=None):
    """Stationary distribution of a dense row-stochastic matrix."""
    W = np.array(P, dtype=float, copy=True)
    n = W.shape[0]
    if n == 1:
        return np.ones(1)
    gth_reduce(W, n - 1, backend=backend)
    x = gth_back_substitute(W, np.ones(1), n - 1)
    x = np.append(x, 1.0)
    return x / x.sum()


def gth_solve_block_tridiagonal(diag, up, down, backend=None):
    """Stationary vector of a block-tridiagonal stochastic matrix.

    ``diag[k]``, ``up[k]`` (level k -> k+1) and ``down[k]`` (level k -> k-1)
    are dense ``B x B`` blocks. Levels are reduced from the first to the
    last with a two-level dense window, so cost is linear in the number of
    levels. Returns the normalized vector in level-major order.
    """
    nlev = len(diag)
    B = diag[0].shape[0]
    saved = []
    cur = np.array(diag[0], dtype=float)
    for k in range(nlev - 1):
        W = np.empty((2 * B, 2 * B))
        W[:B, :B] = cur
        W[:B, B:] = up[k]
        W[B:, :B] = down[k + 1]
        W[B:, B:] = diag[k + 1]
        gth_reduce(W, B, backend=backend)
        saved.append(W[:, :B].copy())
        cur = W[B:, B:].copy()

    if B > 1:
        gth_reduce(cur, B - 1, backend=backend)
        x_last = np.append(gth_back_substitute(cur, np.ones(1), B - 1), 1.0)
    else:
        x_last = np.ones(1)

    # per-level rescaling keeps weights finite across many levels
    xs = [None] * nlev
    logscale = np.zeros(nlev)
    top = x_last.max()
    xs[-1] = x_last / top
    logscale[-1] = np.log(top)
    for k in range(nlev - 2, -1, -1):
        Lk = saved[k]
        xk = gth_back_substitute(Lk, xs[k + 1], B)
        top = xk.max()
        if not top > 0.0:
            raise ReducibleChain(f"level {k} carries no stationary mass")
        xs[k] = xk / top
        logscale[k] = logscale[k + 1] + np.log(top)
    logscale -= logscale.max()
    x = np.concatenate([xs[k] * np.exp(logscale[k]) for k in range(nlev)])
    return x / x.sum()


# ---------------------------------------------------------------------------
# Frame-synchronous simulator
# ---------------------------------------------------------------------------

# state: phase, queue length, connections, ring-buffer head
ST_PHASE, ST_QUEUE, ST_CONN, ST_HEAD = 0, 1, 2, 3
# run-wide counters
CT_ARRIVED, CT_SERVED, CT_DROPPED, CT_OFFERED, CT_BLOCKED = 0, 1, 2, 3, 4
# per-batch accumulators
(ACC_FRAMES, ACC_CONN, ACC_QUEUE, ACC_ARRIVED, ACC_DROPPED, ACC_SERVED,
 ACC_OFFERED, ACC_BLOCKED, ACC_DELAY) = range(9)
N_ACC = 9


def _run_frames_py(f_start, f_stop, f_base, state, tags, counters, acc,
                   u_phase, u_conn, u_chan, u_arr, arr_ptr,
                   phase_p0, conn_a, conn_d, threshold,
                   arr_cdf, chan_cdf, chan_packets,
                   warmup, batch_len, n_batches, L):
    """Advance the simulated system over frames ``f_start..f_stop-1``.

    Stops early, before consuming anything for frame ``f``, when the
    arrival-uniform buffer cannot cover ``k`` more draws; returns the first
    unprocessed frame and the new arrival-buffer offset.
    """
    S = u_chan.shape[1]
    n_arr_u = u_arr.shape[0]
    n_rate = chan_cdf.shape[0]
    n_cnt = arr_cdf.shape[1]
    measured_end = warmup + n_batches * batch_len
    for f in range(f_start, f_stop):
        i = state[ST_PHASE]
        j = state[ST_QUEUE]
        k = state[ST_CONN]
        head = state[ST_HEAD]
        if arr_ptr + k > n_arr_u:
            return f, arr_ptr
        row = f - f_base
        b = -1
        if f >= warmup and f < measured_end:
            b = (f - warmup) // batch_len
            acc[b, ACC_FRAMES] += 1.0
            acc[b, ACC_CONN] += k
            acc[b, ACC_QUEUE] += j

        # service from the backlog present at frame start
        t = 0
        for s in range(S):
            u = u_chan[row, s]
            r = 0
            while r < n_rate - 1 and u >= chan_cdf[r]:
                r += 1
            t += chan_packets[r]
        n_srv = t if t < j else j
        for _ in range(n_srv):
            if b >= 0:
                acc[b, ACC_DELAY] += f - tags[head]
            head += 1
            if head == L:
                head = 0
        j -= n_srv

        # arrivals from the k connections present at frame start
        n_in = 0
        for _ in range(k):
            u = u_arr[arr_ptr]
            arr_ptr += 1
            c = 0
            while c < n_cnt - 1 and u >= arr_cdf[i, c]:
                c += 1
            n_in += c
        room = L - j
        accepted = n_in if n_in < room else room
        tail = head + j
        for _ in range(accepted):
            if tail >= L:
                tail -= L
            tags[tail] = f
            tail += 1
        j += accepted
        n_drop = n_in - accepted

        # connection event, decided on the frame-start k
        arrive = u_conn[row, 0] < conn_a
        depart = k > 0 and u_conn[row, 1] < conn_d[k]
        blocked = arrive and k >= threshold
        if arrive and not depart and not blocked:
            k += 1
        elif depart and not arrive:
            k -= 1

        # modulating phase
        if u_phase[row] < phase_p0[i]:
            i = 0
        else:
            i = 1

        counters[CT_ARRIVED] += n_in
        counters[CT_SERVED] += n_srv
        counters[CT_DROPPED] += n_drop
        if arrive:
            counters[CT_OFFERED] += 1
        if blocked:
            counters[CT_BLOCKED] += 1
        if b >= 0:
            acc[b, ACC_ARRIVED] += n_in
            acc[b, ACC_DROPPED] += n_drop
            acc[b, ACC_SERVED] += n_srv
            if arrive:
                acc[b, ACC_OFFERED] += 1.0
            if blocked:
                acc[b, ACC_BLOCKED] += 1.0

        state[ST_PHASE] = i
        state[ST_QUEUE] = j
        state[ST_CONN] = k
        state[ST_HEAD] = head
    return f_stop, arr_ptr


_run_frames_numba = _accel.njit(_run_frames_py)


def run_frames(*args, backend=None):
    backend = _accel.resolve_backend(backend)
    fn = _run_frames_numba if backend == "numba" else _run_frames_py
    f, ptr = fn(*args)
    return int(f), int(ptr)
