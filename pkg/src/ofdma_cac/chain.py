"""Discrete-time Markov chain over (phase, queue length, connections).

One step is one frame. Within a frame the phase, the connection count and
the queue move conditionally independently given the frame-start state:
the queue first transmits from its backlog, then takes the frame's
arrivals (generated by the frame-start phase and connection count) and
drops whatever exceeds the buffer.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import kernels
from .channel import rate_pmf, transmission_pmf
from .errors import CapacityOverflow, InvalidParams, NotConverged, ReducibleChain, WrongMode
from .mmpp import phase_transition_matrix
from .traffic import connection_transition_probs, per_connection_arrival_pmf

log = logging.getLogger(__name__)

# Order of operations inside a frame; the simulator follows the same order.
SERVICE_BEFORE_ARRIVALS = True

DEFAULT_STATE_BUDGET = 200_000
DIRECT_SOLVER_LIMIT = 20_000
DENSE_SUBCHAIN_LIMIT = 4000
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class StateIndexer:
    """Row-major linear indexing of ``(i, j, k)``: phase, queue, connections."""

    L: int
    K: int

    @property
    def n_states(self) -> int:
        return 2 * (self.L + 1) * (self.K + 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (2, self.L + 1, self.K + 1)

    def index(self, i, j, k):
        return (i * (self.L + 1) + j) * (self.K + 1) + k

    def unravel(self, idx):
        return np.unravel_index(idx, self.shape)

    def level_permutation(self) -> np.ndarray:
        """Canonical indices listed in connection-major ``(k, i, j)`` order."""
        k, i, j = np.meshgrid(np.arange(self.K + 1), np.arange(2), np.arange(self.L + 1), indexing="ij")
        return self.index(i, j, k).ravel()


@dataclass
class TransitionMatrix:
    matrix: sparse.csr_matrix
    expected_drops: np.ndarray
    expected_arrivals: np.ndarray
    indexer: StateIndexer | None = None

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


@dataclass
class StationaryDistribution:
    pi: np.ndarray
    indexer: StateIndexer | None
    residual: float
    method: str
    iterations: int = 0
    wall_time: float = 0.0

    def as_array(self) -> np.ndarray:
        """``pi`` reshaped to ``(2, L + 1, K + 1)``."""
        if self.indexer is None:
            raise InvalidParams("distribution has no state indexer")
        return self.pi.reshape(self.indexer.shape)

    def connection_marginal(self) -> np.ndarray:
        return self.as_array().sum(axis=(0, 1))

    def phase_marginal(self) -> np.ndarray:
        return self.as_array().sum(axis=(1, 2))

    def queue_marginal(self) -> np.ndarray:
        return self.as_array().sum(axis=(0, 2))


def queue_kernel(arrivals, tx, L):
    """Queue-length transition rows and expected drops for one (phase, k).

    Returns ``(Q, drops)`` with ``Q[j, j2] = Pr[j -> j2]`` where
    ``j2 = min(L, max(0, j - t) + a)`` over independent ``a ~ arrivals``,
    ``t ~ tx``, and ``drops[j] = E[max(0, max(0, j - t) + a - L)]``.
    """
    if int(L) != L or L < 0:
        raise InvalidParams(f"queue capacity must be a nonnegative integer, got {L!r}")
    L = int(L)
    arr = np.asarray(arrivals, dtype=float)
    tx = np.asarray(tx, dtype=float)
    n = L + 1

    # post-service occupancy y = max(0, j - t)
    tx_pad = np.zeros(max(len(tx), n + 1))
    tx_pad[:len(tx)] = tx
    tx_tail = np.cumsum(tx_pad[::-1])[::-1]        # Pr[t >= x]
    served = np.zeros((n, n))
    for j in range(n):
        served[j, 1:j + 1] = tx_pad[j - 1::-1][:j] if j else 0.0
        served[j, 0] = tx_tail[j]

    # arrivals on top of y, clipped at L
    size = max(len(arr), n + 1) + 1
    a_pad = np.zeros(size)
    a_pad[:len(arr)] = arr
    a_tail = np.cumsum(a_pad[::-1])[::-1]          # Pr[a >= x]
    excess = np.cumsum(a_tail[::-1])[::-1]         # sum_{x' >= x} Pr[a >= x']
    grow = np.zeros((n, n))
    drop_given_y = np.zeros(n)
    for y in range(n):
        room = L - y
        grow[y, y:L] = a_pad[:room]
        grow[y, L] = a_tail[room]
        drop_given_y[y] = excess[room + 1]        # E[(a - room)^+]
    return served @ grow, served @ drop_given_y


def _factor_pieces(config, mode=None):
    """Phase step, per-k connection steps, transmission pmf and per-phase arrival pmfs."""
    mode = mode or config.mode
    conn = config.connection_params(mode)
    phase = phase_transition_matrix(config.mmpp, 1.0)
    steps = np.array([connection_transition_probs(k, conn) for k in range(conn.threshold + 1)])
    tx = transmission_pmf(rate_pmf(config.channel_model, config.amc_table), config.amc_table,
                          config.subchannels)
    per_conn = [per_connection_arrival_pmf(lam, config.max_arrivals) for lam in config.mmpp.rates]
    return conn, phase, steps, tx, per_conn


def build_transition_matrix(config, mode=None, state_budget=None) -> TransitionMatrix:
    """Assemble the sparse one-frame transition matrix for ``config``.

    ``mode`` overrides ``config.mode``; under ``no_cac`` the connection
    dimension is truncated at ``config.truncation_level``.
    """
    conn, phase, steps, tx, per_conn = _factor_pieces(config, mode)
    L, K = config.queue_size, conn.threshold
    ix = StateIndexer(L, K)
    budget = state_budget if state_budget is not None else config.state_budget
    if ix.n_states > budget:
        raise CapacityOverflow(f"{ix.n_states} states exceed the state budget of {budget}")

    rows, cols, vals = [], [], []
    drops = np.zeros(ix.shape)
    arrivals_mean = np.zeros(ix.shape)
    for i in range(2):
        agg = np.ones(1)
        for k in range(K + 1):
            if k:
                agg = np.convolve(agg, per_conn[i])
            Q, d = queue_kernel(agg, tx, L)
            drops[i, :, k] = d
            arrivals_mean[i, :, k] = agg @ np.arange(len(agg))
            jr, jc = np.nonzero(Q)
            qv = Q[jr, jc]
            for dk, p_conn in ((1, steps[k, 0]), (-1, steps[k, 1]), (0, steps[k, 2])):
                if p_conn <= 0.0:
                    continue
                for i2 in range(2):
                    p = phase[i, i2] * p_conn
                    if p <= 0.0:
                        continue
                    rows.append(ix.index(i, jr, k))
                    cols.append(ix.index(i2, jc, k + dk))
                    vals.append(p * qv)
    n = ix.n_states
    P = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    P.sum_duplicates()
    return TransitionMatrix(P, drops.ravel(), arrivals_mean.ravel(), ix)


def _as_csr(P):
    if isinstance(P, TransitionMatrix):
        return P.matrix.tocsr(), P.indexer
    if sparse.issparse(P):
        return P.tocsr(), None
    return sparse.csr_matrix(np.asarray(P, dtype=float)), None


def residual_norm(pi, P) -> float:
    """``||pi P - pi||_1``."""
    csr, _ = _as_csr(P)
    return float(np.abs(csr.T @ pi - pi).sum())


def _solve_direct(csr, indexer, backend):
    if indexer is None:
        return kernels.gth_solve_dense(csr.toarray(), backend=backend)
    B = 2 * (indexer.L + 1)
    nlev = indexer.K + 1
    perm = indexer.level_permutation()
    Pl = csr[perm][:, perm].tocoo()
    if np.any(np.abs(Pl.row // B - Pl.col // B) > 1):
        log.info("connection count jumps by more than one; using dense GTH")
        return kernels.gth_solve_dense(csr.toarray(), backend=backend)
    Pl = Pl.tocsr()
    diag, up, down = [], [], []
    for k in range(nlev):
        band = Pl[k * B:(k + 1) * B]
        diag.append(band[:, k * B:(k + 1) * B].toarray())
        up.append(band[:, (k + 1) * B:(k + 2) * B].toarray() if k + 1 < nlev else None)
        down.append(band[:, (k - 1) * B:k * B].toarray() if k > 0 else None)
    x_level = kernels.gth_solve_block_tridiagonal(diag, up, down, backend=backend)
    pi = np.empty_like(x_level)
    pi[perm] = x_level
    return pi


def closed_class(csr):
    """Mask of the single closed communicating class of ``csr``.

    States outside it are transient and carry no stationary mass. Raises
    ReducibleChain when there is more than one closed class.
    """
    n_comp, labels = csgraph.connected_components(csr, directed=True, connection="strong")
    coo = csr.tocoo()
    leaves = labels[coo.row] != labels[coo.col]
    open_labels = np.unique(labels[coo.row[leaves & (coo.data > 0)]])
    closed = np.setdiff1d(np.arange(n_comp), open_labels)
    if len(closed) != 1:
        raise ReducibleChain(f"{len(closed)} closed classes: no unique stationary distribution")
    return labels == closed[0]


def _solve_direct_with_transients(csr, indexer, backend, tol, max_iter):
    try:
        return _solve_direct(csr, indexer, backend)
    except ReducibleChain:
        mask = closed_class(csr)
        if mask.all():
            raise
    log.info("%d transient states; solving on the closed class of %d", (~mask).sum(), mask.sum())
    sub = csr[mask][:, mask].tocsr()
    if sub.shape[0] <= DENSE_SUBCHAIN_LIMIT:
        x = kernels.gth_solve_dense(sub.toarray(), backend=backend)
    else:
        x, _ = _solve_power(sub, tol, max_iter)
    pi = np.zeros(csr.shape[0])
    pi[mask] = x
    return pi


def _solve_power(csr, tol, max_iter, window=10):
    n = csr.shape[0]
    PT = csr.T.tocsr()
    x = np.full(n, 1.0 / n)
    diff = np.inf
    history = []
    for it in range(1, max_iter + 1):
        y = PT @ x
        y /= y.sum()
        diff = np.abs(y - x).sum()
        x = y
        history.append(diff)
        if diff == 0.0:
            return x, it
        if diff > tol:
            continue
        # successive steps shrink geometrically; the remaining distance to
        # the fixed point is about diff * r / (1 - r)
        if len(history) <= window or history[-1 - window] == 0.0:
            continue
        r = (diff / history[-1 - window]) ** (1.0 / window)
        if r < 1.0 and diff * r / (1.0 - r) <= tol:
            return x, it
    raise NotConverged(
        f"power iteration did not reach {tol:g} in {max_iter} iterations (last step {diff:.3e})",
        iterations=max_iter, residual=diff,
    )


def solve_stationary(P, method="auto", tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                     backend=None) -> StationaryDistribution:
    """Solve ``pi P = pi``, ``sum(pi) = 1``.

    ``direct`` is GTH state reduction, applied level by level when ``P``
    carries a state indexer (the chain is block tridiagonal in the
    connection count). ``power`` iterates from the uniform vector until
    successive iterates differ by at most ``tol`` in 1-norm. ``auto``
    picks ``direct`` up to 20000 states.
    """
    t0 = time.perf_counter()
    csr, indexer = _as_csr(P)
    n = csr.shape[0]
    if method == "auto":
        method = "direct" if n <= DIRECT_SOLVER_LIMIT else "power"
    iterations = 0
    if method == "direct":
        pi = _solve_direct_with_transients(csr, indexer, backend, tol, int(max_iter))
    elif method == "power":
        pi, iterations = _solve_power(csr, tol, max_iter)
    else:
        raise InvalidParams(f"unknown solver method {method!r}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    res = residual_norm(pi, csr)
    if res > tol:
        raise NotConverged(f"{method} solution residual {res:.3e} exceeds {tol:g}",
                           iterations=iterations, residual=res)
    return StationaryDistribution(pi, indexer, res, method, iterations, time.perf_counter() - t0)


def truncation_check(dist: StationaryDistribution, mode="no_cac") -> float:
    """Largest ``pi(i, j, C_tr)``; only meaningful for a truncated no-CAC chain."""
    if mode != "no_cac":
        raise WrongMode("truncation check applies to no_cac mode only")
    return float(dist.as_array()[:, :, -1].max())


# ---------------------------------------------------------------------------
# sparse triplet dump
# ---------------------------------------------------------------------------

def write_triplets(path, P: TransitionMatrix, dist: StationaryDistribution | None = None):
    """Write ``P`` (and optionally ``pi`` as a 1 x N row) as ``row col value`` lines."""
    ix = P.indexer
    coo = P.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write("# ofdma-cac sparse triplets v1\n")
        fh.write(f"# N = {P.n_states}\n")
        if ix is not None:
            fh.write(f"# L = {ix.L}\n# K = {ix.K}\n")
            fh.write("# index(i, j, k) = (i * (L + 1) + j) * (K + 1) + k\n")
        fh.write(f"# matrix P {P.n_states} {P.n_states} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")
        if dist is not None:
            nz = np.flatnonzero(dist.pi)
            fh.write(f"# matrix pi 1 {len(dist.pi)} {len(nz)}\n")
            for c in nz:
                fh.write(f"0 {c} {float(dist.pi[c])!r}\n")


def read_triplets(path) -> dict:
    """Read a dump back into ``{"P": csr, "pi": ndarray, "header": {...}}``."""
    header, blocks, current = {}, {}, None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("matrix "):
                    _, name, nr, nc, _nnz = body.split()
                    current = blocks[name] = {"shape": (int(nr), int(nc)), "r": [], "c": [], "v": []}
                elif "=" in body and not body.startswith("index"):
                    key, _, value = body.partition("=")
                    header[key.strip()] = int(value)
                continue
            r, c, v = line.split()
            current["r"].append(int(r))
            current["c"].append(int(c))
            current["v"].append(float(v))
    out = {"header": header}
    for name, b in blocks.items():
        m = sparse.csr_matrix((b["v"], (b["r"], b["c"])), shape=b["shape"])
        out[name] = m.toarray().ravel() if name == "pi" else m
    return out
