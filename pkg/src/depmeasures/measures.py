"""The four dependence measures of a joint mass matrix.

For events A (union of row atoms) and B (union of column atoms) with
nu = P(A and B) - P(A)P(B), the three event-pair coefficients are suprema
of |nu| over all event pairs, normalized by

    psi:    P(A) * P(B)
    lambda: sqrt(P(A) * P(B))
    tau:    sqrt(P(A)(1-P(A)) * P(B)(1-P(B)))   (= |Corr(1_A, 1_B)|)

with 0/0 read as 0.  The fourth, maximal correlation, is the supremum of
|Corr(X, Y)| over square-integrable X measurable in the row field and Y in
the column field; on finite spaces it equals the second singular value of
the mass matrix normalized by its marginals (zero-mass atoms removed), and
the second singular vectors rescale into optimal score functions.

Exact event suprema enumerate one representative per complement class
{S, S^c} x {T, T^c}: |nu| is invariant under complementing either event, so
each class's best statistic is |nu| over the smallest attainable
denominator.  Enumeration is vectorized over bitmask batches; it is
feasible up to the configured caps (14 x 14 by default, about 2^26 class
pairs).  Beyond the caps an alternating threshold-ascent heuristic returns
certified lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceFailure,
    InvariantViolation,
    OutOfRange,
    TooLargeForExact,
)
from .joint_pmf import EventPair, JointPMF

KINDS = ("psi", "lambda", "tau")
MODES = ("exact", "heuristic", "auto")

DEFAULT_EXACT_CAP_ROWS = 14
DEFAULT_EXACT_CAP_COLS = 14
DEFAULT_RHO_TOL = 1e-10

# Witness fidelity and chain tolerances enforced on every report.
WITNESS_TOL = 1e-12
CHAIN_TOL = 1e-9
DOUBLING_TOL = 1e-12

_CHUNK_ELEMS = 2_000_000

# The heuristic is a deterministic function of the matrix: restarts draw
# from a fixed-seed generator.
_HEURISTIC_SEED = 0x5EED
_HEURISTIC_RANDOM_RESTARTS = 16
_HEURISTIC_ATOM_RESTARTS = 4
_HEURISTIC_MAX_ROUNDS = 40


@dataclass(frozen=True)
class RhoSpectral:
    """Diagnostics of the spectral maximal-correlation computation."""

    sigma1: float
    sigma2: float
    iterations: int
    residual: float

    def to_jsonable(self) -> dict:
        return {
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "iterations": self.iterations,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class RhoResult:
    value: float
    spectral: RhoSpectral
    witness: tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class EventMeasure:
    value: float
    witness: EventPair
    mode: str


@dataclass(frozen=True)
class DependenceReport:
    """All four measures with optimality witnesses.

    ``lam`` is the lambda coefficient (field renamed: keyword).  Witness
    events reproduce their value under :func:`event_statistic`; the rho
    witness is a pair of mean-0 variance-1 score vectors over row/column
    atoms whose correlation equals rho.
    """

    psi: float
    lam: float
    tau: float
    rho: float
    psi_witness: EventPair
    lambda_witness: EventPair
    tau_witness: EventPair
    rho_witness: tuple[np.ndarray, np.ndarray]
    mode_flags: dict[str, str]

    def to_jsonable(self) -> dict:
        f, g = self.rho_witness
        return {
            "psi": self.psi,
            "lambda": self.lam,
            "tau": self.tau,
            "rho": self.rho,
            "psi_witness": self.psi_witness.to_jsonable(),
            "lambda_witness": self.lambda_witness.to_jsonable(),
            "tau_witness": self.tau_witness.to_jsonable(),
            "rho_witness": {
                "f": [float(x) for x in f],
                "g": [float(x) for x in g],
            },
            "mode_flags": dict(self.mode_flags),
        }


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise OutOfRange(f"kind must be one of {KINDS}, got {kind!r}")
    return kind


# ---------------------------------------------------------------------------
# Single event-pair statistics
# ---------------------------------------------------------------------------


def _bool_masks(M: JointPMF, e: EventPair) -> tuple[np.ndarray, np.ndarray]:
    rmask = np.zeros(M.n_rows, dtype=bool)
    cmask = np.zeros(M.n_cols, dtype=bool)
    for i in e.row_set:
        if not 0 <= i < M.n_rows:
            raise OutOfRange(f"row index {i} outside [0, {M.n_rows})")
        rmask[i] = True
    for j in e.col_set:
        if not 0 <= j < M.n_cols:
            raise OutOfRange(f"col index {j} outside [0, {M.n_cols})")
        cmask[j] = True
    return rmask, cmask


def _quadrants(entries: np.ndarray, rmask: np.ndarray, cmask: np.ndarray) -> tuple[float, float, float, float]:
    p11 = float(entries[rmask][:, cmask].sum())
    p10 = float(entries[rmask][:, ~cmask].sum())
    p01 = float(entries[~rmask][:, cmask].sum())
    p00 = float(entries[~rmask][:, ~cmask].sum())
    return p11, p10, p01, p00


def event_covariance(M: JointPMF, e: EventPair) -> float:
    """Signed covariance of the indicator pair, P(A and B) - P(A)P(B).

    Computed in the determinant form p11*p00 - p10*p01 over the collapsed
    2x2 table, which flips sign bit-exactly when either event is replaced
    by its complement (the two forms agree whenever total mass is exactly
    1).
    """
    rmask, cmask = _bool_masks(M, e)
    p11, p10, p01, p00 = _quadrants(M.entries, rmask, cmask)
    return p11 * p00 - p10 * p01


def event_statistic(M: JointPMF, e: EventPair, kind: str) -> float:
    """One event pair's psi, lambda, or tau statistic (0/0 read as 0)."""
    _check_kind(kind)
    rmask, cmask = _bool_masks(M, e)
    p11, p10, p01, p00 = _quadrants(M.entries, rmask, cmask)
    num = abs(p11 * p00 - p10 * p01)
    pa, pac = p11 + p10, p01 + p00
    pb, pbc = p11 + p01, p10 + p00
    # Staged division: products of near-degenerate event masses can
    # underflow even when the statistic itself is moderate.
    if kind == "psi":
        if pa <= 0.0 or pb <= 0.0:
            return 0.0
        return num / pa / pb
    if kind == "lambda":
        if pa <= 0.0 or pb <= 0.0:
            return 0.0
        return num / math.sqrt(pa) / math.sqrt(pb)
    var_a = pa * pac
    var_b = pb * pbc
    if var_a <= 0.0 or var_b <= 0.0:
        return 0.0
    return num / math.sqrt(var_a) / math.sqrt(var_b)


# ---------------------------------------------------------------------------
# Exact enumeration over complement classes
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _class_masks(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Representatives of nontrivial complement classes of an n-atom field.

    Each pair {S, S^c} with S not in {empty, full} contains exactly one
    member avoiding atom 0; those members, the subsets of {1..n-1} ordered
    by bitmask value, are enumerated here.  Returns (bool matrix, float
    matrix, complement float matrix, popcounts), each over 2^(n-1) - 1
    subsets.  Complement masks are materialized so complement masses can be
    computed as direct sums; masses of zero-mass events then come out as
    exact 0.0 and the 0/0 convention applies without tolerances.
    """
    if n < 2:
        empty = np.zeros((0, n), dtype=bool)
        fl = empty.astype(np.float64)
        return empty, fl, fl, np.zeros(0, dtype=np.int64)
    ints = np.arange(1, 1 << (n - 1), dtype=np.uint32)
    bits = (ints[:, None] >> np.arange(n - 1, dtype=np.uint32)[None, :]) & 1
    bools = np.concatenate([np.zeros((ints.size, 1), dtype=bool), bits.astype(bool)], axis=1)
    pc = bits.sum(axis=1).astype(np.int64)
    floats = bools.astype(np.float64)
    comp = (~bools).astype(np.float64)
    for arr in (bools, floats, comp, pc):
        arr.flags.writeable = False
    return bools, floats, comp, pc


def _indices_tuple(mask: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.nonzero(mask)[0])


def _side_variants(kind: str, mask: np.ndarray, p: float, pc: float) -> list[np.ndarray]:
    """Complement-class members attaining the class maximum on one side."""
    comp = ~mask
    if kind == "tau":
        return [mask, comp]
    if p < pc:
        return [mask]
    if p > pc:
        return [comp]
    return [mask, comp]


def _exact_scan(
    entries: np.ndarray,
    witness_kinds: Sequence[str] = (),
) -> tuple[dict[str, float], dict[str, EventPair]]:
    """Exact suprema of all three event statistics, with optional witnesses.

    Witness tie-break: among maximizers, smallest (|row_set|, |col_set|,
    lexicographic index tuples).
    """
    n_rows, n_cols = entries.shape
    r = entries.sum(axis=1)
    c = entries.sum(axis=0)
    row_b, row_f, row_cf, row_pc = _class_masks(n_rows)
    col_b, col_f, col_cf, col_pc = _class_masks(n_cols)
    n_rc, n_cc = row_f.shape[0], col_f.shape[0]

    values = {k: 0.0 for k in KINDS}
    witnesses = {k: EventPair() for k in witness_kinds}
    if n_rc == 0 or n_cc == 0:
        return values, witnesses

    p_s = row_f @ r
    p_t = col_f @ c
    # Complement masses are summed directly (never as 1 - p) so that
    # events of probability 0 or 1 are recognized exactly and score 0.
    p_sc = row_cf @ r
    p_tc = col_cf @ c
    u = row_f @ entries  # class x column intersection masses
    uc = row_cf @ entries

    ps_min = np.minimum(p_s, p_sc)
    pt_min = np.minimum(p_t, p_tc)
    ps_var = p_s * p_sc
    pt_var = p_t * p_tc

    chunk = max(1, _CHUNK_ELEMS // max(n_cc, 1))
    # Per kind: (value, key, EventPair) running best across chunks.
    best: dict[str, tuple[float, tuple | None, EventPair]] = {
        k: (0.0, None, EventPair()) for k in witness_kinds
    }

    ps_min_sqrt = np.sqrt(ps_min)
    pt_min_sqrt = np.sqrt(pt_min)
    ps_var_sqrt = np.sqrt(ps_var)
    pt_var_sqrt = np.sqrt(pt_var)

    col_t = col_f.T
    col_ct = col_cf.T
    for lo in range(0, n_rc, chunk):
        hi = min(lo + chunk, n_rc)
        # Covariance in determinant form over the four quadrant masses:
        # |p11*p00 - p10*p01| keeps full relative accuracy even when the
        # covariance is far below the resolution of P(S and T) - P(S)P(T).
        p11 = u[lo:hi] @ col_t
        p10 = u[lo:hi] @ col_ct
        p01 = uc[lo:hi] @ col_t
        p00 = uc[lo:hi] @ col_ct
        num = np.abs(p11 * p00 - p10 * p01)
        # Staged divisions: denominator products of near-degenerate masses
        # can underflow to 0 while the statistic itself is moderate.
        nontrivial = (ps_min[lo:hi] > 0.0)[:, None] & (pt_min[None, :] > 0.0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            stats = {
                "psi": np.where(
                    nontrivial, num / ps_min[lo:hi, None] / pt_min[None, :], 0.0
                ),
                "lambda": np.where(
                    nontrivial, num / ps_min_sqrt[lo:hi, None] / pt_min_sqrt[None, :], 0.0
                ),
                "tau": np.where(
                    nontrivial, num / ps_var_sqrt[lo:hi, None] / pt_var_sqrt[None, :], 0.0
                ),
            }
        for k in KINDS:
            cmax = float(stats[k].max())
            if cmax > values[k]:
                values[k] = cmax
            if k not in best or cmax <= 0.0:
                continue
            cur_val, cur_key, _ = best[k]
            if cmax < cur_val:
                continue
            key, pair = _chunk_best_witness(
                k, stats[k], cmax, lo, row_b, col_b, row_pc, col_pc, p_s, p_sc, p_t, p_tc
            )
            if cmax > cur_val or cur_key is None or key < cur_key:
                best[k] = (cmax, key, pair)

    for k in witness_kinds:
        val, key, pair = best[k]
        if values[k] <= 0.0 and n_rows >= 2 and n_cols >= 2:
            # Everything ties at 0; canonical smallest nontrivial pair.
            witnesses[k] = EventPair.of((0,), (0,))
        elif key is not None:
            witnesses[k] = pair
    return values, witnesses


def _chunk_best_witness(
    kind: str,
    stat: np.ndarray,
    cmax: float,
    row_offset: int,
    row_b: np.ndarray,
    col_b: np.ndarray,
    row_pc: np.ndarray,
    col_pc: np.ndarray,
    p_s: np.ndarray,
    p_sc: np.ndarray,
    p_t: np.ndarray,
    p_tc: np.ndarray,
) -> tuple[tuple, EventPair]:
    """Minimal-key maximizer within one chunk of the statistic array."""
    ties = np.argwhere(stat == cmax)
    gi = ties[:, 0] + row_offset
    tj = ties[:, 1]
    n_rows = row_b.shape[1]
    n_cols = col_b.shape[1]

    # Vector prefilter on the two size components of the key.
    if kind == "tau":
        size_s = np.minimum(row_pc[gi], n_rows - row_pc[gi])
        size_t = np.minimum(col_pc[tj], n_cols - col_pc[tj])
    else:
        ps, psc = p_s[gi], p_sc[gi]
        pt, ptc = p_t[tj], p_tc[tj]
        size_s = np.where(
            ps < psc,
            row_pc[gi],
            np.where(ps > psc, n_rows - row_pc[gi], np.minimum(row_pc[gi], n_rows - row_pc[gi])),
        )
        size_t = np.where(
            pt < ptc,
            col_pc[tj],
            np.where(pt > ptc, n_cols - col_pc[tj], np.minimum(col_pc[tj], n_cols - col_pc[tj])),
        )
    keep = size_s == size_s.min()
    gi, tj, size_t = gi[keep], tj[keep], size_t[keep]
    keep = size_t == size_t.min()
    gi, tj = gi[keep], tj[keep]

    best_key: tuple | None = None
    best_pair = EventPair()
    for g, t in zip(gi.tolist(), tj.tolist()):
        for rows_mask in _side_variants(kind, row_b[g], float(p_s[g]), float(p_sc[g])):
            rows = _indices_tuple(rows_mask)
            for cols_mask in _side_variants(kind, col_b[t], float(p_t[t]), float(p_tc[t])):
                cols = _indices_tuple(cols_mask)
                key = (len(rows), len(cols), rows, cols)
                if best_key is None or key < best_key:
                    best_key = key
                    best_pair = EventPair.of(rows, cols)
    assert best_key is not None
    return best_key, best_pair


# ---------------------------------------------------------------------------
# Alternating threshold-ascent heuristic (certified lower bound)
# ---------------------------------------------------------------------------


def _candidate_stat(
    kind: str, num: np.ndarray, pa: float, pac: float, pt: np.ndarray, ptc: np.ndarray
) -> np.ndarray:
    """Statistic of candidate column sets T against a fixed row event.

    ``pac`` and ``ptc`` are complement masses summed directly from entries,
    so degenerate (probability 0/1) candidates score an exact 0.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == "psi":
            valid = (pa > 0.0) & (pt > 0.0)
            return np.where(valid, num / pa / pt, 0.0)
        if kind == "lambda":
            valid = (pa > 0.0) & (pt > 0.0)
            return np.where(valid, num / math.sqrt(pa) / np.sqrt(pt), 0.0)
        var_a = pa * pac
        var_t = pt * ptc
        valid = (var_a > 0.0) & (var_t > 0.0)
        return np.where(valid, num / math.sqrt(var_a) / np.sqrt(var_t), 0.0)


def _best_threshold_side(
    kind: str, inter: np.ndarray, p_fixed: float, pc_fixed: float, marg: np.ndarray
) -> tuple[float, np.ndarray]:
    """Best prefix/suffix set of the score ordering on one side.

    ``inter[j]`` is P(fixed event AND atom j); atoms are ranked by the
    centered intersection mass per unit of marginal, and every prefix and
    every suffix of the ranking is scored.
    """
    idx = np.nonzero(marg > 0.0)[0]
    n = idx.size
    if n == 0:
        return 0.0, np.zeros(marg.size, dtype=bool)
    ratio = (inter[idx] - p_fixed * marg[idx]) / marg[idx]
    order = idx[np.argsort(-ratio, kind="stable")]
    marg_o = marg[order]
    inter_o = inter[order]
    pm = np.cumsum(marg_o)
    pim = np.cumsum(inter_o)
    sm = np.cumsum(marg_o[::-1])
    sim = np.cumsum(inter_o[::-1])
    if n > 1:
        # prefixes k=1..n, then suffixes of length 1..n-1
        pt = np.concatenate([pm, sm[: n - 1]])
        ptc = np.concatenate([sm[n - 2 :: -1], [0.0], pm[n - 2 :: -1]])
        pit = np.concatenate([pim, sim[: n - 1]])
    else:
        pt, ptc, pit = pm, np.array([0.0]), pim
    num = np.abs(pit - p_fixed * pt)
    stats = _candidate_stat(kind, num, p_fixed, pc_fixed, pt, ptc)
    k = int(np.argmax(stats))
    mask = np.zeros(marg.size, dtype=bool)
    if k < n:
        mask[order[: k + 1]] = True
    else:
        tail = k - n + 1
        mask[order[-tail:]] = True
    return float(stats[k]), mask


def _heuristic_scan(entries: np.ndarray, kind: str) -> tuple[float, EventPair]:
    n_rows, n_cols = entries.shape
    if n_rows < 2 or n_cols < 2:
        return 0.0, EventPair()
    r = entries.sum(axis=1)
    c = entries.sum(axis=0)
    rng = np.random.default_rng(_HEURISTIC_SEED)

    seeds: list[np.ndarray] = []
    for _ in range(_HEURISTIC_RANDOM_RESTARTS):
        mask = rng.random(n_rows) < 0.5
        if not mask.any():
            mask[int(rng.integers(n_rows))] = True
        if mask.all():
            mask[int(rng.integers(n_rows))] = False
        seeds.append(mask)
    for i in np.argsort(-r, kind="stable")[:_HEURISTIC_ATOM_RESTARTS]:
        mask = np.zeros(n_rows, dtype=bool)
        mask[int(i)] = True
        seeds.append(mask)

    best_val = 0.0
    best_pair = EventPair()
    for s_mask in seeds:
        local = 0.0
        for _ in range(_HEURISTIC_MAX_ROUNDS):
            pa = float(r[s_mask].sum())
            pac = float(r[~s_mask].sum())
            val_t, t_mask = _best_threshold_side(
                kind, entries[s_mask].sum(axis=0), pa, pac, c
            )
            if val_t > best_val:
                best_val = val_t
                best_pair = EventPair.of(np.nonzero(s_mask)[0], np.nonzero(t_mask)[0])
            pb = float(c[t_mask].sum())
            pbc = float(c[~t_mask].sum())
            val_s, s_new = _best_threshold_side(
                kind, entries[:, t_mask].sum(axis=1), pb, pbc, r
            )
            if val_s > best_val:
                best_val = val_s
                best_pair = EventPair.of(np.nonzero(s_new)[0], np.nonzero(t_mask)[0])
            s_mask = s_new
            round_best = max(val_t, val_s)
            if round_best <= local + 1e-15:
                break
            local = round_best
    return best_val, best_pair


# ---------------------------------------------------------------------------
# Public event-measure API
# ---------------------------------------------------------------------------


def event_measure(
    M: JointPMF,
    kind: str,
    mode: str = "auto",
    cap_rows: int = DEFAULT_EXACT_CAP_ROWS,
    cap_cols: int = DEFAULT_EXACT_CAP_COLS,
) -> EventMeasure:
    """Supremum of one event statistic, exact or heuristic.

    Exact mode enumerates all complement classes (requires the shape within
    the caps); heuristic mode returns a lower bound from threshold ascent
    and is flagged as such.  ``auto`` picks exact whenever it is feasible.
    """
    _check_kind(kind)
    if mode not in MODES:
        raise OutOfRange(f"mode must be one of {MODES}, got {mode!r}")
    within = M.n_rows <= cap_rows and M.n_cols <= cap_cols
    if mode == "exact" and not within:
        raise TooLargeForExact(
            f"shape {M.n_rows}x{M.n_cols} exceeds exact caps {cap_rows}x{cap_cols}"
        )
    use_exact = mode == "exact" or (mode == "auto" and within)
    if use_exact:
        values, wit = _exact_scan(M.entries, witness_kinds=(kind,))
        value = _witness_value(M, wit[kind], kind, values[kind])
        return EventMeasure(value=value, witness=wit[kind], mode="exact")
    value, pair = _heuristic_scan(M.entries, kind)
    return EventMeasure(value=value, witness=pair, mode="heuristic")


def _witness_value(M: JointPMF, pair: EventPair, kind: str, fallback: float) -> float:
    """Report the witness's own re-evaluated statistic.

    The enumeration and the single-pair evaluation follow slightly
    different float paths; quoting the witness's value keeps witness
    fidelity exact at every magnitude (psi can be enormous on matrices
    with near-zero entries).
    """
    if pair.row_set or pair.col_set:
        return event_statistic(M, pair, kind)
    return fallback


def exact_event_values(M: JointPMF) -> dict[str, float]:
    """All three exact suprema in one enumeration pass (no witnesses)."""
    values, _ = _exact_scan(M.entries)
    return values


# ---------------------------------------------------------------------------
# Maximal correlation (spectral)
# ---------------------------------------------------------------------------


def rho(M: JointPMF, tol: float = DEFAULT_RHO_TOL) -> RhoResult:
    """Maximal correlation via the normalized matrix's second singular value.

    Zero-mass rows/columns are deleted; Q = p / sqrt(outer(r, c)) has top
    singular triple (1, sqrt(r), sqrt(c)) and its second singular value is
    the maximal correlation.  Witness score functions are the second
    singular vectors rescaled by 1/sqrt(marginal): mean 0, variance 1, and
    correlation equal to the reported value.

    Degenerate pairs (fewer than two positive-mass atoms on either side)
    have maximal correlation 0 and a zero witness.
    """
    if not tol > 0.0:
        raise OutOfRange(f"tol must be positive, got {tol!r}")
    entries = M.entries
    r = entries.sum(axis=1)
    c = entries.sum(axis=0)
    rpos = r > 0.0
    cpos = c > 0.0
    sub = entries[np.ix_(rpos, cpos)]
    f = np.zeros(M.n_rows)
    g = np.zeros(M.n_cols)

    rs = r[rpos]
    cs = c[cpos]
    # Two-stage division: sqrt(outer(r, c)) can underflow to 0 for
    # near-degenerate atoms even though every quotient is bounded by 1.
    q = (sub / np.sqrt(rs)[:, None]) / np.sqrt(cs)[None, :]
    if not np.all(np.isfinite(q)):
        raise ConvergenceFailure("normalized matrix has non-finite entries")
    try:
        u_mat, s, vt = np.linalg.svd(q)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(f"SVD did not converge: {exc}") from exc

    sigma1 = float(s[0]) if s.size else 0.0
    if abs(sigma1 - 1.0) > 1e-9:
        raise InvariantViolation(
            f"top singular value {sigma1!r} of the normalized matrix is not 1"
        )
    if min(sub.shape) < 2:
        spectral = RhoSpectral(sigma1=sigma1, sigma2=0.0, iterations=0, residual=0.0)
        return RhoResult(value=0.0, spectral=spectral, witness=(f, g))

    sigma2 = float(s[1])
    if not -1e-12 <= sigma2 <= sigma1 + 1e-12:
        raise InvariantViolation(f"singular values out of order: {sigma1}, {sigma2}")
    u2 = u_mat[:, 1]
    v2 = vt[1]
    residual = max(
        float(np.linalg.norm(q @ v2 - sigma2 * u2)),
        float(np.linalg.norm(q.T @ u2 - sigma2 * v2)),
    )
    if residual > tol:
        raise ConvergenceFailure(f"singular-pair residual {residual} exceeds tol {tol}")
    f[rpos] = u2 / np.sqrt(rs)
    g[cpos] = v2 / np.sqrt(cs)
    value = min(max(sigma2, 0.0), 1.0)
    spectral = RhoSpectral(sigma1=sigma1, sigma2=sigma2, iterations=0, residual=residual)
    return RhoResult(value=value, spectral=spectral, witness=(f, g))


def score_correlation(M: JointPMF, f: np.ndarray, g: np.ndarray) -> float:
    """Correlation of score functions f(row), g(col) under the joint law."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    r = M.entries.sum(axis=1)
    c = M.entries.sum(axis=0)
    ef = float(r @ f)
    eg = float(c @ g)
    vf = float(r @ (f - ef) ** 2)
    vg = float(c @ (g - eg) ** 2)
    if vf <= 0.0 or vg <= 0.0:
        return 0.0
    cov = float((f - ef) @ M.entries @ (g - eg))
    return cov / math.sqrt(vf * vg)


# ---------------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------------


def full_report(
    M: JointPMF,
    mode: str = "auto",
    rho_tol: float = DEFAULT_RHO_TOL,
    cap_rows: int = DEFAULT_EXACT_CAP_ROWS,
    cap_cols: int = DEFAULT_EXACT_CAP_COLS,
) -> DependenceReport:
    """All four measures, witnesses, and mode flags, invariants enforced.

    With exact event measures the report is checked against the inequality
    chain lambda <= tau <= rho <= min(1, psi) and the doubling bound
    tau <= 2*lambda before being returned; witness fidelity is always
    checked.  Violations raise InvariantViolation (they indicate a bug, not
    bad input).
    """
    if mode not in MODES:
        raise OutOfRange(f"mode must be one of {MODES}, got {mode!r}")
    within = M.n_rows <= cap_rows and M.n_cols <= cap_cols
    if mode == "exact" and not within:
        raise TooLargeForExact(
            f"shape {M.n_rows}x{M.n_cols} exceeds exact caps {cap_rows}x{cap_cols}"
        )
    use_exact = mode == "exact" or (mode == "auto" and within)

    if use_exact:
        values, wit = _exact_scan(M.entries, witness_kinds=KINDS)
        for k in KINDS:
            values[k] = _witness_value(M, wit[k], k, values[k])
        flags = {k: "exact" for k in KINDS}
    else:
        values, wit = {}, {}
        for k in KINDS:
            values[k], wit[k] = _heuristic_scan(M.entries, k)
        flags = {k: "heuristic" for k in KINDS}

    rho_res = rho(M, tol=rho_tol)
    flags["rho"] = "exact"

    report = DependenceReport(
        psi=values["psi"],
        lam=values["lambda"],
        tau=values["tau"],
        rho=rho_res.value,
        psi_witness=wit["psi"],
        lambda_witness=wit["lambda"],
        tau_witness=wit["tau"],
        rho_witness=rho_res.witness,
        mode_flags=flags,
    )
    _enforce_report_invariants(M, report, rho_tol)
    return report


def _enforce_report_invariants(M: JointPMF, rep: DependenceReport, rho_tol: float) -> None:
    for k, wpair, val in (
        ("psi", rep.psi_witness, rep.psi),
        ("lambda", rep.lambda_witness, rep.lam),
        ("tau", rep.tau_witness, rep.tau),
    ):
        if rep.mode_flags[k] == "exact" or wpair.row_set or wpair.col_set:
            reval = event_statistic(M, wpair, k)
            if abs(reval - val) > WITNESS_TOL:
                raise InvariantViolation(
                    f"{k} witness reproduces {reval!r}, reported {val!r}"
                )
    wcorr = score_correlation(M, *rep.rho_witness)
    if rep.rho > 0.0 and abs(abs(wcorr) - rep.rho) > 10.0 * rho_tol:
        raise InvariantViolation(
            f"rho witness correlation {wcorr!r} vs reported {rep.rho!r}"
        )
    all_exact = all(rep.mode_flags[k] == "exact" for k in KINDS)
    if all_exact:
        if not (rep.lam <= rep.tau + CHAIN_TOL and rep.tau <= rep.rho + CHAIN_TOL):
            raise InvariantViolation(
                f"chain violated: lambda={rep.lam} tau={rep.tau} rho={rep.rho}"
            )
        if rep.rho > min(1.0, rep.psi) + CHAIN_TOL:
            raise InvariantViolation(f"rho={rep.rho} exceeds min(1, psi={rep.psi})")
        if rep.tau > 2.0 * rep.lam + DOUBLING_TOL:
            raise InvariantViolation(f"tau={rep.tau} exceeds 2*lambda={2 * rep.lam}")
        pos = M.entries[M.entries > 0.0]
        if pos.size and rep.psi > 1.0 / float(pos.min()) + 1e-6:
            raise InvariantViolation(
                f"psi={rep.psi} exceeds 1/min positive entry sanity bound"
            )
