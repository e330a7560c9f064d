"""Stochastic search over joint mass matrices.

Two objectives:

  * max rho subject to an exact tau cap -- probing how close desk-scale
    instances get to the sharp bounds t*(1 - log t) (general) and
    t*sqrt(1 - log t) (two-atom row field).  The bounds are theorems, so a
    run reporting an objective above its bound is a build-failing internal
    error, never a discovery.
  * max tensor gap -- a certified lower bound on tau(M join M) - tau(M),
    where the lower bound comes from embedded single-copy events, threshold
    events of summed atom scores, and the alternating heuristic on the join.
    The gap can never exceed psi(M) - tau(M).

Proposals are Dirichlet perturbations centered at the current state;
infeasible proposals (exact tau above the cap) are rejected outright so
feasibility is unconditional, and acceptance is by annealed Metropolis on
the objective.  Everything is deterministic given the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvariantViolation, OutOfRange, SizeOverflow
from .joint_pmf import JointPMF, from_matrix, kron
from .measures import (
    DEFAULT_EXACT_CAP_COLS,
    DEFAULT_EXACT_CAP_ROWS,
    DependenceReport,
    _exact_scan,
    _heuristic_scan,
    full_report,
    rho as _rho,
)
from .theorem_suite import tau_log_bound, tau_sqrt_log_bound

BOUND_TOL = 1e-9
_TEMPERATURE_0 = 0.05
_TEMPERATURE_DECAY = 0.995
_REJECT_STREAK = 25
_SCALE_SHRINK = 0.8
_SCALE_FLOOR = 1e-4
_GAP_GRID_CAP = 2_000_000

AcceptHook = Callable[[np.ndarray, float, float], None]


@dataclass(frozen=True)
class SearchConfig:
    """Shape, constraint, and budget of one search run.

    Exact tau is evaluated at every proposal, so keep shapes small: 4x4 is
    the recommended general default, 2x8 for the two-atom regime.
    """

    shape: tuple[int, int] = (4, 4)
    tau_cap: float = 1.0
    two_atom: bool = False
    budget: int = 1000
    restarts: int = 4
    seed: int = 0
    step_scale: float = 0.25

    def __post_init__(self) -> None:
        n_rows, n_cols = self.shape
        if n_rows < 1 or n_cols < 1:
            raise OutOfRange(f"shape must be at least 1x1, got {self.shape}")
        if n_rows > DEFAULT_EXACT_CAP_ROWS or n_cols > DEFAULT_EXACT_CAP_COLS:
            raise OutOfRange(
                f"shape {self.shape} beyond exact-tau caps; search requires exact tau"
            )
        if not 0.0 < self.tau_cap <= 1.0:
            raise OutOfRange(f"tau_cap must be in (0, 1], got {self.tau_cap!r}")
        if self.two_atom and n_rows != 2:
            raise OutOfRange("two_atom regime requires exactly 2 rows")
        if self.budget < 1:
            raise OutOfRange(f"budget must be >= 1, got {self.budget}")
        if self.restarts < 1:
            raise OutOfRange(f"restarts must be >= 1, got {self.restarts}")
        if not self.step_scale > 0.0:
            raise OutOfRange(f"step_scale must be positive, got {self.step_scale!r}")

    def to_jsonable(self) -> dict:
        return {
            "shape": list(self.shape),
            "tau_cap": self.tau_cap,
            "two_atom": self.two_atom,
            "budget": self.budget,
            "restarts": self.restarts,
            "seed": self.seed,
            "step_scale": self.step_scale,
        }


@dataclass(frozen=True)
class SearchResult:
    """Best state found, its report, and the relevant theorem bound."""

    best: JointPMF
    best_report: DependenceReport
    objective: float
    bound: float
    ratio: float
    trace: list[tuple[int, float]]
    seed: int

    def to_jsonable(self) -> dict:
        return {
            "best": self.best.to_jsonable(),
            "best_report": self.best_report.to_jsonable(),
            "objective": self.objective,
            "bound": self.bound,
            "ratio": self.ratio,
            "trace": [[int(k), float(v)] for k, v in self.trace],
            "seed": self.seed,
        }


def _exact_tau(entries: np.ndarray) -> float:
    values, _ = _exact_scan(entries)
    return values["tau"]


def _sign_pair_embedding(shape: tuple[int, int], t: float) -> np.ndarray:
    """Initial feasible state: a sign-product pair padded with zero atoms."""
    n_rows, n_cols = shape
    arr = np.zeros(shape)
    if n_rows >= 2 and n_cols >= 2:
        diag, off = (1.0 + t) / 4.0, (1.0 - t) / 4.0
        arr[:2, :2] = [[diag, off], [off, diag]]
    else:
        arr[:] = 1.0 / (n_rows * n_cols)
    return arr


def _propose(rng: np.random.Generator, state: np.ndarray, scale: float) -> np.ndarray:
    """Dirichlet step centered at the current state.

    Entries below a relative dust floor are zeroed and the matrix is
    renormalized: Dirichlet tails produce subnormal masses that carry no
    probability worth exploring but degrade the conditioning of the exact
    feasibility check.
    """
    alpha = np.maximum(state.ravel(), 1e-4) / max(scale, 1e-9)
    q = rng.dirichlet(alpha).reshape(state.shape)
    q[q < 1e-9 * q.max()] = 0.0
    return q / q.sum()


def _anneal(
    cfg: SearchConfig,
    objective_fn: Callable[[np.ndarray], float],
    restart: int,
    init: np.ndarray,
    on_accept: AcceptHook | None,
) -> tuple[float, np.ndarray, list[tuple[int, float]]]:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(restart,)))
    state = init.copy()
    state_tau = _exact_tau(state)
    if state_tau > cfg.tau_cap:
        raise InvariantViolation(f"initial state infeasible: tau={state_tau!r}")
    state_obj = objective_fn(state)
    best_obj, best_state = state_obj, state.copy()
    trace = [(0, best_obj)]
    temperature = _TEMPERATURE_0
    scale = cfg.step_scale
    streak = 0
    for k in range(cfg.budget):
        proposal = _propose(rng, state, scale)
        tau_p = _exact_tau(proposal)
        if tau_p > cfg.tau_cap:
            accepted = False
        else:
            obj_p = objective_fn(proposal)
            delta = obj_p - state_obj
            accepted = delta >= 0.0 or rng.random() < math.exp(delta / temperature)
            if accepted:
                state, state_obj = proposal, obj_p
                if on_accept is not None:
                    on_accept(proposal, tau_p, obj_p)
                if obj_p > best_obj:
                    best_obj, best_state = obj_p, proposal.copy()
                    trace.append((k + 1, best_obj))
        if accepted:
            streak = 0
        else:
            streak += 1
            if streak >= _REJECT_STREAK:
                scale = max(scale * _SCALE_SHRINK, _SCALE_FLOOR)
                streak = 0
        temperature *= _TEMPERATURE_DECAY
    trace.append((cfg.budget, best_obj))
    return best_obj, best_state, trace


def _feasible_init(cfg: SearchConfig) -> np.ndarray:
    t = cfg.tau_cap
    for _ in range(4):
        init = _sign_pair_embedding(cfg.shape, t)
        if _exact_tau(init) <= cfg.tau_cap:
            return init
        t *= 1.0 - 1e-12  # shave float dust off the embedded level
    raise InvariantViolation("could not construct a feasible initial state")


def search_max_rho(cfg: SearchConfig, on_accept: AcceptHook | None = None) -> SearchResult:
    """Anneal toward max rho over states with exact tau <= tau_cap.

    The initial state embeds a sign-product pair at the cap level, so the
    objective starts at tau_cap.  ``on_accept(state, tau, rho)`` fires on
    every accepted state, which the caller can use to audit feasibility.
    """

    def objective(entries: np.ndarray) -> float:
        return _rho(from_matrix(entries)).value

    init = _feasible_init(cfg)
    outcomes = [
        _anneal(cfg, objective, restart, init, on_accept)
        for restart in range(cfg.restarts)
    ]
    winner = max(range(cfg.restarts), key=lambda i: (outcomes[i][0], -i))
    best_obj, best_state, trace = outcomes[winner]

    best = from_matrix(best_state)
    report = full_report(best, mode="exact")
    bound = (
        tau_sqrt_log_bound(cfg.tau_cap) if cfg.two_atom else tau_log_bound(cfg.tau_cap)
    )
    if best_obj > bound + BOUND_TOL:
        raise InvariantViolation(
            f"objective {best_obj!r} exceeds the theorem bound {bound!r}; "
            "this is an implementation bug"
        )
    if report.tau > cfg.tau_cap + BOUND_TOL:
        raise InvariantViolation(f"best state infeasible: tau={report.tau!r}")
    return SearchResult(
        best=best,
        best_report=report,
        objective=best_obj,
        bound=bound,
        ratio=best_obj / bound if bound > 0.0 else 0.0,
        trace=trace,
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# Tensor gap
# ---------------------------------------------------------------------------


def _threshold_family_bound(M: JointPMF, n: int, grid_cap: int = _GAP_GRID_CAP) -> float:
    """Best |indicator corr| of summed-score threshold events on the n-fold join.

    The score functions are the maximal-correlation witnesses quantized to
    an integer lattice (quantizing only changes which events are scanned,
    so the result stays a valid lower bound for tau of the join).  Returns
    0 when the grid would not fit.
    """
    res = _rho(M)
    if res.value <= 1e-8:
        # near-independent base: the family cannot beat float dust
        return 0.0
    g, h = res.witness
    scale = 64
    while scale >= 1:
        a = np.rint(g * scale).astype(np.int64)
        b = np.rint(h * scale).astype(np.int64)
        size_a = n * int(a.max() - a.min()) + 1
        size_b = n * int(b.max() - b.min()) + 1
        if size_a * size_b <= grid_cap:
            break
        scale //= 2
    else:
        return 0.0
    if a.max() == a.min() or b.max() == b.min():
        return 0.0
    amin, bmin = int(a.min()), int(b.min())
    steps = [
        (int(a[i]) - amin, int(b[j]) - bmin, float(M.entries[i, j]))
        for i in range(M.n_rows)
        for j in range(M.n_cols)
        if M.entries[i, j] > 0.0
    ]
    span_a = int(a.max()) - amin
    span_b = int(b.max()) - bmin
    cur = np.ones((1, 1))
    for k in range(n):
        new = np.zeros((k * span_a + 1 + span_a, k * span_b + 1 + span_b))
        for ia, jb, p in steps:
            new[ia : ia + cur.shape[0], jb : jb + cur.shape[1]] += p * cur
        cur = new
    # survival[i, j] = P(sum_a index >= i, sum_b index >= j); the running
    # cumsum only RANKS candidate threshold pairs -- far-tail cells carry
    # sequential-summation dust, so extreme tails are masked out and the
    # winner is re-evaluated from pairwise block sums, keeping the returned
    # value a sound lower bound.
    survival = np.cumsum(np.cumsum(cur[::-1, ::-1], axis=0), axis=1)[::-1, ::-1]
    pa = survival[:, 0]
    pb = survival[0, :]
    usable = np.outer(
        (pa > 1e-6) & (pa < 1.0 - 1e-6), (pb > 1e-6) & (pb < 1.0 - 1e-6)
    )
    if not usable.any():
        return 0.0
    num = np.abs(survival - np.outer(pa, pb))
    den_sq = np.outer(pa * (1.0 - pa), pb * (1.0 - pb))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(usable & (den_sq > 0.0), num / np.sqrt(np.maximum(den_sq, 0.0)), 0.0)
    i_star, j_star = np.unravel_index(int(np.argmax(corr)), corr.shape)
    q11 = float(cur[i_star:, j_star:].sum())
    qa = float(cur[i_star:, :].sum())
    qb = float(cur[:, j_star:].sum())
    den = math.sqrt(max(qa * (1.0 - qa) * qb * (1.0 - qb), 0.0))
    if den <= 1e-12:
        return 0.0
    return float(min(abs(q11 - qa * qb) / den, 1.0))


def tensor_gap_lower_bound(M: JointPMF, n_max: int = 2) -> float:
    """Certified lower bound on max over 2..n_max of tau(n-fold join) - tau(M).

    Candidates: the embedded single-copy events (gap 0), threshold events
    of summed scores for each join power, and the alternating heuristic on
    the 2-fold join.  Every candidate evaluates actual events, so the
    result never exceeds the true gap.
    """
    if n_max < 2:
        raise OutOfRange(f"n_max must be >= 2, got {n_max}")
    tau_m = _exact_tau(M.entries)
    lower = tau_m  # embedding of a single copy
    for n in range(2, n_max + 1):
        lower = max(lower, _threshold_family_bound(M, n))
    try:
        joined = kron(M, M)
        heur, _ = _heuristic_scan(joined.entries, "tau")
        lower = max(lower, heur)
    except SizeOverflow:  # pragma: no cover - shapes are capped well below
        pass
    return lower - tau_m


def search_tensor_gap(
    cfg: SearchConfig, n_max: int = 2, on_accept: AcceptHook | None = None
) -> SearchResult:
    """Anneal toward max certified tensor gap.

    The reported bound is psi(best) - tau(best): tau of any independent
    join of copies of M is at most max(tau, psi) = psi, so no state can
    have a larger gap.  The objective may be 0 (for example whenever
    psi = tau, as in the sign-product family).
    """

    def objective(entries: np.ndarray) -> float:
        return tensor_gap_lower_bound(from_matrix(entries), n_max=n_max)

    init = _feasible_init(cfg)
    outcomes = [
        _anneal(cfg, objective, restart, init, on_accept)
        for restart in range(cfg.restarts)
    ]
    winner = max(range(cfg.restarts), key=lambda i: (outcomes[i][0], -i))
    best_obj, best_state, trace = outcomes[winner]

    best = from_matrix(best_state)
    report = full_report(best, mode="exact")
    bound = report.psi - report.tau
    if best_obj > bound + BOUND_TOL:
        raise InvariantViolation(
            f"gap {best_obj!r} exceeds psi - tau = {bound!r}; implementation bug"
        )
    return SearchResult(
        best=best,
        best_report=report,
        objective=best_obj,
        bound=bound,
        ratio=best_obj / bound if bound > 1e-12 else 0.0,
        trace=trace,
        seed=cfg.seed,
    )
