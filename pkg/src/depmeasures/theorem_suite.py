"""Inequality and equality checkers over concrete finite instances.

Each checker evaluates both sides of one proved relation between the
dependence measures and records the outcome as data (a CheckResult), never
as an exception: a failing check on a valid instance means an
implementation bug somewhere, and the fuzz harness exists to hunt for
exactly that.  Relations covered:

  * the chain lambda <= tau <= rho <= psi and the doubling tau <= 2*lambda;
  * rho <= tau * sqrt(1 - log tau) when the row field has two atoms;
  * rho <= tau * (1 - log tau) unrestricted;
  * rho of an independent join equals the max of the factor rhos;
  * tau of an independent join is at most max(tau_1, psi_2), with the
    embedding lower bound max(tau_1, tau_2) as a companion.

The join checkers also record (without asserting) the experimental gap
tau(join) - max(tau_1, rho_2), evidence for whether psi can be weakened
to rho in the join upper bound -- an open question.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvariantViolation, OutOfRange, ShapeError, TooLargeForExact
from .joint_pmf import EventPair, JointPMF, kron, kron_all, random_joint
from .measures import (
    DEFAULT_EXACT_CAP_COLS,
    DEFAULT_EXACT_CAP_ROWS,
    DependenceReport,
    full_report,
)

CHAIN_TOL = 1e-9
BOUND_TOL = 1e-9
SPECTRAL_EQ_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one inequality instance: lhs <= rhs within tolerance."""

    check_name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    tolerance: float
    instance_digest: dict
    witness: EventPair | None = None

    def to_jsonable(self) -> dict:
        out = {
            "check_name": self.check_name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "instance_digest": self.instance_digest,
        }
        out["witness"] = self.witness.to_jsonable() if self.witness else None
        return out


@dataclass(frozen=True)
class FuzzReport:
    """Aggregate of a fuzz run: failures are data, not errors."""

    total: int
    failures: list[CheckResult]
    near_sharp: list[CheckResult]
    rng_seed: int

    def to_jsonable(self) -> dict:
        return {
            "total": self.total,
            "failures": [r.to_jsonable() for r in self.failures],
            "near_sharp": [r.to_jsonable() for r in self.near_sharp],
            "rng_seed": self.rng_seed,
        }


def _result(
    name: str,
    lhs: float,
    rhs: float,
    tol: float,
    digest: dict,
    witness: EventPair | None = None,
) -> CheckResult:
    lhs, rhs = float(lhs), float(rhs)
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        raise InvariantViolation(f"{name}: non-finite sides lhs={lhs} rhs={rhs}")
    slack = rhs - lhs
    return CheckResult(
        check_name=name,
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        passed=slack >= -tol,
        tolerance=tol,
        instance_digest=dict(digest),
        witness=witness,
    )


# ---------------------------------------------------------------------------
# Bound functions (0 * (1 - log 0) read as 0)
# ---------------------------------------------------------------------------


def tau_log_bound(t: float) -> float:
    """t * (1 - log t), the unrestricted upper bound for rho at tau = t."""
    if not -1e-12 <= t <= 1.0 + 1e-9:
        raise OutOfRange(f"t must be in [0, 1], got {t!r}")
    if t <= 0.0:
        return 0.0
    return t * (1.0 - math.log(t))


def tau_sqrt_log_bound(t: float) -> float:
    """t * sqrt(1 - log t), the two-atom upper bound for rho at tau = t."""
    if not -1e-12 <= t <= 1.0 + 1e-9:
        raise OutOfRange(f"t must be in [0, 1], got {t!r}")
    if t <= 0.0:
        return 0.0
    return t * math.sqrt(1.0 - math.log(t))


# ---------------------------------------------------------------------------
# Individual checkers
# ---------------------------------------------------------------------------


def _shape_digest(M: JointPMF, **extra) -> dict:
    d = {"shape": [M.n_rows, M.n_cols]}
    d.update(extra)
    return d


def _chain_results(rep: DependenceReport, digest: dict) -> list[CheckResult]:
    return [
        _result("lambda<=tau", rep.lam, rep.tau, CHAIN_TOL, digest, rep.tau_witness),
        _result("tau<=rho", rep.tau, rep.rho, CHAIN_TOL, digest, rep.tau_witness),
        _result("rho<=psi", rep.rho, rep.psi, CHAIN_TOL, digest, rep.psi_witness),
        _result("tau<=2*lambda", rep.tau, 2.0 * rep.lam, CHAIN_TOL, digest, rep.lambda_witness),
    ]


def check_chain(M: JointPMF, digest: dict | None = None) -> list[CheckResult]:
    """The elementary chain and doubling inequalities on one instance."""
    rep = full_report(M, mode="exact")
    return _chain_results(rep, digest or _shape_digest(M))


def _two_atom_result(rep: DependenceReport, digest: dict) -> CheckResult:
    return _result(
        "rho<=tau*sqrt(1-log tau)",
        rep.rho,
        tau_sqrt_log_bound(min(rep.tau, 1.0)),
        BOUND_TOL,
        digest,
        rep.tau_witness,
    )


def check_two_atom_bound(M: JointPMF, digest: dict | None = None) -> CheckResult:
    """Two-atom row field: rho at most tau * sqrt(1 - log tau)."""
    if M.n_rows != 2:
        raise ShapeError(f"two-atom bound needs exactly 2 rows, got {M.n_rows}")
    rep = full_report(M, mode="exact")
    return _two_atom_result(rep, digest or _shape_digest(M))


def _peyre_result(rep: DependenceReport, digest: dict) -> CheckResult:
    return _result(
        "rho<=tau*(1-log tau)",
        rep.rho,
        tau_log_bound(min(rep.tau, 1.0)),
        BOUND_TOL,
        digest,
        rep.tau_witness,
    )


def check_peyre_bound(M: JointPMF, digest: dict | None = None) -> CheckResult:
    """Unrestricted sharp bound: rho at most tau * (1 - log tau)."""
    rep = full_report(M, mode="exact")
    return _peyre_result(rep, digest or _shape_digest(M))


def check_csaki_fischer(
    M1: JointPMF, M2: JointPMF, digest: dict | None = None, rho_tol: float = 1e-10
) -> list[CheckResult]:
    """Independent join: rho(join) equals max(rho_1, rho_2).

    Emitted as two one-sided results at the spectral tolerance; the
    observed deviation stays below it for every rho_tol down to 1e-12.
    """
    from .measures import rho as _rho

    joined = kron(M1, M2)
    r1 = _rho(M1, tol=rho_tol).value
    r2 = _rho(M2, tol=rho_tol).value
    rk = _rho(joined, tol=rho_tol).value
    target = max(r1, r2)
    d = digest or {
        "shape1": [M1.n_rows, M1.n_cols],
        "shape2": [M2.n_rows, M2.n_cols],
    }
    d = dict(d)
    d.update({"rho1": r1, "rho2": r2, "rho_kron": rk})
    return [
        _result("rho(kron)<=max(rho1,rho2)", rk, target, SPECTRAL_EQ_TOL, d),
        _result("rho(kron)>=max(rho1,rho2)", target, rk, SPECTRAL_EQ_TOL, d),
    ]


def check_cousin(
    M1: JointPMF, M2: JointPMF, digest: dict | None = None
) -> list[CheckResult]:
    """Independent join: tau(join) <= max(tau_1, psi_2), plus embedding bound.

    The companion result asserts tau(join) >= max(tau_1, tau_2), which holds
    because each factor's events embed into the join.  The digest records
    the non-asserted gap tau(join) - max(tau_1, rho_2).
    """
    from .measures import rho as _rho

    joined = kron(M1, M2)
    if joined.n_rows > DEFAULT_EXACT_CAP_ROWS or joined.n_cols > DEFAULT_EXACT_CAP_COLS:
        raise TooLargeForExact(
            f"join shape {joined.n_rows}x{joined.n_cols} exceeds exact caps"
        )
    rep1 = full_report(M1, mode="exact")
    rep2 = full_report(M2, mode="exact")
    repk = full_report(joined, mode="exact")
    d = digest or {
        "shape1": [M1.n_rows, M1.n_cols],
        "shape2": [M2.n_rows, M2.n_cols],
    }
    d = dict(d)
    d.update(
        {
            "tau1": rep1.tau,
            "tau2": rep2.tau,
            "psi2": rep2.psi,
            "tau_kron": repk.tau,
            # evidence only: can psi_2 be weakened to rho_2?  not asserted
            "rho_replacement_gap": repk.tau - max(rep1.tau, _rho(M2).value),
        }
    )
    return [
        _result(
            "tau(kron)<=max(tau1,psi2)",
            repk.tau,
            max(rep1.tau, rep2.psi),
            BOUND_TOL,
            d,
            repk.tau_witness,
        ),
        _result(
            "tau(kron)>=max(tau1,tau2)",
            max(rep1.tau, rep2.tau),
            repk.tau,
            BOUND_TOL,
            d,
            repk.tau_witness,
        ),
    ]


def check_cousin_multi(Ms: Sequence[JointPMF], digest: dict | None = None) -> CheckResult:
    """Iterated join: tau(join of all) <= max(tau_1, max over n>=2 of psi_n)."""
    if not Ms:
        raise ShapeError("need at least one factor")
    joined = kron_all(list(Ms))
    if joined.n_rows > DEFAULT_EXACT_CAP_ROWS or joined.n_cols > DEFAULT_EXACT_CAP_COLS:
        raise TooLargeForExact(
            f"join shape {joined.n_rows}x{joined.n_cols} exceeds exact caps"
        )
    reps = [full_report(M, mode="exact") for M in Ms]
    repk = full_report(joined, mode="exact")
    rhs = reps[0].tau
    for rep in reps[1:]:
        rhs = max(rhs, rep.psi)
    d = digest or {"shapes": [[M.n_rows, M.n_cols] for M in Ms]}
    d = dict(d)
    d.update({"tau_join": repk.tau, "bound": rhs})
    return _result(
        "tau(join)<=max(tau1,max psi_n)", repk.tau, rhs, BOUND_TOL, d, repk.tau_witness
    )


# ---------------------------------------------------------------------------
# Fuzz harness
# ---------------------------------------------------------------------------


def fuzz(
    shapes: Sequence[tuple[int, int]],
    styles: Sequence[str],
    count: int,
    seed: int,
    include_pair_checks: bool = True,
    near_sharp_k: int = 10,
) -> FuzzReport:
    """Run every applicable checker on ``count`` generated instances.

    Instances cycle deterministically through the shape x style grid; per
    instance seeds derive from the master seed, so identical arguments give
    identical reports.  Failing results re-embed their matrices in the
    digest for replay.
    """
    shapes = [(int(a), int(b)) for a, b in shapes]
    if not shapes or not styles:
        raise OutOfRange("need at least one shape and one style")
    for n_rows, n_cols in shapes:
        if n_rows > DEFAULT_EXACT_CAP_ROWS or n_cols > DEFAULT_EXACT_CAP_COLS:
            raise TooLargeForExact(f"shape {n_rows}x{n_cols} beyond exact caps")
    master = np.random.default_rng(int(seed))
    inst_seeds = master.integers(0, 2**63 - 1, size=(max(count, 1), 2))

    grid = [(sh, st) for st in styles for sh in shapes]
    results: list[CheckResult] = []
    matrices: list[tuple[int, JointPMF, JointPMF | None]] = []

    for idx in range(count):
        (n_rows, n_cols), style = grid[idx % len(grid)]
        seed_a, seed_b = int(inst_seeds[idx, 0]), int(inst_seeds[idx, 1])
        m_a = random_joint(n_rows, n_cols, seed_a, style)
        digest = {
            "index": idx,
            "shape": [n_rows, n_cols],
            "style": style,
            "seed": seed_a,
        }
        rep = full_report(m_a, mode="exact")
        batch = _chain_results(rep, digest)
        batch.append(_peyre_result(rep, digest))
        if n_rows == 2:
            batch.append(_two_atom_result(rep, digest))
        m_b: JointPMF | None = None
        if include_pair_checks:
            m_b = random_joint(n_rows, n_cols, seed_b, style)
            pair_digest = dict(digest)
            pair_digest["seed2"] = seed_b
            batch.extend(check_csaki_fischer(m_a, m_b, pair_digest))
            if n_rows * n_rows <= DEFAULT_EXACT_CAP_ROWS and n_cols * n_cols <= DEFAULT_EXACT_CAP_COLS:
                batch.extend(check_cousin(m_a, m_b, pair_digest))
        results.extend(batch)
        matrices.append((idx, m_a, m_b))

    by_index = {idx: (m_a, m_b) for idx, m_a, m_b in matrices}
    failures = []
    for res in results:
        if res.passed:
            continue
        m_a, m_b = by_index[res.instance_digest["index"]]
        embedded = dict(res.instance_digest)
        embedded["matrix"] = m_a.to_jsonable()["matrix"]
        if m_b is not None and "seed2" in embedded:
            embedded["matrix2"] = m_b.to_jsonable()["matrix"]
        failures.append(dataclasses.replace(res, instance_digest=embedded))

    names = sorted({res.check_name for res in results})
    near: list[CheckResult] = []
    for name in names:
        group = [res for res in results if res.check_name == name]
        group.sort(key=lambda res: (res.slack, res.instance_digest["index"]))
        near.extend(group[:near_sharp_k])
    near.sort(key=lambda res: (res.slack, res.check_name, res.instance_digest["index"]))

    return FuzzReport(
        total=len(results), failures=failures, near_sharp=near, rng_seed=int(seed)
    )
