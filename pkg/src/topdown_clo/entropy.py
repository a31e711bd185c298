"""Maximum entropy and minimum cross-entropy distributions on a finite set.

Both problems are solved through the exponential-family dual. For a
reference measure ``w`` (uniform for maximum entropy, the prior for cross
entropy), coefficient rows ``c_k`` and targets ``b_k``, the solution is

    p_i = w_i exp(sum_k lam_k c_ki) / Z(lam)

where ``lam`` minimises the smooth convex dual

    g(lam) = log sum_i w_i exp(sum_k lam_k c_ki) - sum_k lam_k b_k
             + sum_{k soft} lam_k**2 / (2 weight_k).

The gradient of ``g`` is the constraint residual (plus the soft-penalty
term) and its Hessian is the covariance of the coefficients under ``p``,
so Newton's method converges in a handful of iterations for the small
problems this package deals with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp, xlogy
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    InfeasibleTarget,
    NonConvergence,
    PriorSupportConflict,
    ValidationError,
)

__all__ = [
    "ConstraintSpec",
    "MISD",
    "SolverSettings",
    "SolveDiagnostics",
    "solve_maxent",
    "solve_min_cross_entropy",
    "entropy",
    "kl_divergence",
    "MaxEntropyDistribution",
    "MinCrossEntropyDistribution",
]

_ARMIJO = 1e-4
_MIN_STEP = 2.0**-40
_NEWTON_REGION = 1e-6  # gradient size below which full Newton steps are taken unchecked
_MAX_STEP = 20.0  # largest multiplier move per iteration, equilibrated units


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """Linear expectation constraint ``sum_i p_i * coefficients[i] == target``.

    ``weight`` turns the constraint into a quadratic penalty of that weight
    (in scaled units); ``None`` defers to :class:`SolverSettings.mode`.
    """

    coefficients: np.ndarray
    target: float
    name: str = ""
    weight: float | None = None

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValidationError(f"constraint {self.name!r}: coefficients must be a non-empty vector")
        if not np.all(np.isfinite(c)):
            raise ValidationError(f"constraint {self.name!r}: non-finite coefficients")
        if not np.isfinite(self.target):
            raise ValidationError(f"constraint {self.name!r}: target must be finite")
        if self.weight is not None and not self.weight > 0:
            raise ValidationError(f"constraint {self.name!r}: soft weight must be > 0")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "target", float(self.target))

    def scaled(self, factor: float) -> "ConstraintSpec":
        return ConstraintSpec(self.coefficients * factor, self.target * factor, self.name, self.weight)


@dataclass(frozen=True, eq=False)
class MISD:
    """Market implied scenario distribution: a probability vector over scenarios."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("MISD weights must be a non-empty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("MISD weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"MISD weights sum to {w.sum()!r}, not 1")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "MISD":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, i: int) -> "MISD":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w)

    def __len__(self) -> int:
        return self.weights.size

    def expectation(self, values) -> np.ndarray:
        """Expectation of a per-scenario vector, or of each column of a matrix."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.weights.size:
            raise ValidationError(
                f"values have {values.shape[0]} rows, distribution has {self.weights.size}"
            )
        return self.weights @ values

    def entropy(self) -> float:
        return entropy(self.weights)

    def divergence(self, prior: "MISD") -> float:
        return kl_divergence(self.weights, prior.weights)


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    return float(-np.sum(xlogy(p, p)))


def kl_divergence(q, p) -> float:
    """``sum q log(q/p)``; infinite when ``q`` is not absolutely continuous w.r.t. ``p``."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any((q > 0) & (p <= 0)):
        return float("inf")
    mask = q > 0
    return float(np.sum(q[mask] * (np.log(q[mask]) - np.log(p[mask]))))


@dataclass(frozen=True)
class SolverSettings:
    """Numerical settings shared by both solvers.

    ``residual_tol`` applies to constraints after division by ``scale``
    (100 turns points into fractions of par). ``mode="soft"`` converts every
    constraint without its own weight into a penalty of ``soft_weight``.
    """

    residual_tol: float = 1e-8
    max_iterations: int = 500
    scale: float = 100.0
    mode: str = "hard"
    soft_weight: float | None = None
    multiplier_cap: float = 1e4
    stall_limit: int = 20

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValidationError("residual_tol must be > 0")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not self.scale > 0:
            raise ValidationError("scale must be > 0")
        if self.mode not in ("hard", "soft"):
            raise ValidationError(f"mode must be 'hard' or 'soft', got {self.mode!r}")
        if self.mode == "soft" and not (self.soft_weight is not None and self.soft_weight > 0):
            raise ValidationError("soft mode needs a positive soft_weight")


@dataclass(frozen=True)
class SolveDiagnostics:
    multipliers: tuple[float, ...]
    residuals: tuple[float, ...]
    iterations: int
    objective: float
    feasible: bool
    kind: str
    constraint_names: tuple[str, ...] = ()
    rank_deficient: bool = False
    soft: tuple[bool, ...] = ()
    hessian_min_eigenvalues: tuple[float, ...] = field(default=(), repr=False)

    @property
    def max_abs_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "constraint_names": list(self.constraint_names),
            "multipliers": list(self.multipliers),
            "residuals": list(self.residuals),
            "soft": list(self.soft),
            "iterations": self.iterations,
            "objective": self.objective,
            "feasible": self.feasible,
            "rank_deficient": self.rank_deficient,
            "hessian_min_eigenvalue": min(self.hessian_min_eigenvalues, default=None),
        }


def _lp_feasible(C: np.ndarray, b: np.ndarray) -> bool:
    n = C.shape[1]
    A_eq = np.vstack([C, np.ones((1, n))])
    b_eq = np.concatenate([b, [1.0]])
    res = linprog(np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def _dual_newton(log_w, C, b, inv_w, tol, settings: SolverSettings):
    """Minimise the dual. Returns (lam, p, iterations, rank_deficient, min_eigs).

    ``tol`` holds one gradient tolerance per row. Raises InfeasibleTarget /
    NonConvergence with the last residuals attached.
    """
    K = C.shape[0]
    lam = np.zeros(K)
    min_eigs: list[float] = []
    rank_deficient = False
    stalls = 0

    def dual(lam_):
        z = log_w + lam_ @ C
        lz = logsumexp(z)
        return lz - lam_ @ b + 0.5 * np.sum(inv_w * lam_ * lam_), z, lz

    f, z, lz = dual(lam)
    for it in range(settings.max_iterations + 1):
        p = np.exp(z - lz)
        m = C @ p
        r = m - b
        g = r + inv_w * lam
        if K == 0 or np.all(np.abs(g) <= tol):
            return lam, p, it, rank_deficient, min_eigs
        if it == settings.max_iterations:
            break

        Cc = C - m[:, None]
        H = (Cc * p) @ Cc.T + np.diag(inv_w)
        eigs = np.linalg.eigvalsh(H)
        min_eigs.append(float(eigs[0]))
        if eigs[0] <= 1e-13 * eigs[-1]:
            rank_deficient = rank_deficient or K > 1
            step = np.linalg.pinv(H, rcond=1e-12, hermitian=True) @ g
        else:
            step = np.linalg.solve(H, g)
        # far from the solution the Hessian can be vanishingly flat
        big = np.max(np.abs(step)) if K else 0.0
        if big > _MAX_STEP:
            step = step * (_MAX_STEP / big)
        slope = g @ step
        if not slope > 0:
            step, slope = g, g @ g

        gnorm = np.max(np.abs(g))
        t = 1.0
        accepted = False
        while t >= _MIN_STEP:
            cand = lam - t * step
            f_new, z_new, lz_new = dual(cand)
            if np.isfinite(f_new) and (
                f_new <= f - _ARMIJO * t * slope or (gnorm < _NEWTON_REGION and t == 1.0)
            ):
                accepted = True
                break
            t *= 0.5
        if not accepted and step is not g:
            # gradient-descent fallback
            step, slope, t = g, g @ g, 1.0
            while t >= _MIN_STEP:
                cand = lam - t * step
                f_new, z_new, lz_new = dual(cand)
                if np.isfinite(f_new) and f_new <= f - _ARMIJO * t * slope:
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            stalls += 1
            if stalls >= settings.stall_limit:
                raise InfeasibleTarget(
                    f"line search stalled {stalls} consecutive iterations",
                    residuals=r, multipliers=lam, iterations=it,
                )
            continue
        stalls = 0
        lam, f, z, lz = cand, f_new, z_new, lz_new
        if np.max(np.abs(lam)) > settings.multiplier_cap:
            p = np.exp(z - lz)
            raise InfeasibleTarget(
                f"multipliers diverged (|lam|_inf > {settings.multiplier_cap:g}); "
                "targets look unreachable",
                residuals=C @ p - b, multipliers=lam, iterations=it + 1,
            )
    raise NonConvergence(
        f"no convergence in {settings.max_iterations} iterations "
        f"(max residual {np.max(np.abs(r)):.3e})",
        residuals=r, multipliers=lam, iterations=settings.max_iterations,
    )


def _solve(reference: np.ndarray, constraints: Sequence[ConstraintSpec], settings: SolverSettings, kind: str):
    n = reference.size
    for c in constraints:
        if c.coefficients.size != n:
            raise ValidationError(
                f"constraint {c.name!r} has {c.coefficients.size} coefficients, expected {n}"
            )
    names = tuple(c.name for c in constraints)
    support = reference > 0
    log_w = np.log(reference[support])
    scale = settings.scale
    C_full = np.array([c.coefficients / scale for c in constraints]).reshape(len(constraints), n)
    b = np.array([c.target / scale for c in constraints])
    C = C_full[:, support]

    weights = []
    for c in constraints:
        w = c.weight if c.weight is not None else (settings.soft_weight if settings.mode == "soft" else None)
        weights.append(w)
    soft = tuple(w is not None for w in weights)
    inv_w = np.array([0.0 if w is None else 1.0 / w for w in weights])

    # Rows are equilibrated to unit max coefficient so that rescaling a
    # constraint changes neither the Newton path nor the divergence test.
    # Tolerances, penalties and reported multipliers stay in scaled units.
    row = np.abs(C).max(axis=1) if C.size else np.ones(len(constraints))
    row = np.where(row > 0, row, 1.0)

    def classify(exc):
        # distinguish "unreachable on the prior's support" from "unreachable at all"
        hard = ~np.array(soft, dtype=bool)
        if kind == "cross_entropy" and not support.all() and hard.any():
            if not _lp_feasible(C[hard], b[hard]) and _lp_feasible(C_full[hard], b[hard]):
                return PriorSupportConflict(
                    "constraints are reachable only by putting mass where the prior has none",
                    residuals=exc.residuals, multipliers=exc.multipliers, iterations=exc.iterations,
                )
        return exc

    # quick certificate: a hard target outside the range of its own coefficients
    for k, c in enumerate(constraints):
        if soft[k]:
            continue
        lo, hi = C[k].min(), C[k].max()
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        if b[k] < lo - slack or b[k] > hi + slack:
            resid = np.zeros(len(constraints))
            resid[k] = (np.clip(b[k], lo, hi) - b[k]) * scale
            raise classify(
                InfeasibleTarget(
                    f"target {c.target!r} of {c.name or k!r} outside attainable range "
                    f"[{lo * scale:g}, {hi * scale:g}]",
                    residuals=resid,
                )
            )

    try:
        lam, p_s, iters, rank_def, min_eigs = _dual_newton(
            log_w, C / row[:, None], b / row, inv_w / row**2, settings.residual_tol / row, settings
        )
    except (InfeasibleTarget, NonConvergence) as exc:
        exc.residuals = exc.residuals * row * scale
        exc.multipliers = exc.multipliers / row
        hard = ~np.array(soft, dtype=bool)
        if isinstance(exc, NonConvergence) and hard.any() and not _lp_feasible(C[hard], b[hard]):
            # slow divergence: the LP certifies that no distribution fits
            exc = InfeasibleTarget(
                f"no distribution on the support satisfies the hard constraints ({exc})",
                residuals=exc.residuals, multipliers=exc.multipliers, iterations=exc.iterations,
            )
        if isinstance(exc, InfeasibleTarget):
            raise classify(exc) from None
        raise
    lam = lam / row

    p = np.zeros(n)
    p[support] = p_s
    p /= p.sum()
    residuals = C_full @ p - b
    hard_res = residuals[~np.array(soft, dtype=bool)] if constraints else residuals
    feasible = bool(np.all(np.abs(hard_res) <= settings.residual_tol))
    objective = entropy(p) if kind == "maxent" else kl_divergence(p, reference)
    diag = SolveDiagnostics(
        multipliers=tuple(float(x) for x in lam),
        residuals=tuple(float(x) for x in residuals * scale),
        iterations=iters,
        objective=objective,
        feasible=feasible,
        kind=kind,
        constraint_names=names,
        rank_deficient=rank_def,
        soft=soft,
        hessian_min_eigenvalues=tuple(min_eigs),
    )
    return MISD(p), diag


def solve_maxent(constraints: Sequence[ConstraintSpec], n: int, settings: SolverSettings | None = None):
    """Maximum-entropy distribution on ``n`` scenarios matching ``constraints``.

    Returns ``(MISD, SolveDiagnostics)``. Residuals in the diagnostics are in
    the constraints' own units; multipliers are in scaled units.
    """
    if n < 1:
        raise ValidationError("need at least one scenario")
    settings = settings or SolverSettings()
    return _solve(np.full(n, 1.0 / n), list(constraints), settings, "maxent")


def solve_min_cross_entropy(
    prior: MISD, constraints: Sequence[ConstraintSpec], settings: SolverSettings | None = None
):
    """Distribution closest to ``prior`` in KL divergence that satisfies ``constraints``.

    Scenarios with zero prior weight stay at zero.
    """
    settings = settings or SolverSettings()
    return _solve(np.asarray(prior.weights), list(constraints), settings, "cross_entropy")


class MaxEntropyDistribution(BaseEstimator):
    """Estimator wrapper around :func:`solve_maxent`.

    Parameters
    ----------
    residual_tol, max_iter, scale, mode, soft_weight
        Forwarded to :class:`SolverSettings`.

    Notes
    -----
    ``fit(X, y)`` takes the scenario-by-constraint coefficient matrix ``X``
    (one row per scenario) and the vector of targets ``y``. ``predict(X)``
    returns the expectation of each column of ``X`` under the fitted
    distribution, which is how tranche prices are read off a PV matrix.

    Attributes
    ----------
    weights_ : ndarray of shape (n_scenarios,)
    multipliers_ : ndarray of shape (n_constraints,)
    diagnostics_ : SolveDiagnostics
    """

    def __init__(self, residual_tol=1e-8, max_iter=500, scale=100.0, mode="hard", soft_weight=None):
        self.residual_tol = residual_tol
        self.max_iter = max_iter
        self.scale = scale
        self.mode = mode
        self.soft_weight = soft_weight

    def _settings(self) -> SolverSettings:
        return SolverSettings(
            residual_tol=self.residual_tol,
            max_iterations=self.max_iter,
            scale=self.scale,
            mode=self.mode,
            soft_weight=self.soft_weight,
        )

    def _constraints(self, X, y):
        X = check_array(X, ensure_min_features=0)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (X.shape[1],):
            raise ValueError(f"y has shape {y.shape}, expected ({X.shape[1]},)")
        return X, [ConstraintSpec(X[:, k], y[k], name=str(k)) for k in range(X.shape[1])]

    def _store(self, misd, diag, n_features):
        self.weights_ = misd.weights
        self.multipliers_ = np.array(diag.multipliers)
        self.diagnostics_ = diag
        self.n_features_in_ = n_features
        return self

    def fit(self, X, y):
        X, cons = self._constraints(X, y)
        misd, diag = solve_maxent(cons, X.shape[0], self._settings())
        return self._store(misd, diag, X.shape[1])

    @property
    def misd_(self) -> MISD:
        check_is_fitted(self, "weights_")
        return MISD(self.weights_)

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, ensure_2d=False)
        if X.shape[0] != self.weights_.size:
            raise ValueError(f"X has {X.shape[0]} rows, fitted on {self.weights_.size} scenarios")
        return self.weights_ @ X


class MinCrossEntropyDistribution(MaxEntropyDistribution):
    """Estimator wrapper around :func:`solve_min_cross_entropy`.

    ``prior`` is a probability vector (or :class:`MISD`) over the scenarios;
    ``None`` means uniform, in which case the fit equals maximum entropy.
    """

    def __init__(self, prior=None, residual_tol=1e-8, max_iter=500, scale=100.0, mode="hard", soft_weight=None):
        super().__init__(residual_tol, max_iter, scale, mode, soft_weight)
        self.prior = prior

    def fit(self, X, y):
        X, cons = self._constraints(X, y)
        if self.prior is None:
            prior = MISD.uniform(X.shape[0])
        elif isinstance(self.prior, MISD):
            prior = self.prior
        else:
            prior = MISD(self.prior)
        if len(prior) != X.shape[0]:
            raise ValueError(f"prior has {len(prior)} scenarios, X has {X.shape[0]} rows")
        misd, diag = solve_min_cross_entropy(prior, cons, self._settings())
        return self._store(misd, diag, X.shape[1])
