"""Monte Carlo estimators for partial stability in probability.

Every estimator works at a finite horizon on the recording grid; the reports
say so in their ``caveat`` field.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyEnsemble
from .integrate import SamplePath, Termination

Z95 = 1.959963984540054
Z99 = 2.5758293035489004


def wilson_interval(successes: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise EmptyEnsemble("no trials")
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def _caveat(paths: Sequence[SamplePath]) -> str:
    res = paths[0].resolution
    return (
        f"finite-horizon proxy: suprema and limits are taken over t <= {paths[0].t_final:g} s "
        f"on the recording grid (resolution {res:g} s); sub-grid crossings are not seen"
    )


def _ordered(paths):
    if not paths:
        raise EmptyEnsemble("empty ensemble")
    return sorted(paths, key=lambda p: p.path_index)


def _max_y_norm(path: SamplePath) -> float:
    yn = np.where(np.isfinite(path.y_norms), path.y_norms, np.inf)
    return float(np.max(yn))


@dataclass
class ProportionEstimate:
    p_hat: float
    ci: tuple
    count: int
    n: int
    caveat: str = ""
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["ci"] = list(self.ci)
        return d


def estimate_exceedance(paths, eps: float, z: float = Z95) -> ProportionEstimate:
    """Fraction of paths whose recorded ||y|| ever exceeds ``eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    paths = _ordered(paths)
    count = sum(_max_y_norm(p) > eps for p in paths)
    n = len(paths)
    return ProportionEstimate(count / n, wilson_interval(count, n, z), count, n, _caveat(paths), {"eps": eps})


def converged(path: SamplePath, tol: float, t_tail: float) -> bool:
    if path.termination != Termination.COMPLETED:
        return False
    window = path.times >= path.t_final - t_tail - 1e-12 * path.t_final
    return bool(np.all(path.y_norms[window] < tol))


def estimate_convergence(paths, tol: float, t_tail: float, z: float = Z95) -> ProportionEstimate:
    """Fraction of paths with ||y|| < tol throughout the last ``t_tail`` seconds.

    Paths that stopped early (domain exit or blowup) count as not converged.
    """
    paths = _ordered(paths)
    if not 0 < t_tail < paths[0].t_final:
        raise ValueError("t_tail must lie in (0, t_final)")
    count = sum(converged(p, tol, t_tail) for p in paths)
    n = len(paths)
    return ProportionEstimate(
        count / n, wilson_interval(count, n, z), count, n, _caveat(paths), {"tol": tol, "t_tail": t_tail}
    )


@dataclass
class SupermartingaleReport:
    times: np.ndarray
    mean_v: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    v0: float
    flagged_times: list
    n: int
    stopped: int
    censored: int
    eps_stop: float
    confidence: float
    caveat: str = ""

    @property
    def passed(self) -> bool:
        return not self.flagged_times

    def to_dict(self):
        return {
            "passed": self.passed,
            "v0": self.v0,
            "flagged_times": self.flagged_times,
            "n": self.n,
            "stopped": self.stopped,
            "censored": self.censored,
            "eps_stop": self.eps_stop,
            "confidence": self.confidence,
            "max_mean_v": float(np.max(self.mean_v)),
            "caveat": self.caveat,
        }


def _ffill(v):
    v = np.array(v, dtype=float)
    for i in range(1, len(v)):
        if not np.isfinite(v[i]):
            v[i] = v[i - 1]
    return v


def stopped_values(path: SamplePath, v: np.ndarray, eps_stop: float, n_grid: int) -> np.ndarray:
    """V(x(min(tau_eps, t))) on the first ``n_grid`` grid points.

    tau_eps is the first recorded time with ||y|| > eps_stop. A path that ends
    before the grid does is held at its last value.
    """
    over = ~(path.y_norms <= eps_stop)
    tau = int(np.argmax(over)) if np.any(over) else len(v) - 1
    idx = np.minimum(np.arange(n_grid), min(tau, len(v) - 1))
    return _ffill(v)[idx]


def supermartingale_check(paths, clf=None, eps_stop: float = 1.0, confidence: float = 0.99) -> SupermartingaleReport:
    """Check E V(x(tau_eps ^ t)) <= V(xi) along the recording grid.

    Flags every grid time where the lower end of the normal-theory interval
    for the mean stopped V lies above V(xi). All paths must start from the
    same state. V is re-evaluated with ``clf`` when given, otherwise the
    recorded values are used.
    """
    paths = _ordered(paths)
    x0 = paths[0].states[0]
    if any(not np.array_equal(p.states[0], x0) for p in paths):
        raise ValueError("supermartingale_check needs a common initial state")
    z = {0.95: Z95, 0.99: Z99}.get(confidence)
    if z is None:
        from scipy.stats import norm

        z = float(norm.ppf(0.5 + confidence / 2))
    grid_path = max(paths, key=lambda p: len(p.times))
    times = grid_path.times
    rows = []
    for p in paths:
        with np.errstate(all="ignore"):
            v = np.asarray(clf.value(p.states), dtype=float) if clf is not None else p.v_values
        rows.append(stopped_values(p, v, eps_stop, len(times)))
    values = np.vstack(rows)
    v0 = float(values[0, 0])
    n = len(paths)
    mean = values.mean(axis=0)
    half = z * values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    low, high = mean - half, mean + half
    slack = 1e-12 * max(1.0, abs(v0))
    flagged = [float(t) for t, lo in zip(times, low) if lo > v0 + slack]
    stopped = sum(bool(np.any(~(p.y_norms <= eps_stop))) for p in paths)
    censored = sum(p.termination != Termination.COMPLETED for p in paths)
    return SupermartingaleReport(
        times, mean, low, high, v0, flagged, n, stopped, censored, eps_stop, confidence, _caveat(paths)
    )


@dataclass
class DissipationReport:
    worst_slack: float
    worst_state: np.ndarray
    n: int
    tol: float
    branch_counts: dict

    @property
    def passed(self) -> bool:
        return self.worst_slack <= self.tol

    def to_dict(self):
        return {
            "passed": self.passed,
            "worst_slack": self.worst_slack,
            "worst_state": self.worst_state.tolist(),
            "n": self.n,
            "tol": self.tol,
            "branch_counts": self.branch_counts,
        }


def dissipation_scan(
    system, clf, sampler, N: int, seed: int = 0, controller=None, tol: float = 1e-9, batch: int = 50_000
) -> DissipationReport:
    """Worst value of L_h V + alpha(||y||)/2 over ``N`` sampled states.

    ``controller`` defaults to the Sontag law for ``clf``. Supplying a
    controller built for a different comparison rate than ``clf`` tests a
    dissipation claim the controller was not designed for.
    """
    from .sontag import Branch, SontagController

    if N < 1:
        raise ValueError("N must be at least 1")
    controller = controller or SontagController(system, clf)
    rng = np.random.default_rng(seed)
    x = np.asarray(sampler(rng, N), dtype=float)
    worst, worst_state = -np.inf, x[0]
    counts = np.zeros(3, dtype=int)
    for start in range(0, len(x), batch):
        xb = x[start : start + batch]
        fb = controller(xb)
        slack = fb.lhv + 0.5 * clf.alpha(system.partition.y_norm(xb))
        i = int(np.argmax(slack))
        if slack[i] > worst:
            worst, worst_state = float(slack[i]), xb[i]
        counts += np.bincount(np.asarray(fb.branch, dtype=int), minlength=3)[:3]
    names = {b.name: int(counts[b.value]) for b in Branch}
    return DissipationReport(worst, np.array(worst_state), len(x), tol, names)


@dataclass
class EnsembleStats:
    N: int
    exceedance_count: int
    eps: float
    terminal_y_norms: np.ndarray
    mean_v_trajectory: np.ndarray
    completed: int
    exited: int
    blowups: int

    def to_dict(self):
        return {
            "N": self.N,
            "eps": self.eps,
            "exceedance_count": self.exceedance_count,
            "completed": self.completed,
            "exited": self.exited,
            "blowups": self.blowups,
            "terminal_y_norm_median": float(np.median(self.terminal_y_norms)),
            "terminal_y_norm_max": float(np.max(self.terminal_y_norms)),
        }


def ensemble_stats(paths, eps: float) -> EnsembleStats:
    paths = _ordered(paths)
    grid = max(len(p.times) for p in paths)
    v = np.vstack([_ffill(p.v_values)[np.minimum(np.arange(grid), len(p.v_values) - 1)] for p in paths])
    term = [p.termination for p in paths]
    return EnsembleStats(
        N=len(paths),
        exceedance_count=sum(_max_y_norm(p) > eps for p in paths),
        eps=eps,
        terminal_y_norms=np.array([p.y_norms[-1] for p in paths]),
        mean_v_trajectory=v.mean(axis=0),
        completed=term.count(Termination.COMPLETED),
        exited=term.count(Termination.EXITED_DOMAIN),
        blowups=term.count(Termination.BLOWUP),
    )
