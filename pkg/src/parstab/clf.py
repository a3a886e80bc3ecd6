"""Stochastic control Lyapunov functions with respect to a part of the state.

The central quantities are the two pieces of the generator applied to V,

    a(x) = grad V . f  +  1/2 sum_ij c_ij d2V/dx_i dx_j,   c = sigma sigma^T
    b(x) = g^T grad V

so that L_u V = a + b . u whenever the control enters affinely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import StochasticControlSystem, _as_array
from .errors import ControlNoiseLeak, IndefiniteClf, NumericalBlowup

Array = np.ndarray


@dataclass(frozen=True)
class Clf:
    """V with analytic first and second derivatives and alpha(s) = rate * s**2.

    ``quadratic_form`` is set for CLFs of the form 1/2 y^T P y; it enables an
    exact definiteness test in place of sampling.
    """

    value: Callable[[Array], Array]
    gradient: Callable[[Array], Array]
    hessian: Callable[[Array], Array]
    comparison_rate: float
    quadratic_form: Optional[Array] = None
    name: str = "V"

    def __post_init__(self):
        if not self.comparison_rate > 0:
            raise ValueError("comparison_rate must be positive")

    def alpha(self, y_norm):
        return self.comparison_rate * np.asarray(y_norm, dtype=float) ** 2

    def with_rate(self, rate: float) -> "Clf":
        return Clf(self.value, self.gradient, self.hessian, rate, self.quadratic_form, self.name)

    def definiteness(self):
        """Eigenvalues of the quadratic form, or None for non-quadratic V."""
        if self.quadratic_form is None:
            return None
        return np.linalg.eigvalsh(np.asarray(self.quadratic_form, dtype=float))

    def require_definite(self):
        eig = self.definiteness()
        if eig is not None and not eig[0] > 0:
            raise IndefiniteClf(
                f"{self.name}: quadratic form is not positive definite (eigenvalues {eig})"
            )


@dataclass(frozen=True)
class GeneratorPair:
    a: Array
    b: Array

    def lie(self, u) -> Array:
        """a + b . u"""
        return self.a + np.sum(self.b * np.asarray(u), axis=-1)


def check_noise_leak(system: StochasticControlSystem, grad, hess):
    rows = list(system.control_dependent_rows)
    if not rows:
        return
    if np.any(grad[..., rows] != 0):
        raise ControlNoiseLeak(
            f"{system.name}: grad V is nonzero on control-dependent rows {rows}"
        )
    if np.any(hess[..., rows, :] != 0) or np.any(hess[..., :, rows] != 0):
        raise ControlNoiseLeak(
            f"{system.name}: Hessian of V is nonzero on control-dependent rows {rows}"
        )


def generator_pair(system: StochasticControlSystem, clf: Clf, x) -> GeneratorPair:
    """a(x) and b(x) for a single state or a batch of states.

    The trace term uses the diffusion at zero control; rows where the noise
    (or the drift) depends on the control must meet zero derivatives of V,
    otherwise :class:`ControlNoiseLeak` is raised.
    """
    x = _as_array(x)
    grad = np.asarray(clf.gradient(x), dtype=float)
    hess = np.asarray(clf.hessian(x), dtype=float)
    check_noise_leak(system, grad, hess)
    f = system.drift(x)
    g = system.input(x)
    sigma = system.diffusion(x, system.zero_control(x))
    # 1/2 sum_l sigma_l^T H sigma_l == 1/2 sum_ij (sigma sigma^T)_ij H_ij
    trace = 0.5 * np.einsum("...il,...ij,...jl->...", sigma, hess, sigma)
    a = np.sum(grad * f, axis=-1) + trace
    b = np.einsum("...ij,...i->...j", g, grad)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NumericalBlowup("non-finite generator pair")
    return GeneratorPair(a, b)


@dataclass
class SclfReport:
    """Outcome of :func:`check_sclf`; every violation list holds sample indices."""

    n_samples: int
    lower_violations: list = field(default_factory=list)
    upper_violations: list = field(default_factory=list)
    dissipation_violations: list = field(default_factory=list)
    envelope_radii: Optional[Array] = None
    envelope_values: Optional[Array] = None
    eigenvalues: Optional[Array] = None
    worst_dissipation_slack: float = float("-inf")

    @property
    def passed(self) -> bool:
        definite = self.eigenvalues is None or bool(self.eigenvalues[0] > 0)
        return definite and not (
            self.lower_violations or self.upper_violations or self.dissipation_violations
        )

    def to_dict(self):
        return {
            "passed": self.passed,
            "n_samples": self.n_samples,
            "lower_violations": len(self.lower_violations),
            "upper_violations": len(self.upper_violations),
            "dissipation_violations": len(self.dissipation_violations),
            "worst_dissipation_slack": self.worst_dissipation_slack,
            "eigenvalues": None if self.eigenvalues is None else self.eigenvalues.tolist(),
        }


def monotone_envelope(radii, values):
    """Running maximum of ``values`` over increasing ``radii`` (an empirical beta_2)."""
    order = np.argsort(radii, kind="stable")
    return np.asarray(radii)[order], np.maximum.accumulate(np.asarray(values)[order])


def check_sclf(system, clf, sampler, N, seed=0, tol=1e-9, tol_b=1e-12) -> SclfReport:
    """Sample-based check of the y-SCLF conditions.

    For each sampled state: V must be positive when y != 0, V must vanish when
    the y-part is zeroed (so a class-K upper envelope can exist), and the
    Sontag control must achieve L_h V <= -alpha/2 up to ``tol``.
    """
    from .sontag import SontagController

    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(seed)
    x = np.asarray(sampler(rng, N), dtype=float)
    part = system.partition
    yn = part.y_norm(x)
    v = np.asarray(clf.value(x), dtype=float)

    report = SclfReport(n_samples=len(x), eigenvalues=clf.definiteness())
    report.lower_violations = np.flatnonzero((yn > 0) & ~(v > 0)).tolist()

    x_proj = x.copy()
    x_proj[:, list(part.y_indices)] = 0.0
    v_proj = np.asarray(clf.value(x_proj), dtype=float)
    report.upper_violations = np.flatnonzero(~np.isfinite(v) | (np.abs(v_proj) > tol)).tolist()
    report.envelope_radii, report.envelope_values = monotone_envelope(yn, v)

    fb = SontagController(system, clf, tol_b=tol_b)(x)
    slack = fb.lhv + 0.5 * clf.alpha(yn)
    report.worst_dissipation_slack = float(np.max(slack))
    report.dissipation_violations = np.flatnonzero(slack > tol).tolist()
    return report


def sample_ball(rng, center, radius, count):
    """Uniform samples from the Euclidean ball of ``radius`` around ``center``."""
    center = np.asarray(center, dtype=float)
    d = rng.standard_normal((count, center.size))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / center.size)
    return center + d * r[:, None]


@dataclass
class SmallControlResult:
    outcome: str  # "satisfied", "violated" or "inconclusive"
    radii: tuple
    max_control_norms: tuple

    def __bool__(self):
        return self.outcome == "satisfied"


def check_small_control(
    clf, system, x0, eps, radii=(1e-1, 1e-2, 1e-3, 1e-4), samples=256, seed=0, tol_b=1e-12
) -> SmallControlResult:
    """Empirical small-control check around a point of the manifold y = 0.

    The largest Sontag control norm is measured over uniform samples of each
    ball B(x0, delta). The property is taken to hold when that maximum shrinks
    with delta and ends below ``eps``; a non-monotone trend is inconclusive.
    This is a necessary-condition probe, not a proof.
    """
    from .sontag import SontagController

    x0 = np.asarray(x0, dtype=float)
    if np.any(system.partition.y(x0) != 0):
        raise ValueError("x0 must lie on the manifold y = 0")
    rng = np.random.default_rng(seed)
    ctrl = SontagController(system, clf, tol_b=tol_b)
    radii = tuple(sorted(radii, reverse=True))
    norms = []
    for delta in radii:
        x = sample_ball(rng, x0, delta, samples)
        u = ctrl(x).u
        norms.append(float(np.max(np.linalg.norm(u, axis=-1))))
    monotone = all(b <= a * (1 + 1e-9) for a, b in zip(norms, norms[1:]))
    if not monotone:
        outcome = "inconclusive"
    elif norms[-1] < eps:
        outcome = "satisfied"
    else:
        outcome = "violated"
    return SmallControlResult(outcome, radii, tuple(norms))
