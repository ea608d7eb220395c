"""Fit the barrier lines of the max-priority embedding to a target law.

Mass shared by start and target is stopped at time zero.  The extreme target
atoms are caught by a full v-line at the top and a full h-line at the
bottom.  Every interior target atom ``z`` gets one parameter
``theta in [0, 2]``:

* ``theta <= 1``: a v-line at ``z`` reaching down ``theta`` of the way to
  the lowest atom;
* ``theta > 1``: that v-line at full depth plus an h-line at ``z`` reaching
  ``theta - 1`` of the way to the highest atom.

The barrier grows with ``theta``, so the mass stopped at ``z`` increases in
its own parameter and can only decrease when any other parameter grows.
Starting from ``theta = 0`` and solving one coordinate at a time therefore
increases every coordinate monotonically towards the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .barriers import VhBarrier
from .engine import StoppedLaw, exact_stopped_law
from .errors import ConvexOrderViolated, NoProgress
from .measures import DiscreteMeasure, TOL, convex_order, example_pair, meet, tv_distance
from .rules import Perkins

MAX_ITER = 10_000
_XTOL = 1e-15


@dataclass(frozen=True)
class CalibrationResult:
    rule: Perkins
    residual_tv: float
    iterations: int
    certificate: StoppedLaw
    params: tuple[float, ...] = ()

    def to_json(self) -> dict:
        from .rules import rule_to_json

        return {
            "rule": rule_to_json(self.rule),
            "residual_tv": self.residual_tv,
            "iterations": self.iterations,
            "certificate": self.certificate.to_json(),
        }


class _Problem:
    """Barrier family and stopped-mass evaluator for one instance."""

    def __init__(self, lam: DiscreteMeasure, mu: DiscreteMeasure):
        self.lam, self.mu = lam, mu
        self.nu = meet(lam, mu)
        self.lo, self.hi = mu.locations[0], mu.locations[-1]
        self.levels = mu.locations[1:-1]
        self.targets = np.array([mu.mass_at(z) for z in self.levels])
        self.evaluations = 0

    @property
    def trivial(self) -> bool:
        return self.lam.minus(self.nu).is_empty()

    def barrier(self, theta) -> VhBarrier:
        v = [(self.hi, self.lo)]
        h = [(self.lo, self.hi)]
        for z, t in zip(self.levels, theta):
            t = min(max(float(t), 0.0), 2.0)
            if t <= 0.0:
                continue
            if t <= 1.0:
                v.append((z, z - t * (z - self.lo)))
            else:
                v.append((z, self.lo))
                h.append((z, z + (t - 1.0) * (self.hi - z)))
        return VhBarrier(tuple(v), tuple(h))

    def rule(self, theta) -> Perkins:
        if self.trivial:
            return Perkins(VhBarrier(), self.nu)
        return Perkins(self.barrier(theta), self.nu)

    def law(self, theta) -> StoppedLaw:
        self.evaluations += 1
        return exact_stopped_law(self.rule(theta), self.lam)

    def evaluate(self, theta) -> tuple[np.ndarray, float]:
        """Stopped mass at each interior level and the endpoint TV residual."""
        law = self.law(theta).endpoint_law()
        return np.array([law.mass_at(z) for z in self.levels]), tv_distance(law, self.mu)

    def masses(self, theta) -> np.ndarray:
        return self.evaluate(theta)[0]

    def residual(self, theta) -> float:
        return self.evaluate(theta)[1]

    def solve_coordinate(self, theta: np.ndarray, i: int, xtol: float = _XTOL) -> float:
        target = self.targets[i]
        if target <= TOL * 1e-3:
            return 0.0
        work = theta.copy()

        def f(t):
            work[i] = t
            return self.masses(work)[i] - target

        f1 = f(1.0)
        if f1 >= -TOL * 1e-3:
            if f1 <= 0.0:
                return 1.0
            f0 = f(0.0)
            if f0 >= 0.0:
                return 0.0
            return brentq(f, 0.0, 1.0, xtol=xtol)
        f2 = f(2.0)
        if f2 <= 0.0:
            return 2.0
        return brentq(f, 1.0, 2.0, xtol=xtol)

    def newton_step(self, theta: np.ndarray, F: np.ndarray, h: float = 1e-7):
        """Newton update on the coordinates with a positive target."""
        free = np.flatnonzero(self.targets > TOL * 1e-3)
        if not free.size:
            return None
        J = np.empty((free.size, free.size))
        for col, i in enumerate(free):
            dh = h if theta[i] + h <= 2.0 else -h
            probe = theta.copy()
            probe[i] += dh
            J[:, col] = (self.masses(probe)[free] - F[free] - self.targets[free]) / dh
        try:
            step = np.linalg.solve(J, -F[free])
        except np.linalg.LinAlgError:
            return None
        out = theta.copy()
        out[free] = np.clip(theta[free] + step, 0.0, 2.0)
        return out


def _solve(problem: _Problem, theta, order, tol: float, max_iter: int):
    """Gauss-Seidel sweeps accelerated by Newton steps.

    A Newton step is kept only if it at least halves the residual;
    otherwise a full sweep of exact one-dimensional solves is made.  The
    loop stops at ``tol`` or when the residual has not halved for 50
    rounds.
    """
    for i in order:
        theta[i] = problem.solve_coordinate(theta, i, xtol=1e-6)
    masses, res = problem.evaluate(theta)
    best = (res, theta.copy())
    it, stall = 1, 0
    while res > tol and it < max_iter and stall < 50:
        it += 1
        cand = problem.newton_step(theta, masses - problem.targets)
        accepted = False
        if cand is not None:
            c_masses, c_res = problem.evaluate(cand)
            if c_res <= 0.5 * res:
                theta, masses, res, accepted = cand, c_masses, c_res, True
        if not accepted:
            for i in order:
                theta[i] = problem.solve_coordinate(theta, i)
            masses, res = problem.evaluate(theta)
        if res < 0.5 * best[0]:
            stall = 0
        else:
            stall += 1
        if res < best[0]:
            best = (res, theta.copy())
    # polish: a converged Newton step costs little and removes the last digits
    for _ in range(3):
        res, theta = best
        if res <= 1e-15:
            break
        cand = problem.newton_step(theta, problem.masses(theta) - problem.targets)
        if cand is None:
            break
        c_res = problem.residual(cand)
        if not c_res < res:
            break
        best = (c_res, cand)
    return best, it


def _run(lam, mu, tol, theta0, order, max_iter):
    if not convex_order(lam, mu):
        raise ConvexOrderViolated("starting law does not precede the target in convex order")
    problem = _Problem(lam, mu)
    if problem.trivial or not len(problem.levels):
        theta = np.zeros(len(problem.levels))
        law = problem.law(theta)
        res = tv_distance(law.endpoint_law(), mu)
        return _finish(problem, theta, res, 0, law, tol)
    theta = np.array(theta0 if theta0 is not None else np.zeros(len(problem.levels)), dtype=float)
    order = list(order) if order is not None else list(range(len(theta)))
    (res, theta), it = _solve(problem, theta, order, tol, max_iter)
    return _finish(problem, theta, res, it, problem.law(theta), tol)


def _prune(problem: _Problem, rule: Perkins, law: StoppedLaw) -> Perkins:
    """Drop lines whose removal leaves the stopped law unchanged."""
    barrier = rule.barrier
    for kind in ("h_lines", "v_lines"):
        for line in getattr(barrier, kind):
            if kind == "v_lines" and any(y == line[0] for y, _ in barrier.h_lines) and any(
                a.endpoint == a.max == line[0] and a.min < a.max for a in law.joint
            ):
                # the h-line tail catches the same new-max stops; keep the v-line explicit
                continue
            lines = tuple(l for l in getattr(barrier, kind) if l != line)
            trial = replace(barrier, **{kind: lines})
            try:
                trial_law = exact_stopped_law(Perkins(trial, rule.atom_stop), problem.lam)
            except Exception:
                continue
            if trial_law.joint == law.joint:
                barrier = trial
    return Perkins(barrier, rule.atom_stop)


def _finish(problem, theta, res, it, law, tol):
    rule = problem.rule(theta)
    if res > tol:
        raise NoProgress(
            f"residual {res:.3g} above tolerance {tol:.3g} after {it} sweeps",
            best=CalibrationResult(rule, res, it, law, tuple(theta)),
        )
    rule = _prune(problem, rule, law)
    law = exact_stopped_law(rule, problem.lam)
    res = tv_distance(law.endpoint_law(), problem.mu)
    return CalibrationResult(rule, res, it, law, tuple(float(t) for t in theta))


def calibrate_perkins(
    lam: DiscreteMeasure, mu: DiscreteMeasure, tol: float = 1e-10, *, max_iter: int = MAX_ITER
) -> CalibrationResult:
    """Max-priority barrier rule embedding ``mu`` from ``lam``.

    Raises ``ConvexOrderViolated`` if no embedding exists and ``NoProgress``
    (carrying the best rule found) if the residual stalls above ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _run(lam, mu, tol, None, None, max_iter)


def calibrate_min_priority(lam, mu, tol: float = 1e-10) -> CalibrationResult:
    """Mirror image: favour the running minimum by reflecting the instance."""
    res = calibrate_perkins(lam.reflect(), mu.reflect(), tol)
    rule = Perkins(res.rule.barrier, res.rule.atom_stop, mirrored=True)
    return CalibrationResult(rule, res.residual_tv, res.iterations, res.certificate.reflect(), res.params)


def perturb_solution(result: CalibrationResult, lam, mu, seed: int, tol: float | None = None) -> Perkins:
    """Re-calibrate from a random initial guess with a random sweep order."""
    tol = result.residual_tv if tol is None else tol
    tol = max(tol, 1e-10)
    rng = np.random.default_rng(seed)
    n = len(result.params)
    last = None
    for _ in range(5):
        theta0 = rng.uniform(0.0, 2.0, size=n)
        order = rng.permutation(n)
        try:
            return _run(lam, mu, tol, theta0, order, MAX_ITER).rule
        except NoProgress as exc:
            last = exc
    raise last


def break_dominance(lam, mu, tol: float = 1e-10):
    """A valid embedding that favours the minimum instead, or ``None``.

    Returns ``None`` when the mirrored construction coincides with the
    max-priority one, i.e. no structurally different barrier was found.
    """
    a = calibrate_perkins(lam, mu, tol)
    b = calibrate_min_priority(lam, mu, tol)
    if b.certificate.joint == a.certificate.joint:
        return None
    return b.rule


def feasible_band(lam: DiscreteMeasure, family, level: float, alpha: float = 0.6) -> tuple[float, float]:
    """Largest mass at ``level`` reachable with a v-line only, and with v- and h-line.

    ``family(alpha)`` returns ``(lam', mu)``; only the target's support and
    the time-zero mass matter.  Other interior lines are left out.
    """
    _, mu = family(alpha)
    problem = _Problem(lam, mu)
    if level not in problem.levels:
        nu_mass = problem.nu.mass_at(level)
        return nu_mass, nu_mass
    i = problem.levels.index(level)
    caps = []
    for t in (1.0, 2.0):
        theta = np.zeros(len(problem.levels))
        theta[i] = t
        caps.append(problem.law(theta).endpoint_law().mass_at(level))
    return caps[0], caps[1]


EXAMPLE_CASES = (
    "[0, 1/2]: atom-stop only",
    "(1/2, 5/8]: v-line",
    "(5/8, 3/4]: v-line and h-line",
    "(3/4, 1]: not in convex order",
)


def example_case(result: CalibrationResult | None, level: float = 0.0) -> str:
    """Which case of the three-atom example a calibration falls into."""
    if result is None:
        return EXAMPLE_CASES[3]
    b = result.rule.barrier
    has_v = any(x == level for x, _ in b.v_lines)
    has_h = any(y == level for y, _ in b.h_lines)
    if has_h:
        return EXAMPLE_CASES[2]
    if has_v:
        return EXAMPLE_CASES[1]
    return EXAMPLE_CASES[0]


def calibrate_example(alpha: float, tol: float = 1e-10):
    """Calibrate the three-atom example; ``None`` when it is not embeddable."""
    lam, mu = example_pair(alpha)
    try:
        return calibrate_perkins(lam, mu, tol)
    except ConvexOrderViolated:
        return None
