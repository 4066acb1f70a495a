"""Point-wise maximum lower bounds: objective, ascent steps and the outer loop.

The bound being maximised is ``f_pwm(alpha) = mean_i max(alpha'phi(x_i), Vobj(x_i))``
over a fixed set of sample states.  ``inner_problem`` climbs it by repeatedly
maximising its linearisation over the Bellman-inequality set;
``outer_problem`` seeds that climb at each sample and accumulates the results.
"""

from __future__ import annotations

import copy
import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import sdp as sdpmod
from .lmi import SolverFailure, assemble, assemble_single_bi, lifted_basis, solve_bellman
from .lq_model import LQProblem
from .moments import MomentPair, moments_from_phi
from .quad_value import CONSTRAINT, OBJECTIVE, QuadraticVF, VFFamily, basis_vector, member_values

__all__ = [
    "SampleSet",
    "InnerRecord",
    "InnerTrace",
    "OuterRecord",
    "OuterTrace",
    "MMTrace",
    "BoundSettings",
    "AlgorithmError",
    "f_pwm",
    "subgradient",
    "mm_minimize",
    "inner_problem",
    "outer_problem",
    "single_bellman_lp",
    "write_trace_csv",
    "write_bound_csv",
    "write_timing_csv",
]


class AlgorithmError(RuntimeError):
    """An SDP inside an algorithm failed; ``trace`` holds the partial history."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


# -- samples -----------------------------------------------------------------

class SampleSet:
    """Sample states with cached basis rows and a cached ``Vobj`` column.

    The cache follows families built by ``VFFamily.extend``: when asked for a
    family that extends the cached one, only the new members are evaluated.
    """

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.shape[0] < 1:
            raise ValueError("need at least one sample")
        pts.setflags(write=False)
        self.points = pts
        self.phi = basis_vector(pts)
        self.phi.setflags(write=False)
        self._coef = None
        self._values = None

    @classmethod
    def gaussian(cls, mean, cov, n: int, seed) -> "SampleSet":
        rng = np.random.default_rng(seed)
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        w, U = np.linalg.eigh(cov)
        root = U * np.sqrt(np.clip(w, 0.0, None))
        return cls(mean + rng.standard_normal((n, mean.size)) @ root.T)

    @classmethod
    def from_problem(cls, prob: LQProblem, n: int, seed) -> "SampleSet":
        return cls.gaussian(prob.x0_mean, prob.x0_cov, n, seed)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n_x(self) -> int:
        return self.points.shape[1]

    def objective_values(self, family: VFFamily) -> np.ndarray:
        """``max_j alpha_j' phi(x_i)`` for every sample (read-only view)."""
        coef = family.coefficients
        cached = self._coef
        if cached is not None and coef is cached:
            return self._values
        if cached is not None and coef.shape[0] >= cached.shape[0] and np.array_equal(coef[: cached.shape[0]], cached):
            new = coef[cached.shape[0]:]
            vals = self._values
            if new.shape[0]:
                vals = np.maximum(vals, member_values(self.phi, new).max(axis=1))
        else:
            vals = member_values(self.phi, coef).max(axis=1)
        vals.setflags(write=False)
        self._coef = coef
        self._values = vals
        return vals

    def candidate_values(self, candidate: QuadraticVF) -> np.ndarray:
        return member_values(self.phi, candidate.alpha[None, :])[:, 0]

    def mean_objective(self, family: VFFamily) -> float:
        return float(np.mean(self.objective_values(family)))


# -- objective and sub-gradient ---------------------------------------------

def _as_samples(samples) -> SampleSet:
    return samples if isinstance(samples, SampleSet) else SampleSet(samples)


def f_pwm(candidate: QuadraticVF, a_obj: VFFamily, samples) -> float:
    """Sample mean of ``max(candidate, Vobj)``."""
    s = _as_samples(samples)
    return float(np.mean(np.maximum(s.candidate_values(candidate), s.objective_values(a_obj))))


def subgradient(candidate: QuadraticVF, a_obj: VFFamily, samples):
    """Element of the upper sub-differential of ``f_pwm`` at ``candidate``.

    Returns ``(d, weight)``: ``d`` averages ``phi`` over the samples where the
    candidate weakly dominates ``Vobj`` (scaled by ``1/N``) and ``weight`` is
    the dominating fraction.
    """
    s = _as_samples(samples)
    mask = s.candidate_values(candidate) >= s.objective_values(a_obj)
    mp = moments_from_phi(s.phi, mask, s.n_x)
    return mp.packed(), mp.weight


# -- generic minorize-maximize ---------------------------------------------

@dataclass
class MMTrace:
    x: list = field(default_factory=list)
    f: list = field(default_factory=list)
    stationarity: list = field(default_factory=list)
    reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.f) - 1


def mm_minimize(f: Callable, oracle_subgrad: Callable, oracle_linmin: Callable, x0, eps: float,
                max_iter: int = 50, relative: bool = False, ref: float | None = None) -> MMTrace:
    """Minimise a concave ``f`` over a convex set by successive linearisation.

    Each step takes a super-gradient ``d`` of ``f`` at the current point and
    moves to ``argmin_{x in C} d'x`` from ``oracle_linmin(d)``.  Stops when a
    step decreases ``f`` by less than ``eps`` (``eps * (1 + |f|)`` when
    ``relative``, ``eps * |f - ref|`` when ``ref`` is given), when ``d = 0``,
    or after ``max_iter`` steps.  A step that
    would increase ``f`` (possible only through oracle inaccuracy) is
    rejected, so ``f`` never increases.

    ``stationarity[k]`` records ``min_{x in C} (x - x_k)'d_k``, which is
    ``<= 0`` and vanishes at stationary points.
    """
    x = np.asarray(x0, dtype=float)
    tr = MMTrace(x=[x], f=[float(f(x))])
    for _ in range(max_iter):
        d = np.asarray(oracle_subgrad(x), dtype=float)
        if not np.any(d):
            tr.x.append(x)
            tr.f.append(tr.f[-1])
            tr.stationarity.append(0.0)
            tr.reason = "zero_subgradient"
            return tr
        x_new = np.asarray(oracle_linmin(d), dtype=float)
        tr.stationarity.append(min(0.0, float(d @ x_new - d @ x)))
        f_new = float(f(x_new))
        if f_new > tr.f[-1]:
            tr.x.append(x)
            tr.f.append(tr.f[-1])
            tr.reason = "no_improvement"
            return tr
        decrease = tr.f[-1] - f_new
        if ref is not None:
            thr = eps * abs(f_new - ref)
        elif relative:
            thr = eps * (1.0 + abs(tr.f[-1]))
        else:
            thr = eps
        x = x_new
        tr.x.append(x)
        tr.f.append(f_new)
        if decrease < thr or decrease <= 0.0:
            tr.reason = "tolerance"
            return tr
    tr.reason = "max_iter"
    return tr


# -- inner problem -----------------------------------------------------------

@dataclass
class BoundSettings:
    """Knobs shared by the inner and outer loops."""

    eps_in: float = 1e-3
    eps_out: float = 1e-6
    max_inner: int = 50
    max_outer: int = 1000
    convex_P: bool = True
    norm_cap: float | None = None
    solver: sdpmod.SolverOptions = field(default_factory=sdpmod.SolverOptions)


@dataclass
class InnerRecord:
    inner_iter: int
    f_pwm: float
    weight: float
    sdp_iters: int
    stationarity: float
    wall_ms: float


@dataclass
class InnerTrace:
    records: list = field(default_factory=list)
    alpha: QuadraticVF | None = None
    reason: str = ""

    @property
    def iterations(self) -> int:
        """Number of ascent steps taken (SDP solves or zero-gradient holds)."""
        return max(0, len(self.records) - 1)

    @property
    def f_values(self) -> list:
        return [r.f_pwm for r in self.records]


class _BiSolver:
    """One assembled BI(A_con) SDP reused for several objectives."""

    def __init__(self, prob: LQProblem, a_con: VFFamily, settings: BoundSettings, basis=None):
        self.settings = settings
        K = 1 + prob.n_x + prob.n_x * (prob.n_x + 1) // 2
        self.base = assemble(prob, a_con, np.zeros(K), convex_P=settings.convex_P,
                             norm_cap=settings.norm_cap, basis=basis)
        self.times: list = []

    def solve(self, c: np.ndarray):
        bsdp = copy.copy(self.base)
        problem = copy.copy(self.base.problem)
        b = np.zeros(problem.m)
        b[: c.size] = c
        problem.b = b
        bsdp.problem = problem
        bsdp.objective = np.asarray(c, dtype=float)
        t0 = time.perf_counter()
        try:
            vf, sol = solve_bellman(bsdp, self.settings.solver)
        finally:
            self.times.append(1e3 * (time.perf_counter() - t0))
        return vf, sol


def _rel_threshold(eps: float, ref: float) -> float:
    return eps * (1.0 + abs(ref))


def inner_problem(prob: LQProblem, alpha0: QuadraticVF, a_obj: VFFamily, a_con: VFFamily, samples,
                  eps: float = 1e-3, max_iter: int = 50, settings: BoundSettings | None = None,
                  _solver: _BiSolver | None = None) -> tuple[QuadraticVF, InnerTrace]:
    """Local ascent on ``f_pwm`` from ``alpha0`` inside ``BI(a_con)``.

    Each pass computes a sub-gradient ``d``; if it is zero the point is held
    and the loop ends, otherwise ``argmax{alpha'd : alpha in BI(a_con)}``
    becomes the next iterate.  The loop ends once a step raises the gain
    ``f_pwm - mean(Vobj)`` by less than ``eps`` times the new gain, or after
    ``max_iter`` passes.  A step that lowers
    ``f_pwm`` (only possible through solver tolerance) is discarded, so the
    returned value is never below ``f_pwm(alpha0)``.

    This is ``mm_minimize`` applied to ``-f_pwm`` with the SDP as the linear
    minimisation oracle.

    Raises
    ------
    AlgorithmError
        When an SDP fails; the exception carries the partial trace.
    """
    settings = settings or BoundSettings()
    s = _as_samples(samples)
    solver = _solver or _BiSolver(prob, a_con, settings)
    n_x = prob.n_x
    weights = {}
    sdp_iters = []
    n_times = len(solver.times)

    def neg_f(a):
        return -f_pwm(QuadraticVF.from_alpha(a, n_x), a_obj, s)

    def neg_subgrad(a):
        d, w = subgradient(QuadraticVF.from_alpha(a, n_x), a_obj, s)
        weights[len(weights)] = w
        return -d

    def linmin(neg_d):
        vf, sol = solver.solve(-neg_d)
        sdp_iters.append(sol.iterations)
        return vf.alpha

    try:
        mm = mm_minimize(neg_f, neg_subgrad, linmin, alpha0.alpha, eps, max_iter, ref=-s.mean_objective(a_obj))
    except SolverFailure as exc:
        partial = InnerTrace(alpha=alpha0, reason="solver_failure")
        raise AlgorithmError(str(exc), partial) from exc
    times = solver.times[n_times:]
    tr = InnerTrace(reason=mm.reason)
    f_vals = [-v for v in mm.f]
    for k in range(len(f_vals)):
        if k == 0:
            tr.records.append(InnerRecord(0, f_vals[0], weights.get(0, 0.0), 0, 0.0, 0.0))
            continue
        # weight of the sub-gradient at the iterate reached in step k
        w = weights[k] if k in weights else _weight_at(mm.x[k], a_obj, s, n_x)
        it = sdp_iters[k - 1] if k - 1 < len(sdp_iters) else 0
        ms = times[k - 1] if k - 1 < len(times) else 0.0
        tr.records.append(InnerRecord(k, f_vals[k], w, it, mm.stationarity[k - 1], ms))
    alpha = alpha0 if np.array_equal(mm.x[-1], alpha0.alpha) else QuadraticVF.from_alpha(mm.x[-1], n_x)
    tr.alpha = alpha
    return alpha, tr


def _weight_at(a, a_obj, s, n_x) -> float:
    return subgradient(QuadraticVF.from_alpha(a, n_x), a_obj, s)[1]


# -- outer problem -----------------------------------------------------------

@dataclass
class OuterRecord:
    outer_iter: int
    sample_idx: int
    n_functions: int
    f_pwm: float
    warm_f: float
    warm_weight: float
    warm_sdp_iters: int
    warm_ms: float
    inner: InnerTrace | None


@dataclass
class OuterTrace:
    f_history: list = field(default_factory=list)
    records: list = field(default_factory=list)
    family_sizes: list = field(default_factory=list)
    sdp_ms: list = field(default_factory=list)
    reason: str = ""

    @property
    def n_generated(self) -> int:
        return len(self.records)

    def bound_curve(self) -> list:
        """``f_pwm`` after each generated function."""
        return [r.f_pwm for r in self.records]


def outer_problem(prob: LQProblem, a_obj: VFFamily, a_con: VFFamily, samples, eps_in: float = 1e-3,
                  eps_out: float = 1e-6, max_outer: int = 1000, refine: bool = True,
                  max_functions: int | None = None, settings: BoundSettings | None = None,
                  callback: Callable | None = None):
    """Grow ``a_obj``/``a_con`` one function per sample.

    For every sample ``x_i`` in storage order the BI-feasible quadratic with
    the largest value at ``x_i`` is computed, optionally refined with
    ``inner_problem``, and appended to both families.  Sweeps repeat until a
    sweep raises the mean bound by less than ``eps_out * (1 + |f0|)``, after
    ``max_outer`` sweeps, or once ``max_functions`` functions were generated.

    ``callback(a_obj, a_con, record)`` runs after every append.

    Returns
    -------
    a_obj, a_con : VFFamily
    trace : OuterTrace
    """
    settings = settings or BoundSettings()
    s = _as_samples(samples)
    if a_obj.n_x != prob.n_x or a_con.n_x != prob.n_x:
        raise ValueError("family dimension does not match the problem")
    a_obj = a_obj.with_role(OBJECTIVE) if a_obj.role != OBJECTIVE else a_obj
    a_con = a_con.with_role(CONSTRAINT) if a_con.role != CONSTRAINT else a_con
    basis = lifted_basis(prob)
    tr = OuterTrace()
    f0 = s.mean_objective(a_obj)
    tr.f_history.append(f0)
    tol_out = _rel_threshold(eps_out, f0)
    done = False
    for m in range(1, max_outer + 1):
        for i in range(len(s)):
            if max_functions is not None and tr.n_generated >= max_functions:
                done = True
                break
            solver = _BiSolver(prob, a_con, settings, basis)
            try:
                warm, sol = solver.solve(s.phi[i])
            except SolverFailure as exc:
                tr.reason = "solver_failure"
                raise AlgorithmError(f"sample {i}: {exc}", tr) from exc
            warm_f = f_pwm(warm, a_obj, s)
            _, warm_w = subgradient(warm, a_obj, s)
            inner = None
            new = warm
            if refine:
                try:
                    new, inner = inner_problem(prob, warm, a_obj, a_con, s, eps=eps_in,
                                               max_iter=settings.max_inner, settings=settings, _solver=solver)
                except AlgorithmError as exc:
                    tr.reason = "solver_failure"
                    raise AlgorithmError(f"sample {i}: {exc}", tr) from exc
            a_obj = a_obj.extend(new)
            a_con = a_con.extend(new)
            tr.sdp_ms.extend(solver.times)
            rec = OuterRecord(m, i, len(a_obj), s.mean_objective(a_obj), warm_f, warm_w, sol.iterations,
                              solver.times[0], inner)
            tr.records.append(rec)
            tr.family_sizes.append(len(a_obj))
            if callback is not None:
                callback(a_obj, a_con, rec)
        f_m = s.mean_objective(a_obj)
        tr.f_history.append(f_m)
        if done:
            tr.reason = "max_functions"
            break
        if f_m - tr.f_history[-2] < tol_out:
            tr.reason = "tolerance"
            break
    else:
        tr.reason = "max_outer"
    return a_obj, a_con, tr


# -- single Bellman inequality --------------------------------------------

def single_bellman_lp(prob: LQProblem, objective=None, convex_P: bool = True, norm_cap: float | None = None,
                      solver: sdpmod.SolverOptions | None = None) -> QuadraticVF:
    """Best quadratic satisfying ``V <= l + gamma E V(x+)`` on the input box.

    ``objective`` is a ``MomentPair``, an array of sample states, or ``None``
    for the initial-state distribution of ``prob``.
    """
    if objective is None:
        objective = MomentPair.gaussian(prob.x0_mean, prob.x0_cov)
    elif not isinstance(objective, MomentPair):
        pts = np.asarray(objective, dtype=float)
        if pts.ndim == 2 and pts.shape[1] == prob.n_x or (prob.n_x == 1 and pts.ndim == 1):
            pts = pts.reshape(-1, prob.n_x)
            phi = basis_vector(pts)
            objective = moments_from_phi(phi, np.ones(len(pts), dtype=bool), prob.n_x)
    bsdp = assemble_single_bi(prob, objective, convex_P=convex_P, norm_cap=norm_cap)
    try:
        vf, _ = solve_bellman(bsdp, solver)
    except SolverFailure as exc:
        raise AlgorithmError(f"single Bellman inequality: {exc}") from exc
    return vf


def single_bi_value(vf: QuadraticVF, objective: MomentPair) -> float:
    return float(objective.packed() @ vf.alpha)


# -- CSV output ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


TRACE_COLUMNS = ["outer_iter", "sample_idx", "inner_iter", "f_pwm", "weight", "sdp_iters"]


def write_trace_csv(trace: OuterTrace, path) -> None:
    """One row per SDP step: the warm start (``inner_iter = 0``) and each refinement."""
    rows = []
    for r in trace.records:
        rows.append((r.outer_iter, r.sample_idx, 0, r.warm_f, r.warm_weight, r.warm_sdp_iters))
        if r.inner is not None:
            for ir in r.inner.records[1:]:
                rows.append((r.outer_iter, r.sample_idx, ir.inner_iter, ir.f_pwm, ir.weight, ir.sdp_iters))
    _write(path, TRACE_COLUMNS, rows)


def write_bound_csv(trace: OuterTrace, path) -> None:
    """Bound after each generated function, plus the inner iteration count."""
    rows = [(0, trace.f_history[0], 0)] if trace.f_history else []
    for k, r in enumerate(trace.records, start=1):
        rows.append((k, r.f_pwm, r.inner.iterations if r.inner is not None else 0))
    _write(path, ["n_generated", "f_pwm", "inner_iterations"], rows)


def write_timing_csv(trace: OuterTrace, path) -> None:
    """Per-SDP wall time and its running total (not reproducible byte-for-byte)."""
    cum = np.cumsum(trace.sdp_ms) if trace.sdp_ms else []
    _write(path, ["sdp_index", "sdp_ms", "cumulative_ms"],
           [(k, t, c) for k, (t, c) in enumerate(zip(trace.sdp_ms, cum), start=1)])
