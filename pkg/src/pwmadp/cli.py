"""Command-line harness: instances, bound runs, certification and audits.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 audit or
certificate violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import (
    AlgorithmError,
    BoundSettings,
    SampleSet,
    outer_problem,
    single_bellman_lp,
    write_bound_csv,
    write_timing_csv,
    write_trace_csv,
)
from .lmi import audit_family
from .lq_model import LQProblem, LQProblemError, RiccatiError
from .moments import MomentPair
from .policy import certify, clipped_lqr_policy, greedy_policy
from .quad_value import CONSTRAINT, OBJECTIVE, VFFamily
from .sdp import SolverOptions

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "generate_instance",
    "preset_problem",
    "preset_config",
    "run",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_AUDIT = 4


class ConfigError(ValueError):
    pass


def generate_instance(n_x: int, n_u: int, seed: int, u_bound: float = 1.0, gamma: float = 0.99,
                      x0_var: float = 9.0) -> LQProblem:
    """Random marginally stable instance with identity costs.

    ``A`` is a Gaussian matrix rescaled to spectral radius one, ``B_u`` is
    Gaussian, the input box is ``[-u_bound, u_bound]`` per coordinate and
    ``x0 ~ N(0, x0_var I)``.
    """
    if n_x < 1 or n_u < 1:
        raise ConfigError("n_x and n_u must be at least 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_x, n_x))
    A = A / np.max(np.abs(np.linalg.eigvals(A)))
    B_u = rng.standard_normal((n_x, n_u))
    notes = {"generator": {"n_x": n_x, "n_u": n_u, "seed": seed}, "u_bound": u_bound}
    return LQProblem.from_blocks(A, B_u, np.eye(n_x), np.eye(n_u), gamma, -u_bound, u_bound,
                                 x0_cov=x0_var * np.eye(n_x), notes=notes)


def cdc_1d_problem() -> LQProblem:
    """``x+ = x - 0.5 u``, ``|u| <= 1``, ``l = x^2 + 0.1 u^2``, ``gamma = 0.95``, ``x0 ~ N(0, 10)``."""
    return LQProblem.from_blocks(1.0, -0.5, 1.0, 0.1, 0.95, -1.0, 1.0, x0_cov=10.0,
                                 notes={"x0_cov": "read as variance 10"})


PRESETS = {
    "cdc-1d": {"problem": {"preset": "cdc-1d"}, "n_samples": 10_000, "max_functions": 1000},
    "lq-4d": {"problem": {"generate": {"n_x": 4, "n_u": 2, "seed": 0}}, "n_samples": 1000,
              "max_functions": 50},
    "lq-10d": {"problem": {"generate": {"n_x": 10, "n_u": 3, "seed": 0}}, "n_samples": 1000,
               "max_functions": 50},
}


def preset_problem(name: str) -> LQProblem:
    if name == "cdc-1d":
        return cdc_1d_problem()
    if name in PRESETS:
        return generate_instance(**PRESETS[name]["problem"]["generate"])
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run; serialised as JSON.

    ``problem`` is one of ``{"file": path}``, ``{"preset": name}`` or
    ``{"generate": {"n_x": .., "n_u": .., "seed": ..}}``.  ``init`` is
    ``"single-bi"``, ``"zero"`` or ``"file"`` (with ``init_file``).
    """

    problem: dict = field(default_factory=lambda: {"preset": "cdc-1d"})
    n_samples: int = 10_000
    sample_seed: int = 0
    refine: bool = True
    eps_in: float = 1e-3
    eps_out: float = 1e-6
    max_inner: int = 50
    max_outer: int = 1000
    max_functions: int | None = None
    convex_P: bool = True
    norm_cap: float | None = None
    solver: dict = field(default_factory=dict)
    init: str = "single-bi"
    init_file: str | None = None
    certify_policy: str = "clipped_lqr"
    certify_rollouts: int = 10_000
    certify_seed: int = 1
    certify_horizon: int | None = None
    snapshot_every: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.problem, dict) or len(self.problem) != 1:
            raise ConfigError("problem must have exactly one of 'file', 'preset', 'generate'")
        kind, val = next(iter(self.problem.items()))
        if kind == "file":
            if not Path(val).is_file():
                raise ConfigError(f"problem file {val} does not exist")
        elif kind == "preset":
            if val not in PRESETS:
                raise ConfigError(f"unknown preset {val!r}")
        elif kind == "generate":
            missing = {"n_x", "n_u", "seed"} - set(val)
            if missing:
                raise ConfigError(f"generate needs {', '.join(sorted(missing))}")
        else:
            raise ConfigError(f"unknown problem source {kind!r}")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.eps_in <= 0 or self.eps_out <= 0:
            raise ConfigError("tolerances must be positive")
        if self.init not in ("single-bi", "zero", "file"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.init == "file" and (self.init_file is None or not Path(self.init_file).is_file()):
            raise ConfigError("init 'file' needs an existing init_file")
        if self.certify_policy not in ("clipped_lqr", "greedy", "none"):
            raise ConfigError(f"unknown policy {self.certify_policy!r}")
        unknown = set(self.solver) - {f.name for f in fields(SolverOptions)}
        if unknown:
            raise ConfigError(f"unknown solver options: {', '.join(sorted(unknown))}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def problem_instance(self) -> LQProblem:
        kind, val = next(iter(self.problem.items()))
        try:
            if kind == "file":
                return LQProblem.load(val)
            if kind == "preset":
                return preset_problem(val)
            return generate_instance(int(val["n_x"]), int(val["n_u"]), int(val["seed"]),
                                     **{k: v for k, v in val.items() if k not in ("n_x", "n_u", "seed")})
        except (LQProblemError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def settings(self) -> BoundSettings:
        return BoundSettings(eps_in=self.eps_in, eps_out=self.eps_out, max_inner=self.max_inner,
                             max_outer=self.max_outer, convex_P=self.convex_P, norm_cap=self.norm_cap,
                             solver=SolverOptions(**self.solver))


def preset_config(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    d = dict(PRESETS[name])
    d.update(overrides)
    return ExperimentConfig.from_dict(d)


def initial_families(prob: LQProblem, cfg: ExperimentConfig):
    if cfg.init == "zero":
        fam = VFFamily.zero(prob.n_x)
    elif cfg.init == "file":
        fam = VFFamily.load(cfg.init_file)
        if fam.n_x != prob.n_x:
            raise ConfigError("init family dimension does not match the problem")
    else:
        vf = single_bellman_lp(prob, MomentPair.gaussian(prob.x0_mean, prob.x0_cov), convex_P=cfg.convex_P,
                               norm_cap=cfg.norm_cap, solver=SolverOptions(**cfg.solver))
        fam = VFFamily([vf])
    return fam.with_role(OBJECTIVE), fam.with_role(CONSTRAINT)


def make_policy(prob: LQProblem, family: VFFamily, name: str):
    if name == "greedy":
        return greedy_policy(prob, family)
    return clipped_lqr_policy(prob)


def run(cfg: ExperimentConfig, log=None) -> dict:
    """Full pipeline; returns a summary and writes artifacts to ``cfg.output_dir``.

    Files: ``config.json``, ``instance.json``, ``trace.csv``, ``bound.csv``,
    ``timing.csv``, ``family_obj.json``, ``family_con.json`` and, unless the
    policy is ``"none"``, ``gap.json``.  Stage failures raise after the
    artifacts produced so far have been written.
    """
    log = log or (lambda msg: None)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    prob = cfg.problem_instance()
    prob.save(out / "instance.json")
    samples = SampleSet.from_problem(prob, cfg.n_samples, cfg.sample_seed)
    a_obj, a_con = initial_families(prob, cfg)
    log(f"initial bound {samples.mean_objective(a_obj):.6g} from {len(a_obj)} function(s)")

    snaps = out / "snapshots"

    def callback(fo, fc, rec):
        k = len(fo) - len(a_obj_init)
        if cfg.snapshot_every and k % cfg.snapshot_every == 0:
            snaps.mkdir(exist_ok=True)
            fo.save(snaps / f"family_obj_{k:06d}.json")

    a_obj_init = a_obj
    try:
        a_obj, a_con, trace = outer_problem(prob, a_obj, a_con, samples, eps_in=cfg.eps_in, eps_out=cfg.eps_out,
                                            max_outer=cfg.max_outer, refine=cfg.refine,
                                            max_functions=cfg.max_functions, settings=cfg.settings(),
                                            callback=callback)
    except AlgorithmError as exc:
        if exc.trace is not None:
            _write_traces(exc.trace, out)
        raise
    _write_traces(trace, out)
    a_obj.save(out / "family_obj.json")
    a_con.save(out / "family_con.json")
    summary = {"n_generated": trace.n_generated, "bound": trace.f_history[-1], "reason": trace.reason}
    log(f"bound {summary['bound']:.6g} after {trace.n_generated} functions ({trace.reason})")
    if cfg.certify_policy != "none":
        rep = certify(prob, a_obj, make_policy(prob, a_obj, cfg.certify_policy), cfg.certify_rollouts,
                      cfg.certify_horizon, cfg.certify_seed)
        rep.save(out / "gap.json")
        summary["gap"] = rep.to_dict()
        log(f"lower bound {rep.lower_bound:.6g}, {rep.policy} cost {rep.policy_cost:.6g} "
            f"+- {rep.stderr:.2g}, gap {100 * rep.gap_fraction:.2f}%")
    return summary


def _write_traces(trace, out: Path) -> None:
    write_trace_csv(trace, out / "trace.csv")
    write_bound_csv(trace, out / "bound.csv")
    write_timing_csv(trace, out / "timing.csv")


# -- argument parsing ----------------------------------------------------------

def _add_problem_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--problem", help="instance file (JSON)")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in problem")


def _problem_from_args(args) -> LQProblem:
    if args.problem:
        try:
            return LQProblem.load(args.problem)
        except (OSError, LQProblemError) as exc:
            raise ConfigError(str(exc)) from exc
    return preset_problem(args.preset or "cdc-1d")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pwmadp", description="Point-wise maximum lower bounds for constrained LQ control.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--n-x", type=int, required=True)
    g.add_argument("--n-u", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--u-bound", type=float, default=1.0)
    g.add_argument("--output", required=True)

    for name, hlp in (("bound", "compute a lower-bound family"), ("experiment", "bound plus certification")):
        b = sub.add_parser(name, help=hlp)
        b.add_argument("--config", help="JSON experiment config; flags override it")
        _add_problem_args(b)
        b.add_argument("--n-samples", type=int)
        b.add_argument("--sample-seed", type=int)
        b.add_argument("--max-functions", type=int)
        b.add_argument("--max-outer", type=int)
        b.add_argument("--eps-in", type=float)
        b.add_argument("--eps-out", type=float)
        b.add_argument("--no-refine", action="store_true")
        b.add_argument("--init", choices=["single-bi", "zero", "file"])
        b.add_argument("--init-file")
        b.add_argument("--norm-cap", type=float)
        b.add_argument("--snapshot-every", type=int)
        b.add_argument("--output-dir")
        if name == "experiment":
            b.add_argument("--policy", choices=["clipped_lqr", "greedy"])
            b.add_argument("--rollouts", type=int)
            b.add_argument("--certify-seed", type=int)

    c = sub.add_parser("certify", help="certify a policy against a family")
    _add_problem_args(c)
    c.add_argument("--family", required=True)
    c.add_argument("--policy", choices=["clipped_lqr", "greedy"], default="clipped_lqr")
    c.add_argument("--rollouts", type=int, default=10_000)
    c.add_argument("--horizon", type=int)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--output")

    a = sub.add_parser("audit", help="sample the Bellman inequality for every member of a family")
    _add_problem_args(a)
    a.add_argument("--family", required=True)
    a.add_argument("--samples", type=int, default=10_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--tol", type=float, default=1e-6)
    return ap


def _config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config).to_dict() if args.config else None
    if base is None:
        base = dict(PRESETS.get(args.preset or "cdc-1d"))
    if args.problem:
        base["problem"] = {"file": args.problem}
    elif args.preset:
        base["problem"] = dict(PRESETS[args.preset]["problem"])
    mapping = {"n_samples": "n_samples", "sample_seed": "sample_seed", "max_functions": "max_functions",
               "max_outer": "max_outer", "eps_in": "eps_in", "eps_out": "eps_out", "init": "init",
               "init_file": "init_file", "norm_cap": "norm_cap", "snapshot_every": "snapshot_every",
               "output_dir": "output_dir", "policy": "certify_policy", "rollouts": "certify_rollouts",
               "certify_seed": "certify_seed"}
    for arg, key in mapping.items():
        v = getattr(args, arg, None)
        if v is not None:
            base[key] = v
    if args.no_refine:
        base["refine"] = False
    if args.command == "bound":
        base["certify_policy"] = "none"
    return ExperimentConfig.from_dict(base)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    say = lambda msg: print(msg, file=sys.stderr)  # noqa: E731
    try:
        if args.command == "gen":
            prob = generate_instance(args.n_x, args.n_u, args.seed, args.u_bound)
            prob.save(args.output)
            return EXIT_OK
        if args.command in ("bound", "experiment"):
            cfg = _config_from_args(args)
            summary = run(cfg, log=say)
            print(json.dumps(summary, indent=2))
            gap = summary.get("gap")
            if gap is not None and not gap["consistent"]:
                say("lower bound exceeds the policy cost beyond Monte-Carlo error")
                return EXIT_AUDIT
            return EXIT_OK
        prob = _problem_from_args(args)
        try:
            family = VFFamily.load(args.family)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read family {args.family}: {exc}") from exc
        if family.n_x != prob.n_x:
            raise ConfigError("family dimension does not match the problem")
        if args.command == "certify":
            rep = certify(prob, family, make_policy(prob, family, args.policy), args.rollouts, args.horizon,
                          args.seed)
            if args.output:
                rep.save(args.output)
            print(json.dumps(rep.to_dict(), indent=2))
            return EXIT_OK if rep.consistent else EXIT_AUDIT
        worst = float(np.max(audit_family(prob, family, args.samples, args.seed)))
        print(json.dumps({"max_violation": worst, "members": len(family), "tol": args.tol}))
        return EXIT_OK if worst <= args.tol else EXIT_AUDIT
    except (ConfigError, LQProblemError) as exc:
        say(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (AlgorithmError, RiccatiError) as exc:
        say(f"solver failure: {exc}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
