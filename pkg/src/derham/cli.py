"""Command-line entry point.

Exit codes: 0 success or positive verdict, 2 verified negative verdict (the
tool ran and the answer is "no" or a precondition was refused), 1 parse or
structural error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import convex_decomposition as cd
from . import generate as gen
from . import io
from . import loewner
from . import metric_core as mc
from . import metric_factorizer as mf
from . import normed_space as ns
from . import rigidity as rg
from .subspace import Subspace

COMMANDS = ("validate", "factor", "witnesses", "isometries", "exact-sequence", "norm-decompose", "loewner",
            "gruber", "defect", "eigen", "strike", "generate")

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    norm: str | None = None
    tol_metric: float | None = None
    tol_sq: float | None = None
    seed: int = 0
    budget: int | None = None
    output: str | None = None
    format: str = "json"
    figures: str | None = None
    method: str = "pruned"
    kind: str | None = None
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = asdict(self)
        out["threads"] = int(os.environ.get("DERHAM_THREADS", "1") or 1)
        return out


class CommandError(Exception):
    """Structural failure reported with exit code 1."""


# ---- input helpers -------------------------------------------------------------------------

def _need(value, flag):
    if value is None:
        raise CommandError(f"missing required option {flag}")
    return value


def _metric(cfg: RunConfig) -> mc.FiniteMetricSpace:
    return io.read_metric(_need(cfg.input, "--input"))


def _tolerance(cfg: RunConfig, space) -> mc.Tolerance:
    base = space.tolerance()
    return mc.Tolerance(cfg.tol_metric or base.tol_metric, cfg.tol_sq or base.tol_sq)


def _budget(cfg: RunConfig) -> mf.Budget:
    return mf.Budget() if cfg.budget is None else mf.Budget(max_points=cfg.budget)


def _norm_from(data) -> ns.NormedSpace:
    if isinstance(data, dict) and "norm" in data and "form" not in data:
        data = data["norm"]
    try:
        return ns.from_dict(data)
    except ns.NormError as exc:
        raise io.InputError(f"field 'norm': {exc}") from None


def _norm(cfg: RunConfig) -> ns.NormedSpace:
    if cfg.norm:
        return _norm_from(io.read_json(cfg.norm))
    return _norm_from(io.read_json(_need(cfg.input, "--norm")))


def _pair(cfg: RunConfig) -> rg.ProjectionPair:
    data = io.read_json(_need(cfg.input, "--input"))
    space = _norm(cfg) if cfg.norm else _norm_from(data)
    subs = {}
    for key in ("A", "Abar", "B", "Bbar"):
        if key not in data:
            raise io.InputError(f"pair input is missing field {key!r}")
        try:
            subs[key] = Subspace(np.asarray(data[key], dtype=float).reshape(-1, space.dim).T)
        except ValueError as exc:
            raise io.InputError(f"field {key!r}: {exc}") from None
    return rg.ProjectionPair(space, subs["A"], subs["Abar"], subs["B"], subs["Bbar"], seed=0)


def _figure(cfg: RunConfig, name: str) -> str | None:
    if not cfg.figures:
        return None
    return str(Path(cfg.figures) / f"{cfg.command}_{name}.png")


# ---- commands ----------------------------------------------------------------------------------

def cmd_validate(cfg):
    space = _metric(cfg)
    rep = mc.validate(space, _tolerance(cfg, space))
    figs = {}
    if cfg.figures:
        from . import plotting
        figs["heatmap"] = plotting.distance_heatmap(space, _figure(cfg, "distances"))
    return rep.to_dict() | {"figures": figs}, EXIT_OK if rep.ok else EXIT_NEGATIVE


def _checked_metric(cfg):
    space = _metric(cfg)
    tol = _tolerance(cfg, space)
    rep = mc.validate(space, tol)
    if not rep.ok:
        return space, tol, {"valid_metric": False, "violations": rep.violations}
    return space, tol, None


def cmd_factor(cfg):
    space, tol, bad = _checked_metric(cfg)
    if bad:
        return bad, EXIT_NEGATIVE
    rep = mf.factorize(space, _budget(cfg), tol)
    out = rep.to_dict()
    if cfg.figures:
        from . import plotting
        order = None
        if rep.fibers:
            coords = mf.factor_coordinates(space, rep.fibers, tol)
            order = np.lexsort(coords.T[::-1])
        out["figures"] = {"heatmap": plotting.distance_heatmap(space, _figure(cfg, "distances"), order)}
    return out, EXIT_OK


def cmd_witnesses(cfg):
    space, tol, bad = _checked_metric(cfg)
    if bad:
        return bad, EXIT_NEGATIVE
    if cfg.method == "brute":
        res = mf.brute_force_witnesses(space, tol, _budget(cfg))
    else:
        res = mf.enumerate_witnesses(space, _budget(cfg), tol)
    out = {"method": cfg.method, "complete": res.complete, "count": len(res.witnesses),
           "witnesses": [w.to_dict() for w in res.witnesses], "is_product": bool(res.witnesses)}
    return out, EXIT_OK if res.witnesses else EXIT_NEGATIVE


def cmd_isometries(cfg):
    space, tol, bad = _checked_metric(cfg)
    if bad:
        return bad, EXIT_NEGATIVE
    group = mf.isometry_group(space, _budget(cfg), tol)
    gens = mf.generating_set(group)
    return {"order": len(group), "generators": [[space.labels[i] for i in g] for g in gens]}, EXIT_OK


def cmd_exact_sequence(cfg):
    space, tol, bad = _checked_metric(cfg)
    if bad:
        return bad, EXIT_NEGATIVE
    rep = mf.factorize(space, _budget(cfg), tol)
    try:
        seq = mf.verify_exact_sequence(space, rep, _budget(cfg), tol)
    except mf.PreconditionError as exc:
        return {"refused": True, "reason": str(exc)}, EXIT_NEGATIVE
    return seq.to_dict() | {"refused": False}, EXIT_OK if seq.exact else EXIT_NEGATIVE


def cmd_norm_decompose(cfg):
    space = _norm(cfg)
    rep = ns.decompose_norm(space, seed=cfg.seed)
    return rep.to_dict(), EXIT_OK if rep.verified else EXIT_NEGATIVE


def cmd_loewner(cfg):
    space = _norm(cfg)
    try:
        res = loewner.max_inscribed_ellipsoid(space, seed=cfg.seed)
    except loewner.LoewnerConvergenceError as exc:
        return exc.best.to_dict() | {"error": str(exc)}, EXIT_ERROR
    out = res.to_dict()
    if cfg.figures and space.dim == 2:
        from . import plotting
        out["figures"] = {"ball": plotting.unit_ball_with_ellipsoid(space, res.shape, _figure(cfg, "ball"))}
    return out, EXIT_OK


def cmd_gruber(cfg):
    data = io.read_json(_need(cfg.input, "--input"))
    try:
        body = cd.ConvexBody.from_dict(data)
    except (cd.DecompositionError, ValueError) as exc:
        raise io.InputError(f"polytope input: {exc}") from None
    rep = cd.gruber_decompose(body)
    return rep.to_dict(), EXIT_OK


def cmd_defect(cfg):
    space = _norm(cfg)
    rep = rg.defect(space, seed=cfg.seed)
    out = rep.to_dict()
    if cfg.figures:
        from . import plotting
        out["figures"] = {"samples": plotting.defect_samples(space, _figure(cfg, "ratios"), seed=cfg.seed,
                                                             m_value=rep.m_value)}
    return out, EXIT_OK


def cmd_eigen(cfg):
    pp = _pair(cfg)
    rep = rg.composed_projection_eigen(pp, seed=cfg.seed)
    return rep.to_dict(), EXIT_OK if rep.in_open_interval else EXIT_NEGATIVE


def cmd_strike(cfg):
    pp = _pair(cfg)
    v = rg.check_strike(pp, seed=cfg.seed)
    return v.to_dict(), EXIT_OK if v.verdict == "euclidean_confirmed" else EXIT_NEGATIVE


def cmd_generate(cfg):
    kind = _need(cfg.kind, "KIND")
    try:
        return gen.instance(kind, cfg.params, cfg.seed), EXIT_OK
    except ValueError as exc:
        raise CommandError(str(exc)) from None


HANDLERS = {
    "validate": cmd_validate, "factor": cmd_factor, "witnesses": cmd_witnesses, "isometries": cmd_isometries,
    "exact-sequence": cmd_exact_sequence, "norm-decompose": cmd_norm_decompose, "loewner": cmd_loewner,
    "gruber": cmd_gruber, "defect": cmd_defect, "eigen": cmd_eigen, "strike": cmd_strike,
    "generate": cmd_generate,
}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one command; returns ``(exit_code, report_text)``."""
    if cfg.command not in HANDLERS:
        body, code = {"error": f"unknown command {cfg.command!r}"}, EXIT_ERROR
    else:
        try:
            body, code = HANDLERS[cfg.command](cfg)
        except (io.InputError, CommandError, mc.StructuralError) as exc:
            body, code = {"error": str(exc)}, EXIT_ERROR
        except mf.BudgetExceeded as exc:
            body, code = {"error": f"budget exceeded: {exc}"}, EXIT_ERROR
        except rg.RefusalError as exc:
            body, code = {"refused": True, "reason": str(exc)}, EXIT_NEGATIVE
    if cfg.command == "generate" and code == EXIT_OK:
        report = body | {"schema": io.SCHEMA, "config": cfg.echo()}
    else:
        report = {"schema": io.SCHEMA, "config": cfg.echo(), "exit_code": code, "result": body}
    text = io.write_report(report, cfg.output, cfg.format)
    return code, text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="derham", description="Product decompositions of finite metric "
                                "spaces and finite-dimensional normed spaces.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input file (metric JSON/CSV, polytope, or subspace pair)")
    common.add_argument("--norm", help="norm description JSON")
    common.add_argument("--tol-metric", type=float, help="absolute tolerance on distances")
    common.add_argument("--tol-sq", type=float, help="absolute tolerance on squared distances")
    common.add_argument("--seed", type=int, default=0, help="seed for all sampling (default 0)")
    common.add_argument("--budget", type=int, help="cap on the number of points for searches")
    common.add_argument("--output", help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--figures", help="directory for PNG figures")
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "witnesses":
            sp.add_argument("--method", choices=("pruned", "brute"), default="pruned")
        if name == "generate":
            sp.add_argument("kind", choices=gen.KINDS)
            sp.add_argument("--params", default="{}", help="JSON object of generator parameters")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    params = {}
    if getattr(args, "params", None):
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as exc:
            print(f"error: --params is not valid JSON: {exc.msg}", file=sys.stderr)
            return EXIT_ERROR
    cfg = RunConfig(command=args.command, input=args.input, norm=args.norm, tol_metric=args.tol_metric,
                    tol_sq=args.tol_sq, seed=args.seed, budget=args.budget, output=args.output,
                    format=args.format, figures=args.figures, method=getattr(args, "method", "pruned"),
                    kind=getattr(args, "kind", None), params=params)
    code, text = run(cfg)
    if not cfg.output:
        sys.stdout.write(text)
    elif code == EXIT_ERROR:
        print(json.loads(text)["result"].get("error", "error"), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
