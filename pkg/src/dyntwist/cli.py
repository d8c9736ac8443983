"""Command-line driver: ``dyntwist verify classical|quantize|compose <doc>``.

Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 bad input or
internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from pathlib import Path

from . import __version__
from .dynamical_r import (
    cdybe_residual,
    check_z_invariant,
    compose_classical,
    dr_squared_check,
    equivariant_cochain_battery,
    is_equivariant,
    nondegeneracy_certificate,
    quasi_poisson_defect,
    splitting_r_matrix,
)
from .errors import DegenerateDenominator, DynTwistError, InputInvalid, NotStronglyInvariant
from .fedosov import FedosovEngine
from .reduction import (
    base_momentum_check,
    build_product_model,
    momentum_check_classical,
    quantum_momentum_check,
    reduced_bracket_check,
    subalgebra,
)
from .serialize import PIPELINES, Instance, dumps, instance_hash, load_instance, twist_to_json
from .twist import (
    CompatibleStar,
    extract_twist,
    h_is_abelian,
    r_as_tensor,
    reconstruct_star,
    semiclassical_part,
    twist_equation_residual,
    twist_equivariance_defect,
    xu_axioms_check,
)

__all__ = ["run_pipeline", "main"]


def _witness(obj, limit=240):
    text = obj if isinstance(obj, str) else repr(obj)
    return text if len(text) <= limit else text[: limit - 3] + "..."


class _Report:
    def __init__(self, timing: bool):
        self.checks = []
        self.outputs = {}
        self.timing = timing

    def run(self, name, fn, orders=None):
        """Run ``fn`` returning (ok, witness); record the outcome."""
        t0 = time.perf_counter()
        ok, witness = fn()
        rec = {"name": name, "status": "pass" if ok else "fail"}
        if orders:
            rec["orders"] = orders
        if not ok:
            rec["witness"] = _witness(witness)
        if self.timing:
            rec["seconds"] = round(time.perf_counter() - t0, 3)
        self.checks.append(rec)
        return ok

    def skip(self, name, reason):
        self.checks.append({"name": name, "status": "skipped", "reason": reason})


def _zero(obj):
    return (True, None) if obj.is_zero() else (False, obj)


def _classical(inst: Instance, rep: _Report, D_x: int):
    R = inst.R
    rep.run("jacobi", lambda: (True, None))
    rep.run("z_invariant", lambda: (check_z_invariant(R), R.Z))
    rep.run("r_equivariance", lambda: (is_equivariant(R.L, R.ctx, R.hidx, R.r), R.r))
    rep.run("cdybe", lambda: _zero(cdybe_residual(R)))
    battery = equivariant_cochain_battery(R, 24)
    rep.run("d_r_squared", lambda: dr_squared_check(R, battery), {"cochains": len(battery)})

    def qp():
        defect = quasi_poisson_defect(R, D_x)
        return (not defect, next(iter(defect.items()), None))

    rep.run("pi_r_quasi_poisson", qp, {"D_x": D_x})
    if R.Z.is_zero() and R.d:
        rep.run("base_momentum_map", lambda: _result(base_momentum_check(R, min(D_x, 6))))
    rep.outputs["r"] = R.r.to_terms()


def _result(res: dict):
    return res["ok"], res["failure"]


def _quantize(inst: Instance, rep: _Report, N: int):
    R = inst.R
    orders = {"N_hbar": N}
    E = FedosovEngine(R.L, R.ctx, R.hidx, N, R=R)
    rep.run("fedosov_fixed_point", lambda: _zero(E.fixed_point_residual()), orders)
    rep.run("weyl_curvature", lambda: _zero(E.weyl_curvature() - E.central_form(E.omega_form, 0)), orders)

    def strong():
        try:
            return E.strong_invariance_check(), None
        except NotStronglyInvariant as e:
            return False, str(e)

    if not rep.run("strong_invariance", strong, orders):
        return
    sp = CompatibleStar(E)
    axioms = xu_axioms_check(sp)
    for name, (ok, wit) in axioms.items():
        rep.run(f"compatible_{name}", lambda ok=ok, wit=wit: (ok, wit), orders)
    J = extract_twist(sp)
    one = J.hbar_part(0)
    rep.run("twist_unit", lambda: (one == one.one(J.L, J.ctx, 2, J.N, J.scaled), one), orders)
    rep.run("twist_semiclassical", lambda: _zero(semiclassical_part(J) - r_as_tensor(R.L, R.ctx, R.r, J.N)), orders)
    abelian = h_is_abelian(R.L, R.hidx)
    if abelian:
        rep.run("twist_equation", lambda: _zero(twist_equation_residual(J)), orders)
    else:
        rep.skip("twist_equation", "dynamical shift needs abelian h")

    def equiv():
        bad = [d for d in twist_equivariance_defect(J, R.hidx) if not d.is_zero()]
        return (not bad, bad[0] if bad else None)

    rep.run("twist_equivariance", equiv, orders)
    if abelian:
        rep.run("twist_round_trip", lambda: _zero(reconstruct_star(J, sp.oc) - sp(sp.slot(), sp.slot())), orders)
    else:
        rep.skip("twist_round_trip", "dynamical shift needs abelian h")
    rep.outputs["twist"] = twist_to_json(J)


def _compose(inst: Instance, rep: _Report, N: int, D_x: int):
    L, rho = inst.L, inst.R
    t, mprime = L.t, L.mprime
    rep.run("rho_cdybe", lambda: _zero(cdybe_residual(rho)))
    theta = compose_classical(L, rho, t, mprime)
    rep.run("theta_cdybe", lambda: _zero(cdybe_residual(theta)))
    model = build_product_model(L, rho, t, mprime, D_x=min(D_x, 4))
    for which in ("mu", "nu", "base"):
        rep.run(f"momentum_{which}", lambda w=which: _result(momentum_check_classical(model, w)))
    reduced = reduced_bracket_check(model, theta.r)
    rep.run("reduced_bracket", lambda: _result(reduced))
    rep.run("routes_agree", lambda: (reduced["ok"] == cdybe_residual(theta).is_zero(), reduced["failure"]))
    rep.outputs["theta"] = theta.r.to_terms()

    # quantum core on V×H, with h carrying the inner splitting
    hpos = {g: a for a, g in enumerate(rho.hidx)}
    tpos = tuple(hpos[g] for g in t)
    Lh = subalgebra(L, rho.hidx).with_splitting(tpos, tuple(hpos[g] for g in mprime))
    Rt = splitting_r_matrix(Lh, Lh.lambda_context(nondegeneracy_certificate(Lh)[1]))
    orders = {"N_hbar": N, "D_x": D_x}
    Et = FedosovEngine(Lh, Rt.ctx, Rt.hidx, N, R=Rt)
    sp = CompatibleStar(Et)
    try:
        base = FedosovEngine(L, rho.ctx, rho.hidx, N, R=rho)
    except DynTwistError as e:
        base = None
        rep.skip("quantum_product_momentum", f"π_ρ is not symplectic: {e}")
    q = quantum_momentum_check(sp, tpos, D_x=D_x, base_star=base)
    for name, ok in q.results.items():
        rep.run(f"quantum_{name}", lambda ok=ok, name=name: (ok, q.failure if q.failure and q.failure[0] == name else None), orders)
    noq = quantum_momentum_check(sp, tpos, D_x=D_x, use_Q=False)
    rep.run("quantum_no_gauge_control_fails", lambda: (not noq.results["morphism"], "ungauged morphism unexpectedly passed"), orders)


def run_pipeline(inst: Instance, pipeline: str | None = None, N_hbar: int | None = None, D_x: int | None = None,
                 timing: bool = True) -> dict:
    """Run a pipeline and return the certificate report as a JSON-ready dict."""
    pipeline = pipeline or inst.pipeline
    if pipeline not in PIPELINES:
        raise InputInvalid(f"unknown pipeline {pipeline!r}", "pipeline")
    N = inst.N_hbar if N_hbar is None else N_hbar
    D = inst.D_x if D_x is None else D_x
    if D < 2 * N + 2:
        raise InputInvalid(f"D_x = {D} is below 2·N_hbar + 2 = {2 * N + 2}", "truncation.D_x")
    if pipeline == "compose" and inst.L.t is None:
        raise InputInvalid("compose needs an inner splitting t ⊕ m'", "splitting.t")
    rep = _Report(timing)
    if pipeline == "classical":
        _classical(inst, rep, D)
    elif pipeline == "quantize":
        _quantize(inst, rep, N)
    else:
        _compose(inst, rep, N, D)
    failed = any(c["status"] == "fail" for c in rep.checks)
    return {
        "artifact_version": __version__,
        "instance": inst.name,
        "instance_hash": instance_hash(inst.raw),
        "pipeline": pipeline,
        "truncation": {"N_hbar": N, "D_x": D, "base_point": [str(v) for v in inst.base_point]},
        "checks": rep.checks,
        "outputs": rep.outputs,
        "status": "fail" if failed else "pass",
    }


def format_text(report: dict) -> str:
    lines = [f"{report['pipeline']} {report['instance'] or '<unnamed>'} "
             f"(N_hbar={report['truncation']['N_hbar']}, D_x={report['truncation']['D_x']})"]
    for c in report["checks"]:
        extra = f"  [{c['seconds']}s]" if "seconds" in c else ""
        lines.append(f"  {c['status'].upper():7} {c['name']}{extra}")
        if "witness" in c:
            lines.append(f"          witness: {c['witness']}")
        if "reason" in c:
            lines.append(f"          reason: {c['reason']}")
    lines.append(f"status: {report['status']}")
    return "\n".join(lines) + "\n"


def _parser():
    p = argparse.ArgumentParser(prog="dyntwist", description="Exact verification of dynamical r-matrices and their twist quantizations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run a verification pipeline on an instance document")
    v.add_argument("pipeline", choices=PIPELINES)
    v.add_argument("doc", type=Path)
    v.add_argument("--hbar", type=int, help="override the hbar truncation order")
    v.add_argument("--jet", type=int, help="override the x-jet order D_x")
    v.add_argument("--out", type=Path, help="write the twist (quantize) or θ (compose) JSON here")
    v.add_argument("--report", choices=("json", "text"), default="text")
    v.add_argument("--no-timing", action="store_true", help="omit timings so reports are byte-reproducible")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        inst = load_instance(args.doc)
        report = run_pipeline(inst, args.pipeline, args.hbar, args.jet, timing=not args.no_timing)
    except (InputInvalid, DegenerateDenominator, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:  # report internal errors with the traceback, exit 2
        traceback.print_exc()
        return 2
    if args.out is not None:
        key = {"quantize": "twist", "compose": "theta", "classical": "r"}[args.pipeline]
        if key in report["outputs"]:
            args.out.write_text(dumps(report["outputs"][key]), encoding="utf-8")
    if args.report == "json":
        sys.stdout.write(dumps(report))
    else:
        sys.stdout.write(format_text(report))
    return 0 if report["status"] == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
