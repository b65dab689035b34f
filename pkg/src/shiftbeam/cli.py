"""Experiment runner: solves, convergence tables, mesh comparisons,
Green's-function verification and decomposition reports.

Configuration is a single JSON document; command-line flags override its
fields.  Output is deterministic CSV (6 significant digits, scientific
notation), with run metadata in '#'-prefixed header lines.

Exit codes: 0 success, 2 validation error, 3 solver failure,
4 check failure (--check).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import asymptotics, errors, greens, interp
from .fem import DiscreteSpace, PairField, SolverError, assemble, solve
from .meshes import build_mesh
from .problem import ProblemSpec, make_example1, make_example2

__all__ = ["main", "RunConfig", "load_config"]

INNER_MESHES = ("bakhvalov_s", "shishkin", "weakeq", "weak_shishkin")


@dataclass
class RunConfig:
    example: str = "ex1"
    epsilon: float = 1e-4
    m: Optional[int] = None
    q: list = field(default_factory=lambda: [2])
    N: list = field(default_factory=lambda: [64, 128, 256])
    bmesh: str = "bakhvalov_s"
    imesh: str = "bakhvalov_s"
    sigma: Optional[float] = None
    q_ref: int = 5
    N_ref: int = 1024
    cache_dir: Optional[str] = None
    out: str = "out.csv"
    samples: int = 2001
    eps_list: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0
    variant: str = "m1"
    weak_strength: int = 2
    seed: int = 20240815
    check: bool = False


class ValidationError(ValueError):
    pass


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path:
        with open(path) as fh:
            data = json.load(fh)
        unknown = set(data) - set(asdict(cfg))
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        cfg = replace(cfg, **data)
    clean = {k: v for k, v in overrides.items() if v is not None}
    if clean:
        cfg = replace(cfg, **clean)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.example not in ("ex1", "ex2"):
        raise ValidationError("example must be ex1 or ex2")
    if not cfg.N:
        raise ValidationError("N list must not be empty")
    for n in cfg.N:
        if n < 8 or n % 8:
            raise ValidationError("every N must be a multiple of 8")
    if not cfg.q or any(qq < 1 for qq in cfg.q):
        raise ValidationError("q entries must be >= 1")
    if cfg.imesh not in INNER_MESHES:
        raise ValidationError(f"imesh must be one of {INNER_MESHES}")
    if cfg.bmesh not in ("bakhvalov_s", "shishkin"):
        raise ValidationError("bmesh must be bakhvalov_s or shishkin")
    if cfg.epsilon <= 0:
        raise ValidationError("epsilon must be positive")


def _spec(cfg: RunConfig) -> ProblemSpec:
    spec = (make_example1 if cfg.example == "ex1" else make_example2)(cfg.epsilon)
    if cfg.m is not None and cfg.m != spec.m:
        from dataclasses import replace as _rep
        spec = _rep(spec, m=cfg.m)
    return spec


def _mesh_for(cfg: RunConfig, spec: ProblemSpec, q: int, N: int,
              imesh: Optional[str] = None, sigma: Optional[float] = None):
    imesh = imesh or cfg.imesh
    sig = sigma if sigma is not None else (cfg.sigma if cfg.sigma is not None
                                           else q + 1.0)
    kind = {"weakeq": "weak_equidistant", "weak_shishkin": "weak_stype"}.get(
        imesh, "stype")
    inner = None if kind != "stype" else imesh
    if kind == "weak_stype":
        inner = "shishkin"
    return build_mesh(kind, N, spec.epsilon, sig, spec.beta, q,
                      cfg.bmesh, inner, strength=cfg.weak_strength)


def _solve_run(cfg: RunConfig, spec: ProblemSpec, q: int, N: int,
               imesh: Optional[str] = None,
               sigma: Optional[float] = None) -> PairField:
    mesh = _mesh_for(cfg, spec, q, N, imesh, sigma)
    space = DiscreteSpace(mesh, q, spec.m)
    return solve(assemble(spec, space))


def _header(cfg: RunConfig, cmd: str) -> list[str]:
    return [f"command: {cmd}", f"example: {cfg.example}",
            f"epsilon: {cfg.epsilon:.6e}", f"seed: {cfg.seed}"]


def _write_csv(path: str, header: list[str], columns: list[str],
               rows: list[list]) -> None:
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            out = []
            for v in row:
                if isinstance(v, float):
                    out.append(f"{v:.5e}")
                else:
                    out.append(str(v))
            fh.write(",".join(out) + "\n")


def cmd_solve(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    q, N = cfg.q[0], cfg.N[0]
    pair = _solve_run(cfg, spec, q, N)
    xs = np.linspace(0.0, 2.0, cfg.samples)
    from .fem import export_solution_csv
    export_solution_csv(pair, cfg.out, xs,
                        tuple(_header(cfg, "solve") + [f"q: {q}", f"N: {N}"]))
    return 0


def _reference(cfg: RunConfig, spec: ProblemSpec):
    return errors.compute_reference(spec, cfg.q_ref, cfg.N_ref,
                                    cache_dir=cfg.cache_dir)


def cmd_convergence(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    ref = _reference(cfg, spec)
    rows = []
    for q in cfg.q:
        reports = []
        for N in cfg.N:
            pair = _solve_run(cfg, spec, q, N)
            reports.append(errors.error_report(spec, pair, ref))
        for i, (N, rep) in enumerate(zip(cfg.N, reports)):
            nxt = reports[i + 1] if i + 1 < len(reports) else None
            rows.append([
                q, N, rep.energy_error,
                errors.eoc(rep.energy_error, nxt.energy_error) if nxt else "",
                rep.l2_u,
                errors.eoc(rep.l2_u, nxt.l2_u) if nxt else "",
                rep.l2_w,
                errors.eoc(rep.l2_w, nxt.l2_w) if nxt else "",
                rep.supercloseness,
                errors.eoc(rep.supercloseness, nxt.supercloseness) if nxt else "",
            ])
    _write_csv(cfg.out, _header(cfg, "convergence")
               + [f"mesh: {cfg.bmesh}-{cfg.imesh}", f"q_ref: {cfg.q_ref}",
                  f"N_ref: {cfg.N_ref}"],
               ["q", "N", "energy", "energy_rate", "l2_u", "l2_u_rate",
                "l2_w", "l2_w_rate", "supercloseness", "supercloseness_rate"],
               rows)
    return 0


def cmd_compare_meshes(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    ref = _reference(cfg, spec)
    q = cfg.q[0]
    combos = ["bakhvalov_s", "shishkin", "weakeq", "weak_shishkin"] \
        if spec.m == 1 else ["bakhvalov_s", "weakeq", "weak_shishkin"]
    table = {}
    for imesh in combos:
        es = []
        for N in cfg.N:
            pair = _solve_run(cfg, spec, q, N, imesh=imesh)
            rep = errors.error_report(spec, pair, ref,
                                      with_supercloseness=False)
            es.append(rep.energy_error)
        table[imesh] = es
    cols = ["N"]
    for imesh in combos:
        cols += [f"energy_{imesh}", f"rate_{imesh}"]
    rows = []
    for i, N in enumerate(cfg.N):
        row = [N]
        for imesh in combos:
            es = table[imesh]
            row.append(es[i])
            row.append(errors.eoc(es[i], es[i + 1]) if i + 1 < len(es) else "")
        rows.append(row)
    _write_csv(cfg.out, _header(cfg, "compare-meshes") + [f"q: {q}"],
               cols, rows)
    return 0


def cmd_greens(cfg: RunConfig) -> int:
    konst = greens.leading_constants()
    singles = [("gxx1_t0", 1.0, 2, 0), ("gxx1_t1", 1.0, 2, 1),
               ("gxx1_t2", 1.0, 2, 2), ("gxx1_t3", 1.0, 2, 3),
               ("gxx0_t0", 0.0, 2, 0), ("gxx0_t1", 0.0, 2, 1),
               ("gxx0_t2", 0.0, 2, 2), ("gxx0_t3", 0.0, 2, 3)]
    rows = []
    ok = True
    for eps in cfg.eps_list:
        params = greens.GreensParams(cfg.b, cfg.c, eps, cfg.variant)
        grid = greens.t_quadrature(eps)
        kernels = [greens.kernel_at(params, float(t)) for t in grid[0]]
        if cfg.variant == "m2":
            res = max(np.max(greens.kernel_residuals(params, k))
                      for k in kernels[:: max(len(kernels) // 16, 1)])
            rows.append(["max_kernel_residual", eps, res, 0.0, res])
            ok &= res < 1e-10
            continue
        for name, x0, dv, k in singles:
            val = eps * greens.moment_integrals(params, x0, dv, k,
                                                kernels, grid)
            tgt = konst[name]
            rel = abs(val - tgt) / abs(tgt)
            rows.append([name, eps, val, tgt, rel])
            if eps == min(cfg.eps_list):
                ok &= rel <= 1e-2
        for k in range(4):
            val = eps * greens.double_integrals(params, k, 2, kernels, grid)
            tgt = konst[f"double_t{k}"]
            rel = abs(val - tgt) / abs(tgt)
            rows.append([f"double_t{k}", eps, val, tgt, rel])
            if eps == min(cfg.eps_list):
                ok &= rel <= 2e-2
        vhalf = greens.moment_integrals(params, 0.5, 0, 0, kernels, grid)
        rel = abs(vhalf - konst["g_half"]) / konst["g_half"]
        rows.append(["g_half", eps, vhalf, konst["g_half"], rel])
        if eps == min(cfg.eps_list):
            ok &= rel <= 1e-2
        sm = greens.assemble_A(params, cfg.d)
        tgt = greens.leading_det(cfg.b, cfg.c, cfg.d)
        rel = abs(sm.det - tgt) / abs(tgt)
        rows.append(["det_A", eps, sm.det, tgt, rel])
        if eps == min(cfg.eps_list):
            ok &= rel <= 5e-2
    _write_csv(cfg.out, _header(cfg, "greens")
               + [f"b: {cfg.b}", f"c: {cfg.c}", f"d: {cfg.d}",
                  f"variant: {cfg.variant}"],
               ["name", "epsilon", "value", "target", "rel_error"], rows)
    if cfg.check and not ok:
        return 4
    return 0


def cmd_decompose(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    if not spec.constant_coefficients:
        raise ValidationError("decompose needs a constant-coefficient example")
    if len(cfg.eps_list) > 1 and cfg.check:
        pass
    comps_by_eps = {}
    ratios = []
    header = _header(cfg, "decompose")
    rows = []
    q, N = max(cfg.q[0], 2), max(cfg.N[-1], 128)
    diffs = []
    for eps in cfg.eps_list:
        spec_e = spec.with_epsilon(eps)
        comps = asymptotics.leading_components(spec_e)
        pair = _solve_run(replace(cfg, epsilon=eps), spec_e, q, N)
        rep = asymptotics.decomposition_compare(spec_e, pair, comps)
        diffs.append(rep["max_diff"])
        header.append(f"eps {eps:.3e}: max_diff {rep['max_diff']:.5e} "
                      f"u3_peak {rep['u3_peak_location']:.4f}")
        comps_by_eps[eps] = (comps, pair)
    for e0, e1 in zip(cfg.eps_list[:-1], cfg.eps_list[1:]):
        i0, i1 = cfg.eps_list.index(e0), cfg.eps_list.index(e1)
        ratios.append(diffs[i0] / diffs[i1])
        header.append(f"ratio {e0:.0e}/{e1:.0e}: {diffs[i0]/diffs[i1]:.3f}")
    # slope fits of the layer-pair energies across the sweep
    for kindname, pick in (("E", 1), ("W", 3)):
        vals = []
        for eps in cfg.eps_list:
            comps, _ = comps_by_eps[eps]
            _, el, er, wl, wr = comps
            cs = (el, er) if kindname == "E" else (wl, wr)
            v = np.sqrt(sum(asymptotics.layer_pair_energy(cc, spec.beta,
                                                          spec.delta) ** 2
                            for cc in cs))
            vals.append(v)
        slope = asymptotics.scaling_slope(cfg.eps_list, vals)
        target = spec.m - 0.5 if kindname == "E" else 2.5
        header.append(f"norm_slope_{kindname}: {slope:.4f} (target {target})")
    eps0 = cfg.eps_list[0]
    comps, pair = comps_by_eps[eps0]
    s0, el, er, wl, wr = comps
    xs = np.linspace(0.0, 2.0, cfg.samples)
    v0 = asymptotics.v0_eval(s0, el, er, wl, wr, xs)
    rows = [[x, float(s0(np.array([x]))[0]), float(el(x) + er(x)),
             float(wl(x) if x <= 1 else wr(x)), float(v),
             float(pair.eval_u(np.array([x]))[0])]
            for x, v in zip(xs, v0)]
    _write_csv(cfg.out, header, ["x", "S0", "E", "W", "V0", "u_h"], rows)
    if cfg.check and len(diffs) >= 2 and diffs[0] / diffs[1] < 5.0:
        return 4
    return 0


def cmd_postprocess(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    ref = _reference(cfg, spec)
    q = cfg.q[0]
    sigma = cfg.sigma if cfg.sigma is not None else q + 2.0
    rows = []
    prev = None
    for N in cfg.N:
        pair = _solve_run(cfg, spec, q, N, sigma=sigma)
        rep = errors.error_report(spec, pair, ref, with_supercloseness=False,
                                  with_postprocessing=True)
        rate = errors.eoc(prev[0], rep.energy_error) if prev else ""
        pp_rate = errors.eoc(prev[1], rep.postprocessed_energy) if prev else ""
        rows.append([N, rep.energy_error, rate,
                     rep.postprocessed_energy, pp_rate])
        prev = (rep.energy_error, rep.postprocessed_energy)
    _write_csv(cfg.out, _header(cfg, "postprocess")
               + [f"q: {q}", f"sigma: {sigma:g}"],
               ["N", "energy", "rate", "pp_energy", "pp_rate"], rows)
    return 0


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftbeam",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "convergence", "compare-meshes", "greens",
                 "decompose", "postprocess"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--example", choices=("ex1", "ex2"), default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--m", type=int, choices=(1, 2), default=None)
        p.add_argument("--q", type=_int_list, default=None,
                       help="comma-separated polynomial degrees")
        p.add_argument("--N", type=_int_list, default=None,
                       help="comma-separated cell counts (multiples of 8)")
        p.add_argument("--bmesh", choices=("bakhvalov_s", "shishkin"),
                       default=None)
        p.add_argument("--imesh", choices=INNER_MESHES, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--q-ref", dest="q_ref", type=int, default=None)
        p.add_argument("--N-ref", dest="N_ref", type=int, default=None)
        p.add_argument("--cache-dir", dest="cache_dir", default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--eps-list", dest="eps_list", type=_float_list,
                       default=None)
        p.add_argument("--b", type=float, default=None)
        p.add_argument("--c", type=float, default=None)
        p.add_argument("--d", type=float, default=None)
        p.add_argument("--variant", choices=("m1", "m2"), default=None)
        p.add_argument("--weak-strength", dest="weak_strength", type=int,
                       choices=(2, 3), default=None,
                       help="layer amplitude order the weak transitions "
                            "resolve (2 reproduces the reported tables)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--check", action="store_true", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
        if cfg.out == "out.csv" and overrides.get("out") is None:
            cfg = replace(cfg, out=f"{command.replace('-', '_')}.csv")
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    handler = {
        "solve": cmd_solve,
        "convergence": cmd_convergence,
        "compare-meshes": cmd_compare_meshes,
        "greens": cmd_greens,
        "decompose": cmd_decompose,
        "postprocess": cmd_postprocess,
    }[command]
    try:
        return handler(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
