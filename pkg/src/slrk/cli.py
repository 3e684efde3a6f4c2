"""Command-line interface: verify, search, stability, integrate, ns-converge, ns-run.

All numeric outputs are CSV or JSON. Runs that write files also write a
run manifest (JSON) next to them; re-running an identical manifest
reproduces the outputs bit for bit. Exit codes: 0 success, 1 usage
error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, navier_stokes
from .integrator import OdeProblem, integrate, make_plan, slrk_step
from .linop import diagonal_operator
from .order_conditions import order_residuals, verified_order
from .search import (
    SearchConfig,
    multi_start_search,
    rationalize,
    search,
    uniform_c_pattern,
)
from .stability import region_boundary, stability_polynomial
from .tableau import (
    BUILTIN_TABLEAUX,
    Tableau,
    parse_tableau,
    serialize_tableau,
)

USAGE_ERROR = 1
VERIFY_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    """Record of one CLI run, written next to its output files."""

    subcommand: str
    parameters: dict
    seeds: list = field(default_factory=list)
    version: str = __version__
    outputs: list = field(default_factory=list)
    duration_s: float = 0.0

    def write(self, path: Path):
        payload = {
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "seeds": self.seeds,
            "version": self.version,
            "outputs": [str(p) for p in self.outputs],
            "duration_s": self.duration_s,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_tableau(name_or_path: str) -> Tableau:
    """Load a tableau from a file path or a builtin name (rk4, rk6, ...)."""
    path = Path(name_or_path)
    if path.exists():
        return parse_tableau(path.read_text())
    if name_or_path in BUILTIN_TABLEAUX:
        return BUILTIN_TABLEAUX[name_or_path]()
    raise FileNotFoundError(
        f"no tableau file {name_or_path!r} and no builtin of that name "
        f"(builtins: {', '.join(sorted(BUILTIN_TABLEAUX))})"
    )


def _parse_complex(text: str) -> complex:
    re_im = text.split(",")
    if len(re_im) == 1:
        return complex(float(re_im[0]), 0.0)
    if len(re_im) == 2:
        return complex(float(re_im[0]), float(re_im[1]))
    raise ValueError(f"expected RE or RE,IM, got {text!r}")


def _thread_count() -> int:
    return max(1, int(os.environ.get("SLRK_THREADS", "1")))


def cmd_verify(args) -> int:
    if not 1 <= args.order <= 10:
        print("verify: --order must be between 1 and 10", file=sys.stderr)
        return USAGE_ERROR
    tab = load_tableau(args.tableau)
    conditions = order_residuals(tab, args.order)
    satisfied = 0
    for cond in conditions:
        ok = cond.residual == 0
        satisfied += ok
        print(f"order {cond.tree.order} tree {list(cond.tree.level_sequence())} "
              f"density {cond.density}: residual {cond.residual}")
    total = len(conditions)
    if satisfied == total:
        print(f"{total}/{total} conditions satisfied exactly")
    else:
        print(f"{satisfied}/{total} conditions satisfied exactly")
    order = verified_order(tab)
    print(f"verified order: {order}")
    return 0 if satisfied == total else VERIFY_FAILURE


def cmd_search(args) -> int:
    delta_c = Fraction(args.dc)
    if args.c_pattern:
        pattern = tuple(Fraction(tok) for tok in args.c_pattern.split(","))
    else:
        pattern = uniform_c_pattern(args.stages, delta_c)
    cfg = SearchConfig(
        stages=args.stages,
        target_order=args.order,
        delta_c=delta_c,
        c_pattern=pattern,
        rng_seed=args.seed,
        max_iters=args.max_iters,
        residual_tol=args.tol,
    )
    t0 = time.perf_counter()
    results = _run_seeds(cfg, args.seeds)
    out_stem = Path(args.out)
    out_stem.parent.mkdir(parents=True, exist_ok=True)
    outputs = []
    summary = []
    n_converged = 0
    for idx, res in enumerate(results):
        entry = {
            "seed_index": idx,
            "rng_seed": res.rng_seed,
            "status": res.status,
            "iterations": len(res.history) - 1,
            "final_residual": res.history[-1],
        }
        if res.status == "converged":
            n_converged += 1
            # Exact dyadic rationals preserve the float values in the text
            # format. Row sums are then snapped to the prescribed abscissae
            # (a change of order residual_tol in one entry per row) so the
            # stored tableau is exactly spacing-conforming and steppable.
            a_exact = [[Fraction(v) for v in row] for row in res.tableau.a]
            for i in range(1, cfg.stages):
                a_exact[i][i - 1] += pattern[i] - sum(a_exact[i][:i])
            float_tab = Tableau(
                tuple(tuple(row) for row in a_exact),
                tuple(Fraction(v) for v in res.tableau.b),
                name=f"search seed {idx} (float)",
            )
            float_path = out_stem.with_name(f"{out_stem.name}_seed{idx}_float.tab")
            float_path.write_text(serialize_tableau(float_tab))
            outputs.append(float_path)
            entry["float_tableau"] = str(float_path)
            exact = rationalize(res.tableau, args.max_denominator, args.order)
            if exact is not None:
                exact = Tableau(exact.a, exact.b, name=f"search seed {idx} (exact)")
                exact_path = out_stem.with_name(f"{out_stem.name}_seed{idx}_exact.tab")
                exact_path.write_text(serialize_tableau(exact))
                outputs.append(exact_path)
                entry["exact_tableau"] = str(exact_path)
        summary.append(entry)
    summary_path = out_stem.with_name(f"{out_stem.name}_summary.json")
    summary_path.write_text(json.dumps(
        {"converged": n_converged, "seeds": summary}, indent=2) + "\n")
    outputs.append(summary_path)
    manifest = RunManifest(
        subcommand="search",
        parameters={
            "stages": args.stages, "order": args.order, "dc": str(delta_c),
            "c_pattern": [str(ci) for ci in pattern], "seeds": args.seeds,
            "seed": args.seed, "max_iters": args.max_iters, "tol": args.tol,
            "max_denominator": args.max_denominator,
        },
        seeds=[int(r.rng_seed) for r in results],
        outputs=outputs,
        duration_s=time.perf_counter() - t0,
    )
    manifest.write(out_stem.with_name(f"{out_stem.name}_manifest.json"))
    print(f"{n_converged}/{args.seeds} seeds converged")
    return 0


def _run_seeds(cfg: SearchConfig, n_seeds: int):
    threads = _thread_count()
    if threads == 1:
        return multi_start_search(cfg, n_seeds)
    from concurrent.futures import ThreadPoolExecutor

    seeds = np.random.SeedSequence(cfg.rng_seed).generate_state(n_seeds)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: search(replace(cfg, rng_seed=int(s))), seeds))


def cmd_stability(args) -> int:
    t0 = time.perf_counter()
    z2 = _parse_complex(args.z2)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    curves = [(args.tableau, out)]
    if args.compare_rk4_rk6:
        curves = [("rk4", out.with_name(f"{out.stem}_rk4{out.suffix}")),
                  ("rk6", out.with_name(f"{out.stem}_rk6{out.suffix}"))]
    outputs = []
    for tab_name, path in curves:
        tab = load_tableau(tab_name)
        phi = stability_polynomial(tab)
        boundary = region_boundary(phi, z2, args.samples)
        lines = ["re(z),im(z)"]
        lines += [f"{z.real:.12g},{z.imag:.12g}" for z in boundary.points]
        path.write_text("\n".join(lines) + "\n")
        outputs.append(path)
        if boundary.skipped_angles:
            print(f"{path}: {len(boundary.skipped_angles)} rays had no crossing",
                  file=sys.stderr)
    manifest = RunManifest(
        subcommand="stability",
        parameters={"tableau": args.tableau, "z2": args.z2, "samples": args.samples,
                    "compare_rk4_rk6": args.compare_rk4_rk6},
        outputs=outputs,
        duration_s=time.perf_counter() - t0,
    )
    manifest.write(out.with_name(f"{out.stem}_manifest.json"))
    return 0


def cmd_integrate(args) -> int:
    t0 = time.perf_counter()
    tab = load_tableau(args.tableau)
    if args.problem == "scalar":
        lam1 = _parse_complex(args.lam1)
        lam2 = _parse_complex(args.lam2)
        problem = OdeProblem(g=lambda u: lam1 * u,
                             A=diagonal_operator(np.array([lam2])), n=1)
        u0 = np.ones(1, dtype=complex)
    else:
        grid = navier_stokes.make_grid(args.n)
        problem = navier_stokes.make_problem(grid, args.nu)
        u0 = navier_stokes.initial_condition(grid)
    plan = make_plan(problem, tab, args.h)
    final = integrate(plan, u0, args.steps)
    if args.problem == "ns":
        field_phys = navier_stokes.vorticity_field(final)
        norms = {"linf": float(np.max(np.abs(field_phys))),
                 "l2": float(np.sqrt(np.mean(field_phys ** 2)))}
    else:
        norms = {"linf": float(np.max(np.abs(final))),
                 "l2": float(np.linalg.norm(final)),
                 "final_re": float(final[0].real),
                 "final_im": float(final[0].imag)}
    payload = {
        "problem": args.problem,
        "tableau": args.tableau,
        "h": args.h,
        "steps": args.steps,
        "norms": norms,
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        manifest = RunManifest(
            subcommand="integrate",
            parameters={k: v for k, v in vars(args).items() if k != "func"},
            outputs=[out],
            duration_s=time.perf_counter() - t0,
        )
        manifest.write(out.with_name(f"{out.stem}_manifest.json"))
    else:
        print(text, end="")
    return 0


def cmd_ns_converge(args) -> int:
    t0 = time.perf_counter()
    steps = [int(tok) for tok in args.steps.split(",")]
    grid = navier_stokes.make_grid(args.n)
    result = navier_stokes.convergence_study(
        grid, args.nu, args.t, steps, reference_steps=args.ref)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["scheme,m,linf_error"]
    lines += [f"{c.scheme},{c.n_steps},{c.linf_error:.12g}" for c in result.cells]
    out.write_text("\n".join(lines) + "\n")
    slopes_path = out.with_name(f"{out.stem}_slopes{out.suffix}")
    slines = ["scheme,fitted_slope,fit_points"]
    slines += [f"{name},{slope:.6g},{';'.join(map(str, result.fit_points[name]))}"
               for name, slope in result.slopes.items()]
    slopes_path.write_text("\n".join(slines) + "\n")
    manifest = RunManifest(
        subcommand="ns-converge",
        parameters={"n": args.n, "nu": args.nu, "t": args.t,
                    "steps": steps, "ref": args.ref},
        outputs=[out, slopes_path],
        duration_s=time.perf_counter() - t0,
    )
    manifest.write(out.with_name(f"{out.stem}_manifest.json"))
    for name, slope in result.slopes.items():
        print(f"{name}: fitted slope {slope:.3f} over m = {result.fit_points[name]}")
    return 0


def write_snapshot(path: Path, field_phys: np.ndarray, t: float):
    """Binary vorticity snapshot: text header (n, time), then row-major float64."""
    n = field_phys.shape[0]
    with open(path, "wb") as fh:
        fh.write(f"n {n}\ntime {t:.17g}\n".encode())
        fh.write(np.ascontiguousarray(field_phys, dtype=np.float64).tobytes())


def read_snapshot(path: Path) -> tuple[np.ndarray, float]:
    """Inverse of write_snapshot."""
    raw = path.read_bytes()
    first = raw.index(b"\n")
    second = raw.index(b"\n", first + 1)
    n = int(raw[:first].split()[1])
    t = float(raw[first + 1:second].split()[1])
    data = np.frombuffer(raw[second + 1:], dtype=np.float64)
    return data.reshape(n, n), t


def cmd_ns_run(args) -> int:
    t0 = time.perf_counter()
    tab = load_tableau(args.tableau)
    grid = navier_stokes.make_grid(args.n)
    problem = navier_stokes.make_problem(grid, args.nu)
    h = args.t / args.steps
    plan = make_plan(problem, tab, h)
    w_hat = navier_stokes.initial_condition(grid)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    outputs = []
    for step in range(1, args.steps + 1):
        w_hat = slrk_step(plan, w_hat)
        if args.every and step % args.every == 0 and step < args.steps:
            path = out.with_name(f"{out.stem}_step{step}{out.suffix}")
            write_snapshot(path, navier_stokes.vorticity_field(w_hat), step * h)
            outputs.append(path)
    write_snapshot(out, navier_stokes.vorticity_field(w_hat), args.t)
    outputs.append(out)
    manifest = RunManifest(
        subcommand="ns-run",
        parameters={"n": args.n, "nu": args.nu, "t": args.t, "steps": args.steps,
                    "tableau": args.tableau, "every": args.every},
        outputs=outputs,
        duration_s=time.perf_counter() - t0,
    )
    manifest.write(out.with_name(f"{out.stem}_manifest.json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slrk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"slrk {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("verify", help="check order conditions of a tableau exactly")
    p.add_argument("--tableau", required=True, help="tableau file or builtin name")
    p.add_argument("--order", type=int, required=True, help="claimed order")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", help="Newton search for gridded-abscissa tableaux")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--dc", required=True, help="grid spacing as p/q")
    p.add_argument("--seeds", type=int, default=100, help="number of initial guesses")
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--c-pattern", default="",
                   help="comma-separated target abscissae (default: 0,dc,2dc,...)")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-denominator", type=int, default=1000)
    p.add_argument("--out", default="search_out", help="output stem")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("stability", help="stability-region boundary to CSV")
    p.add_argument("--tableau", required=True)
    p.add_argument("--z2", default="0,0", help="stiff offset RE,IM")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--out", default="boundary.csv")
    p.add_argument("--compare-rk4-rk6", action="store_true",
                   help="emit both builtin curves (suffixes _rk4/_rk6)")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("integrate", help="fixed-step integration, final norms as JSON")
    p.add_argument("--tableau", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--problem", choices=["scalar", "ns"], default="scalar")
    p.add_argument("--lam1", default="0,1", help="explicit rate RE,IM (scalar problem)")
    p.add_argument("--lam2", default="-10,0", help="stiff rate RE,IM (scalar problem)")
    p.add_argument("--n", type=int, default=64, help="grid size (ns problem)")
    p.add_argument("--nu", type=float, default=1e-2, help="viscosity (ns problem)")
    p.add_argument("--out", default="", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("ns-converge", help="Navier-Stokes convergence study to CSV")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--nu", type=float, default=1e-2)
    p.add_argument("--t", type=float, default=5.0)
    p.add_argument("--steps", default="32,64,128,256,512,1024",
                   help="comma-separated step counts")
    p.add_argument("--ref", type=int, default=4096, help="reference step count")
    p.add_argument("--out", default="conv.csv")
    p.set_defaults(func=cmd_ns_converge)

    p = sub.add_parser("ns-run", help="integrate the benchmark flow, dump snapshots")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--nu", type=float, default=1e-2)
    p.add_argument("--t", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=512)
    p.add_argument("--tableau", default="rk6")
    p.add_argument("--every", type=int, default=0,
                   help="also dump every K steps (0: final only)")
    p.add_argument("--out", default="vorticity.bin")
    p.set_defaults(func=cmd_ns_run)

    return parser


_COMPLEX_FLAGS = {"--z2", "--lam1", "--lam2"}


def _merge_complex_values(argv):
    """Join '--z2 -10,0' into '--z2=-10,0' so argparse keeps the value."""
    out = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok in _COMPLEX_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(_merge_complex_values(list(argv)))
    return args.func(args)


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
