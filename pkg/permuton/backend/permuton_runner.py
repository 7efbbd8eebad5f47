#!/usr/bin/env python3
"""
Permuton Runner - command line for solving, sampling, verifying and rendering limit shapes

Exit codes: 0 success, 1 usage error, 2 input or solver failure, 3 verification failure.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

if __package__ in (None, ""):
    sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

import numpy as np

from permuton.solvers.boundary_solver import METHODS, BoundaryValues, choose_method, solve_boundary
from permuton.solvers.density import DensityField, DensityGrid, build_field, grid
from permuton.solvers.errors import PermutonError
from permuton.solvers.oracles import oracle_field
from permuton.solvers.region import RegionSpec, check_nondegenerate, is_convex, load_region
from permuton.solvers.sampler import empirical_height, sample, to_six_vertex
from permuton.solvers.verify import CheckReport, battery_passed, run_battery

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
EXIT_VERIFY = 3


def log(message: str) -> None:
    print(message, file=sys.stderr)


def write_json(path: Path, document: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(document, f, indent=2)
        f.write("\n")
    return path


def write_height_csv(path: Path, h: np.ndarray) -> Path:
    """h at lattice corners (i/n, j/n) as x,y,h rows with 17 significant digits"""
    n = h.shape[0] - 1
    with open(path, "w") as f:
        f.write("x,y,h\n")
        for i in range(n + 1):
            for j in range(n + 1):
                f.write(f"{i / n:.17g},{j / n:.17g},{h[i, j]:.17g}\n")
    return path


class PermutonRunner:
    def __init__(self, defaults_path: Optional[str] = None):
        """Load numerical defaults, by default from defaults.json next to this file"""
        if defaults_path is None:
            self.defaults_path = Path(__file__).parent / "defaults.json"
        else:
            self.defaults_path = Path(defaults_path)
        with open(self.defaults_path, "r") as f:
            self.defaults = json.load(f)

    def load_config(self, config_path: str, r: Optional[float] = None) -> RegionSpec:
        spec = load_region(config_path)
        if r is not None:
            spec = spec.with_r(r)
        return spec

    def method_hint(self, config_path: str) -> str:
        with open(config_path, "r") as f:
            return json.load(f).get("method", "auto")

    def tolerances(self, tol: Optional[float] = None) -> Dict[str, float]:
        tolerances = dict(self.defaults["verify"]["tolerances"])
        if tol is not None:
            tolerances.update(four_point=tol, marginals=tol, jumps=tol)
        return tolerances

    def verify_field(self, field: DensityField, tol: Optional[float] = None) -> List[CheckReport]:
        settings = self.defaults["verify"]
        return run_battery(
            field,
            self.tolerances(tol),
            seed=settings["seed"],
            n_rects=settings["n_rects"],
            n_abscissae=settings["n_abscissae"],
        )

    def report(self, reports: List[CheckReport], path: Path) -> bool:
        for item in reports:
            mark = "✅" if item.passed else "❌"
            log(f"   {mark} {item.name}: max residual {item.max_residual:.3e} (tol {item.tol:.0e})")
        write_json(path, [item.to_dict() for item in reports])
        return battery_passed(reports)

    def solve_field(self, spec: RegionSpec, method: str = "auto") -> Tuple[DensityField, Optional[BoundaryValues]]:
        """Density field for one region, with the boundary values when a solver produced it"""
        if method == "oracle" or (method == "auto" and not is_convex(spec.mask)):
            return oracle_field(spec), None
        check_nondegenerate(spec, self.defaults["ipf"]["max_iter"], self.defaults["ipf"]["tol"])
        if method == "auto":
            method = choose_method(spec)
        log(f"   📋 method: {method}")
        options = dict(self.defaults["continuation"]) if method == "continuation" else {}
        bv = solve_boundary(spec, method, **options)
        return build_field(spec, bv), bv

    def cmd_solve(
        self,
        config_path: str,
        r: Optional[float] = None,
        method: Optional[str] = None,
        out: Optional[str] = None,
        grid_n: Optional[int] = None,
        tol: Optional[float] = None,
    ) -> int:
        spec = self.load_config(config_path, r)
        method = method or self.method_hint(config_path)
        out_dir = Path(out) if out else Path("outputs") / spec.name
        log(f"🚀 Solving {spec.name} at r = {spec.r}")

        field, bv = self.solve_field(spec, method)
        grid_n = grid_n or self.defaults["grid"]["n"]
        write_json(out_dir / "field.json", field.to_document())
        grid(field, grid_n).to_csv(out_dir / "grid.csv")
        log(f"📦 Wrote field and {grid_n}x{grid_n} grid to {out_dir}")

        if bv is not None:
            write_json(out_dir / "boundary.json", bv.to_document())
        passed = self.report(self.verify_field(field, tol), out_dir / "report.json")
        log("🎯 verification passed" if passed else "❌ verification failed")
        return EXIT_OK if passed else EXIT_VERIFY

    def cmd_sample(
        self,
        config_path: str,
        n: Optional[int] = None,
        steps: Optional[int] = None,
        seed: Optional[int] = None,
        out: Optional[str] = None,
        r: Optional[float] = None,
    ) -> int:
        settings = self.defaults["sampler"]
        spec = self.load_config(config_path, r)
        n = n or settings["n"]
        steps = settings["steps"] if steps is None else steps
        seed = settings["seed"] if seed is None else seed
        out_dir = Path(out) if out else Path("outputs") / f"{spec.name}_sample"
        log(f"🚀 Sampling {spec.name}: n={n}, r={spec.r}, seed={seed}")

        result = sample(spec, n, steps, seed, settings["burn_in"])
        write_json(out_dir / "sample.json", result.to_document())
        to_six_vertex(result).to_csv(out_dir / "six_vertex.csv")
        write_height_csv(out_dir / "height.csv", empirical_height(result, settings["height_grid"]))
        log(f"🎯 {result.inversions} inversions after {result.sweeps} sweeps; outputs in {out_dir}")
        return EXIT_OK

    def cmd_verify(self, field_path: str, tol: Optional[float] = None) -> int:
        path = Path(field_path)
        with open(path, "r") as f:
            try:
                document = json.load(f)
            except json.JSONDecodeError as e:
                raise PermutonError(f"{path} is not valid JSON: {e}")
        field = DensityField.from_document(document)
        log(f"🚀 Verifying {path} ({field.source}, r = {field.r})")
        passed = self.report(self.verify_field(field, tol), path.with_name(path.stem + "_report.json"))
        log("🎯 verification passed" if passed else "❌ verification failed")
        return EXIT_OK if passed else EXIT_VERIFY

    def cmd_render(self, grid_csv: str, png_path: Optional[str] = None, color_scale: str = "linear") -> int:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        from matplotlib.colors import LogNorm, Normalize

        data = DensityGrid.from_csv(grid_csv)
        g = data.g_values
        support = g[g > 0]
        if support.size == 0:
            raise PermutonError(f"{grid_csv} has no positive density values")
        low, high = float(support.min()), float(g.max())
        if color_scale == "linear":
            norm = Normalize(vmin=0.0, vmax=high)
        elif color_scale == "log":
            norm = LogNorm(vmin=low, vmax=high)
        else:
            raise ValueError(f"unknown color scale {color_scale!r}, expected linear or log")

        png = Path(png_path) if png_path else Path(grid_csv).with_suffix(".png")
        settings = self.defaults["render"]
        fig, ax = plt.subplots(figsize=(5, 5))
        # g[i, j] is indexed [x][y]; imshow wants rows of constant y
        image = ax.imshow(
            np.ma.masked_where(g.T <= 0, g.T),
            origin="lower",
            extent=(0, 1, 0, 1),
            cmap=settings["cmap"],
            norm=norm,
            interpolation="nearest",
        )
        fig.colorbar(image, ax=ax, fraction=0.046)
        ax.set_title(f"min {low:.3g}   max {high:.3g}")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.savefig(png, dpi=settings["dpi"], bbox_inches="tight")
        plt.close(fig)
        log(f"🎯 Rendered {png}")
        return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        log(f"❌ {message}")
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="permuton", description="Limit shapes of restricted Mallows permutations")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = commands.add_parser("solve", help="solve a region and write field, grid and report")
    solve.add_argument("--config", required=True)
    solve.add_argument("--r", type=float)
    solve.add_argument("--method", choices=("auto", "oracle") + METHODS)
    solve.add_argument("--grid", type=int)
    solve.add_argument("--out")
    solve.add_argument("--tol", type=float)

    sampler = commands.add_parser("sample", help="run the Metropolis sampler on a region")
    sampler.add_argument("--config", required=True)
    sampler.add_argument("--r", type=float)
    sampler.add_argument("--n", type=int)
    sampler.add_argument("--steps", type=int)
    sampler.add_argument("--seed", type=int)
    sampler.add_argument("--out")

    verify = commands.add_parser("verify", help="run the check battery on a saved field")
    verify.add_argument("field")
    verify.add_argument("--tol", type=float)

    render = commands.add_parser("render", help="heat map of a grid CSV")
    render.add_argument("grid")
    render.add_argument("--out")
    render.add_argument("--scale", choices=("linear", "log"), default="linear")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """CLI interface for the permuton runner"""
    args = build_parser().parse_args(argv)
    runner = PermutonRunner()
    try:
        if args.command == "solve":
            return runner.cmd_solve(args.config, args.r, args.method, args.out, args.grid, args.tol)
        if args.command == "sample":
            return runner.cmd_sample(args.config, args.n, args.steps, args.seed, args.out, args.r)
        if args.command == "verify":
            return runner.cmd_verify(args.field, args.tol)
        return runner.cmd_render(args.grid, args.out, args.scale)
    except (PermutonError, FileNotFoundError, ValueError, KeyError) as e:
        log(f"❌ {type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
