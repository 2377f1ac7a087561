"""Boundary-localization diagnostics: amplified maps and radial decay profiles.

Writes bkmap.csv / profile.csv per shape into --out and emits standalone plot
scripts next to them.
"""
import argparse
from pathlib import Path

from dtnlab import analysis, geometry
from dtnlab.cli import RunConfig, run
from dtnlab.pipeline import solve_steklov


CASES = {
    "square": (geometry.RectangleSpec(2.0, 2.0), 15),
    "pentagon": (geometry.RegularPolygonSpec(5, 1.0), 15),
    "disk": (geometry.DiskSpec(1.0), 20),
    "deformed": (geometry.DeformedDiskSpec(0.02, 5), 20),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.0075)
    ap.add_argument("--out", default="localization_out")
    ap.add_argument("--cases", nargs="*", default=list(CASES))
    args = ap.parse_args()

    for name in args.cases:
        spec, k = CASES[name]
        out = Path(args.out) / name
        out.mkdir(parents=True, exist_ok=True)
        dom = geometry.build_domain(spec)
        res = solve_steklov(dom, args.h, 0.0, k + 1, extensions=True)
        loc = analysis.bk_map(res.spectrum, k, res.mesh, dom)
        prof = analysis.uk_profile(res.spectrum, k, res.mesh, dom)
        analysis.bkmap_to_csv(loc, res.mesh, out / "bkmap.csv")
        analysis.profile_to_csv(prof, out / "profile.csv")
        analysis.summary_to_json(
            out / "report.json", mu_k=loc.mu, max_B=loc.max_amplified(), k=k
        )
        run(RunConfig(command="emit-plots", out=str(out), artifacts=str(out)))
        print(f"{name}: mu_{k} = {loc.mu:.4f}, max B = {loc.max_amplified():.3f} -> {out}")


if __name__ == "__main__":
    main()
