"""Command-line front end: ``matres <command> <potential> [options]``.

Every command writes its artifacts and a ``manifest_<command>.json`` into
--out.  Artifacts depend only on the inputs, parameters and seed; the
manifest additionally records the wall-clock duration.

Exit status: 0 success, 1 verification failure, 2 invalid input,
3 pipeline error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (DEFAULT_EPS, DEFAULT_RMAX, Sector, counting_function, covers,
                          default_radii, default_type_radii, region_for, slope_estimate,
                          type_profile)
from .born import BornError, convergence_study
from .geometry import PotentialError, constants_for, l1_norm, load_potential_file
from .resonances import ResonanceSearchError, ResonanceSet, SearchRegion, locate_resonances
from .symmetry import run_symmetry_suite
from .transfer import scattering_matrix, transmission_matrix

INTERIOR = (0.4, 1.1)


def _g(x) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class _Run:
    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[Path] = []
        self.params: dict = {}
        self.t0 = time.perf_counter()

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8", newline="")
        self.outputs.append(path)
        return path

    def manifest(self):
        files = {}
        for path in self.outputs:
            files[path.name] = {"path": str(path),
                                "sha256": hashlib.sha256(path.read_bytes()).hexdigest()}
        man = {
            "command": self.args.command,
            "input": str(self.args.potential) if getattr(self.args, "potential", None) else None,
            "parameters": self.params,
            "seed": self.args.seed,
            "outputs": files,
            "duration_s": time.perf_counter() - self.t0,
            "version": __version__,
        }
        (self.out / f"manifest_{self.args.command}.json").write_text(_dumps(man), encoding="utf-8")


def _parse_k(values) -> list[complex]:
    out = []
    for v in values or []:
        for part in str(v).split(","):
            part = part.strip().replace(" ", "")
            if part:
                out.append(complex(part.replace("i", "j")))
    return out


def _region(args, sectors) -> SearchRegion:
    if args.region:
        return SearchRegion(*map(float, args.region))
    return region_for(sectors, args.rmax)


def _sectors(args):
    return [Sector("positive", args.eps), Sector("negative", args.eps),
            Sector.interior(*args.interior)]


# --- commands ----------------------------------------------------------------

def cmd_predict(run: _Run, p) -> int:
    rep = constants_for(p)
    text = rep.to_json()
    run.write("constants.json", text if text.endswith("\n") else text + "\n")
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return 0


def cmd_scatter(run: _Run, p) -> int:
    ks = _parse_k(run.args.k)
    if not ks:
        raise ValueError("scatter needs --k")
    run.params["k"] = [_jsonable(k) for k in ks]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_k", "im_k", "abs_detS", "re_detS", "im_detS", "re_det_tau11", "im_det_tau11",
                "re_det_tau22", "im_det_tau22", "cond_tau22"])
    mats = []
    for k in ks:
        sd = scattering_matrix(k, p, check=False)
        T = transmission_matrix(k, p)
        w.writerow([_g(k.real), _g(k.imag), _g(abs(sd.detS)), _g(sd.detS.real), _g(sd.detS.imag),
                    _g(sd.det_tau11.real), _g(sd.det_tau11.imag), _g(sd.det_tau22.real),
                    _g(sd.det_tau22.imag), _g(sd.cond_tau22)])
        mats.append({"k": k, "T": T.full(), "S": sd.S})
    run.write("scatter.csv", buf.getvalue())
    run.write("scatter_matrices.json", _dumps(mats))
    sys.stdout.write(buf.getvalue())
    return 0


def cmd_resonances(run: _Run, p) -> int:
    a = run.args
    region = _region(a, [Sector("positive", a.eps), Sector("negative", a.eps)])
    run.params.update(region=[region.re_min, region.re_max, region.im_min, region.im_max],
                      tol=a.tol, rmax=a.rmax, eps=a.eps)
    rs = locate_resonances(p, region, tol=a.tol)
    run.write("resonances.csv", rs.to_csv())
    run.write("resonances.json", _dumps({
        "region": [rs.region.re_min, rs.region.re_max, rs.region.im_min, rs.region.im_max],
        "requested_region": run.params["region"],
        "total_winding": rs.total_winding,
        "zeros": len(rs.zeros),
        "max_residual": max((z.residual for z in rs.zeros), default=0.0),
        "evaluations": rs.evaluations,
    }))
    print(f"{len(rs.zeros)} zeros, total winding {rs.total_winding}")
    return 0


def _load_set(path: Path, region_arg) -> ResonanceSet:
    side = path.with_suffix(".json")
    if region_arg:
        region = SearchRegion(*map(float, region_arg))
    elif side.exists():
        region = SearchRegion(*json.loads(side.read_text())["region"])
    else:
        raise ValueError(f"no --region given and no sidecar {side}")
    return ResonanceSet.from_csv(path.read_text(), region)


def cmd_count(run: _Run, p) -> int:
    a = run.args
    sectors = _sectors(a)
    if a.from_csv:
        rs = _load_set(Path(a.from_csv), a.region)
        run.params["from_csv"] = str(a.from_csv)
    else:
        region = _region(a, sectors)
        rs = locate_resonances(p, region, tol=a.tol)
    radii = default_radii(a.rmax)
    run.params.update(rmax=a.rmax, eps=a.eps, interior=list(a.interior), tol=a.tol,
                      region=[rs.region.re_min, rs.region.re_max, rs.region.im_min, rs.region.im_max])
    rep = constants_for(p) if p is not None else None
    buf = io.StringIO()
    summary = {"total_zeros": len(rs.zeros), "sectors": {}, "skipped": []}
    covered = [s for s in sectors if covers(rs.region, s, a.rmax)]
    summary["skipped"] = [s.label() for s in sectors if s not in covered]
    if not covered:
        raise ValueError(f"{rs.region} covers none of the sectors up to r = {a.rmax}")
    for i, s in enumerate(covered):
        ser = counting_function(rs, s, radii)
        text = ser.to_csv()
        buf.write(text if i == 0 else text.split("\n", 1)[1])
        slope, half = slope_estimate(ser)
        summary["sectors"][s.label()] = {"count_at_rmax": int(ser.counts[-1]), "slope": slope,
                                         "half_width": half, "count_over_r": ser.counts[-1] / a.rmax}
    if rep is not None:
        summary["predicted"] = {"upper_bound": rep.upper_bound, "triangular": rep.triangular,
                                "scalar_diameter": rep.scalar_diameter}
    run.write("counts.csv", buf.getvalue())
    run.write("count_summary.json", _dumps(summary))
    sys.stdout.write(_dumps(summary))
    return 0


def cmd_type(run: _Run, p) -> int:
    a = run.args
    angles = np.array(a.angles, dtype=float)
    radii = default_type_radii(a.rmax / 10.0, a.rmax)
    prof = type_profile(p, a.function, angles, radii)
    run.params.update(function=a.function, angles=angles, rmax=a.rmax)
    run.write("type_profile.csv", prof.to_csv())
    sys.stdout.write(prof.to_csv())
    return 0


def cmd_born_check(run: _Run, p) -> int:
    a = run.args
    ks = _parse_k(a.k)
    if not ks:
        L = l1_norm(p)
        ks = [f * max(L, 1.0) for f in (10, 20, 40, 80)]
    orders = tuple(range(1, a.order + 1))
    rows, slopes = convergence_study(p, ks, orders)
    run.params.update(k=[_jsonable(complex(k)) for k in ks], order=a.order)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_k", "im_k", "order", "error", "bound"])
    for r in rows:
        w.writerow([_g(r.k.real), _g(r.k.imag), r.order, _g(r.error), _g(r.bound)])
    run.write("born.csv", buf.getvalue())
    ok = all(r.error <= r.bound for r in rows)
    run.write("born_summary.json", _dumps({"slopes": slopes, "bound_dominates": ok}))
    sys.stdout.write(buf.getvalue())
    return 0


def cmd_verify(run: _Run, p) -> int:
    a = run.args
    rng = np.random.default_rng(a.seed)
    ks = _parse_k(a.k)
    if not ks:
        real = rng.uniform(0.5, 50.0, 20)
        mod = rng.uniform(0.5, 50.0, 20)
        ks = list(real) + list(mod * np.exp(1j * rng.uniform(-math.pi, math.pi, 20)))
    run.params.update(n_samples=len(ks), tol=a.tol)
    tol = {name: a.tol for name in ("unitarity", "conjugation", "reciprocity", "wronskian",
                                    "projector_det")}
    rep = run_symmetry_suite(p, ks, tol, seed=a.seed)
    run.write("verify.json", rep.to_json() + "\n")
    sys.stdout.write(rep.to_json() + "\n")
    return 0 if rep.ok else 1


COMMANDS = {
    "predict": cmd_predict,
    "scatter": cmd_scatter,
    "resonances": cmd_resonances,
    "count": cmd_count,
    "type": cmd_type,
    "born-check": cmd_born_check,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matres", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        need = name != "count"
        sp.add_argument("potential", nargs=None if need else "?", help="potential config (JSON/YAML)")
        sp.add_argument("--k", nargs="+", help="wavenumbers, e.g. 1.0 2-0.5j")
        sp.add_argument("--region", nargs=4, type=float,
                        metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
        sp.add_argument("--rmax", type=float, default=DEFAULT_RMAX)
        sp.add_argument("--eps", type=float, default=DEFAULT_EPS)
        sp.add_argument("--order", type=int, default=3)
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=".")
        if name == "count":
            sp.add_argument("--from-csv", dest="from_csv")
            sp.add_argument("--interior", nargs=2, type=float, default=list(INTERIOR))
        else:
            sp.set_defaults(from_csv=None, interior=list(INTERIOR))
        if name == "type":
            sp.add_argument("--function", default="det_tau22",
                            choices=["detS", "det_tau11", "det_tau22"])
            sp.add_argument("--angles", nargs="+", type=float,
                            default=[-2 * math.pi / 3, -math.pi / 2, -math.pi / 3])
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.potential is None and not (args.command == "count" and args.from_csv):
            raise ValueError("a potential config is required")
        p = load_potential_file(args.potential) if args.potential else None
        run = _Run(args)
        status = COMMANDS[args.command](run, p)
        run.manifest()
        return status
    except (PotentialError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ResonanceSearchError, BornError, OverflowError, ArithmeticError, RuntimeError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
