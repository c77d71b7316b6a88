"""Command-line driver: branches, certificates, gluing, CSV outputs.

Exit codes: 0 success, 1 certificate rejected or a check failed,
2 usage error, 3 numerical failure, 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import numeric_frontend as nf
from . import verifier as vf
from .ball import Ball, BallError
from .brusselator_maps import Mode

EXIT_OK, EXIT_REJECTED, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("brusselator_cap")


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# numbers and presets


_POW = re.compile(r"^([+-]?\d+)\^([+-]?\d+)$")


def parse_number(text: str) -> float:
    """Hex float, decimal, fraction a/b, power 2^e, or a product of these."""
    return float(parse_exact(text))


def parse_exact(text: str) -> Fraction:
    s = str(text).strip()
    if not s:
        raise UsageError("empty number")
    if "*" in s:
        out = Fraction(1)
        for part in s.split("*"):
            out *= parse_exact(part)
        return out
    m = _POW.match(s)
    if m:
        return Fraction(int(m.group(1))) ** int(m.group(2))
    if "/" in s:
        a, b = s.split("/", 1)
        den = parse_exact(b)
        if den == 0:
            raise UsageError(f"zero denominator in {text!r}")
        return parse_exact(a) / den
    try:
        if "0x" in s.lower():
            return Fraction(float.fromhex(s))
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError(f"cannot parse number {text!r}") from e


def load_presets() -> dict:
    return json.loads(resources.files(__package__).joinpath("presets.json").read_text())


def r_grid_from(spec) -> tuple:
    """[hi_exp, lo_exp, step] -> radii 2^hi, 2^(hi-step), ..., 2^lo."""
    hi, lo, step = spec
    return tuple(2.0**e for e in range(hi, lo - 1, -abs(step)))


@dataclass
class Job:
    """One box of a preset or of a command line."""

    box: vf.Box
    N: int
    K: int
    cuts: vf.Cuts
    r_grid: tuple


def preset_jobs(name: str, kind: str | None = None) -> list[Job]:
    presets = load_presets()
    if name not in presets:
        raise UsageError(f"unknown preset {name!r} (have {', '.join(sorted(presets))})")
    jobs = []
    for k, cfg in presets[name].items():
        if kind is not None and k != kind:
            continue
        mode = Mode.STATIONARY if k == "stationary" else Mode(cfg["mode"])
        degs = cfg["taylor_degree"]
        for i, (c, h) in enumerate(cfg["boxes"]):
            D = degs[i] if isinstance(degs, list) else degs
            box = vf.Box(mode, parse_number(c), parse_number(h), D)
            jobs.append(Job(box, cfg["spatial_cut"], cfg.get("time_cut", 0), vf.Cuts(*cfg["cuts"]),
                            r_grid_from(cfg["r_grid"])))
    return jobs


# --------------------------------------------------------------------------
# pipeline steps


def stationary_branch(box: vf.Box, N: int) -> vf.Branch:
    """Taylor branch of the stationary Galerkin problem on odd k <= N."""
    p, x = nf.stationary_solution(N, box.center)
    W = nf.taylor_branch(p, x, box.series())
    res = nf.branch_residual(p, W, box.series())
    return vf.Branch(box, p.to_pair(W), {"spatial_cut": N, "galerkin_residual": f"{res:.3e}"})


def periodic_branch(box: vf.Box, N: int, K: int) -> vf.Branch:
    """Normalized mode: continue in s from the Hopf point.  Free mode:
    follow the branch to b = center, starting at time cut K and growing it
    until the outer time modes are below 1e-9."""
    if box.mode is Mode.NORMALIZED:
        p, x, _, _ = nf.hopf_point(N, K)
        if box.center != 0.0:
            x = nf.continue_branch(p, x, 0.0, box.center)[-1][1]
            p = p.with_param([box.center])
    elif box.mode is Mode.FREE:
        p, x, _ = nf.periodic_at_b(box.center, N, K, K_start=min(K, 8))
    else:
        raise UsageError("periodic_branch needs a periodic mode")
    W = x[:, None] if box.D == 0 else nf.taylor_branch(p, x, box.series())
    alpha, b = p.with_param(box.series()[:1]).alpha_b(W[:, 0])
    meta = {"spatial_cut": N, "time_cut": p.K, "alpha": f"{float(alpha[0]):.12g}",
            "period": f"{nf.period(float(alpha[0])):.12g}", "b": f"{float(b[0]):.12g}"}
    return vf.Branch(box, p.to_pair(W), meta)


def branch_for(job: Job) -> vf.Branch:
    if job.box.mode is Mode.STATIONARY:
        return stationary_branch(job.box, job.N)
    return periodic_branch(job.box, job.N, job.K)


def prove_branch(branch: vf.Branch, cuts: vf.Cuts, r_grid, verbose: bool = False) -> vf.Certificate:
    say = (lambda m: log.info("%s", m)) if verbose else None
    t0 = time.time()
    cert = vf.prove(branch.box, branch.wbar, cuts, r_grid=r_grid, log=say, meta=branch.meta)
    cert.meta["seconds"] = f"{time.time() - t0:.1f}"
    return cert


def _prove_job(args):
    job, verbose = args
    if verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    return prove_branch(branch_for(job), job.cuts, job.r_grid, verbose)


def run_pool(fn, items, jobs: int):
    """Map in order; a pool only when asked for more than one worker."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def summary_line(cert: vf.Certificate, name: str = "") -> str:
    b = cert.box
    state = "ACCEPTED" if cert.accepted else "REJECTED"
    return (f"{state} {name} mode={b.mode.value} box=[{float(b.lo):.10g}, {float(b.hi):.10g}] D={b.D} "
            f"eps={cert.eps:.3e} K={cert.K:.4f} r={cert.r_max:.3e} r_min={cert.r_min:.3e}")


def glue_chain(certs: list[vf.Certificate]) -> list[tuple[str, bool, str]]:
    """Check consecutive pairs: same mode -> glue, stationary/normalized ->
    Hopf junction."""
    out = []
    for a, b in zip(certs[:-1], certs[1:]):
        modes = {a.box.mode, b.box.mode}
        if modes == {Mode.STATIONARY, Mode.NORMALIZED}:
            st, pe = (a, b) if a.box.mode is Mode.STATIONARY else (b, a)
            rep = vf.hopf_junction(st, pe)
            text = (f"hopf-junction b(0) in [{rep.b_star.lower:.10g}, {rep.b_star.upper:.10g}] "
                    f"lhs={rep.lhs:.3e} rhs={rep.rhs:.3e} {rep.message}")
            out.append(("hopf", rep.ok, text))
        else:
            rep = vf.glue(a, b)
            out.append(("glue", rep.ok, f"glue [{float(a.box.lo):.6g},{float(a.box.hi):.6g}]+"
                                        f"[{float(b.box.lo):.6g},{float(b.box.hi):.6g}] "
                                        f"lhs={rep.lhs:.3e} rhs={rep.rhs:.3e} {rep.message}"))
    return out


def emit_gnuplot(csv_path: Path, kind: str) -> Path:
    gp = csv_path.with_suffix(".gp")
    name = csv_path.name
    if kind == "eigen":
        body = (f"set datafile separator ','\nset xlabel 'b'\nset ylabel 'Re lambda'\n"
                f"plot '{name}' using 1:2 every ::1 with lines title 'lambda_1', "
                f"'' using 1:4 every ::1 with lines title 'lambda_2', 0 notitle\n")
    elif kind == "branch":
        body = (f"set datafile separator ','\nset xlabel 'parameter'\n"
                f"plot '{name}' using 1:5 every ::1 with linespoints title 'period'\n")
    else:
        body = (f"set datafile separator ','\nset xlabel 'x'\nset ylabel 'U'\n"
                f"plot '{name}' using 2:3 every ::1 with dots title 'U(t, x)'\n")
    gp.write_text(body)
    return gp


# --------------------------------------------------------------------------
# subcommands


def _out_paths(out: str | None, n: int, stem: str, suffix: str) -> list[Path]:
    if n == 1 and out and not Path(out).is_dir():
        return [Path(out)]
    d = Path(out or ".")
    d.mkdir(parents=True, exist_ok=True)
    return [d / f"{stem}{i}{suffix}" for i in range(n)]


def cmd_find_stationary(a) -> int:
    if a.preset:
        jobs = preset_jobs(a.preset, "stationary")
    else:
        box = vf.Box(Mode.STATIONARY, parse_number(a.b_center), parse_number(a.b_halfwidth), a.taylor_degree)
        jobs = [Job(box, a.spatial_cut, 0, vf.default_cuts(Mode.STATIONARY, a.spatial_cut + 1, 0), vf.R_GRID)]
    paths = _out_paths(a.out, len(jobs), "stationary", ".branch")
    for job, path in zip(jobs, paths):
        br = stationary_branch(job.box, job.N)
        br.save(path)
        print(f"wrote {path} (Galerkin residual {br.meta['galerkin_residual']})")
    return EXIT_OK


def cmd_find_periodic(a) -> int:
    if a.preset:
        jobs = preset_jobs(a.preset, "periodic")
    else:
        mode = Mode(a.mode)
        if mode is Mode.NORMALIZED:
            c, h = parse_number(a.s_center), parse_number(a.s_halfwidth)
        else:
            if a.b is None:
                raise UsageError("free mode needs --b")
            c, h = parse_number(a.b), parse_number(a.b_halfwidth)
        box = vf.Box(mode, c, h, a.taylor_degree)
        jobs = [Job(box, a.spatial_cut, a.time_cut, vf.default_cuts(mode, a.spatial_cut + 1, a.time_cut), vf.R_GRID)]
    paths = _out_paths(a.out, len(jobs), "periodic", ".branch")
    rows = []
    for job, path in zip(jobs, paths):
        br = periodic_branch(job.box, job.N, job.K)
        br.save(path)
        rows.append((job.box.center, br.wbar.U.c[1, br.wbar.U.K - 1, 0], br.wbar.V.c[1, br.wbar.V.K, 0],
                     float(br.meta["alpha"])))
        print(f"wrote {path} (alpha {br.meta['alpha']}, period {br.meta['period']}, b {br.meta['b']}, "
              f"K {br.meta['time_cut']})")
    if a.csv:
        nf.write_branch_csv(rows, a.csv, "s" if jobs[0].box.mode is Mode.NORMALIZED else "b")
        if a.emit_gnuplot:
            emit_gnuplot(Path(a.csv), "branch")
    return EXIT_OK


def _cuts_arg(text: str | None, default: vf.Cuts) -> vf.Cuts:
    if not text:
        return default
    vals = [int(x) for x in text.split(",")]
    if len(vals) != 6:
        raise UsageError("--cuts takes nk_m,K_m,nk_i,K_i,nk_t,K_t")
    return vf.Cuts(*vals)


def _r_grid_arg(text: str | None):
    if not text:
        return vf.R_GRID
    return tuple(parse_number(x) for x in text.split(","))


def _prove_files(a, kind: str) -> int:
    if a.preset:
        jobs = preset_jobs(a.preset, kind)
        items = [(j, a.verbose) for j in jobs]
        certs = run_pool(_prove_job, items, a.jobs)
    else:
        if not a.branch_file:
            raise UsageError("need --branch-file or --preset")
        branches = [vf.Branch.load(f) for f in a.branch_file]
        certs = []
        for br in branches:
            nk = br.wbar.U.nk
            cuts = _cuts_arg(a.cuts, vf.default_cuts(br.box.mode, nk, br.wbar.U.K))
            certs.append(prove_branch(br, cuts, _r_grid_arg(a.r_grid), a.verbose))
    paths = _out_paths(a.out, len(certs), kind, ".cert")
    code = EXIT_OK
    for cert, path in zip(certs, paths):
        cert.save(path)
        print(summary_line(cert, str(path)))
        if not cert.accepted:
            code = EXIT_REJECTED
    return code


def cmd_prove_stationary(a) -> int:
    return _prove_files(a, "stationary")


def cmd_prove_periodic(a) -> int:
    return _prove_files(a, "periodic")


def cmd_eigen_scan(a) -> int:
    lo = parse_number(a.b_min if a.b_min is not None else a.pos_min)
    hi = parse_number(a.b_max if a.b_max is not None else a.pos_max)
    scan = nf.eigen_scan(lo, hi, a.steps, a.spatial_cut)
    nf.write_eigen_csv(scan, a.out)
    npos = max(int(np.sum(p.eigenvalues.real > 0)) for p in scan)
    print(f"wrote {a.out}; sign changes at " + ", ".join(f"{b:.6g}" for b in nf.sign_changes(scan))
          + f"; max unstable count {npos}")
    if a.emit_gnuplot:
        emit_gnuplot(Path(a.out), "eigen")
    return EXIT_OK


def cmd_glue(a) -> int:
    names = [s for s in a.certs.split(",") if s]
    if len(names) < 2:
        raise UsageError("glue needs at least two certificates")
    certs = [vf.Certificate.load(n) for n in names]
    ok = True
    for _, good, text in glue_chain(certs):
        print(("OK   " if good else "FAIL ") + text)
        ok &= good
    return EXIT_OK if ok else EXIT_REJECTED


def cmd_verify(a) -> int:
    cert = vf.Certificate.load(a.cert)
    rep = vf.verify(cert)
    status = "VERIFIED" if rep.ok else "FAILED"
    print(f"{status} {a.cert} eps={rep.eps:.3e} K={rep.K:.4f} r={cert.r_max:.3e} ||Lambda||={rep.lam_norm:.4g}")
    for m in rep.messages:
        print("  " + m)
    return EXIT_OK if rep.ok else EXIT_REJECTED


def _times_arg(text: str):
    m = re.fullmatch(r"k/(\d+)", text.strip())
    if m:
        n = int(m.group(1))
        return np.arange(n) / n
    return np.array([parse_number(x) for x in text.split(",")])


def snapshot_rows(box: vf.Box, wbar, times, nx: int = 64):
    """(t, x, U, V) rows of the approximation at tau = 0.  In normalized
    mode with s > 0 the odd part is rescaled by sqrt(s) first."""
    w0 = vf.eval_pair(wbar, Ball(0.0))
    modes = vf.ModeSet(w0.U.nk, w0.U.K)
    p = nf.GalerkinProblem(box.mode, w0.U.nk, w0.U.K, np.array([box.center]))
    x = modes.extract(w0)[:, 0]
    if box.mode is Mode.STATIONARY:
        return nf.snapshot(p, x, 0.0, [0.0], nx)
    if box.mode is Mode.NORMALIZED and box.center > 0:
        p, x, alpha, _ = nf.normalized_to_free(p, x, box.center)
    else:
        alpha = float(p.alpha_b(x)[0][0])
    return nf.snapshot(p, x, alpha, times, nx)


def cmd_snapshot(a) -> int:
    if a.cert:
        cert = vf.Certificate.load(a.cert)
        box, wbar = cert.box, cert.wbar
    else:
        br = vf.Branch.load(a.branch_file)
        box, wbar = br.box, br.wbar
    rows = snapshot_rows(box, wbar, _times_arg(a.times), a.nx)
    nf.write_snapshot_csv(rows, a.out)
    print(f"wrote {a.out} ({len(rows)} rows)")
    if a.emit_gnuplot:
        emit_gnuplot(Path(a.out), "snapshot")
    return EXIT_OK


def cmd_run(a) -> int:
    """Whole preset: branches, certificates, gluing, verification."""
    jobs = preset_jobs(a.preset)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    certs = run_pool(_prove_job, [(j, a.verbose) for j in jobs], a.jobs)
    code = EXIT_OK
    kept = []
    for i, cert in enumerate(certs):
        path = out / f"{cert.box.mode.value}{i}.cert"
        cert.save(path)
        print(summary_line(cert, str(path)))
        if cert.accepted:
            rep = vf.verify(vf.Certificate.load(path))
            print(("  verify ok" if rep.ok else "  verify FAILED " + "; ".join(rep.messages)))
            if rep.ok:
                kept.append(cert)
            else:
                code = EXIT_REJECTED
        else:
            code = EXIT_REJECTED
    stat = sorted((c for c in kept if c.box.mode is Mode.STATIONARY), key=lambda c: c.box.lo)
    for _, good, text in glue_chain(stat):
        print(("OK   " if good else "FAIL ") + text)
        code = code if good else EXIT_REJECTED
    return code


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brusselator-cap", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("find-stationary", help="Fourier-Taylor approximation of the stationary branch")
    s.add_argument("--b-center", default="4")
    s.add_argument("--b-halfwidth", default="0x1p-3")
    s.add_argument("--taylor-degree", type=int, default=12)
    s.add_argument("--spatial-cut", type=int, default=31)
    s.add_argument("--preset")
    s.add_argument("-o", "--out")
    s.set_defaults(fn=cmd_find_stationary)

    for name, fn, kind in (("prove-stationary", cmd_prove_stationary, "stationary"),
                           ("prove-periodic", cmd_prove_periodic, "periodic")):
        s = sub.add_parser(name, help=f"certify {kind} branch files")
        s.add_argument("--branch-file", nargs="+")
        s.add_argument("--r-grid", help="comma-separated radii, largest tried first")
        s.add_argument("--cuts", help="nk_m,K_m,nk_i,K_i,nk_t,K_t")
        s.add_argument("--preset")
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("-o", "--out")
        s.set_defaults(fn=fn)

    s = sub.add_parser("eigen-scan", help="leading eigenvalues along the stationary branch")
    s.add_argument("pos_min", nargs="?", default="0")
    s.add_argument("pos_max", nargs="?", default="11")
    s.add_argument("--b-min")
    s.add_argument("--b-max")
    s.add_argument("--steps", type=int, default=220)
    s.add_argument("--spatial-cut", type=int, default=32)
    s.add_argument("-o", "--out", default="eigen.csv")
    s.add_argument("--emit-gnuplot", action="store_true")
    s.set_defaults(fn=cmd_eigen_scan)

    s = sub.add_parser("find-periodic", help="Fourier-Taylor approximation of the periodic branch")
    s.add_argument("--mode", choices=["normalized", "free"], default="normalized")
    s.add_argument("--s-center", default="0")
    s.add_argument("--s-halfwidth", default="0")
    s.add_argument("--b")
    s.add_argument("--b-halfwidth", default="0")
    s.add_argument("--taylor-degree", type=int, default=0)
    s.add_argument("--spatial-cut", type=int, default=15)
    s.add_argument("--time-cut", type=int, default=8)
    s.add_argument("--preset")
    s.add_argument("--csv", help="also write branch.csv")
    s.add_argument("--emit-gnuplot", action="store_true")
    s.add_argument("-o", "--out")
    s.set_defaults(fn=cmd_find_periodic)

    s = sub.add_parser("glue", help="check junctions between consecutive certificates")
    s.add_argument("--certs", required=True, help="comma-separated certificate files")
    s.set_defaults(fn=cmd_glue)

    s = sub.add_parser("verify", help="re-check a stored certificate")
    s.add_argument("--cert", required=True)
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("snapshot", help="U, V on an (x, t) grid")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--cert")
    g.add_argument("--branch-file")
    s.add_argument("--times", default="k/12", help="k/n for all k < n, or comma-separated fractions")
    s.add_argument("--nx", type=int, default=64)
    s.add_argument("-o", "--out", default="snapshot.csv")
    s.add_argument("--emit-gnuplot", action="store_true")
    s.set_defaults(fn=cmd_snapshot)

    s = sub.add_parser("run", help="run a whole preset")
    s.add_argument("--preset", default="desk")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("-o", "--out", default="certificates")
    s.set_defaults(fn=cmd_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    try:
        return a.fn(a)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (nf.NumericalFailure, BallError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, vf.CertificateError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
