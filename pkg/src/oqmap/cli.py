"""Command-line front end: ``oqmap <command> ...`` or ``python3 -m oqmap``.

Exit codes: 0 success, 1 computation failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import classical, io, maps, spectral, transport
from .torus import PlanckGrid, SizeLimitError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _kept(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"kept strips must be comma-separated integers, got {text!r}") from None


def _add_map_args(p: argparse.ArgumentParser, kinds: list[str]) -> None:
    p.add_argument("--kind", required=True, choices=kinds)
    p.add_argument("--N", type=int, help="inverse Planck constant (open-baker, toy)")
    p.add_argument("--k", type=int, help="number of qudits (walsh kinds, or N = 3**k)")
    p.add_argument("--D", type=int, default=3, help="Walsh base")
    p.add_argument("--kept", type=_kept, default=None, help="kept strips, e.g. 0,2")
    p.add_argument("--D1", type=int, default=3)
    p.add_argument("--D2", type=int, default=3)
    p.add_argument("--l1", type=int, default=0)
    p.add_argument("--l2", type=int, default=2)


def _resolve_N(args) -> int:
    if args.N is not None:
        return args.N
    if args.k is not None:
        return 3**args.k
    raise UsageError("give --N or --k")


def _build_map(args):
    kind = args.kind
    try:
        if kind == "open-baker":
            params = classical.BakerParams(args.D1, args.D2, args.l1, args.l2)
            return maps.build_open_baker(params, PlanckGrid(_resolve_N(args)))
        if kind == "toy":
            return maps.build_toy_baker(PlanckGrid(_resolve_N(args)))
        if kind == "walsh":
            if args.k is None:
                raise UsageError("walsh needs --k")
            kept = args.kept if args.kept is not None else (0, args.D - 1)
            return maps.build_walsh_open_baker(args.D, args.k, kept)
        if kind == "walsh-2baker":
            if args.k is None:
                raise UsageError("walsh-2baker needs --k")
            return maps.build_walsh_2baker(args.k)
    except (ValueError, SizeLimitError) as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown kind {kind}")


def _finish(args, command: str, params: dict, outputs: list[Path], timings: dict) -> None:
    if not outputs:
        return
    manifest = io.RunManifest(command, params, timings=timings)
    for p in outputs:
        manifest.add_output(p)
    io.write_manifest(Path(str(outputs[0]) + ".manifest.json"), manifest)


def _emit_csv(args, header, rows) -> list[Path]:
    if args.out:
        io.write_csv(args.out, header, rows)
        return [Path(args.out)]
    sys.stdout.write(io.csv_text(header, rows))
    return []


# --- commands ---------------------------------------------------------------------


def cmd_build(args) -> int:
    t0 = time.perf_counter()
    qm = _build_map(args)
    io.write_matrix(args.out, qm, args.format)
    params = {"kind": qm.kind, **qm.params, "N": qm.N, "format": args.format}
    _finish(args, "build", params, [Path(args.out)], {"build_s": time.perf_counter() - t0})
    print(f"wrote {qm.N}x{qm.N} {args.kind} matrix to {args.out}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    t0 = time.perf_counter()
    qm = _build_map(args)
    deflate = args.deflate or args.kind in ("toy", "walsh")
    spec = spectral.eigenvalues(qm, args.tol, deflate=deflate)
    t1 = time.perf_counter()
    outputs = _emit_csv(args, io.SPECTRUM_HEADER, io.spectrum_rows(spec))
    params = {"kind": qm.kind, **qm.params, "N": qm.N, "tol": args.tol, "deflate": deflate}
    status = EXIT_OK
    if args.oracle:
        if args.kind == "toy":
            k = round(math.log(qm.N, 3))
            if 3**k != qm.N:
                raise UsageError("--oracle needs N = 3**k")
            block = maps.omega_block(3, (0, 2))
        elif args.kind == "walsh":
            k = qm.params["k"]
            block = maps.omega_block(qm.params["D"], qm.params["kept"])
        else:
            raise UsageError("--oracle applies to toy and walsh kinds")
        rep = spectral.oracle_match(spec, spectral.walsh_analytic_spectrum(k, block), args.oracle_tol, args.zero_tol)
        verdict = "<" if rep.ok else ">="
        print(f"oracle max distance {rep.max_distance:.3e} {verdict} {args.oracle_tol:g}; "
              f"nonzero {rep.n_nonzero}/{rep.n_expected}, kernel {rep.n_zero}/{rep.kernel_dim}",
              file=sys.stderr)
        params.update(oracle_tol=args.oracle_tol, zero_tol=args.zero_tol, oracle_max_distance=rep.max_distance)
        status = EXIT_OK if rep.ok else EXIT_FAIL
    _finish(args, "spectrum", params, outputs, {"solve_s": t1 - t0})
    return status


def _weyl_rows(kind: str, kmax: int, radii, source: str, tol: float):
    def one(k):
        N = 3**k
        if source == "analytic":
            if kind != "toy":
                raise UsageError("analytic counts exist only for the toy model")
            spec = spectral.walsh_analytic_spectrum(k, maps.omega_block(3, (0, 2)))
        elif kind == "toy":
            spec = spectral.eigenvalues(maps.build_toy_baker(N), tol, deflate=True)
        else:
            spec = spectral.eigenvalues(maps.build_open_baker(classical.BakerParams.symmetric(3), N), tol)
        return [(k, N, r, spectral.count_at_radius(spec, r)) for r in radii]

    with ThreadPoolExecutor(io.thread_count()) as ex:
        blocks = list(ex.map(one, range(1, kmax + 1)))
    return [row for b in blocks for row in b]


def cmd_weyl(args) -> int:
    t0 = time.perf_counter()
    rows = _weyl_rows(args.kind, args.kmax, args.r, args.source, args.tol)
    outputs = _emit_csv(args, ("k", "N", "r", "count"), rows)
    for r in args.r:
        pts = [(N, c) for k, N, rr, c in rows if rr == r and c > 0]
        if len(pts) >= 3:
            print(f"r={r:g}: counts {[c for _, c in pts]}, slope {spectral.weyl_fit(pts):.12f} "
                  f"(log2/log3 = {math.log(2) / math.log(3):.12f})", file=sys.stderr)
    params = {"kind": args.kind, "kmax": args.kmax, "r": list(args.r), "source": args.source, "tol": args.tol}
    _finish(args, "weyl", params, outputs, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_table2(args) -> int:
    t0 = time.perf_counter()
    rows = _weyl_rows("open-baker", args.kmax, spectral.TABLE2_RADII, "numerical", args.tol)
    outputs = _emit_csv(args, ("k", "N", "r", "count"), rows)
    by_k = {}
    for k, N, r, c in rows:
        by_k.setdefault(k, []).append(c)
    for k, counts in by_k.items():
        print(f"k={k}: " + " ".join(f"{c:4d}" for c in counts), file=sys.stderr)
    params = {"kmax": args.kmax, "radii": list(spectral.TABLE2_RADII), "tol": args.tol, "tie_tol": 1e-10}
    _finish(args, "table2", params, outputs, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_transport(args) -> int:
    t0 = time.perf_counter()
    try:
        rep = transport.transport_summary(args.k, args.theta_grid, args.path, args.tail_tol, args.theta_cut)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = ("k", "theta", "g", "P", "F", "transmitted", "reflected", "nonclassical", "n_max", "tail_bound")
    rows = [(s.k, s.theta, s.g, s.P, s.F, s.transmitted, s.reflected, s.nonclassical, s.n_max, s.tail_bound)
            for s in rep.summaries]
    outputs = _emit_csv(args, header, rows)
    if args.eigen_out:
        if rep.path != "dense":
            raise UsageError("--eigen-out needs the dense path")
        tm = transport.transmission_matrix(transport.closed_walsh_baker(args.k), transport.LeadConfig(args.k),
                                           rep.summaries[0].theta, args.tail_tol)
        T = transport.transmission_eigenvalues(tm)
        io.write_csv(args.eigen_out, ("index", "T"), list(enumerate(T)))
        outputs.append(Path(args.eigen_out))
    (g, gs), (P, _) = rep.g_mean_std, rep.P_mean_std
    M = 4 ** (args.k - 1)
    print(f"k={args.k} path={rep.path}: g/M = {g / M:.6f} (std/mean {gs / g:.4f}), "
          f"P/2^(k-1) = {P / 2 ** (args.k - 1):.6f}, 11/80 = {11 / 80}", file=sys.stderr)
    params = {"k": args.k, "theta_grid": args.theta_grid, "path": rep.path, "tail_tol": args.tail_tol,
              "theta_cut": args.theta_cut}
    _finish(args, "transport", params, outputs, {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_classical(args) -> int:
    try:
        params = classical.BakerParams(args.D1, args.D2, args.l1, args.l2)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.mode == "escape":
        rng = np.random.default_rng(args.seed)
        pts = [classical.Point(q, p) for q, p in rng.random((args.samples, 2))]
        rows = classical.escape_time_histogram(params, pts, args.max_steps)
        outputs = _emit_csv(args, ("step", "count"), rows)
        extra = {"samples": args.samples, "seed": args.seed, "max_steps": args.max_steps}
    else:
        try:
            rows = classical.boxcount_table(params, range(2, args.depth + 1))
        except (ValueError, OverflowError) as exc:
            raise UsageError(str(exc)) from exc
        outputs = _emit_csv(args, ("depth", "count", "estimate"), rows)
        print(f"dimension {classical.cantor_dimension(params.D1, params.D2):.12f}", file=sys.stderr)
        extra = {"depth": args.depth}
    _finish(args, "classical", {"mode": args.mode, "D1": args.D1, "D2": args.D2, "l1": args.l1, "l2": args.l2,
                                **extra}, outputs, {})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oqmap", description="Quantized open baker maps: spectra and transport.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write a quantum map matrix")
    _add_map_args(p, ["open-baker", "toy", "walsh", "walsh-2baker"])
    p.add_argument("--format", choices=["json", "bin"], default="json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("spectrum", help="eigenvalues as CSV")
    _add_map_args(p, ["open-baker", "toy", "walsh", "walsh-2baker"])
    p.add_argument("--tol", type=float, default=1e-8, help="backward-error tolerance")
    p.add_argument("--deflate", action="store_true", help="split off the nilpotent part first")
    p.add_argument("--oracle", action="store_true", help="compare with the necklace-orbit spectrum")
    p.add_argument("--oracle-tol", type=float, default=1e-7)
    p.add_argument("--zero-tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("weyl", help="resonance counts along N = 3**k")
    p.add_argument("--kind", choices=["toy", "open-baker"], default="toy")
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--r", type=float, nargs="+", default=[0.5])
    p.add_argument("--source", choices=["numerical", "analytic"], default="numerical")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_weyl)

    p = sub.add_parser("table2", help="counts of open-baker eigenvalues outside r = 0.1 .. 0.8")
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("transport", help="conductance and shot noise of the Walsh 4-baker")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--theta-grid", type=int, default=16)
    p.add_argument("--path", choices=["auto", "dense", "tensor"], default="auto")
    p.add_argument("--tail-tol", type=float, default=1e-10)
    p.add_argument("--theta-cut", type=float, default=None, help="tensor path truncation; default converges")
    p.add_argument("--eigen-out", help="CSV of transmission eigenvalues at the first theta")
    p.add_argument("--out")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("classical", help="escape-time histogram or box-count table")
    p.add_argument("--mode", choices=["escape", "boxcount"], required=True)
    p.add_argument("--D1", type=int, default=3)
    p.add_argument("--D2", type=int, default=3)
    p.add_argument("--l1", type=int, default=0)
    p.add_argument("--l2", type=int, default=2)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=30)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classical)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"oqmap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (spectral.EigensolveError, transport.TailNotReached, ArithmeticError, RuntimeError) as exc:
        print(f"oqmap {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
