"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 library error (domain, singularity,
quadrature, spectrum), 3 when ``verify`` finds a failing check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import checks, presets, quad, spectral
from .errors import IsospecError, SingularityError
from .expr import parse, render
from .family import SuperpotentialFamily, SuperpotentialSpec, partner_potentials

CUSTOM_WINDOW = (-5.0, 5.0)
DEFAULT_N = 2001
FAMILY_HEADER = ["x", "V1", "V2", "gamma", "V1gamma", "psi0gamma", "psi0gamma_sq_normalized"]
VALUE_FLAGS = {"--gamma", "--xmin", "--xmax", "--c", "--F", "--f", "--tol", "--n", "--k"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


def _floats(text: str) -> list[float]:
    try:
        out = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot read {text!r} as a comma-separated list of numbers") from None
    if not out:
        raise UsageError("empty number list")
    return out


def _join_values(argv: list[str]) -> list[str]:
    """Glue ``--gamma -4,-3`` into ``--gamma=-4,-3`` so argparse keeps negative lists."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


# ---------------------------------------------------------------------------
# configuration


class RunConfig:
    """Resolved problem: label, spec, window, grid and gamma list."""

    def __init__(self, args):
        self.command = args.command
        self.n = args.n
        self.tol = args.tol
        self.format = args.format
        self.out = args.out
        custom = args.F is not None or args.f is not None
        if custom and args.preset is not None:
            raise UsageError("give either --preset or --F/--f, not both")
        if custom and (args.F is None or args.f is None):
            raise UsageError("custom input needs both --F and --f")
        if args.c is not None and args.preset != "constant":
            raise UsageError("--c only applies to --preset constant")
        self.preset = None
        if args.preset is not None:
            self.preset = presets.get_preset(args.preset, args.c)
            self.label = self.preset.name
        elif custom:
            self.preset = _matching_preset(args.F, args.f)
            self.label = "custom"
        else:
            raise UsageError("one of --preset or --F/--f is required")
        if self.preset is not None:
            self.spec = self.preset.spec()
            window = self.preset.window
        else:
            self.spec = SuperpotentialSpec.from_sources(args.F, args.f)
            window = CUSTOM_WINDOW
        self.window = (args.xmin if args.xmin is not None else window[0],
                       args.xmax if args.xmax is not None else window[1])
        if not self.window[0] < 0 < self.window[1]:
            raise UsageError("the window must satisfy xmin < 0 < xmax")
        self.gammas = _floats(args.gamma) if args.gamma is not None else None
        if self.n < 4:
            raise UsageError("--n must be at least 4")

    def require_gammas(self) -> list[float]:
        if not self.gammas:
            raise UsageError(f"{self.command} needs --gamma")
        return self.gammas

    def family(self) -> SuperpotentialFamily:
        return SuperpotentialFamily(self.spec, self.window, self.tol)

    def grid(self) -> np.ndarray:
        return np.linspace(self.window[0], self.window[1], self.n)


def _matching_preset(F: str, f: str):
    """A preset whose expressions render identically to the custom input, if any."""
    key = (render(parse(F, "u")), render(parse(f, "x")))
    for p in presets.PRESETS.values():
        if (render(parse(p.F, "u")), render(parse(p.f, "x"))) == key:
            return p
    return None


# ---------------------------------------------------------------------------
# output


def _emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(cfg: RunConfig, header: list[str], rows) -> str:
    if cfg.format == "json":
        cols = {h: [] for h in header}
        for row in rows:
            for h, v in zip(header, row):
                cols[h].append(None if isinstance(v, float) and not math.isfinite(v) else v)
        return json.dumps(cols) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _json_only(cfg: RunConfig):
    if cfg.format == "csv":
        raise UsageError(f"{cfg.command} writes JSON only")


def _finite_or_none(v):
    return None if v is None or not math.isfinite(v) else float(v)


# ---------------------------------------------------------------------------
# commands


def cmd_partners(cfg: RunConfig, args) -> int:
    fam = cfg.family()
    x = cfg.grid()
    v1, v2 = partner_potentials(cfg.spec, x)
    rows = zip(x, cfg.spec.phi(x), v1, v2, fam.mu(x), fam.cumulative(x))
    _emit(cfg, _table(cfg, ["x", "phi_p", "V1", "V2", "mu", "Gamma"], rows))
    return 0


def _pointwise(fn, x):
    """Evaluate fn on x; on a singular hit fall back to pointwise with NaN at the root."""
    try:
        return np.asarray(fn(x), dtype=float)
    except SingularityError:
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            try:
                out[i] = fn(xi)
            except SingularityError:
                out[i] = math.nan
        return out


def _member_columns(fam: SuperpotentialFamily, gamma: float, x, allow_singular: bool):
    member = fam.member(gamma)
    root = member.singularity()
    if root is not None and not allow_singular:
        raise SingularityError(gamma, root)
    v1g = _pointwise(member.parametric_potential, x)
    psi = _pointwise(member.zero_mode, x)
    if root is None:
        psi_sq = psi * psi / member.norm()
    else:
        psi_sq = np.full_like(x, math.nan)  # not normalizable
    return v1g, psi, psi_sq


def _sweep(fam, gammas, fn):
    # members share the read-only cumulative integral; map keeps gamma order
    with ThreadPoolExecutor() as pool:
        return list(pool.map(fn, gammas))


def cmd_family(cfg: RunConfig, args) -> int:
    gammas = cfg.require_gammas()
    fam = cfg.family()
    x = cfg.grid()
    v1, v2 = partner_potentials(cfg.spec, x)
    cols = _sweep(fam, gammas, lambda g: _member_columns(fam, g, x, args.allow_singular))
    rows = []
    for g, (v1g, psi, psi_sq) in zip(gammas, cols):
        rows.extend(zip(x, v1, v2, np.full_like(x, g), v1g, psi, psi_sq))
    _emit(cfg, _table(cfg, FAMILY_HEADER, rows))
    return 0


def cmd_zeromode(cfg: RunConfig, args) -> int:
    gammas = cfg.require_gammas()
    fam = cfg.family()
    x = cfg.grid()
    report = fam.regular_range()
    both_finite = report.left_limit.is_finite and report.right_limit.is_finite

    def one(g):
        _, psi, psi_sq = _member_columns(fam, g, x, args.allow_singular)
        g_a = n_a = math.nan
        if both_finite:
            g_a = fam.gamma_convert(g)
            if not -1.0 <= g_a <= 0.0:
                n_a = math.sqrt(g_a * (g_a + 1.0))
        return psi, psi_sq, g_a, n_a

    rows = []
    for g, (psi, psi_sq, g_a, n_a) in zip(gammas, _sweep(fam, gammas, one)):
        rows.extend((xi, g, p, q, g_a, n_a) for xi, p, q in zip(x, psi, psi_sq))
    header = ["x", "gamma", "psi0gamma", "psi0gamma_sq_normalized", "gamma_normalized", "N_normalized"]
    _emit(cfg, _table(cfg, header, rows))
    return 0


def cmd_regular_range(cfg: RunConfig, args) -> int:
    _json_only(cfg)
    report = cfg.family().regular_range()
    _emit(cfg, _json(report.to_json(cfg.label)))
    return 0


def cmd_gamma_star(cfg: RunConfig, args) -> int:
    fam = cfg.family()
    x = cfg.grid()
    g = fam.gamma_star(x, on_undefined="nan")
    _emit(cfg, _table(cfg, ["x", "gamma_star"], zip(x, g)))
    return 0


def _peaks_json(fam, gamma):
    return {
        "gamma": gamma,
        "peaks": [
            {"x": p.x, "height": p.height, "well_x": _finite_or_none(p.well_x),
             "well_V1gamma": _finite_or_none(p.well_value)}
            for p in fam.peaks(gamma)
        ],
    }


def cmd_peaks(cfg: RunConfig, args) -> int:
    _json_only(cfg)
    gammas = cfg.require_gammas()
    fam = cfg.family()
    out = _sweep(fam, gammas, lambda g: _peaks_json(fam, g))
    _emit(cfg, _json({"preset": cfg.label, "members": out}))
    return 0


def cmd_gamma_c(cfg: RunConfig, args) -> int:
    _json_only(cfg)
    bracket = cfg.require_gammas()
    if len(bracket) != 2:
        raise UsageError("gamma-c needs a bracket: --gamma lo,hi")
    fam = cfg.family()
    gc = fam.find_gamma_c((bracket[0], bracket[1]), tol=args.gamma_tol)
    out = {"preset": cfg.label, "bracket": sorted(bracket), "gamma_c": gc,
           "tolerance": args.gamma_tol}
    out.update(_peaks_json(fam, gc))
    _emit(cfg, _json(out))
    return 0


def cmd_spectrum(cfg: RunConfig, args) -> int:
    _json_only(cfg)
    gammas = cfg.require_gammas()
    fam = cfg.family()
    reports = [spectral.isospectral_check(cfg.spec, g, cfg.window, cfg.n, args.k, family=fam)
               for g in gammas]
    _emit(cfg, _json({"preset": cfg.label, "window": list(cfg.window), "n": cfg.n,
                      "k": args.k, "reports": [r.to_json() for r in reports]}))
    return 0


def cmd_verify(cfg_or_none, args) -> int:
    targets = []
    if cfg_or_none is None:
        for p in presets.PRESETS.values():
            targets.append((p.name, SuperpotentialFamily(p.spec(), p.window, args.tol),
                            p.check_gammas))
    else:
        cfg = cfg_or_none
        gammas = cfg.gammas if cfg.gammas else (cfg.preset.check_gammas if cfg.preset else ())
        targets.append((cfg.label, cfg.family(), gammas))
    failed = 0
    lines = []
    for label, fam, gammas in targets:
        even = label == "harmonic"
        for r in checks.run_suite(fam, label, gammas, even_mu=even):
            lines.append(r.line())
            failed += not r.passed
    lines.append(f"{len(lines) - failed} passed, {failed} failed")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 3 if failed else 0


def cmd_list_presets(args) -> int:
    items = []
    for p in presets.PRESETS.values():
        items.append({"name": p.name, "F": p.F, "f": p.f, "window": list(p.window),
                      "description": p.description, "plot_gammas": list(p.plot_gammas),
                      "constants": p.constants})
    if args.format == "json":
        text = _json(items)
    else:
        lines = [f"{'preset':<10} {'F':<9} {'f':<7} {'window':<12} constants"]
        for it in items:
            consts = ", ".join(f"{k}={v}" for k, v in it["constants"].items())
            w = f"[{it['window'][0]:g},{it['window'][1]:g}]"
            lines.append(f"{it['name']:<10} {it['F']:<9} {it['f']:<7} {w:<12} {consts}")
        lines.append("constant preset takes --c (default 1); gamma_s = -1/(2c)")
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "partners": (cmd_partners, "partner potentials, mu and Gamma on a grid"),
    "family": (cmd_family, "V1gamma and zero modes for a gamma list"),
    "zeromode": (cmd_zeromode, "zero modes with the normalized-seed parameter and N"),
    "regular-range": (cmd_regular_range, "regular and normalizable gamma intervals"),
    "gamma-star": (cmd_gamma_star, "peak locus gamma*(x)"),
    "peaks": (cmd_peaks, "maxima of the normalized squared zero mode"),
    "gamma-c": (cmd_gamma_c, "gamma with equal peak heights, bisected in --gamma lo,hi"),
    "spectrum": (cmd_spectrum, "low-lying spectra of V1, V2 and V1gamma"),
    "verify": (cmd_verify, "run the invariant suite"),
    "list-presets": (None, "built-in superpotentials"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isospec",
                     description="Isospectral potential families from composed superpotentials.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=None)
        if name == "list-presets":
            continue
        p.add_argument("--preset", choices=sorted(presets.PRESETS))
        p.add_argument("--F", help="outer function of u, e.g. 'sqrt(u)'")
        p.add_argument("--f", help="inner function of x, e.g. 'x^2+1'")
        p.add_argument("--c", type=float, help="constant for --preset constant (default 1)")
        p.add_argument("--gamma", help="comma-separated gamma values")
        p.add_argument("--xmin", type=float)
        p.add_argument("--xmax", type=float)
        p.add_argument("--n", type=int, default=DEFAULT_N, help="grid points (default 2001)")
        p.add_argument("--tol", type=float, default=quad.DEFAULT_TOL,
                       help="quadrature tolerance (default 1e-10)")
        if name in ("family", "zeromode"):
            p.add_argument("--allow-singular", action="store_true",
                           help="emit singular members (nan at the root, no normalization)")
        if name == "spectrum":
            p.add_argument("--k", type=int, default=spectral.DEFAULT_K,
                           help="number of levels (default 5)")
        if name == "gamma-c":
            p.add_argument("--gamma-tol", type=float, default=1e-3)
    return parser


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_values(argv))
        if args.command == "list-presets":
            return cmd_list_presets(args)
        if args.command == "verify" and args.preset is None and args.F is None and args.f is None:
            return cmd_verify(None, args)
        cfg = RunConfig(args)
        if cfg.format is None:
            cfg.format = "json" if args.command in (
                "regular-range", "peaks", "gamma-c", "spectrum") else "csv"
        return COMMANDS[args.command][0](cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except IsospecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
