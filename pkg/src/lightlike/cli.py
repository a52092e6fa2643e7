"""Command-line front end.

Every command prints one report (JSON by default) and exits with
0 when all checks pass, 1 on unreadable or malformed input, 2 when a
validation or check fails, and 3 on an internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calculus.fields import Samples
from .algebra import algebra_suite
from .models import Model, SpecError, SpecValidationError, builtin, dump_spec, load_spec
from .normalize import normalize
from .report import CheckRecord, Config, Report
from .screen import ScreenError
from .suites import Setting, az_records, curvature_records, curvature_table, laws, torsion_records
from .tractor import BudgetExceeded

EXIT_OK, EXIT_INPUT, EXIT_CHECK, EXIT_INTERNAL = 0, 1, 2, 3


def _config(args: argparse.Namespace) -> Config:
    return Config(
        samples=args.samples,
        tol=args.tol,
        seed=args.seed,
        fd_fallback=args.fd_fallback == "on",
        node_budget=args.node_budget,
    )


def resolve(target: str) -> Model:
    """A spec path, or ``builtin:NAME[:SIZE]`` for a built-in geometry."""
    if target.startswith("builtin:"):
        parts = target.split(":")
        try:
            size = int(parts[2]) if len(parts) > 2 else None
            return builtin(parts[1], size)
        except (IndexError, ValueError) as exc:
            raise SpecError(f"bad built-in reference {target!r}: {exc}") from None
    return load_spec(target)


def _budget_record(exc: BudgetExceeded, cfg: Config) -> CheckRecord:
    return CheckRecord("tractor curvature", "plumbing", 0, float("nan"), cfg.tol, False,
                       f"{exc}; finite-difference fallback is off")


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args: argparse.Namespace, cfg: Config) -> Report:
    model = resolve(args.spec)
    rep = Report("validate", args.spec, cfg)
    s = Samples(model.struct.chart, cfg.samples, cfg.seed)
    rep.add(model.struct.validate(s, cfg.exact_tol, cfg.rank_tol))
    rep.add(az_records(Setting(model, cfg)))
    return rep


def cmd_laws(args: argparse.Namespace, cfg: Config) -> Report:
    model = resolve(args.spec)
    rep = Report("laws", args.spec, cfg)
    if args.normalize and model.cs is None:
        res = normalize(model, cfg, verify=False)
        rep.add(res.records)
        if res.cs is None:
            return rep
        model = res.normalized_model()
        rep.extra["structure"] = "normalized (the geometry file carries no structure)"
    rep.add(laws(model, cfg))
    return rep


def cmd_normalize(args: argparse.Namespace, cfg: Config) -> Report:
    model = resolve(args.spec)
    rep = Report("normalize", args.spec, cfg)
    try:
        res = normalize(model, cfg)
    except BudgetExceeded as exc:
        rep.add(_budget_record(exc, cfg))
        return rep
    rep.add(res.records)
    if res.cs is not None:
        nm = res.normalized_model()
        try:
            rep.add(curvature_records(nm, res.cs, cfg))
        except BudgetExceeded as exc:
            rep.add(_budget_record(exc, cfg))
        if args.emit_spec:
            Path(args.emit_spec).write_text(json.dumps(dump_spec(nm), indent=2, sort_keys=True) + "\n")
    rep.extra = res.as_dict()
    return rep


def cmd_curvature(args: argparse.Namespace, cfg: Config) -> Report:
    model = resolve(args.spec)
    rep = Report("curvature", args.spec, cfg)
    cs = model.cs
    if cs is None:
        res = normalize(model, cfg, verify=False)
        rep.add(res.records)
        if res.cs is None:
            return rep
        cs = res.cs
        model = res.normalized_model()
        rep.extra["structure"] = "normalized (the geometry file carries no structure)"
    else:
        rep.extra["structure"] = "from spec"
    label = ""
    if args.perturb:
        seed = model.struct.chart.seed if cfg.seed is None else cfg.seed
        cs = cs.perturbed(np.random.default_rng(seed + 104729), args.perturb)
        label = f"perturbed eps={args.perturb:g}"
        rep.extra["perturbation"] = args.perturb
    try:
        rep.add(curvature_records(model, cs, cfg, label, random_pairs=args.random_fields))
        rep.add(torsion_records(model, cs, cfg, label))
        rep.extra["table"] = curvature_table(model, cs, cfg)
    except BudgetExceeded as exc:
        rep.add(_budget_record(exc, cfg))
    return rep


def cmd_model_algebra(args: argparse.Namespace, cfg: Config) -> Report:
    ms = args.m or [2, 3, 4]
    seed = 0 if cfg.seed is None else cfg.seed
    rep = Report("model-algebra", ",".join(str(m) for m in ms), cfg)
    for m in ms:
        if m < 2:
            raise SpecError(f"m must be at least 2, got {m}")
        rep.add(algebra_suite(m, args.count, seed))
    return rep


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--samples", type=int, default=20, help="sample points per check (default 20)")
    common.add_argument("--tol", type=float, default=1e-7, help="pass tolerance for curvature-level checks")
    common.add_argument("--seed", type=int, default=None, help="sampling seed (default: the chart seed)")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--fd-fallback", choices=("on", "off"), default="on",
                        help="use finite differences when an expression exceeds the node budget")
    common.add_argument("--node-budget", type=int, default=2_000_000)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")

    p = argparse.ArgumentParser(prog="lightlike", description="Tractor-level checks for lightlike geometries.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    spec_help = "geometry spec JSON, or builtin:NAME[:SIZE] with NAME in cone, hyperplane, sasakian"
    for name, fn, text in (
        ("validate", cmd_validate, "validate the lightlike structure and report A_Z"),
        ("laws", cmd_laws, "screen identities, transition maps, change laws and Galilean identities"),
        ("normalize", cmd_normalize, "run the normalization pipeline (requires A_Z = Id)"),
        ("curvature", cmd_curvature, "tractor curvature table, collinearity and scale-bundle checks"),
    ):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("spec", help=spec_help)
        sp.set_defaults(func=fn)
        if name == "laws":
            sp.add_argument("--normalize", action="store_true",
                            help="normalize a structure-less spec first so the connection laws can run")
        if name == "normalize":
            sp.add_argument("--emit-spec", default=None, help="write the normalized structure as a spec file")
        if name == "curvature":
            sp.add_argument("--perturb", type=float, default=0.0,
                            help="add eps times a random constant skew matrix to every Gamma_a")
            sp.add_argument("--random-fields", type=int, default=0, metavar="N",
                            help="also test N random polynomial-coefficient pairs (V, W)")
    sp = sub.add_parser("model-algebra", parents=[common], help="invariant suite of the model Lie algebra")
    sp.add_argument("--m", type=int, action="append", help="value of m (repeatable; default 2, 3 and 4)")
    sp.add_argument("--count", type=int, default=200, help="random elements per check")
    sp.set_defaults(func=cmd_model_algebra)
    sp = sub.add_parser("export", help="write a built-in geometry as a spec file")
    sp.add_argument("name", choices=("cone", "hyperplane", "sasakian"))
    sp.add_argument("--size", type=int, default=None, help="m for cone/hyperplane, n for sasakian")
    sp.add_argument("--no-structure", action="store_true", help="omit the compatible structure")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=None)
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            model = builtin(args.name, args.size)
            _emit(json.dumps(dump_spec(model, not args.no_structure), indent=2, sort_keys=True), args.out)
            return EXIT_OK
        cfg = _config(args)
        rep = args.func(args, cfg)
    except SpecValidationError as exc:
        rep = Report(args.command, getattr(args, "spec", ""), _config(args), list(exc.records),
                     {"error": str(exc)})
        rep.records.append(CheckRecord("spec validation", "plumbing", 0, float("nan"), 0.0, False, str(exc)))
        _emit(rep.to_json() if args.format == "json" else rep.to_text(), args.out)
        return EXIT_CHECK
    except ScreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    _emit(rep.to_json() if args.format == "json" else rep.to_text(), args.out)
    return EXIT_OK if rep.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
