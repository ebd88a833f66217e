"""Command-line front end.

Subcommands: validate, sample, audit, truth, misspec, renderplan.
Exit codes: 0 success, 2 parse error, 3 semantic error, 4 I/O failure,
5 statistical-support failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import audit as audit_mod
from . import gcm as gcm_mod
from . import graph as g
from . import rendermap
from .errors import (
    CdraError,
    EmptyData,
    InsufficientSupport,
    ParseError,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SEMANTIC = 3
EXIT_IO = 4
EXIT_SUPPORT = 5


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}", line=exc.lineno) from exc


class _IoFailure(Exception):
    pass


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc


def _write_manifest(args, command: str, outputs: list[str], started: float,
                    config_path=None, inputs=None) -> None:
    out = getattr(args, "out", None)
    if not out:
        return
    manifest = {
        "command": command,
        "config": config_path,
        "config_sha256": _sha256_file(config_path) if config_path else None,
        "seed": getattr(args, "seed", None),
        "inputs": inputs or [],
        "outputs": outputs,
        "version": __version__,
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    _write_text(str(out) + ".manifest.json",
                json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CDRA_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ParseError(f"CDRA_SEED={env!r} is not an integer") from None
    return 0


def _load_gcm(path) -> gcm_mod.Gcm:
    return gcm_mod.Gcm.from_dict(_load_json(path))


def _load_dag(path) -> g.CausalDag:
    return g.CausalDag.from_dict(_load_json(path))


# ---------------------------------------------------------------------
# Subcommands

def cmd_validate(args) -> int:
    _load_gcm(args.config)  # raises InvalidGcm / graph errors on bad input
    print("OK")
    return EXIT_OK


def cmd_sample(args) -> int:
    started = time.monotonic()
    model = _load_gcm(args.config)
    seed = _resolve_seed(args)
    table = gcm_mod.sample_observational(model, args.n, seed)
    try:
        table.to_csv(args.out)
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc
    _write_manifest(args, "sample", [args.out], started, config_path=args.config)
    print(f"wrote {len(table)} rows to {args.out}")
    return EXIT_OK


def _audit_config(args, dag: g.CausalDag, seed: int) -> audit_mod.AuditConfig:
    return audit_mod.AuditConfig(
        assumed_dag=dag,
        seed=seed,
        estimator=args.estimator,
        bootstrap=args.bootstrap,
        coverage_floor=0.0 if args.allow_partial else 0.95,
    )


def cmd_audit(args) -> int:
    started = time.monotonic()
    dag = _load_dag(args.dag)
    seed = _resolve_seed(args)
    domains = {v: gcm_mod.SeverityDomain() for v in dag.factor_nodes()}
    data = gcm_mod.ingest_metrics(args.data, domains)
    config = _audit_config(args, dag, seed)
    report = audit_mod.run_audit(data, config)
    unsupported = [a for a in report.audits if a.flag == "insufficient support"]
    print(audit_mod.render_audit_table(report))
    if args.out:
        _write_text(args.out, report.to_json() + "\n")
        _write_manifest(args, "audit", [args.out], started,
                        config_path=args.dag, inputs=[args.data])
    if unsupported and not args.allow_partial:
        names = ", ".join(a.flag_target for a in unsupported)
        print(f"insufficient support for: {names}", file=sys.stderr)
        return EXIT_SUPPORT
    return EXIT_OK


def cmd_truth(args) -> int:
    started = time.monotonic()
    model = _load_gcm(args.config)
    frm, to = args.pair
    rows = {v: gcm_mod.true_ace(model, v, frm, to) for v in model.factors}
    for v, ace in rows.items():
        print(f"{v}: {ace:.4f}")
    if args.out:
        _write_text(args.out, json.dumps(
            {"pair": [frm, to], "true_ace": rows}, sort_keys=True, indent=2) + "\n")
        _write_manifest(args, "truth", [args.out], started, config_path=args.config)
    return EXIT_OK


def cmd_misspec(args) -> int:
    started = time.monotonic()
    model = _load_gcm(args.config)
    seed = _resolve_seed(args)
    factor_dag = g.CausalDag(
        nodes=model.factors,
        edges=tuple(e for e in model.dag.edges if e[1] != model.dag.sink),
    )
    config = _audit_config(args, factor_dag, seed)
    report = audit_mod.run_misspec_sweep(
        model, args.n, n_errors=args.errors, modes=args.modes,
        repeats=args.repeats, config=config)
    print(audit_mod.render_misspec_table(report))
    if args.out:
        _write_text(args.out, report.to_json() + "\n")
        _write_manifest(args, "misspec", [args.out], started, config_path=args.config)
    return EXIT_OK


def cmd_renderplan(args) -> int:
    started = time.monotonic()
    specs, edges = rendermap.specs_from_dict(_load_json(args.config))
    seed = _resolve_seed(args)
    plan = rendermap.emit_plan(specs, edges, args.n, seed)
    if args.out:
        _write_text(args.out, plan.to_jsonl())
        _write_manifest(args, "renderplan", [args.out], started, config_path=args.config)
    else:
        sys.stdout.write(plan.to_jsonl())
    print(f"emitted {len(plan.records)} records", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdra",
                                description="Causality-driven robustness audits")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, workers=True):
        if seed:
            sp.add_argument("--seed", type=int, default=None,
                            help="RNG seed (falls back to CDRA_SEED, then 0)")
        if workers:
            sp.add_argument("--workers", type=int, default=1,
                            help="worker bound; never affects results")

    sp = sub.add_parser("validate", help="validate a GCM config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("sample", help="sample an observational table")
    sp.add_argument("--config", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("audit", help="run an ACE audit over a data table")
    sp.add_argument("--data", required=True)
    sp.add_argument("--dag", required=True, help="assumed DAG JSON")
    sp.add_argument("--estimator", choices=["stratified", "forest"],
                    default="stratified")
    sp.add_argument("--bootstrap", type=int, default=None)
    sp.add_argument("--allow-partial", action="store_true")
    sp.add_argument("--out", default=None)
    common(sp)
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("truth", help="exact ground-truth ACE per factor")
    sp.add_argument("--config", required=True)
    sp.add_argument("--pair", type=_int_list, default=[0, 1],
                    help="from,to severity levels")
    sp.add_argument("--out", default=None)
    common(sp, workers=False)
    sp.set_defaults(func=cmd_truth)

    sp = sub.add_parser("misspec", help="DAG misspecification sweep")
    sp.add_argument("--config", required=True)
    sp.add_argument("--n", type=int, default=50000)
    sp.add_argument("--errors", type=_int_list, default=[1, 2, 4])
    sp.add_argument("--modes", type=lambda s: s.split(","), default=["add", "remove"])
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--estimator", choices=["stratified", "forest"],
                    default="stratified")
    sp.add_argument("--bootstrap", type=int, default=None)
    sp.add_argument("--allow-partial", action="store_true")
    sp.add_argument("--out", default=None)
    common(sp)
    sp.set_defaults(func=cmd_misspec)

    sp = sub.add_parser("renderplan", help="emit renderer setting plans")
    sp.add_argument("--config", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out", default=None)
    common(sp, workers=False)
    sp.set_defaults(func=cmd_renderplan)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InsufficientSupport as exc:
        print(f"support error: {exc}", file=sys.stderr)
        return EXIT_SUPPORT
    except EmptyData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except _IoFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CdraError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC


if __name__ == "__main__":
    sys.exit(main())
