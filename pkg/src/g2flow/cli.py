"""Command line entry point: ``g2flow run|verify|inspect``.

Exit statuses: 0 success, 2 configuration or input error, 3 blow-up or
non-finite state, 4 invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import checkpoint, initial
from .config import ConfigError, RunConfig, load_config
from .flow import (DiagnosticsRecord, FlowState, RunResult, energy, initial_state,
                   lambda_diagnostics, run_flow)
from .lattice import BackgroundData, OctonionField
from .octonions import DomainError
from .verify import corrupted_structure, run_checks

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_INVARIANT = 0, 2, 3, 4


def build_background(cfg: RunConfig) -> BackgroundData:
    bg = cfg.background
    spec = cfg.lattice
    if bg["kind"] == "torsion_free":
        return BackgroundData.torsion_free(spec)
    if bg["kind"] == "sigma_u":
        return BackgroundData.from_section(initial.winding(spec, bg["axis"], bg["twists"]))
    ck = checkpoint.load(bg["path"], expected=spec)
    return BackgroundData.from_section(ck.field)


def build_initial(cfg: RunConfig) -> tuple[np.ndarray, float, int]:
    """Initial values, time and step count (nonzero only when resuming from a file)."""
    init, spec = cfg.init, cfg.lattice
    kind = init["kind"]
    if kind == "constant":
        return initial.constant(spec).values, 0.0, 0
    if kind == "winding":
        return initial.winding(spec, init["axis"], init["twists"]).values, 0.0, 0
    if kind == "perturbation":
        return initial.perturbation(spec, init["amplitude"], init["seed"]).values, 0.0, 0
    if kind == "hedgehog":
        return initial.hedgehog(spec, init["radius"], init["twists"]).values, 0.0, 0
    ck = checkpoint.load(init["path"], expected=spec)
    return ck.field.values, ck.t, ck.step


def execute(cfg: RunConfig, out=None) -> tuple[int, RunResult]:
    out = out or sys.stdout
    bg = build_background(cfg)
    values, t0, step0 = build_initial(cfg)
    state = initial_state(OctonionField(cfg.lattice, values), bg)
    state = FlowState(V=state.V, bg=state.bg, t=t0, step=step0)

    writer = fh = None
    if cfg.csv is not None:
        cfg.csv.parent.mkdir(parents=True, exist_ok=True)
        fh = open(cfg.csv, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(DiagnosticsRecord.CSV_COLUMNS)

    def on_record(_state, rec):
        if writer is not None:
            writer.writerow(rec.csv_row())

    def on_step(st):
        if cfg.checkpoint is not None and cfg.checkpoint_stride and st.step % cfg.checkpoint_stride == 0:
            checkpoint.save(cfg.checkpoint, st.V, st.t, st.step)

    try:
        result = run_flow(state, cfg.t_end, cfg.flow, record_stride=cfg.stride,
                          monitor=cfg.monitor, on_record=on_record, on_step=on_step)
    finally:
        if fh is not None:
            fh.close()
    final = result.state
    if cfg.checkpoint is not None and np.all(np.isfinite(final.V.values)):
        checkpoint.save(cfg.checkpoint, final.V, final.t, final.step)

    if result.blew_up:
        report = {"status": result.status, "message": result.message, "t": final.t,
                  "step": final.step, "Lambda_0": result.lambda0,
                  "Lambda_last": result.history_lambda[-1]}
        if result.fit is not None:
            report.update({"C": result.fit.C, "t_max": result.fit.t_max, "r2": result.fit.r2,
                           "fit_samples": result.fit.samples})
        if cfg.csv is not None:
            cfg.csv.with_name(cfg.csv.name + ".blowup.json").write_text(
                json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(f"blow-up: {result.message}", file=sys.stderr)
        if result.fit is not None:
            print(f"fitted Lambda(t) >= C/(t_max - t): C = {result.fit.C:.6g}, t_max = "
                  f"{result.fit.t_max:.6g}, R^2 = {result.fit.r2:.4f}", file=sys.stderr)
        return EXIT_BLOWUP, result
    last = result.records[-1]
    print(f"completed: t = {final.t:.6g}, steps = {final.step}, E = {last.E:.6g}, "
          f"Lambda_sup = {last.Lambda_sup:.6g}", file=out)
    return EXIT_OK, result


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.overrides)
    return execute(cfg)[0]


def cmd_verify(args) -> int:
    cfg = load_config(args.config, args.overrides)
    st = corrupted_structure() if args.inject_fault == "corrupt_phi" else None
    results = run_checks(cfg.lattice, st, seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} invariant(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_inspect(args) -> int:
    header, _ = checkpoint.read_header(args.checkpoint)
    ck = checkpoint.load(args.checkpoint)
    print(json.dumps(header, sort_keys=True))
    V = ck.field
    drift = V.norm_drift()
    print(f"points = {int(np.prod(V.spec.shape))}, max |norm^2 - 1| = {drift:.3e}")
    if drift < 1e-9:
        lam = lambda_diagnostics(V)[1]
        print(f"flat-background E = {energy(V):.17g}, Lambda_sup = {lam:.17g}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="g2flow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate the flow described by a config file")
    r.add_argument("config")
    r.add_argument("overrides", nargs="*", metavar="key=value")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run the identity and convergence suite")
    v.add_argument("config")
    v.add_argument("overrides", nargs="*", metavar="key=value")
    v.add_argument("--inject-fault", choices=["corrupt_phi"], default=None,
                   help="test mode: run the suite on a deliberately broken phi table")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    i = sub.add_parser("inspect", help="print a checkpoint header and summary")
    i.add_argument("checkpoint")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except checkpoint.LatticeMismatchError as exc:
        print(f"error: {exc}\n  checkpoint: {exc.found.to_dict()}\n  config:     "
              f"{exc.expected.to_dict()}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, checkpoint.CheckpointError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
