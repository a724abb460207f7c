"""Command-line interface.

Subcommands:

* ``run``     - execute a measurement campaign from a config file
* ``theory``  - emit Lifshitz force-gradient tables for a material pair
* ``spectra`` - reflection/transmission spectra of a layer stack file

Each report path writes CSV tables and matplotlib figures into the output
directory.  ``CASIMIR_RIG_THREADS`` caps the campaign worker pool.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .campaign import config_from_file, emit_theory_tables, run_campaign
from .configfile import parse_kv_file
from .errors import CasimirRigError
from .optics import load_stack, rt_spectrum, write_spectrum


def _cmd_run(args) -> int:
    cfg = config_from_file(args.config, profile_preset=args.profile,
                           seed_override=args.seed, out_dir=args.out)
    result = run_campaign(cfg)
    sys.stdout.write(result.summary)
    print(f"artifacts written to {result.out_dir}")
    return 0 if result.good_runs else 1


def _cmd_theory(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    d = np.geomspace(args.dmin * 1e-9, args.dmax * 1e-9, args.points)
    grads = {}
    for pair in args.pair:
        path = out_dir / f"theory_{pair}.csv"
        _, _, grad = emit_theory_tables(pair, d, temperature_K=args.temperature,
                                        out_path=path)
        grads[pair] = grad
        print(f"wrote {path}")
    if len(grads) == 2:
        (a, ga), (b, gb) = grads.items()
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ga != 0, gb / ga, np.nan)
        i = int(np.argmin(np.abs(d - 120e-9)))
        print(f"gradient ratio {b}/{a} at {d[i]*1e9:.0f} nm: {ratio[i]:.3f}")
    if args.plot:
        from . import plots

        plots.plot_theory(d, grads, out_dir)
        print(f"wrote {out_dir / 'theory.png'}")
    return 0


def _cmd_spectra(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stack = load_stack(parse_kv_file(args.stack))
    energies = np.linspace(args.emin, args.emax, args.points)
    r_spec, t_spec = rt_spectrum(stack, energies)
    name = Path(args.stack).stem
    write_spectrum(out_dir / f"{name}_R.txt", energies, r_spec)
    write_spectrum(out_dir / f"{name}_T.txt", energies, t_spec)
    print(f"wrote {out_dir / (name + '_R.txt')} and {out_dir / (name + '_T.txt')}")
    if args.plot:
        from . import plots

        plots.plot_spectra(energies, {name: (r_spec, t_spec)}, out_dir, name=f"{name}_spectra")
        print(f"wrote {out_dir / (name + '_spectra.png')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="casimir-rig",
                                     description="virtual sphere-plate force experiment")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a measurement campaign")
    p_run.add_argument("--config", required=True, help="campaign config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--profile", choices=("fast", "paper"), default=None,
                       help="timing preset applied under the config file")
    p_run.set_defaults(func=_cmd_run)

    p_th = sub.add_parser("theory", help="emit force-gradient theory tables")
    p_th.add_argument("--pair", action="append", required=True,
                      choices=("au_au", "au_ito", "vacuum"),
                      help="material pair (repeatable)")
    p_th.add_argument("--dmin", type=float, default=50.0, help="min separation, nm")
    p_th.add_argument("--dmax", type=float, default=1100.0, help="max separation, nm")
    p_th.add_argument("--points", type=int, default=60)
    p_th.add_argument("--temperature", type=float, default=300.0)
    p_th.add_argument("--out", default="theory_out")
    p_th.add_argument("--plot", action="store_true")
    p_th.set_defaults(func=_cmd_theory)

    p_sp = sub.add_parser("spectra", help="R/T spectra of a layer stack")
    p_sp.add_argument("--stack", required=True, help="stack description file")
    p_sp.add_argument("--emin", type=float, default=0.5, help="min photon energy, eV")
    p_sp.add_argument("--emax", type=float, default=6.5, help="max photon energy, eV")
    p_sp.add_argument("--points", type=int, default=240)
    p_sp.add_argument("--out", default="spectra_out")
    p_sp.add_argument("--plot", action="store_true")
    p_sp.set_defaults(func=_cmd_spectra)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CasimirRigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
