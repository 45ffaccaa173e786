"""Command-line entry point: ``gibbs-shift <subcommand>``.

Every subcommand takes an experiment config (``--config run.toml``) or a bundled recipe
(``--recipe hard-disks``). The exit code is 0 iff all hard assertions pass.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .core import dumps_config, read_jsonl, write_jsonl
from .gibbs import estimate_correlation, sample_edges
from .harness import (RECIPES, ExperimentSpec, SpecError, _plain, build_corpus, corpus_seeds, replay,
                      run_density_check, run_diagnostics_experiment, run_displacement_experiment,
                      run_property_suite, write_csv, write_replay)
from .properties import check_configuration
from .transform import apply_transform, diagnostics, is_good, jacobian_density

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _kernel(name):
    return None if name == "auto" else name


def _load_spec(args, overrides=()) -> ExperimentSpec:
    if bool(args.config) == bool(args.recipe):
        raise SpecError("give exactly one of --config or --recipe")
    spec = ExperimentSpec.from_toml(args.config) if args.config else ExperimentSpec.recipe(args.recipe)
    for key in ("samples", "seed", "n") + tuple(overrides):
        v = getattr(args, key, None)
        if v is not None:
            setattr(spec, key, v)
    if getattr(args, "out_dir", None):
        spec.out_dir = args.out_dir
    spec.__post_init__()
    return spec


def _finish(report, out_dir) -> int:
    path = report.write(out_dir)
    for line in report.summary_lines():
        print(line)
    print(f"report written to {path / 'report.json'}")
    return EXIT_OK if report.ok else EXIT_FAIL


# ---------------------------------------------------------------- subcommands

def cmd_sample(args) -> int:
    spec = _load_spec(args)
    dec, consts = spec.decomposition()
    configs, meta = build_corpus(spec, dec, consts, kernel=_kernel(args.kernel), edges=args.with_edges)
    write_jsonl(args.out, configs)
    print(f"wrote {len(configs)} configurations to {args.out}")
    if args.meta:
        Path(args.meta).write_text(json.dumps(_plain(meta), sort_keys=True, indent=1) + "\n")
    if args.estimates:
        if len(configs) < 30:
            print("estimates need at least 30 samples; skipped", file=sys.stderr)
        else:
            cells = [(-1.0, 0.0, -1.0, 0.0), (0.0, 1.0, -1.0, 0.0), (-1.0, 0.0, 0.0, 1.0), (0.0, 1.0, 0.0, 1.0)]
            rows = estimate_correlation(configs, 1, cells, spec.xi)
            rows += estimate_correlation(configs, 2, [(cells[0], cells[3]), (cells[1], cells[2])], spec.xi)
            write_csv(args.estimates, rows, ["quantity", "estimate", "stderr", "bound", "flag"])
            print(f"wrote correlation estimates to {args.estimates}")
    return EXIT_OK


def cmd_edges(args) -> int:
    spec = _load_spec(args)
    dec, _ = spec.decomposition()
    configs = list(read_jsonl(args.inp))
    _, seeds = corpus_seeds(spec, spec.n, len(configs))
    out = []
    for cfg, s in zip(configs, seeds):
        e = sample_edges(dec, spec.beta, cfg, s)
        out.append(cfg.with_edges(e))
    write_jsonl(args.out, out)
    print(f"wrote {len(out)} configurations with {sum(len(c.edges) for c in out)} edges to {args.out}")
    return EXIT_OK


def cmd_transform(args) -> int:
    spec = ExperimentSpec.from_toml(args.params)
    dec, _ = spec.decomposition()
    kernel = _kernel(args.kernel)
    failures = count = 0
    with open(args.out, "w") as fo, open(args.transcript, "w") if args.transcript else _Null() as ft:
        for idx, cfg in enumerate(read_jsonl(args.inp)):
            params = spec.transform_params(dec, cfg.window.n)
            out, res = check_configuration(cfg, params, dec, kernel)
            if not out.ok:
                failures += 1
                art = write_replay(spec.out_dir, "transform", spec, cfg, params, out.violations, idx)
                print(f"configuration {idx}: {sorted(out.violations)}; replay artifact {art}", file=sys.stderr)
            fo.write(dumps_config(apply_transform(cfg, res)) + "\n")
            theta, phi = jacobian_density(cfg, res, params, dec, beta=spec.beta)
            s1, s2 = diagnostics(cfg, params, dec, result=res, kernel=kernel)
            rec = res.to_dict() | {"index": idx, "theta": theta, "phi": phi, "S1": s1, "S2": s2,
                                   "goodness": is_good(cfg, params, dec).to_dict(),
                                   "violations": _plain(out.violations), "mode": "strict" if spec.strict else "relaxed"}
            ft.write(json.dumps(_plain(rec), sort_keys=True) + "\n")
            count += 1
    print(f"transformed {count} configurations; {failures} with violations")
    return EXIT_OK if failures == 0 else EXIT_FAIL


class _Null:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def write(self, _):
        pass


def _corpus(args):
    return list(read_jsonl(args.inp)) if getattr(args, "inp", None) else None


def cmd_verify(args) -> int:
    spec = _load_spec(args)
    rep = run_property_suite(spec, corpus=_corpus(args), kernel=_kernel(args.kernel), out_dir=spec.out_dir)
    return _finish(rep, spec.out_dir)


def cmd_density(args) -> int:
    spec = _load_spec(args)
    funcs = args.functionals.split(",") if args.functionals else None
    rep = run_density_check(spec, funcs, corpus=_corpus(args), kernel=_kernel(args.kernel))
    return _finish(rep, spec.out_dir)


def cmd_displacement(args) -> int:
    spec = _load_spec(args)
    n_values = [float(v) for v in args.n_values.split(",")] if args.n_values else None
    rep = run_displacement_experiment(spec, n_values, kernel=_kernel(args.kernel))
    return _finish(rep, spec.out_dir)


def cmd_diagnostics(args) -> int:
    spec = _load_spec(args)
    rep = run_diagnostics_experiment(spec, corpus=_corpus(args), kernel=_kernel(args.kernel))
    return _finish(rep, spec.out_dir)


def cmd_replay(args) -> int:
    res = replay(args.artifact, kernel=_kernel(args.kernel))
    print(json.dumps(res, sort_keys=True, indent=1))
    return EXIT_OK if not res["violations"] else EXIT_FAIL


# ---------------------------------------------------------------- parser

def _spec_options(p, io_in=False):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config", help="experiment TOML file")
    g.add_argument("--recipe", choices=RECIPES, help="bundled recipe")
    p.add_argument("--samples", type=int, help="override the sample count")
    p.add_argument("--seed", type=int, help="override the seed")
    p.add_argument("--n", type=float, help="override the window half-width")
    p.add_argument("--out-dir", help="directory for reports and replay artifacts")
    if io_in:
        p.add_argument("--in", dest="inp", help="use configurations from this JSONL instead of sampling")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gibbs-shift", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--kernel", choices=("auto", "cython", "python"), default="auto",
                    help="hot-loop implementation (default: compiled if available)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample configurations from the finite-volume Gibbs measure")
    _spec_options(p)
    p.add_argument("--out", required=True, help="output JSONL")
    p.add_argument("--with-edges", action="store_true", help="also sample the edge process")
    p.add_argument("--meta", help="write sampler metadata JSON here")
    p.add_argument("--estimates", help="write correlation estimates CSV here (needs >= 30 samples)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("edges", help="sample edges for stored configurations")
    _spec_options(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("transform", help="apply the shift transformation and write transcripts")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--params", required=True, help="experiment TOML with the model and [transform] section")
    p.add_argument("--out", required=True)
    p.add_argument("--transcript")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", help="run the property suite")
    _spec_options(p, io_in=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("density-check", help="check the change-of-variables identity")
    _spec_options(p, io_in=True)
    p.add_argument("--functionals", help="comma-separated: one,count_left,edge_count,one_in_cell")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("displacement", help="central shift versus window size")
    _spec_options(p)
    p.add_argument("--n-values", help="comma-separated increasing window sizes")
    p.set_defaults(func=cmd_displacement)

    p = sub.add_parser("diagnostics", help="means of beta*S1 and S2")
    _spec_options(p, io_in=True)
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("replay", help="re-run the hard checks stored in a replay artifact")
    p.add_argument("artifact")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, ValueError, FileNotFoundError) as exc:
        print(f"gibbs-shift: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
