"""Command-line entry point.

Every subcommand writes CSV (or verdict lines) preceded by ``#`` comment
lines echoing the tool version, the resolved configuration, the seed and
a digest of the urn specification. Nothing time-dependent is printed, so
identical arguments give byte-identical output.

Exit status: 0 on success, 1 if any verdict fails, 2 on input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analysis, corpus, mean_engine, simulator, spectral
from .urn_core import SpecError, check_balanced, load_spec, spec_digest, static_tenability_check
from .verification import analyse_urn, bound_rows, fit_window, verify_urn

SUBCOMMANDS = ("validate", "spectrum", "mean", "simulate", "moments", "verify", "verify-bounds", "report")


@dataclass
class RunConfig:
    spec_path: str
    subcommand: str
    n_max: int = 10_000
    replicates: int = 1_000
    master_seed: int = 1
    checkpoint_ratio: float = 2.0
    p: list = field(default_factory=lambda: [2.0])
    fit_min: int | None = None
    exponent_tol: float = 0.05
    workers: int = 1
    allow_unbalanced: bool = False
    record_increments: bool = False
    out: str | None = None


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polyaurn", description="Balanced generalized Polya urns: exact means, "
                     "simulation, moment growth and bound verification.")
    parser.add_argument("--version", action="version", version=f"polyaurn {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "validate": "check the spec file, balance and tenability",
        "spectrum": "eigenvalues, multiplicities and Jordan indices of the intensity matrix",
        "mean": "exact E X_n on a geometric grid",
        "simulate": "simulate replicates and emit checkpointed states",
        "moments": "Monte Carlo central moments and fitted growth exponents",
        "verify": "pass/fail verdicts for every identity and bound",
        "verify-bounds": "per-eigenvalue product-norm bound verdicts (no simulation)",
        "report": "spectrum, mean, simulation summary, moments and verdicts in one file",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("spec", help="urn spec JSON file, or the name of a bundled example")
        sp.add_argument("--out", help="write output to this file instead of stdout")
        if name == "verify-bounds":
            sp.add_argument("--exponent-tol", type=float, default=0.05)
        if name in ("validate", "spectrum", "verify-bounds"):
            continue
        sp.add_argument("--n-max", type=int, default=10_000)
        sp.add_argument("--checkpoint-ratio", type=float, default=2.0)
        if name == "mean":
            continue
        sp.add_argument("--replicates", type=int, default=1_000)
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--workers", type=int, default=1)
        if name == "simulate":
            sp.add_argument("--allow-unbalanced", action="store_true")
            sp.add_argument("--record-increments", action="store_true",
                            help="add the martingale increment Y_n to every row")
        else:
            sp.add_argument("--p", type=float, action="append", help="moment order (repeatable)")
            sp.add_argument("--fit-min", type=int, help="smallest n used in growth fits")
            if name != "moments":
                sp.add_argument("--exponent-tol", type=float, default=0.05,
                                help="tolerance added to theoretical exponents")
    return parser


def resolve_spec_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    stem = p.stem if p.suffix == ".json" else p.name
    if stem in corpus.NAMES:
        return corpus.path(stem)
    raise SpecError(f"no such spec file: {name}")


def _config(args) -> RunConfig:
    cfg = RunConfig(spec_path=args.spec, subcommand=args.subcommand, out=args.out)
    for attr, key in (("n_max", "n_max"), ("checkpoint_ratio", "checkpoint_ratio"), ("replicates", "replicates"),
                      ("master_seed", "seed"), ("workers", "workers"), ("fit_min", "fit_min"),
                      ("allow_unbalanced", "allow_unbalanced"), ("record_increments", "record_increments"),
                      ("exponent_tol", "exponent_tol")):
        if hasattr(args, key):
            setattr(cfg, attr, getattr(args, key))
    if getattr(args, "p", None):
        cfg.p = sorted(set(args.p))
    if cfg.n_max < 1 or cfg.replicates < 1 or cfg.workers < 1:
        raise SpecError("--n-max, --replicates and --workers must be positive")
    if cfg.exponent_tol < 0:
        raise SpecError("--exponent-tol must be nonnegative")
    if any(p < 1 for p in cfg.p):
        raise SpecError("moment orders must be at least 1")
    return cfg


def _num(x) -> str:
    return repr(float(x))


def _banner(out, cfg: RunConfig, spec):
    out.write(f"# polyaurn {__version__} {cfg.subcommand}\n")
    # workers only changes scheduling, never results, so it is not echoed
    shown = {k: v for k, v in asdict(cfg).items() if k not in ("out", "subcommand", "workers")}
    shown["spec_path"] = Path(cfg.spec_path).name
    out.write("# config: " + " ".join(f"{k}={v}" for k, v in shown.items()) + "\n")
    out.write(f"# seed={cfg.master_seed} spec_digest={spec_digest(spec)} colours={','.join(spec.colors)}\n")


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def cmd_validate(cfg, spec, out) -> int:
    cert = check_balanced(spec)
    ten = static_tenability_check(spec).replace("_", " ")
    out.write(f"{cert}, {ten}\n")
    return 0 if cert.balanced else 1


def write_spectrum(out, spec) -> spectral.UrnClassification | None:
    from .urn_core import intensity_matrix

    A = intensity_matrix(spec)
    cert = check_balanced(spec)
    sp = spectral.eigen_decompose(A, b=cert.b)
    w = _writer(out)
    w.writerow(["lambda_re", "lambda_im", "mult", "nu", "is_lambda1"])
    for k, c in enumerate(sp.components):
        w.writerow([_num(c.lam.real), _num(c.lam.imag), c.alg_mult, c.nu, int(k == 0)])
    if cert.balanced:
        cls = spectral.classify_urn(sp, cert.b)
        out.write(f"# classification: {cls.short} (kind={cls.kind}, Re lambda2/lambda1={cls.ratio:.12g}, "
                  f"nu2={cls.nu2})\n")
        return cls
    out.write("# classification: unavailable (urn not balanced)\n")
    return None


def cmd_spectrum(cfg, spec, out) -> int:
    write_spectrum(out, spec)
    return 0


def write_mean(out, cfg, spec):
    chain = mean_engine.ProductChain.from_spec(spec)
    grid = np.concatenate([[0], simulator.checkpoint_grid(cfg.n_max, cfg.checkpoint_ratio)])
    w = _writer(out)
    w.writerow(["n"] + [f"EX_{c}" for c in spec.colors])
    for n in grid:
        m = mean_engine.exact_mean(spec, int(n), chain)
        w.writerow([int(n)] + [_num(v) for v in m])


def cmd_mean(cfg, spec, out) -> int:
    write_mean(out, cfg, spec)
    return 0


def cmd_simulate(cfg, spec, out) -> int:
    batch = simulator.run_batch(spec, cfg.n_max, cfg.replicates, cfg.master_seed,
                                checkpoint_ratio=cfg.checkpoint_ratio, workers=cfg.workers,
                                allow_unbalanced=cfg.allow_unbalanced,
                                record_increments=cfg.record_increments)
    Y = batch.increments() if cfg.record_increments and check_balanced(spec).balanced else None
    w = _writer(out)
    header = ["replicate", "n"] + [f"X_{c}" for c in spec.colors]
    if Y is not None:
        header += [f"Y_{c}" for c in spec.colors]
    w.writerow(header)
    failures = 0
    for r in range(len(batch)):
        fa = int(batch.failed_at[r])
        for k, n in enumerate(batch.grid):
            if fa >= 0 and n >= fa:
                break
            row = [int(batch.indices[r]), int(n)] + [_num(v) for v in batch.states[r, k]]
            if Y is not None:
                row += [_num(v) for v in Y[r, n - 1]]
            w.writerow(row)
        if fa >= 0:
            failures += 1
            out.write(f"# replicate {int(batch.indices[r])}: tenability violated at step {fa} "
                      f"({simulator._FAIL_MSG[int(batch.status[r])]})\n")
    return 1 if failures else 0


def write_moments(out, cfg, ua):
    exp, lp = analysis.theorem_t2_case(ua.classification)
    w = _writer(out)
    w.writerow(["n", "p", "estimate", "stderr", "theoretical_exponent", "fitted_exponent"])
    for p in cfg.p:
        rep = ua.reports[p]
        fit = ua.fits[p]
        fitted = "" if fit is None else _num(fit.alpha_hat)
        for n, est, se in rep.rows():
            w.writerow([n, _num(p), _num(est), _num(se), _num(exp), fitted])
    out.write(f"# fit: log m_n = alpha log n + {lp:g} log log n + c over n >= {fit_window(ua.batch.grid, cfg.fit_min)}"
              f"; classification {ua.classification.kind}\n")


def _analyse(cfg, spec, simulate=True):
    return analyse_urn(spec, n_max=cfg.n_max, replicates=cfg.replicates, seed=cfg.master_seed, ps=cfg.p,
                       checkpoint_ratio=cfg.checkpoint_ratio, workers=cfg.workers, fit_min=cfg.fit_min,
                       simulate=simulate)


def cmd_moments(cfg, spec, out) -> int:
    write_moments(out, cfg, _analyse(cfg, spec))
    return 0


def _verify(cfg, spec, out, ua=None) -> int:
    verdicts = verify_urn(spec, n_max=cfg.n_max, replicates=cfg.replicates, seed=cfg.master_seed, ps=cfg.p,
                          checkpoint_ratio=cfg.checkpoint_ratio, workers=cfg.workers, fit_min=cfg.fit_min, ua=ua,
                          exponent_tol=cfg.exponent_tol)
    for v in verdicts:
        out.write(v.line() + "\n")
    failed = sum(v.failed for v in verdicts)
    out.write(f"# {len(verdicts)} verdicts, {failed} failed\n")
    return 1 if failed else 0


def cmd_verify(cfg, spec, out) -> int:
    if not check_balanced(spec).balanced:
        raise SpecError("verify needs a balanced urn")
    return _verify(cfg, spec, out)


def cmd_verify_bounds(cfg, spec, out) -> int:
    if not check_balanced(spec).balanced:
        raise SpecError("verify-bounds needs a balanced urn")
    w = _writer(out)
    w.writerow(["lambda_re", "lambda_im", "nu", "lsof_theoretical", "lsof_fitted", "lsof_constant",
                "lsof_spread", "lsof_pass", "lsoff_bound", "lsoff_log_power", "lsoff_slope", "lsoff_pass"])
    failed = 0
    for c, v, slope, e, lp in bound_rows(spec, exponent_tol=cfg.exponent_tol):
        row = [_num(c.lam.real), _num(c.lam.imag), c.nu]
        if v is None:
            row += ["", "", "", "", ""]
        else:
            row += [_num(v.exponent_theoretical), _num(v.exponent_fitted), _num(v.constant_estimate),
                    _num(v.constant_spread), "PASS" if v.passed else "FAIL"]
            failed += not v.passed
        ok = slope is None or slope <= e + cfg.exponent_tol
        failed += not ok
        row += [_num(e), lp, "" if slope is None else _num(slope), "PASS" if ok else "FAIL"]
        w.writerow(row)
    out.write("# lsoff slope fitted over n = 2^9..2^16\n")
    return 1 if failed else 0


def cmd_report(cfg, spec, out) -> int:
    if not check_balanced(spec).balanced:
        raise SpecError("report needs a balanced urn")
    out.write("## spectrum\n")
    write_spectrum(out, spec)
    out.write("## mean\n")
    write_mean(out, cfg, spec)
    ua = _analyse(cfg, spec)
    batch = ua.batch
    out.write("## simulate\n")
    w = _writer(out)
    w.writerow(["n"] + [f"sample_mean_{c}" for c in spec.colors] + [f"EX_{c}" for c in spec.colors])
    ok = batch.ok
    for k, n in enumerate(batch.grid):
        sm = batch.states[ok, k].mean(axis=0)
        w.writerow([int(n)] + [_num(v) for v in sm] + [_num(v) for v in ua.mean_series[k]])
    out.write(f"# replicates={len(batch)} tenability_failures={int(np.sum(~ok))}\n")
    out.write("## moments\n")
    write_moments(out, cfg, ua)
    out.write("## verify\n")
    status = _verify(cfg, spec, out, ua)
    out.write("## summary\n")
    exp, lp = analysis.theorem_t2_case(ua.classification)
    for p in cfg.p:
        f = ua.fits[p]
        fitted = "n/a" if f is None else f"{f.alpha_hat:.4f} +- {f.stderr:.4f}"
        out.write(f"p={p:g}: fitted exponent {fitted}, theoretical {exp:.4f} (log power {lp:g})\n")
    out.write(f"overall: {'PASS' if status == 0 else 'FAIL'}\n")
    return status


COMMANDS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "mean": cmd_mean,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "verify": cmd_verify,
    "verify-bounds": cmd_verify_bounds,
    "report": cmd_report,
}


def dispatch(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(str(exc))
        return 2
    try:
        cfg = _config(args)
        spec = load_spec(resolve_spec_path(cfg.spec_path))
        buf = io.StringIO()
        _banner(buf, cfg, spec)
        status = COMMANDS[cfg.subcommand](cfg, spec, buf)
    except (SpecError, spectral.SpectralError, simulator.TenabilityError) as exc:
        stderr.write(f"polyaurn: error: {exc}\n")
        return 2
    text = buf.getvalue()
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stdout.write(text)
    return status


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
