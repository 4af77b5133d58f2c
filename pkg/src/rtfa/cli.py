"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not
converge.  Every run writes ``<output>.manifest.json`` next to its outputs;
``rtfa --replay <manifest>`` re-executes the recorded command.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .io import DataError, emit_matrix, ingest_signal, write_signal

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
UNSPEC = "(not fixed by the method; artifact default)"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunManifest:
    subcommand: str
    input_path: str
    params: dict
    seed: object
    tool_version: str
    output_paths: list = field(default_factory=list)
    argv: list = field(default_factory=list)

    def write(self, path):
        Path(path).write_text(json.dumps(self.__dict__, indent=2, sort_keys=True, default=_jsonable))
        return Path(path)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    return str(o)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_input(p):
    p.add_argument("input", help="signal file (csv-1col, csv-with-header or raw-float64-le)")
    p.add_argument("--format", dest="in_format", choices=["csv-1col", "raw-float64-le", "csv-with-header"])
    p.add_argument("--fs", type=float, help="sample rate in Hz (overrides the file header)")
    p.add_argument("--detrend-median", type=int, metavar="LEN",
                   help="subtract a running median of LEN samples (odd) before analysis; off by default")


def _add_output(p, default_fmt="csv"):
    p.add_argument("-o", "--output", required=True, help="output path")
    p.add_argument("--out-format", choices=["csv", "pgm8", "pgm16"], default=default_fmt)
    p.add_argument("--display", choices=["linear", "pow0.1"], default="linear", help="PGM gray mapping")


def _add_stft(p):
    p.add_argument("--window-sec", type=float, default=8.0, help=f"Gaussian window span in seconds {UNSPEC}")
    p.add_argument("--mbins", type=int, help="number of frequency bins minus one (M)")
    p.add_argument("--bin-width", type=float, default=None, help=f"frequency bin width in Hz used to derive M; 0.04 when neither this nor --mbins is given {UNSPEC}")
    p.add_argument("--hop", type=int, default=1, help="samples between frames")


def _add_pt(p, lam_default, pmax_default=None):
    if pmax_default is None:
        p.add_argument("--pmax", type=int, required=True, help="largest period")
    else:
        p.add_argument("--pmax", type=int, default=pmax_default, help="largest period in bins")
    p.add_argument("--lambda", dest="lam", type=float, default=lam_default, help="l1 penalty")
    p.add_argument("--zeta", choices=["unit", "linear", "quad"], default="quad", help="period penalty")
    p.add_argument("--max-iters", type=int, default=5000,
                   help=f"iteration cap for the sparse solver and its fallback {UNSPEC}")


def build_parser():
    ap = _Parser(prog="rtfa", description="Ramanujan periodicity transform and de-shaped time-frequency analysis")
    ap.add_argument("--version", action="version", version=f"rtfa {__version__}")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (env RTFA_THREADS)")
    sub = ap.add_subparsers(dest="cmd", parser_class=_Parser)
    sub_kw = {"formatter_class": argparse.ArgumentDefaultsHelpFormatter}

    p = sub.add_parser(**sub_kw, name="simulate", help="write a synthetic scene and its ground truth")
    p.add_argument("--scene", choices=["impulse", "gaussian", "anhm", "fetal"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fs", type=float, default=100.0, help="sample rate for the anhm and fetal scenes")
    p.add_argument("--duration", type=float, default=20.0)
    p.add_argument("--snr", type=float, default=None, help="add white noise at this SNR (dB)")
    p.add_argument("-o", "--output", required=True)

    for name, k in (("rpt", False), ("vrpt", True)):
        p = sub.add_parser(name, **sub_kw, help="sparse period decomposition" + (" shared by several signals" if k else ""))
        if k:
            p.add_argument("inputs", nargs="+", help="signal files of equal length, one column each")
            p.add_argument("--format", dest="in_format", choices=["csv-1col", "raw-float64-le", "csv-with-header"])
            p.add_argument("--fs", type=float, default=1.0)
            p.add_argument("--detrend-median", type=int, metavar="LEN")
        else:
            _add_input(p)
        _add_pt(p, 1.0)
        p.set_defaults(zeta="unit")
        p.add_argument("-o", "--output", required=True, help="JSON report path")

    for name in ("stft", "spec"):
        p = sub.add_parser(name, **sub_kw, help="complex STFT" if name == "stft" else "spectrogram |V|^2")
        _add_input(p)
        _add_stft(p)
        p.add_argument("--fmax", type=float, help="keep rows up to this frequency (Hz)")
        _add_output(p)

    p = sub.add_parser(**sub_kw, name="deshape", help="cepstral de-shape STFT |V U|^2")
    _add_input(p)
    _add_stft(p)
    p.add_argument("--gamma", type=float, default=0.1, help="power applied to |STFT| before analysis")
    p.add_argument("--fmax", type=float)
    _add_output(p)

    for name in ("rds", "vrds"):
        p = sub.add_parser(name, **sub_kw, help="Ramanujan de-shape" + (" over neighbouring frames" if name == "vrds" else ""))
        _add_input(p)
        _add_stft(p)
        _add_pt(p, 0.01 if name == "rds" else 0.03, 100)
        p.add_argument("--fmax", type=float, default=60.0, help="highest analysed frequency in Hz")
        p.add_argument("--gamma", type=float, default=0.1, help="power applied to |STFT| before analysis")
        p.add_argument("--gamma-prime", type=float, default=1.0, help="power of the |STFT| mask")
        p.add_argument("--k", type=int, default=0 if name == "rds" else 1, help="neighbour half-width")
        p.add_argument("--mask", choices=["stft", "none"], default="stft", help="weight detected periods by |STFT|^gamma-prime")
        p.add_argument("--warm-start", action="store_true", help="start each frame from the previous solution")
        p.add_argument("--seed", type=int, default=None, help="recorded in the manifest; the method is deterministic")
        _add_output(p)

    p = sub.add_parser(**sub_kw, name="bench", help="compare the sparse transform with greedy baselines on synthetic scenes")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.1, help="small-to-large threshold")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser(**sub_kw, name="verify", help="evaluate and test the recovery guarantees")
    p.add_argument("mode", choices=["lemmas", "envelope", "jitter", "noise"])
    p.add_argument("--periods", default="2,3", help="comma-separated true periods")
    p.add_argument("--pmax", type=int, default=5)
    p.add_argument("--n", type=int, default=300, help="signal length")
    p.add_argument("--zeta", choices=["unit", "linear", "quad"], default="unit")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    return ap


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load(args):
    x, fs = ingest_signal(args.input, args.in_format, args.fs)
    return _detrend(x, args.detrend_median), fs


def _detrend(x, length):
    if not length:
        return x
    if length < 1 or length % 2 == 0:
        raise UsageError("--detrend-median must be a positive odd length")
    from scipy.signal import medfilt

    return x - medfilt(x, length)


def _window_bins(args, fs):
    from .tfr import bins_for_width, gaussian_window

    if args.mbins is not None and args.bin_width is not None:
        raise UsageError("--mbins and --bin-width are mutually exclusive")
    m = args.mbins if args.mbins is not None else bins_for_width(fs, args.bin_width or 0.04)
    if m < 1:
        raise UsageError("--mbins must be >= 1")
    return gaussian_window(fs, args.window_sec), m


def _check_conflicts(args):
    problems = []
    if args.cmd == "rds" and getattr(args, "k", 0) != 0:
        problems.append("rds does not take --k (use vrds)")
    if getattr(args, "hop", 1) is not None and getattr(args, "hop", 1) < 1:
        problems.append("--hop must be >= 1")
    if getattr(args, "mbins", None) is not None and getattr(args, "bin_width", None) is not None:
        problems.append("--mbins and --bin-width are mutually exclusive")
    if args.cmd in ("rds", "vrds") and args.mask == "none" and args.gamma_prime != 1.0:
        problems.append("--gamma-prime has no effect with --mask none")
    if problems:
        raise UsageError("conflicting options: " + "; ".join(problems))


def _solver_opts(args):
    from .solver import SolverOptions

    if args.max_iters < 1:
        raise UsageError("--max-iters must be >= 1")
    n = args.max_iters
    return SolverOptions(max_iters=n, cd_sweeps=n, polish_every=max(1, min(10, n)))


def _emit(tfr, args):
    path = emit_matrix(tfr, args.output, args.out_format, args.display)
    return [str(path)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    from . import signals

    if args.scene == "impulse":
        sc = signals.impulse_train_scene(args.seed)
    elif args.scene == "gaussian":
        sc = signals.gaussian_train_scene(args.seed, snr=5.21 if args.snr is None else args.snr)
    elif args.scene == "anhm":
        sc = signals.anhm_scene(fs=args.fs, duration=args.duration, seed=args.seed)
    else:
        sc = signals.fetal_maternal_scene(fs=args.fs, duration=args.duration, seed=args.seed)
    if args.snr is not None and args.scene != "gaussian":
        sc = signals.add_noise(sc, signals.sigma_for_snr(sc.clean, args.snr), args.seed)
    out = write_signal(args.output, sc.signal, sc.fs)
    truth = {
        "scene": args.scene, "seed": args.seed, "fs": sc.fs, "true_periods": list(sc.true_periods),
        "noise_sigma": sc.noise_sigma, "snr_db": sc.snr_db,
        "true_if": None if sc.true_if is None else sc.true_if.tolist(),
    }
    side = Path(str(out) + ".truth.json")
    side.write_text(json.dumps(truth, indent=2))
    return [str(out), str(side)], {}


def cmd_rpt(args):
    from .rpt import rpt, vrpt

    if args.cmd == "rpt":
        y, _ = _load(args)
        res = rpt(y, args.pmax, args.zeta, args.lam, _solver_opts(args))
    else:
        cols = [_detrend(ingest_signal(p, args.in_format, args.fs)[0], args.detrend_median) for p in args.inputs]
        if len({c.size for c in cols}) != 1:
            raise DataError("vrpt inputs must have equal length")
        res = vrpt(np.column_stack(cols), args.pmax, args.zeta, args.lam, _solver_opts(args))
    report = {"ip": list(res.ip), "eop": res.eop.tolist(), "sop": res.sop.tolist(), "x": res.x.tolist(),
              "kkt_residual": res.kkt_residual}
    Path(args.output).write_text(json.dumps(report, indent=2))
    return [args.output], {}


def cmd_tfr(args):
    from .deshape import deshape_stft
    from .tfr import spectrogram, stft, truncate_rows

    x, fs = _load(args)
    w, m = _window_bins(args, fs)
    v = stft(x, w, m, fs, args.hop)
    if args.cmd == "spec":
        out = spectrogram(v)
    elif args.cmd == "deshape":
        out = deshape_stft(v, args.gamma)
    else:
        out = v
    if args.fmax is not None:
        out = truncate_rows(out, args.fmax)
    return _emit(out, args), {"m_bins": m, "fs": fs}


def cmd_rds(args):
    from .rds import RDSConfig, rds_decompose

    x, fs = _load(args)
    w, m = _window_bins(args, fs)
    cfg = RDSConfig(args.pmax, args.fmax, args.lam, args.gamma, args.gamma_prime, args.zeta, args.k, args.mask,
                    args.warm_start, args.hop, _solver_opts(args))
    res = rds_decompose(x, w, m, cfg, fs, args.threads)
    return _emit(res.tfr, args), {"m_bins": m, "fs": fs, "kkt_max": res.kkt_max}


def cmd_bench(args):
    from .baselines import best_correlation, m_best, small_to_large
    from .rpt import rpt
    from .signals import gaussian_train_scene, impulse_train_scene

    rows = []
    for seed in range(args.seeds):
        for name, sc, lam, zeta in (
            ("impulse", impulse_train_scene(seed), 1.0, "linear"),
            ("gaussian", gaussian_train_scene(seed), 0.5, "quad"),
        ):
            y, truth = sc.signal, set(sc.true_periods)
            results = {
                "rpt": rpt(y, 50, zeta, lam),
                "small_to_large": small_to_large(y, 50, args.threshold),
                "m_best": m_best(y, 50, 2),
                "best_correlation": best_correlation(y, 50, 2),
            }
            for alg, r in results.items():
                top2 = tuple(sorted(int(p) for p in np.argsort(r.eop)[::-1][:2] + 1))
                rows.append({"scene": name, "seed": seed, "method": alg, "ip": list(r.ip),
                             "top2": list(top2), "hit": truth <= set(r.ip), "top2_hit": set(top2) == truth})
    Path(args.output).write_text(json.dumps(rows, indent=2))
    summary = {}
    for r in rows:
        k = (r["scene"], r["method"])
        s = summary.setdefault(k, [0, 0, 0])
        s[0] += r["hit"]
        s[1] += r["top2_hit"]
        s[2] += 1
    print(f"{'scene':<10}{'method':<18}{'truth in IP':>12}{'top-2 exact':>13}")
    for (scene, method), (h, t2, n) in summary.items():
        print(f"{scene:<10}{method:<18}{h:>9}/{n:<2}{t2:>10}/{n:<2}")
    return [args.output], {}


def cmd_verify(args):
    from . import oracles

    periods = [int(p) for p in args.periods.split(",") if p.strip()]
    inst = oracles.make_instance(args.n, args.pmax, periods, args.zeta, seed=args.seed)
    out = {"lemmas": oracles.lemma_bounds(inst)}
    if args.mode != "lemmas":
        if args.mode == "noise":
            pert = oracles.Noise(args.sigma)
            lam = args.lam or oracles.noise_lambda(inst, args.sigma)
        elif args.mode == "envelope":
            lam = args.lam or 0.5 * inst.m1_sy
            cond = oracles.theorem_conditions(inst, oracles.Envelope(0.0), lam)
            pert = oracles.Envelope(max_dev=0.9 * max(cond.details["dev_bound"], 0.0))
        else:
            pert = oracles.Jitter()
            lam_min = oracles.theorem_conditions(inst, pert, 1.0).details["lambda_min"]
            lam = args.lam or 1.1 * lam_min
        rep = oracles.recovery_trial(inst, pert, lam, args.trials, args.seed)
        out["trials"] = {k: v for k, v in rep.__dict__.items() if k != "reports"}
        out["lambda"] = lam
        out["containment_rate"] = rep.containment_rate
    Path(args.output).write_text(json.dumps(out, indent=2, default=_jsonable))
    print(json.dumps(out, indent=2, default=_jsonable))
    return [args.output], {}


COMMANDS = {
    "simulate": cmd_simulate, "rpt": cmd_rpt, "vrpt": cmd_rpt, "stft": cmd_tfr, "spec": cmd_tfr,
    "deshape": cmd_tfr, "rds": cmd_rds, "vrds": cmd_rds, "bench": cmd_bench, "verify": cmd_verify,
}


def run(argv):
    from .solver import NotConverged

    parser = build_parser()
    if argv and argv[0] == "--replay":
        if len(argv) != 2:
            raise UsageError("usage: rtfa --replay MANIFEST")
        argv = json.loads(Path(argv[1]).read_text())["argv"]
    args = parser.parse_args(argv)
    if args.cmd is None:
        raise UsageError(parser.format_help())
    if args.threads is None:
        env = os.environ.get("RTFA_THREADS", "")
        args.threads = int(env) if env.strip().isdigit() else 1
    _check_conflicts(args)
    try:
        outputs, extra = COMMANDS[args.cmd](args)
    except NotConverged as exc:
        print(f"rtfa: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    params = {k: v for k, v in vars(args).items() if k not in ("cmd", "output")}
    params.update(extra)
    inp = getattr(args, "input", None) or getattr(args, "inputs", None) or ""
    manifest = RunManifest(args.cmd, str(inp), params, getattr(args, "seed", None), __version__, outputs, list(argv))
    mpath = Path(str(args.output) + ".manifest.json")
    manifest.output_paths.append(str(mpath))
    manifest.write(mpath)
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return run(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError) as exc:
        print(f"rtfa: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
