"""Command-line front end: ``fyvi {entmax,gmm,sweep,vae,betagauss}``.

Settings resolve as flags > ``--config`` file (key=value lines) > defaults.
Every run that writes files records the merged settings in
``<out>/run_manifest.txt``.  Exit codes: 0 success, 1 numeric failure or
unreadable input, 2 usage error.
"""
import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bench, betagauss, gmm, idx, vae
from ._kernels import BACKEND
from .errors import FormatError, NumericFailure
from .simplex import Regularizer, fy_loss, fy_loss_score_gradient, prediction_map, support

GRAD_STEP = 1e-5
GRAD_FLOOR = 1e-3


class UsageError(Exception):
    pass


# -- argument types -------------------------------------------------------------

def _float_list(text):
    try:
        values = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values or not all(np.isfinite(values)):
        raise argparse.ArgumentTypeError(f"expected finite comma-separated numbers, got {text!r}")
    return values


def _regularizer(text):
    try:
        return Regularizer.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rho must be a positive number or 'hard', got {text!r}") from None


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _fmt(v):
    return f"{float(v):.10g}"


# -- config file ----------------------------------------------------------------

def read_config(path):
    """key=value lines; '#' starts a comment, keys may use dashes or underscores."""
    entries = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key.replace("-", "_")] = value
    return entries


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def _apply_config(sub, entries):
    """Install config entries as subparser defaults; argparse converts string defaults."""
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    defaults = {}
    for key, value in entries.items():
        if key in ("config", "command"):
            continue
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r} for this command")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = _bool(value)
        elif action.nargs not in (None, "?"):
            defaults[key] = value.split()
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)


# -- parser ------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="fyvi", description="Fenchel-Young variational inference toolkit.")
    parser.add_argument("--version", action="version", version=f"fyvi {__version__} ({BACKEND} kernels)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--out", help="output directory (default out/<command>)")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("entmax", parents=[common], help="evaluate the regularized prediction map")
    p.add_argument("--rho", type=_regularizer, default="1", help="entropic index, or 'hard'")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scores", type=_float_list, help="comma-separated score vector")
    src.add_argument("--random", nargs=2, type=_positive_int, metavar=("N", "K"),
                     help="N random Gaussian score vectors of length K")
    p.add_argument("--q", type=_float_list, help="target distribution for the FY loss")
    p.add_argument("--check-gradients", action="store_true",
                   help="compare the FY-loss gradient against central differences")

    p = subs.add_parser("gmm", parents=[common], help="standard / sparse / hard EM on the clustering benchmark")
    p.add_argument("--method", choices=("std", "sparse", "hard"), default="std")
    p.add_argument("--rho", type=float, default=2.0, help="entropic index for --method sparse")
    p.add_argument("--seeds", type=_positive_int, default=5, help="number of seeds, starting at --seed")
    p.add_argument("--max-iter", type=_positive_int, default=bench.BenchmarkSpec.max_iter)
    p.add_argument("--workers", type=_positive_int, default=1)

    p = subs.add_parser("sweep", parents=[common], help="FYEM over a grid of entropic indices")
    p.add_argument("--rhos", type=_float_list, default=",".join(f"{r:g}" for r in bench.SWEEP_RHOS))
    p.add_argument("--seeds", type=_positive_int, default=5)
    p.add_argument("--max-iter", type=_positive_int, default=bench.BenchmarkSpec.max_iter)
    p.add_argument("--workers", type=_positive_int, default=1)

    p = subs.add_parser("vae", parents=[common], help="train the toy FY beta-VAE")
    d = vae.VaeConfig()
    p.add_argument("--rho", type=float, default=d.rho_posterior, help="posterior family index (1, 1.5, 2)")
    p.add_argument("--rho-obs", type=float, default=d.rho_obs, help="observation loss index (1, 2)")
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--data", choices=("synthetic", "idx"), default="synthetic")
    p.add_argument("--images", help="IDX image file (with --data idx)")
    p.add_argument("--labels", help="optional IDX label file")
    p.add_argument("--limit", type=_positive_int, help="use only the first N images")
    p.add_argument("--n-train", type=_positive_int, default=512, help="synthetic training set size")
    p.add_argument("--epochs", type=_positive_int, default=d.epochs)
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--batch-size", type=_positive_int, default=d.batch_size)
    p.add_argument("--latent-dim", type=_positive_int, default=d.latent_dim)

    p = subs.add_parser("betagauss", parents=[common], help="pdf/CDF table and diagnostics of the standard member")
    p.add_argument("--rho", type=float, default=1.5)
    p.add_argument("--knots", type=_positive_int, default=201)
    p.add_argument("--samples", type=_positive_int, default=10000, help="draws for the sampler diagnostic")
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            entries = read_config(args.config)
            sub = parser._subparsers._group_actions[0].choices[args.command]
            _apply_config(sub, entries)
        except UsageError as exc:
            parser.error(str(exc))
        args = parser.parse_args(argv)
        args.config_entries = entries
    else:
        args.config_entries = {}
    if args.out is None:
        args.out = str(Path("out") / args.command)
    return parser, args


def write_manifest(out, args, argv):
    lines = [f"command = {args.command}", f"argv = {' '.join(argv)}", f"kernels = {BACKEND}",
             f"started = {time.strftime('%Y-%m-%dT%H:%M:%S')}"]
    if args.config:
        lines.append(f"config_file = {args.config}")
        lines += [f"config.{k} = {v}" for k, v in args.config_entries.items()]
    for key, value in sorted(vars(args).items()):
        if key in ("config_entries", "command"):
            continue
        if isinstance(value, Regularizer):
            value = "hard" if value.is_zero else f"{value.rho:g}"
        elif isinstance(value, list):
            value = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
        lines.append(f"{key} = {value}")
    (out / "run_manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- commands --------------------------------------------------------------------

def gradient_check(eta, q, omega, h=GRAD_STEP):
    """Max relative error between the analytic FY-loss score gradient and central differences."""
    analytic = fy_loss_score_gradient(eta, q, omega)
    fd = np.empty_like(eta)
    for j in range(eta.shape[1]):
        step = np.zeros_like(eta)
        step[:, j] = h
        fd[:, j] = (fy_loss(eta + step, q, omega) - fy_loss(eta - step, q, omega)) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(analytic)), GRAD_FLOOR)
    return float(np.max(np.abs(fd - analytic) / denom))


def cmd_entmax(args, parser, out):
    omega = args.rho
    rng = np.random.default_rng(args.seed)
    if args.random:
        n, k = args.random
        eta = rng.standard_normal((n, k))
    elif args.scores:
        eta = np.array([args.scores])
    else:
        parser.error("entmax needs --scores or --random N K")
    q_map = prediction_map(eta, omega)
    if args.scores:
        print(",".join(_fmt(v) for v in q_map[0]))
        print("support = {" + ",".join(str(i + 1) for i in support(q_map[0])) + "}")
    else:
        sizes = np.count_nonzero(q_map, axis=1)
        print(f"vectors = {len(eta)}, K = {eta.shape[1]}")
        print(f"mean support size = {_fmt(sizes.mean())}, min = {sizes.min()}, max = {sizes.max()}")
    if args.q is not None:
        q = np.array([args.q])
        if q.shape[1] != eta.shape[1]:
            parser.error(f"--q has {q.shape[1]} entries, scores have {eta.shape[1]}")
        if np.any(q < 0) or abs(q.sum() - 1) > 1e-9:
            parser.error("--q must be a probability vector")
        print(f"fy_loss = {_fmt(fy_loss(eta, np.broadcast_to(q, eta.shape), omega).max())}")
    if args.check_gradients:
        if omega.is_zero:
            parser.error("--check-gradients needs a differentiable regularizer (rho > 0, not 'hard')")
        q = rng.dirichlet(np.ones(eta.shape[1]), size=len(eta))
        err = gradient_check(eta, q, omega)
        print(f"max relative gradient error = {err:.3e}")
    return 0


def _gmm_methods(args):
    if args.method == "std":
        return {"standard": Regularizer(1.0)}
    if args.method == "hard":
        return {"hard": Regularizer.zero()}
    return {"sparse": Regularizer(args.rho)}


def cmd_gmm(args, parser, out):
    seeds = [args.seed + i for i in range(args.seeds)]
    base = bench.BenchmarkSpec(max_iter=args.max_iter)
    reports = bench.run_table1(seeds, _gmm_methods(args), base=base, workers=args.workers)
    bench.write_csv(reports, out / "metrics.csv")
    for name, rep in reports.items():
        for seed, state in zip(seeds, rep.states):
            gmm.save_checkpoint(state, out / f"checkpoint_{name}_seed{seed}.json")
        spec = bench._with_seed(base, seeds[0])
        (out / f"clusters_{name}.svg").write_text(
            bench.cluster_plot(spec, rep.states[0], title=f"{name} EM, seed {seeds[0]}"), encoding="utf-8")
    print(bench.format_table(reports))
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def cmd_sweep(args, parser, out):
    seeds = [args.seed + i for i in range(args.seeds)]
    if any(r <= 0 for r in args.rhos):
        parser.error("--rhos must be positive")
    base = bench.BenchmarkSpec(max_iter=args.max_iter)
    reports = bench.run_rho_sweep(seeds, args.rhos, base=base, workers=args.workers)
    bench.write_csv(reports, out / "sweep.csv")
    bench.write_sweep_plots(reports, args.rhos, out)
    print(bench.format_table(reports))
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_vae(args, parser, out):
    if args.data == "idx":
        if not args.images:
            parser.error("--data idx needs --images")
        x, _ = idx.load_idx(args.images, args.labels, args.limit)
    else:
        if args.images or args.labels:
            parser.error("--images/--labels need --data idx")
        x = vae.make_synthetic_digits(args.n_train, seed=args.seed)
        if args.limit:
            x = x[:args.limit]
    try:
        config = vae.VaeConfig(input_dim=x.shape[1], latent_dim=args.latent_dim, rho_posterior=args.rho,
                               rho_obs=args.rho_obs, beta=args.beta, learning_rate=args.lr,
                               batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        params, trace, l1 = vae.train(config, x)
    except vae.TrainingDiverged as exc:
        vae.write_trace_csv(exc.trace, out / "trace.csv")
        raise
    vae.write_trace_csv(trace, out / "trace.csv")
    vae.save_checkpoint(params, config, out / "checkpoint.json")
    print(f"epochs = {len(trace)}, first loss = {_fmt(trace[0].mean_loss)}, final loss = {_fmt(trace[-1].mean_loss)}")
    print(f"final l1 = {_fmt(l1)}")
    return 0


def cmd_betagauss(args, parser, out):
    try:
        member = betagauss.standard_member(args.rho)
    except ValueError as exc:
        parser.error(str(exc))
    radius = member.radius if np.isfinite(member.radius) else 5.0
    u = np.linspace(-radius, radius, args.knots)
    pdf = betagauss.standard_pdf(u, member.rho)
    cdf = betagauss.standard_cdf(u, member.rho)
    with open(out / "betagauss.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u", "pdf", "cdf"])
        for row in zip(u, pdf, cdf):
            writer.writerow([repr(float(v)) for v in row])
    draws = betagauss.sample_standard(member.rho, args.samples, np.random.default_rng(args.seed))
    from scipy import stats

    ks = stats.kstest(draws, lambda t: betagauss.standard_cdf(t, member.rho))
    print(f"rho = {member.rho:g}, support radius = {_fmt(member.radius)}")
    print(f"variance = {_fmt(member.variance)}, sample variance = {_fmt(draws.var())}")
    print(f"KS statistic = {ks.statistic:.4g}, p = {ks.pvalue:.4g} (n = {args.samples})")
    print(f"wrote {out / 'betagauss.csv'}")
    return 0


COMMANDS = {"entmax": cmd_entmax, "gmm": cmd_gmm, "sweep": cmd_sweep, "vae": cmd_vae, "betagauss": cmd_betagauss}
MODULES = {"entmax": "simplex", "gmm": "gmm", "sweep": "gmm", "vae": "vae", "betagauss": "betagauss"}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, args = parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        parser.error(f"cannot create output directory {out}: {exc.strerror}")
    write_manifest(out, args, argv)
    try:
        return COMMANDS[args.command](args, parser, out)
    except NumericFailure as exc:
        seed = getattr(exc, "seed", args.seed)
        print(f"fyvi {args.command}: numeric failure in {MODULES[args.command]} (seed {seed}): {exc}",
              file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"fyvi {args.command}: cannot read input in {MODULES[args.command]} (seed {args.seed}): {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
