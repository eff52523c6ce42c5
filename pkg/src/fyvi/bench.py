"""Synthetic clustering benchmark: four overlapping 2-D Gaussians plus uniform outliers.

``run_table1`` compares standard, sparse and hard EM; ``run_rho_sweep``
varies the entropic index.  Every seed fixes both the data and the
initialization, so all methods within a seed see the same points.
"""
import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gmm, metrics, svg
from .errors import NumericFailure
from .simplex import Regularizer

BENCH_MEANS = ((-1.0, -1.0), (0.0, 0.0), (1.0, 1.0), (1.0, -1.0))
BENCH_SCALES = (0.11, 0.5, 0.7, 0.9)
SWEEP_RHOS = (0.1, 0.5, 0.9, 1.0, 1.1, 1.5, 2.0, 3.0)
CSV_FIELDS = ["method", "rho", "seed", "ami", "ari", "silhouette", "sparsity", "final_fyvfe", "iters"]
METRICS = ("ami", "ari", "silhouette", "sparsity")

BENCH_METHODS = {
    "standard": Regularizer(1.0),
    "sparse": Regularizer(2.0),
    "hard": Regularizer.zero(),
}


@dataclass(frozen=True)
class BenchmarkSpec:
    """Component k has covariance ``scales[k] * I``; outliers are uniform on [-box, box]^2."""

    n_per_component: int = 250
    means: tuple = BENCH_MEANS
    scales: tuple = BENCH_SCALES
    n_outliers: int = 100
    box: float = 3.0
    seed: int = 0
    max_iter: int = 200
    tol: float = 0.0

    def __post_init__(self):
        if len(self.means) != len(self.scales) or min(self.scales) <= 0:
            raise ValueError("need one positive scale per component mean")

    @property
    def n_components(self):
        return len(self.means)


@dataclass
class Dataset:
    x: np.ndarray
    labels: np.ndarray = None


def generate(spec):
    """Component samples in order, then outliers (label -1)."""
    rng = np.random.default_rng([spec.seed, 0])
    d = len(spec.means[0])
    xs, ys = [], []
    for k, (mean, scale) in enumerate(zip(spec.means, spec.scales)):
        xs.append(np.asarray(mean) + np.sqrt(scale) * rng.standard_normal((spec.n_per_component, d)))
        ys.append(np.full(spec.n_per_component, k))
    xs.append(rng.uniform(-spec.box, spec.box, size=(spec.n_outliers, d)))
    ys.append(np.full(spec.n_outliers, -1))
    return Dataset(np.vstack(xs), np.concatenate(ys))


def method_name(omega):
    if omega.is_zero:
        return "hard"
    if omega.is_shannon:
        return "standard"
    return "sparse"


def run_one(spec, omega, name=None):
    """One fit on the seed's data; returns a CSV row dict plus the fit for diagnostics."""
    data = generate(spec)
    init = gmm.InitSpec(seed=(spec.seed, 1))
    res = gmm.fit(data.x, spec.n_components, omega, init, max_iter=spec.max_iter, tol=spec.tol)
    pred = gmm.hard_labels(res.resp)
    degenerate = len(np.unique(pred)) < 2
    row = {
        "method": name or method_name(omega),
        "rho": "zero" if omega.is_zero else omega.rho,
        "seed": spec.seed,
        "ami": metrics.adjusted_mutual_information(pred, data.labels),
        "ari": metrics.adjusted_rand_index(pred, data.labels),
        "silhouette": float("nan") if degenerate else metrics.silhouette_score(data.x, pred),
        "sparsity": gmm.e_step_sparsity(res.resp),
        "final_fyvfe": res.trace[-1],
        "iters": res.n_iter,
    }
    return row, res


def _run_row(args):
    spec, omega, name = args
    try:
        row, res = run_one(spec, omega, name)
    except NumericFailure as exc:
        # tag for the caller; attributes survive pickling from worker processes
        exc.seed = spec.seed
        raise
    return row, res.trace, res.state


@dataclass
class MetricsReport:
    method: str
    rho: object
    rows: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def values(self, key):
        return np.array([r[key] for r in self.rows], dtype=float)

    def mean(self, key):
        return float(np.mean(self.values(key)))

    def std(self, key):
        return float(np.std(self.values(key)))

    @property
    def degenerate_seeds(self):
        """Seeds whose prediction collapsed to one cluster (metrics set to 0 / nan)."""
        return [r["seed"] for r in self.rows if np.isnan(r["silhouette"])]

    def summary(self):
        return {k: (self.mean(k), self.std(k)) for k in METRICS}


def _run_grid(jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_row, jobs))
    return [_run_row(j) for j in jobs]


def _collect(jobs, outputs):
    reports = {}
    for (spec, omega, name), (row, trace, state) in zip(jobs, outputs):
        rep = reports.setdefault(name, MetricsReport(name, row["rho"]))
        rep.rows.append(row)
        rep.traces.append(trace)
        rep.states.append(state)
    return reports


def run_table1(seeds, methods=None, base=BenchmarkSpec(), workers=1):
    """Standard / sparse / hard EM over ``seeds``; returns {method: MetricsReport}."""
    if not seeds:
        raise ValueError("need at least one seed")
    methods = BENCH_METHODS if methods is None else methods
    jobs = [(_with_seed(base, s), omega, name) for name, omega in methods.items() for s in seeds]
    return _collect(jobs, _run_grid(jobs, workers))


def run_rho_sweep(seeds, rho_values=SWEEP_RHOS, base=BenchmarkSpec(), workers=1):
    """FYEM with Tsallis(rho) for each rho; returns {f'rho={rho:g}': MetricsReport}."""
    if not seeds:
        raise ValueError("need at least one seed")
    if any(r <= 0 for r in rho_values):
        raise ValueError("rho values must be positive")
    jobs = [(_with_seed(base, s), Regularizer(r), f"rho={r:g}") for r in rho_values for s in seeds]
    return _collect(jobs, _run_grid(jobs, workers))


def _with_seed(spec, seed):
    return BenchmarkSpec(spec.n_per_component, spec.means, spec.scales, spec.n_outliers, spec.box,
                         int(seed), spec.max_iter, spec.tol)


# -- output -----------------------------------------------------------------

def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def reports_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rep in reports.values():
        for row in rep.rows:
            writer.writerow([_fmt(row[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def write_csv(reports, path):
    Path(path).write_text(reports_csv(reports), encoding="utf-8")


def sweep_plots(reports, rho_values):
    """{metric: svg text} for the sweep, one mean line with a +-1 std band per metric."""
    out = {}
    for key in METRICS:
        means = [reports[f"rho={r:g}"].mean(key) for r in rho_values]
        stds = [reports[f"rho={r:g}"].std(key) for r in rho_values]
        out[key] = svg.line_plot(rho_values, {key: (means, stds)}, title=f"{key} vs rho",
                                 xlabel="rho", ylabel=key)
    return out


def write_sweep_plots(reports, rho_values, out_dir):
    paths = []
    for key, text in sweep_plots(reports, rho_values).items():
        path = Path(out_dir) / f"sweep_{key}.svg"
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths


def cluster_plot(spec, state, title=""):
    """Points by true label, outliers as crosses, fitted and true 2-sigma ellipses."""
    data = generate(spec)
    truth = [(m, s * np.eye(len(m))) for m, s in zip(spec.means, spec.scales)]
    return svg.scatter_plot(data.x, data.labels, state.means, state.covariances, title=title, truth=truth)


def format_table(reports):
    lines = [f"{'method':<10} {'AMI':>15} {'ARI':>15} {'silhouette':>15} {'sparsity':>15}"]
    for name, rep in reports.items():
        cells = " ".join(f"{rep.mean(k):>7.3f} ± {rep.std(k):.3f}" for k in METRICS)
        lines.append(f"{name:<10} {cells}")
    return "\n".join(lines)
