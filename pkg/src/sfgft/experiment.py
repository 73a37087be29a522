"""Monte Carlo harness for the sensor-network comparisons.

Every trial is a pure function of the config and four 64-bit seeds
(trial, field, sample, noise).  Seeds are derived from the master seed
with SplitMix64 mixing over condition indices, so rows can be replayed
one at a time and reruns are byte-identical.
"""
import csv
import dataclasses
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyBandError, NumericalError, SfgftError, UndefinedSNRError
from .gft import build_gft, forward, q_inner, sample_gram, perturb_eigenvalue, verify_spectral_folding
from .graph import VertexPartition, build_knn_graph, check_partition_admissible, laplacian
from .interp import (
    Method,
    SampledSignal,
    baseline_basis,
    brute_force_oracle,
    interpolate_bl_ls,
    interpolate_sf,
)
from .sensors import (
    NoiseSpec,
    SignalSpec,
    add_noise,
    cap_snr,
    eval_signal,
    make_rng,
    place_sensors,
    sample_random,
    sample_uniform_grid,
    snr_db,
)

MASK64 = (1 << 64) - 1
SCHEMES = ("random", "uniform")
POLICIES = ("auto", "shared", "per-trial")
TAG_FIELD, TAG_SAMPLE, TAG_NOISE, TAG_VERIFY = 0xF1E1D, 0x5A3D1E, 0x0015E, 0x7E51F


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master, *parts):
    """Fold ``parts`` into ``master`` with SplitMix64; result is a 64-bit int."""
    h = splitmix64(int(master) & MASK64)
    for p in parts:
        h = splitmix64(h ^ (int(p) & MASK64))
    return h


# ---------------------------------------------------------------- config

def _floats(v):
    return tuple(float(x) for x in v)


def _ints(v):
    return tuple(int(x) for x in v)


def _strs(v):
    return tuple(str(x).strip() for x in v)


@dataclass(frozen=True)
class ExperimentConfig:
    n_sensors: int = 500
    knn_k: int = 8
    sigma_d: float = 0.3
    omega_list: tuple = (1.0,)
    sigma_list: tuple = (0.0,)
    sample_sizes: tuple = (100,)
    sampling_scheme: tuple = SCHEMES
    methods: tuple = ("BL_I", "BL_D", "SF_Q")
    n_trials: int = 100
    master_seed: int = 0
    output_path: str = "results"
    field_policy: str = "auto"
    sample_policy: str = "auto"
    verify_instances: int = 50

    def __post_init__(self):
        conv = {
            "omega_list": _floats, "sigma_list": _floats, "sample_sizes": _ints,
            "sampling_scheme": _strs, "methods": _strs,
        }
        for name, fn in conv.items():
            value = getattr(self, name)
            if isinstance(value, (str, int, float)):
                value = [value]
            object.__setattr__(self, name, fn(value))
        self.validate()

    def validate(self):
        if self.n_sensors < 2 or self.knn_k < 1 or self.n_trials < 1 or self.verify_instances < 1:
            raise ConfigError("n_sensors >= 2, knn_k >= 1, n_trials >= 1 and verify_instances >= 1 required")
        if self.knn_k >= self.n_sensors:
            raise ConfigError(f"knn_k={self.knn_k} must be below n_sensors={self.n_sensors}")
        if not self.sigma_d > 0:
            raise ConfigError("sigma_d must be positive")
        if not (self.omega_list and self.sigma_list and self.sample_sizes and self.methods
                and self.sampling_scheme):
            raise ConfigError("list-valued settings must be nonempty")
        if any(not math.isfinite(w) or w < 0 for w in self.omega_list):
            raise ConfigError("omegas must be finite and >= 0")
        if any(not math.isfinite(s) or s < 0 for s in self.sigma_list):
            raise ConfigError("noise sigmas must be finite and >= 0")
        if any(not 1 <= m < self.n_sensors for m in self.sample_sizes):
            raise ConfigError(f"sample sizes must lie in [1, {self.n_sensors})")
        for s in self.sampling_scheme:
            if s not in SCHEMES:
                raise ConfigError(f"unknown sampling scheme {s!r}; expected one of {SCHEMES}")
        for m in self.methods:
            if m not in Method.__members__:
                raise ConfigError(f"unknown method {m!r}; expected one of {list(Method.__members__)}")
        for name in ("field_policy", "sample_policy"):
            if getattr(self, name) not in POLICIES:
                raise ConfigError(f"{name} must be one of {POLICIES}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


TABLE1_DEFAULTS = {}
SWEEP_DEFAULTS = {
    "omega_list": (0.5, 1.0, 2.0, 3.0),
    "sigma_list": (0.1, 0.2, 0.4),
    "sample_sizes": (50, 75, 100, 125, 150),
    "sampling_scheme": ("uniform",),
}

_LIST_KEYS = {"omega_list", "sigma_list", "sample_sizes", "sampling_scheme", "methods"}
_ALIASES = {"omega": "omega_list", "sigma": "sigma_list", "sizes": "sample_sizes",
            "scheme": "sampling_scheme", "trials": "n_trials", "seed": "master_seed",
            "out": "output_path"}


def parse_config_text(text, source="<config>"):
    """Parse flat ``key = value`` lines; list values are comma-separated."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        key = _ALIASES.get(key, key)
        if key not in fields:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, value, fields[key])
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _coerce(key, value, fld):
    if key in _LIST_KEYS:
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if fld.type in ("int", int):
        return int(value)
    if fld.type in ("float", float):
        return float(value)
    return value


def load_config(path=None, command="table1", **overrides):
    """Command defaults, then the config file, then explicit overrides."""
    values = dict(SWEEP_DEFAULTS if command == "sweep" else TABLE1_DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_config_text(text, str(path)))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- results

RAW_COLUMNS = [
    "experiment", "method", "scheme", "omega", "sigma", "sample_size_requested",
    "sample_size_actual", "trial", "seed", "field_seed", "sample_seed", "noise_seed",
    "snr_db", "status", "diagnostic",
]
SUMMARY_COLUMNS = [
    "experiment", "method", "scheme", "omega", "sigma", "sample_size_requested",
    "mean_sample_size_actual", "mean_snr_db", "std_snr_db", "n_trials", "n_failed",
]
PLOT_COLUMNS = ["sample_size", "method", "mean_snr", "std"]


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    method: str
    scheme: str
    omega: float
    sigma: float
    sample_size_requested: int
    sample_size_actual: int
    trial: int
    seed: int
    field_seed: int
    sample_seed: object
    noise_seed: int
    snr_db: object
    status: str = "ok"
    diagnostic: str = ""

    @property
    def ok(self):
        return self.status == "ok"


@dataclass
class ExperimentResult:
    experiment: str
    config: ExperimentConfig
    rows: list = field(default_factory=list)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summarize(result):
    """Per-condition mean/std of SNR over successful trials, in first-seen order."""
    groups = OrderedDict()
    for row in result.rows:
        key = (row.experiment, row.method, row.scheme, row.omega, row.sigma,
               row.sample_size_requested)
        groups.setdefault(key, []).append(row)
    out = []
    for key, rows in groups.items():
        good = [r for r in rows if r.ok]
        snrs = np.array([r.snr_db for r in good], dtype=float)
        if good:
            mean = float(np.mean(snrs))
            std = float(np.std(snrs, ddof=1)) if len(good) > 1 else 0.0
            size = float(np.mean([r.sample_size_actual for r in good]))
        else:
            mean = std = size = None
        out.append(dict(zip(SUMMARY_COLUMNS, list(key) + [size, mean, std, len(good), len(rows) - len(good)])))
    return out


def _write_csv(path, header, rows):
    try:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_results(result, path):
    """Write ``raw.csv``, ``summary.csv`` and one plot-data CSV per (scheme, sigma, omega) panel.

    Returns the list of written paths.
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    raw_path = out / "raw.csv"
    _write_csv(raw_path, RAW_COLUMNS,
               ([getattr(r, c) for c in RAW_COLUMNS] for r in result.rows))
    summary = summarize(result)
    summary_path = out / "summary.csv"
    _write_csv(summary_path, SUMMARY_COLUMNS, ([s[c] for c in SUMMARY_COLUMNS] for s in summary))
    written = [raw_path, summary_path]

    panels = OrderedDict()
    for s in summary:
        panels.setdefault((s["scheme"], s["sigma"], s["omega"]), []).append(s)
    for (scheme, sigma, omega), entries in panels.items():
        p = out / f"plot_{scheme}_sigma{sigma:g}_omega{omega:g}.csv"
        _write_csv(p, PLOT_COLUMNS, ([e["sample_size_requested"], e["method"], e["mean_snr_db"],
                                      e["std_snr_db"]] for e in entries))
        written.append(p)
    return written


def read_raw_csv(path):
    """Load a raw results file back into ResultRow objects."""
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(
                experiment=rec["experiment"], method=rec["method"], scheme=rec["scheme"],
                omega=float(rec["omega"]), sigma=float(rec["sigma"]),
                sample_size_requested=int(rec["sample_size_requested"]),
                sample_size_actual=int(rec["sample_size_actual"]),
                trial=int(rec["trial"]), seed=int(rec["seed"]),
                field_seed=int(rec["field_seed"]),
                sample_seed=int(rec["sample_seed"]) if rec["sample_seed"] else None,
                noise_seed=int(rec["noise_seed"]),
                snr_db=float(rec["snr_db"]) if rec["snr_db"] else None,
                status=rec["status"], diagnostic=rec["diagnostic"],
            ))
    return rows


# ---------------------------------------------------------------- trials

class _LruCache:
    def __init__(self, maxsize=16):
        self.maxsize = maxsize
        self._data = OrderedDict()

    def get(self, key, factory):
        if key in self._data:
            self._data.move_to_end(key)
            return self._data[key]
        value = factory()
        self._data[key] = value
        if len(self._data) > self.maxsize:
            self._data.popitem(last=False)
        return value


class _TrialRunner:
    """Builds fields, graphs and decompositions on demand and caches them."""

    def __init__(self, config):
        self.config = config
        self.cache = _LruCache()

    def field(self, seed):
        def make():
            fld = place_sensors(self.config.n_sensors, seed)
            return fld, build_knn_graph(fld.positions, self.config.knn_k, self.config.sigma_d)
        return self.cache.get(("field", seed), make)

    def baseline(self, field_seed, method):
        _, g = self.field(field_seed)
        return self.cache.get(("basis", field_seed, method), lambda: baseline_basis(g, method))

    def gft(self, field_seed, partition):
        _, g = self.field(field_seed)
        key = ("gft", field_seed, partition.sample_set.tobytes())
        return self.cache.get(key, lambda: build_gft(g, partition))

    def partition(self, scheme, size, field_seed, sample_seed):
        fld, _ = self.field(field_seed)
        if scheme == "uniform":
            return sample_uniform_grid(fld, size)
        return sample_random(fld.n, size, sample_seed)

    def reconstruct(self, method, field_seed, partition, xs):
        if method == Method.SF_Q:
            return interpolate_sf(self.gft(field_seed, partition), xs)
        basis, weight = self.baseline(field_seed, method)
        return interpolate_bl_ls(basis, weight, partition, xs, partition.size)

    def run(self, experiment, scheme, omega, sigma, size, trial, seeds):
        trial_seed, field_seed, sample_seed, noise_seed = seeds
        base = dict(experiment=experiment, scheme=scheme, omega=omega, sigma=sigma,
                    sample_size_requested=size, trial=trial, seed=trial_seed,
                    field_seed=field_seed, sample_seed=sample_seed, noise_seed=noise_seed)
        methods = self.config.methods
        fld, g = self.field(field_seed)
        try:
            partition = self.partition(scheme, size, field_seed, sample_seed)
        except ValueError as exc:
            return [ResultRow(method=m, sample_size_actual=0, snr_db=None, status="failed",
                              diagnostic=str(exc), **base) for m in methods]
        base["sample_size_actual"] = partition.size
        admissible = check_partition_admissible(laplacian(g), partition)
        if not admissible:
            return [ResultRow(method=m, snr_db=None, status="failed",
                              diagnostic=f"inadmissible partition: {admissible.diagnostic}", **base)
                    for m in methods]

        truth = eval_signal(fld, SignalSpec(omega))
        observed = add_noise(truth, NoiseSpec(sigma, noise_seed))
        xs = SampledSignal.from_signal(partition, observed)
        rows = []
        for m in methods:
            try:
                y = self.reconstruct(Method(m), field_seed, partition, xs)
                value = cap_snr(snr_db(truth, y, partition.complement))
                rows.append(ResultRow(method=m, snr_db=value, **base))
            except (NumericalError, EmptyBandError, UndefinedSNRError) as exc:
                rows.append(ResultRow(method=m, snr_db=None, status="failed",
                                      diagnostic=f"{type(exc).__name__}: {exc}", **base))
        return rows


def _policies(config, experiment, scheme):
    field_policy, sample_policy = config.field_policy, config.sample_policy
    if field_policy == "auto":
        field_policy = "per-trial" if (experiment == "table1" and scheme == "uniform") else "shared"
    if sample_policy == "auto":
        sample_policy = "per-trial" if experiment == "table1" else "shared"
    return field_policy, sample_policy


def _trial_seeds(config, experiment, scheme, wi, gi, zi, trial):
    si = SCHEMES.index(scheme)
    trial_seed = derive_seed(config.master_seed, si, wi, gi, zi, trial)
    field_policy, sample_policy = _policies(config, experiment, scheme)
    if field_policy == "shared":
        field_seed = derive_seed(config.master_seed, TAG_FIELD)
    else:
        field_seed = derive_seed(trial_seed, TAG_FIELD)
    sample_seed = None
    if scheme == "random":
        if sample_policy == "shared" and field_policy == "shared":
            sample_seed = derive_seed(config.master_seed, si, zi, TAG_SAMPLE)
        else:
            sample_seed = derive_seed(trial_seed, TAG_SAMPLE)
    noise_seed = derive_seed(trial_seed, TAG_NOISE)
    return trial_seed, field_seed, sample_seed, noise_seed


def _run_grid(config, experiment, sigmas, progress=None):
    runner = _TrialRunner(config)
    result = ExperimentResult(experiment, config)
    for scheme in config.sampling_scheme:
        for wi, omega in enumerate(config.omega_list):
            for gi, sigma in enumerate(sigmas):
                for zi, size in enumerate(config.sample_sizes):
                    for trial in range(config.n_trials):
                        seeds = _trial_seeds(config, experiment, scheme, wi, gi, zi, trial)
                        result.rows.extend(
                            runner.run(experiment, scheme, omega, sigma, size, trial, seeds))
                        if progress is not None:
                            progress(experiment, scheme, omega, sigma, size, trial)
    return result


def run_table1(config, progress=None):
    """Noiseless reconstruction for every scheme, omega, sample size and method.

    With the default policies the random scheme keeps one sensor field and
    redraws S each trial, while the uniform scheme redraws the field (its
    grid-based S is fixed by the field).
    """
    return _run_grid(config, "table1", (0.0,), progress)


def run_sweep(config, progress=None):
    """Noisy reconstruction over the full omega x sigma x size grid.

    By default field, graph and S stay fixed per condition and only the
    noise realization changes between trials.
    """
    return _run_grid(config, "sweep", config.sigma_list, progress)


def replay_row(config, row):
    """Recompute one raw row's SNR from its logged seeds."""
    runner = _TrialRunner(config.replace(methods=(row.method,)))
    seeds = (row.seed, row.field_seed, row.sample_seed, row.noise_seed)
    (out,) = runner.run(row.experiment, row.scheme, row.omega, row.sigma,
                        row.sample_size_requested, row.trial, seeds)
    return out


# ---------------------------------------------------------------- verify

@dataclass(frozen=True)
class CheckResult:
    name: str
    instance: int
    seed: int
    ok: bool
    detail: str

    def line(self):
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name} instance={self.instance} seed={self.seed}: {self.detail}"


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.ok for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.ok]


def random_instance(seed, max_n=30, min_n=3, n=None):
    """Random KNN graph with an admissible partition, reproducible from ``seed``."""
    rng = make_rng(seed)
    for _ in range(100):
        size = n if n is not None else int(rng.integers(min_n, max_n + 1))
        pts = rng.random((size, 2))
        k = 1 if size == 2 else int(rng.integers(1, min(5, size - 1) + 1))
        g = build_knn_graph(pts, k, 0.3)
        lap = laplacian(g)
        for _ in range(50):
            m = int(rng.integers(1, max(1, (size - 1) // 2) + 1))
            part = VertexPartition(np.sort(rng.permutation(size)[:m]), size)
            if check_partition_admissible(lap, part):
                return g, part
    raise NumericalError(f"no admissible instance found for seed {seed}")


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny))


def verify_instance(g, part, seed, instance=0, fault=None):
    """Run the invariant checks on one graph/partition pair."""
    rng = make_rng(derive_seed(seed, 1))
    checks = []

    def add(name, ok, detail):
        checks.append(CheckResult(name, instance, seed, bool(ok), detail))

    try:
        gft = build_gft(g, part)
    except (NumericalError, EmptyBandError) as exc:
        add("build", False, f"{type(exc).__name__}: {exc}")
        return checks

    x = rng.standard_normal(g.n)
    energy, coeff = q_inner(gft, x, x), forward(gft, x)
    err = abs(energy - coeff @ coeff) / energy
    add("parseval", err <= 1e-9, f"relative error {err:.3e}")

    spectrum_gap = float(np.max(np.abs(gft.lambdas - np.sort(2.0 - gft.lambdas))))
    target = perturb_eigenvalue(gft, max(gft.r - 1, 0), 1e-3) if fault == "eigenvalue" else gft
    rep = verify_spectral_folding(target, tol=1e-7)
    add("folding", rep.ok and spectrum_gap <= 1e-7,
        f"{rep.describe()}; spectrum symmetry deviation {spectrum_gap:.3e}")

    if gft.r == 0:
        add("bandlimited", False, "empty bandlimited subspace")
        return checks

    dev = float(np.max(np.abs(sample_gram(gft) - 0.5 * np.eye(gft.r))))
    add("sample_gram", dev <= 1e-8, f"|U_SR^T Q_S U_SR - I/2|_max = {dev:.3e}")

    s, sc = part.sample_set, part.complement
    coeffs = rng.standard_normal((gft.r, 100))
    xs_all = gft.band @ coeffs
    es = np.einsum("ij,ik,kj->j", xs_all[s], gft.q_s, xs_all[s])
    esc = np.einsum("ij,ik,kj->j", xs_all[sc], gft.q_sc, xs_all[sc])
    worst = float(np.max(np.abs(es - esc) / (es + esc)))
    add("energy_split", worst <= 1e-8, f"max energy imbalance / |x|_Q^2 = {worst:.3e}")

    xbl = xs_all[:, 0]
    y = interpolate_sf(gft, SampledSignal.from_signal(part, xbl))
    err = _rel(y, xbl)
    add("perfect_reconstruction", err <= 1e-6, f"relative error {err:.3e}")
    err = _rel(y[s], xbl[s])
    add("sample_consistency", err <= 1e-8, f"relative error on S {err:.3e}")

    samples = SampledSignal(part, rng.standard_normal(part.size))
    y = interpolate_sf(gft, samples)
    y_ref = brute_force_oracle(gft, samples)
    err = _rel(y, y_ref)
    add("oracle", err <= 1e-6, f"relative deviation from constrained solve {err:.3e}")
    return checks


def run_verify(config, fault=None, max_n=30):
    """Invariant suite on ``config.verify_instances`` random small graphs.

    Instance 0 is the minimal 2-vertex graph.  ``fault="eigenvalue"``
    perturbs one eigenvalue before the folding check, which must then fail.
    """
    report = VerifyReport()
    for i in range(config.verify_instances):
        seed = derive_seed(config.master_seed, TAG_VERIFY, i)
        try:
            g, part = random_instance(seed, max_n=max_n, n=2 if i == 0 else None)
        except SfgftError as exc:
            report.checks.append(CheckResult("instance", i, seed, False, str(exc)))
            continue
        report.checks.extend(verify_instance(g, part, seed, i, fault))
    return report
