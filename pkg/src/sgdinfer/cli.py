"""Command-line pipeline: fit, tune, sample, compare, and emit result tables.

Subcommands
-----------
synth        generate a synthetic dataset CSV (plus posterior metadata)
fit          fit the MAP point and measure the gradient-noise profile
kl-table     tune and run the requested algorithms, report predicted and
             empirical KL to the Gaussian posterior
compare-cov  emit predicted vs empirical stationary covariance entries
hyperopt     VEM learning of the prior precision on a softmax task

Every command is deterministic given its config (including the seed). Outputs
are CSV/JSON files carrying a schema_version field and the full flattened
config; CSV files hold them in leading ``#`` comment lines. Floats are
printed with 17 significant digits.

Exit codes: 0 success, 1 usage/config error, 2 optimization failure,
3 degenerate statistical condition.
"""

import argparse
import configparser
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import hyperopt as hyperopt_mod
from . import models, samplers, stationary
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DataFormatError,
    DegenerateMomentError,
    DegenerateNoiseError,
    DivergenceError,
    NormalizationError,
)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_OPTIMIZATION = 2
EXIT_DEGENERATE = 3

DEFAULT_ALGORITHMS = "sgd,sgd-d,sgd-f,sgld,sgfs-d,sgfs-f"
KNOWN_ALGORITHMS = ("sgd", "sgd-d", "sgd-f", "sgd-sqrt", "sgld", "sgfs-d", "sgfs-f")
TUNING_MODES = ("scalar", "diag", "full", "sqrt")


@dataclass
class RunConfig:
    """Flat run configuration; serializable to/from an INI file by section."""

    # [data]
    source: str = "synthetic"
    delimiter: str = ","
    target_column: str = "-1"
    normalize: str = "none"
    synthetic_n: int = 2000
    synthetic_d: int = 3
    synthetic_k: int = 3
    synthetic_lambda_gen: float = 1.0
    synthetic_noise_scale: float = 1.0
    synthetic_correlation: float = 0.0
    synthetic_scale_spread: float = 1.0
    synthetic_seed: int = 0
    # [model]
    task: str = models.TASK_LINEAR
    regularizer: float = 1.0
    # [sampler]
    minibatch: int = 100
    n_samples: int = 100_000
    burn_in: int = -1
    thin: int = 1
    epsilon: float = 0.0
    sgld_epsilon: float = 0.0
    h_max: float = 0.0
    # [tuning]
    algorithms: str = DEFAULT_ALGORITHMS
    tuning: str = "scalar"
    # [hyperopt]
    lambda0: float = 1.0
    moment_decay: float = 0.999
    lambda_update_period: int = 100
    max_outer_iters: int = 200
    validation_fraction: float = 0.2
    grid_min: float = 1e-2
    grid_max: float = 1e3
    grid_points: int = 20
    # [output]
    out_dir: str = "out"
    seed: int = 0


_SECTIONS = {
    "data": (
        "source",
        "delimiter",
        "target_column",
        "normalize",
        "synthetic_n",
        "synthetic_d",
        "synthetic_k",
        "synthetic_lambda_gen",
        "synthetic_noise_scale",
        "synthetic_correlation",
        "synthetic_scale_spread",
        "synthetic_seed",
    ),
    "model": ("task", "regularizer"),
    "sampler": (
        "minibatch",
        "n_samples",
        "burn_in",
        "thin",
        "epsilon",
        "sgld_epsilon",
        "h_max",
    ),
    "tuning": ("algorithms", "tuning"),
    "hyperopt": (
        "lambda0",
        "moment_decay",
        "lambda_update_period",
        "max_outer_iters",
        "validation_fraction",
        "grid_min",
        "grid_max",
        "grid_points",
    ),
    "output": ("out_dir", "seed"),
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def load_config_file(path):
    """Read an INI config into a RunConfig, rejecting unknown keys."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    config = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            kind = _FIELD_TYPES[key]
            try:
                value = kind(raw) if kind is not str else raw
            except ValueError as err:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from err
            setattr(config, key, value)
    return config


def write_config_file(config, path):
    parser = configparser.ConfigParser()
    for section, keys in _SECTIONS.items():
        parser[section] = {key: str(getattr(config, key)) for key in keys}
    with open(path, "w") as handle:
        parser.write(handle)


def flatten_config(config):
    flat = {}
    for section, keys in _SECTIONS.items():
        for key in keys:
            flat[f"{section}.{key}"] = getattr(config, key)
    return flat


def _fmt(value):
    if isinstance(value, float) or isinstance(value, np.floating):
        return format(float(value), ".17g")
    return str(value)


def _json_render(obj, indent):
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_json_render(v, indent + 2)}'
            for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = ", ".join(_json_render(v, indent) for v in obj)
        return "[" + items + "]"
    if isinstance(obj, np.ndarray):
        return _json_render(obj.tolist(), indent)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            return json.dumps(None)
        return _fmt(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if obj is None:
        return "null"
    return json.dumps(obj)


def write_json(path, payload):
    # 17-significant-digit floats; stdlib json would use repr instead.
    with open(path, "w") as handle:
        handle.write(_json_render(payload, 0) + "\n")


def write_csv(path, header, rows, config):
    lines = [f"# schema_version={SCHEMA_VERSION}"]
    lines += [f"# {key}={value}" for key, value in flatten_config(config).items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv_rows(path):
    """Read back one of this package's CSV outputs (comments stripped)."""
    lines = [
        line
        for line in Path(path).read_text().splitlines()
        if line and not line.startswith("#")
    ]
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def load_dataset(config):
    """Materialize the configured dataset (synthetic or CSV), normalized."""
    if config.task not in models.TASKS:
        raise ConfigError(f"unknown task {config.task!r}; expected one of {models.TASKS}")
    if config.source == "synthetic":
        spec = data_mod.SyntheticSpec(
            task=config.task,
            n_examples=config.synthetic_n,
            n_features=config.synthetic_d,
            n_classes=config.synthetic_k,
            lambda_gen=config.synthetic_lambda_gen,
            noise_scale=config.synthetic_noise_scale,
            feature_correlation=config.synthetic_correlation,
            feature_scale_spread=config.synthetic_scale_spread,
            seed=config.synthetic_seed,
        )
        dataset, _ = data_mod.make_synthetic(spec)
    else:
        dataset = data_mod.load_csv(
            config.source,
            config.target_column,
            delimiter=config.delimiter,
            task=config.task,
            n_classes=config.synthetic_k if config.task == models.TASK_SOFTMAX else 0,
        )
    if config.normalize == "rows":
        dataset = data_mod.normalize_rows_unit_length(dataset)
    elif config.normalize == "columns":
        dataset = data_mod.normalize_columns_max_abs(dataset)
    elif config.normalize != "none":
        raise ConfigError(f"normalize must be rows|columns|none, got {config.normalize!r}")
    return dataset


def _profile_payload(profile, problem, config):
    return {
        "schema_version": SCHEMA_VERSION,
        "config": flatten_config(config),
        "task": problem.dataset.task,
        "regularizer": problem.regularizer,
        "n_examples": profile.n_examples,
        "n_features": problem.dataset.n_features,
        "n_classes": problem.dataset.n_classes,
        "param_dim": problem.param_dim,
        "grad_inf_norm": profile.grad_inf_norm,
        "theta_star": profile.theta_star,
        "hessian": profile.hessian,
        "noise_cov": profile.noise_cov,
        "noise_factor": profile.noise_factor,
    }


def load_profile(path):
    payload = json.loads(Path(path).read_text())
    return models.NoiseProfile(
        theta_star=np.asarray(payload["theta_star"], dtype=np.float64),
        hessian=np.asarray(payload["hessian"], dtype=np.float64),
        noise_cov=np.asarray(payload["noise_cov"], dtype=np.float64),
        noise_factor=np.asarray(payload["noise_factor"], dtype=np.float64),
        n_examples=int(payload["n_examples"]),
        grad_inf_norm=float(payload["grad_inf_norm"]),
    )


def cmd_fit(config):
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(config)
    problem = models.ModelProblem(dataset, config.regularizer)
    theta_star = models.fit_map(problem)
    profile = models.profile_noise(problem, theta_star)
    write_json(out_dir / "noise_profile.json", _profile_payload(profile, problem, config))
    print(f"wrote {out_dir / 'noise_profile.json'} (P={problem.param_dim}, "
          f"grad_inf_norm={profile.grad_inf_norm:.3e})")
    return profile, problem


def _ensure_profile(config):
    path = Path(config.out_dir) / "noise_profile.json"
    dataset = load_dataset(config)
    problem = models.ModelProblem(dataset, config.regularizer)
    if path.exists():
        return load_profile(path), problem
    profile, problem = cmd_fit(config)
    return profile, problem


def _auto_h_max(epsilon, noise_cov_eff, n_examples):
    # median of the unconstrained Fisher-scoring diagonal: half the
    # coordinates then receive injected stability noise.
    diag = np.diag(noise_cov_eff)
    if np.any(diag <= 0.0):
        raise DegenerateNoiseError("gradient noise has a non-positive diagonal entry")
    return float(np.median(2.0 / (n_examples * epsilon * diag)))


def tune_algorithm(name, profile, config):
    """Tuning, predicted covariance, and runner selection for one table row."""
    A = profile.hessian
    C = profile.noise_cov
    N = profile.n_examples
    dim = A.shape[0]
    S = config.minibatch
    eps_star = stationary.optimal_scalar_rate(C, dim, S, N)
    epsilon = config.epsilon if config.epsilon > 0.0 else eps_star
    injected = None
    runner = samplers.run_constant_sgd
    if name == "sgd":
        precond = None
    elif name == "sgd-d":
        precond = stationary.optimal_diag_preconditioner(C, epsilon, S, N)
    elif name == "sgd-f":
        precond = stationary.optimal_full_preconditioner(C, epsilon, S, N)
    elif name == "sgd-sqrt":
        epsilon = stationary.optimal_sqrt_rate(C, dim, S, N)
        precond = stationary.sqrt_diag_preconditioner(C)
    elif name == "sgld":
        if config.sgld_epsilon > 0.0:
            epsilon = config.sgld_epsilon
        else:
            _, max_eig = stationary.real_eig_range(A)
            epsilon = 1.0 / (N * max_eig)
        precond = None
        runner = samplers.run_sgld
    elif name in ("sgfs-d", "sgfs-f"):
        c_eff = C / S
        h_max = config.h_max if config.h_max > 0.0 else _auto_h_max(epsilon, c_eff, N)
        injected = stationary.sgfs_stability_noise(h_max, epsilon, c_eff, N)
        if name == "sgfs-d":
            precond = stationary.sgfs_diag_or_scalar_preconditioner(
                c_eff, injected, epsilon, N, "diagonal"
            )
        else:
            precond = stationary.sgfs_optimal_preconditioner(c_eff, injected, epsilon, N)
        runner = samplers.run_sgfs
    else:
        raise ConfigError(
            f"unknown algorithm {name!r}; expected one of {KNOWN_ALGORITHMS}"
        )

    if name == "sgld":
        guard_precond = 0.5 * N
    else:
        guard_precond = precond
    epsilon = stationary.enforce_discrete_stability(epsilon, guard_precond, A)

    if name == "sgld":
        predicted = stationary.predicted_covariance_sgfs(
            A, C / S, np.full(dim, 4.0 / N**2), 0.5 * N, epsilon
        )
    elif name in ("sgfs-d", "sgfs-f"):
        predicted = stationary.predicted_covariance_sgfs(
            A, C / S, injected, precond, epsilon
        )
    else:
        predicted = stationary.predicted_covariance_sgd(A, C, epsilon, S, precond)
    tuning = stationary.TuningResult(
        epsilon=epsilon,
        minibatch_size=S,
        preconditioner=precond,
        injected_noise_cov=injected,
    )
    return tuning, predicted, runner


def _row_seeds(master_seed, count):
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(count)]


def cmd_kl_table(config):
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profile, problem = _ensure_profile(config)
    names = [name.strip() for name in config.algorithms.split(",") if name.strip()]
    reference = stationary.reference_posterior(
        profile.theta_star, profile.hessian, profile.n_examples
    )
    seeds = _row_seeds(config.seed, len(names))
    rows = []
    for name, row_seed in zip(names, seeds):
        tuning, predicted, runner = tune_algorithm(name, profile, config)
        predicted_kl = stationary.kl_to_posterior(
            predicted, profile.hessian, profile.n_examples
        )
        sampler_config = samplers.SamplerConfig(
            epsilon=tuning.epsilon,
            minibatch_size=tuning.minibatch_size,
            n_samples=config.n_samples,
            preconditioner=tuning.preconditioner,
            injected_noise_cov=tuning.injected_noise_cov,
            burn_in=None if config.burn_in < 0 else config.burn_in,
            thin=config.thin,
            seed=row_seed,
        )
        try:
            chain = runner(problem, profile.theta_star, sampler_config)
            moments = samplers.empirical_moments(chain)
            empirical_kl = stationary.gaussian_kl(moments, reference)
            frob = np.linalg.norm(moments.covariance - predicted) / np.linalg.norm(
                predicted
            )
            status = "ok"
        except DivergenceError as err:
            empirical_kl, frob = np.nan, np.nan
            status = f"diverged@{err.iteration}"
        rows.append(
            {
                "algorithm": name,
                "tuning": _tuning_label(name),
                "epsilon": tuning.epsilon,
                "status": status,
                "predicted_kl": predicted_kl,
                "empirical_kl": empirical_kl,
                "cov_frobenius_rel_error": frob,
            }
        )
    header = [
        "algorithm",
        "tuning",
        "epsilon",
        "status",
        "predicted_kl",
        "empirical_kl",
        "cov_frobenius_rel_error",
    ]
    write_csv(
        out_dir / "kl_table.csv",
        header,
        [[row[key] for key in header] for row in rows],
        config,
    )
    write_json(
        out_dir / "kl_table.json",
        {"schema_version": SCHEMA_VERSION, "config": flatten_config(config), "rows": rows},
    )
    for row in rows:
        print(
            f"{row['algorithm']:<9s} {row['status']:<12s} "
            f"predicted_kl={row['predicted_kl']:.6g} empirical_kl={row['empirical_kl']:.6g}"
        )
    return rows


def _tuning_label(name):
    return {
        "sgd": "scalar",
        "sgd-d": "diag",
        "sgd-f": "full",
        "sgd-sqrt": "sqrt",
        "sgld": "scalar",
        "sgfs-d": "diag",
        "sgfs-f": "full",
    }[name]


_TUNING_TO_ALGORITHM = {"scalar": "sgd", "diag": "sgd-d", "full": "sgd-f", "sqrt": "sgd-sqrt"}


def cmd_compare_cov(config):
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.tuning not in TUNING_MODES:
        raise ConfigError(f"tuning must be one of {TUNING_MODES}, got {config.tuning!r}")
    profile, problem = _ensure_profile(config)
    name = _TUNING_TO_ALGORITHM[config.tuning]
    tuning, predicted, runner = tune_algorithm(name, profile, config)
    sampler_config = samplers.SamplerConfig(
        epsilon=tuning.epsilon,
        minibatch_size=tuning.minibatch_size,
        n_samples=config.n_samples,
        preconditioner=tuning.preconditioner,
        injected_noise_cov=tuning.injected_noise_cov,
        burn_in=None if config.burn_in < 0 else config.burn_in,
        thin=config.thin,
        seed=config.seed,
    )
    chain = runner(problem, profile.theta_star, sampler_config)
    empirical = samplers.empirical_moments(chain).covariance
    posterior = stationary.reference_posterior(
        profile.theta_star, profile.hessian, profile.n_examples
    )
    eigvals, eigvecs = np.linalg.eigh(posterior.covariance)
    rows = []
    dim = predicted.shape[0]
    for i in range(dim):
        for j in range(i, dim):
            rows.append(["entry", i, j, predicted[i, j], empirical[i, j]])
    for label, vec in (("pc_largest", eigvecs[:, -1]), ("pc_smallest", eigvecs[:, 0])):
        rows.append([label, -1, -1, float(vec @ predicted @ vec), float(vec @ empirical @ vec)])
    write_csv(
        out_dir / "cov_compare.csv",
        ["kind", "row", "col", "predicted", "empirical"],
        rows,
        config,
    )
    rel = np.linalg.norm(empirical - predicted) / np.linalg.norm(predicted)
    print(f"wrote {out_dir / 'cov_compare.csv'} (relative Frobenius error {rel:.4f})")
    return rows


def cmd_hyperopt(config, run_grid=False):
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.task != models.TASK_SOFTMAX:
        raise ConfigError("hyperopt requires task=softmax")
    dataset = load_dataset(config)
    train, val = data_mod.train_val_split(
        dataset, 1.0 - config.validation_fraction, config.seed
    )
    vem_config = hyperopt_mod.VemConfig(
        sgd=samplers.SamplerConfig(
            epsilon=config.epsilon if config.epsilon > 0.0 else 0.1,
            minibatch_size=config.minibatch,
            n_samples=1,
            seed=config.seed,
        ),
        lambda0=config.lambda0,
        moment_decay=config.moment_decay,
        lambda_update_period=config.lambda_update_period,
        max_outer_iters=config.max_outer_iters,
        validation_fraction=config.validation_fraction,
        auto_tune=config.epsilon <= 0.0,
    )
    theta, selected_lambda, trace = hyperopt_mod.run_vem(train, vem_config, val)
    write_csv(
        out_dir / "vem_trace.csv",
        ["iteration", "lambda", "moment", "validation_loss"],
        list(zip(trace.iterations, trace.lambdas, trace.moments, trace.validation_losses)),
        config,
    )
    refit = models.fit_map(models.ModelProblem(train, selected_lambda))
    selected_loss = hyperopt_mod.validation_loss(val, refit)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": flatten_config(config),
        "selected_lambda": selected_lambda,
        "selected_validation_loss": selected_loss,
    }
    if run_grid:
        grid = np.geomspace(config.grid_min, config.grid_max, config.grid_points)
        grid_rows = []
        for lam in grid:
            theta_lam = models.fit_map(models.ModelProblem(train, lam))
            grid_rows.append([lam, hyperopt_mod.validation_loss(val, theta_lam)])
        write_csv(
            out_dir / "lambda_grid.csv",
            ["lambda", "validation_loss"],
            grid_rows,
            config,
        )
        losses = [row[1] for row in grid_rows]
        payload["grid_min_validation_loss"] = min(losses)
        payload["grid_argmin_lambda"] = float(grid[int(np.argmin(losses))])
    write_json(out_dir / "hyperopt_result.json", payload)
    print(
        f"selected lambda {selected_lambda:.6g} "
        f"(validation loss {selected_loss:.6g})"
    )
    return payload


def cmd_synth(config):
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = data_mod.SyntheticSpec(
        task=config.task,
        n_examples=config.synthetic_n,
        n_features=config.synthetic_d,
        n_classes=config.synthetic_k,
        lambda_gen=config.synthetic_lambda_gen,
        noise_scale=config.synthetic_noise_scale,
        feature_correlation=config.synthetic_correlation,
        feature_scale_spread=config.synthetic_scale_spread,
        seed=config.synthetic_seed,
    )
    dataset, posterior = data_mod.make_synthetic(spec)
    header = [f"x{j + 1}" for j in range(dataset.n_features)] + ["target"]
    rows = [
        list(dataset.features[i]) + [dataset.targets[i]]
        for i in range(dataset.n_examples)
    ]
    write_csv(out_dir / "dataset.csv", header, rows, config)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": flatten_config(config),
        "task": spec.task,
        "n_examples": spec.n_examples,
        "n_features": spec.n_features,
    }
    if posterior is not None:
        payload["posterior_mean"] = posterior.mean
        payload["posterior_cov"] = posterior.covariance
    write_json(out_dir / "synth_meta.json", payload)
    print(f"wrote {out_dir / 'dataset.csv'} ({spec.n_examples} rows)")
    return dataset


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common_flags(parser):
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--source", help="dataset CSV path or 'synthetic'")
    parser.add_argument("--task", choices=models.TASKS, help="model kind")
    parser.add_argument("--lambda", dest="regularizer", type=float, help="prior precision")
    parser.add_argument("--s", dest="minibatch", type=int, help="minibatch size")
    parser.add_argument("--n-samples", type=int, help="post-burn-in samples per chain")
    parser.add_argument("--burn-in", type=int, help="burn-in iterations (-1 = auto)")
    parser.add_argument("--thin", type=int, help="thinning stride")
    parser.add_argument("--epsilon", type=float, help="step size override (0 = tuned)")
    parser.add_argument("--sgld-eps", dest="sgld_epsilon", type=float, help="SGLD step size")
    parser.add_argument("--h-max", dest="h_max", type=float, help="SGFS max rate")
    parser.add_argument("--target-column", help="CSV target column (name or index)")
    parser.add_argument("--delimiter", help="CSV delimiter")
    parser.add_argument("--normalize", choices=("rows", "columns", "none"))
    parser.add_argument("--algorithms", help="comma list for kl-table")
    parser.add_argument("--tuning", choices=TUNING_MODES, help="mode for compare-cov")


def build_parser():
    parser = _Parser(prog="sgdinfer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command in ("synth", "fit", "kl-table", "compare-cov", "hyperopt"):
        p = sub.add_parser(command)
        _add_common_flags(p)
        if command == "synth" or command == "fit" or command == "kl-table":
            p.add_argument("--n", dest="synthetic_n", type=int, help="synthetic N")
            p.add_argument("--d", dest="synthetic_d", type=int, help="synthetic D")
            p.add_argument("--k", dest="synthetic_k", type=int, help="synthetic K")
            p.add_argument(
                "--lambda-gen", dest="synthetic_lambda_gen", type=float,
                help="generative prior precision",
            )
        if command == "hyperopt":
            p.add_argument("--grid", action="store_true", help="also sweep a lambda grid")
            p.add_argument("--lambda0", type=float, help="initial precision")
            p.add_argument(
                "--max-outer-iters", dest="max_outer_iters", type=int,
                help="VEM outer rounds",
            )
    return parser


_FLAG_FIELDS = (
    "seed",
    "source",
    "task",
    "regularizer",
    "minibatch",
    "n_samples",
    "burn_in",
    "thin",
    "epsilon",
    "sgld_epsilon",
    "h_max",
    "target_column",
    "delimiter",
    "normalize",
    "algorithms",
    "tuning",
    "synthetic_n",
    "synthetic_d",
    "synthetic_k",
    "synthetic_lambda_gen",
    "lambda0",
    "max_outer_iters",
)


def config_from_args(args):
    config = load_config_file(args.config) if args.config else RunConfig()
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "out", None) is not None:
        config.out_dir = args.out
    return config


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = config_from_args(args)
        if args.command == "synth":
            cmd_synth(config)
        elif args.command == "fit":
            cmd_fit(config)
        elif args.command == "kl-table":
            cmd_kl_table(config)
        elif args.command == "compare-cov":
            cmd_compare_cov(config)
        elif args.command == "hyperopt":
            cmd_hyperopt(config, run_grid=args.grid)
    except (ConfigError, DataFormatError, NormalizationError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, DivergenceError) as err:
        print(f"optimization failed: {err}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    except (DegenerateMomentError, DegenerateNoiseError) as err:
        print(f"degenerate statistical condition: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
