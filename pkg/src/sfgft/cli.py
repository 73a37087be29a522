"""Command-line entry point: ``sfgft <command> [options]``."""
import argparse
import sys
from pathlib import Path

from . import experiment as ex
from .errors import ConfigError, NumericalError, SfgftError
from .graph import build_knn_graph, read_positions_csv, write_edges_csv, write_positions_csv
from .sensors import place_sensors

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

OUTPUT_HELP = """\
output files (written under --out):
  raw.csv       one row per method x condition x trial:
                experiment, method, scheme, omega, sigma, sample_size_requested,
                sample_size_actual, trial, seed (trial seed), field_seed,
                sample_seed (random scheme only), noise_seed, snr_db (SNR over the
                interpolated vertices against the clean signal, capped at 300),
                status (ok|failed), diagnostic
  summary.csv   per condition: experiment, method, scheme, omega, sigma,
                sample_size_requested, mean_sample_size_actual, mean_snr_db,
                std_snr_db (sample std), n_trials (successful), n_failed
  plot_<scheme>_sigma<s>_omega<w>.csv
                per panel: sample_size, method, mean_snr, std

exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numerical failure
"""


def _csv_list(value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _add_common(p):
    p.add_argument("--config", type=Path, help="flat 'key = value' config file")
    p.add_argument("--n-sensors", type=int)
    p.add_argument("--knn-k", type=int)
    p.add_argument("--sigma-d", type=float)
    p.add_argument("--omega", type=_csv_list, help="comma-separated oscillation counts")
    p.add_argument("--sigma", type=_csv_list, help="comma-separated noise std devs")
    p.add_argument("--sizes", type=_csv_list, help="comma-separated sample-set sizes")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--scheme", type=_csv_list, help="random, uniform or both")
    p.add_argument("--methods", type=_csv_list, help="subset of SF_Q,BL_I,BL_D")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sfgft",
        description="Spectral-folding GFT interpolation experiments on simulated sensor networks.",
        epilog=OUTPUT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "gen-field": "write positions.csv for a random sensor field",
        "gen-graph": "write positions.csv and edges.csv for the KNN sensor graph",
        "table1": "noiseless comparison on random and uniform sampling sets",
        "sweep": "noisy comparison over omega x sigma x sample size",
        "verify": "run the invariant suite on random small graphs",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=OUTPUT_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_common(p)
        if name == "gen-graph":
            p.add_argument("--positions", type=Path, help="read positions instead of generating")
        if name == "verify":
            p.add_argument("--instances", type=int, help="number of random instances")
            p.add_argument("--inject-fault", choices=["eigenvalue"], help=argparse.SUPPRESS)
        if name in ("table1", "sweep"):
            p.add_argument("--quiet", action="store_true")
    return parser


def config_from_args(args):
    overrides = {
        "n_sensors": args.n_sensors, "knn_k": args.knn_k, "sigma_d": args.sigma_d,
        "omega_list": args.omega, "sigma_list": args.sigma, "sample_sizes": args.sizes,
        "n_trials": args.trials, "master_seed": args.seed, "sampling_scheme": args.scheme,
        "methods": args.methods, "output_path": args.out,
        "verify_instances": getattr(args, "instances", None),
    }
    if args.command.startswith("gen-") and overrides["sample_sizes"] is None:
        # generators ignore sample sizes; don't let the defaults reject small fields
        overrides["sample_sizes"] = (1,)
    command = "sweep" if args.command == "sweep" else "table1"
    return ex.load_config(args.config, command=command, **overrides)


def _print_summary(result, stream):
    for s in ex.summarize(result):
        mean = "n/a" if s["mean_snr_db"] is None else f"{s['mean_snr_db']:8.2f}"
        std = "" if s["std_snr_db"] is None else f"+- {s['std_snr_db']:.2f}"
        print(f"{s['scheme']:>8} omega={s['omega']:<4g} sigma={s['sigma']:<4g} "
              f"|S|={s['sample_size_requested']:<4d} {s['method']:>5}: {mean} dB {std} "
              f"(n={s['n_trials']}, failed={s['n_failed']})", file=stream)


def _progress(stream):
    def report(experiment, scheme, omega, sigma, size, trial):
        print(f"\r{experiment} {scheme} omega={omega:g} sigma={sigma:g} |S|={size} trial {trial + 1}",
              end="", file=stream, flush=True)
    return report


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        config = config_from_args(args)
        out = Path(config.output_path)
        if args.command == "gen-field":
            out.mkdir(parents=True, exist_ok=True)
            field = place_sensors(config.n_sensors, config.master_seed)
            write_positions_csv(out / "positions.csv", field.positions)
            print(out / "positions.csv", file=stdout)
        elif args.command == "gen-graph":
            out.mkdir(parents=True, exist_ok=True)
            if args.positions is not None:
                points = read_positions_csv(args.positions)
            else:
                points = place_sensors(config.n_sensors, config.master_seed).positions
            g = build_knn_graph(points, config.knn_k, config.sigma_d)
            write_positions_csv(out / "positions.csv", points)
            write_edges_csv(out / "edges.csv", g)
            print(out / "edges.csv", file=stdout)
        elif args.command in ("table1", "sweep"):
            runner = ex.run_table1 if args.command == "table1" else ex.run_sweep
            progress = None if args.quiet else _progress(stderr)
            result = runner(config, progress=progress)
            if progress is not None:
                print(file=stderr)
            for p in ex.write_results(result, out):
                print(p, file=stdout)
            _print_summary(result, stdout)
        elif args.command == "verify":
            report = ex.run_verify(config, fault=args.inject_fault)
            for check in report.checks:
                if not check.ok:
                    print(check.line(), file=stdout)
            n_fail = len(report.failures)
            print(f"{len(report.checks) - n_fail}/{len(report.checks)} checks passed "
                  f"on {config.verify_instances} instances", file=stdout)
            return EXIT_OK if report.ok else EXIT_FAILED
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError, SfgftError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
