"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import logging
import sys

from .exceptions import ConfigError, FormatError, NumericalError, ValidationError
from .io import load_config
from .pipeline import STAGES, Pipeline, PipelineConfig, chain_tag

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SAMPLE_FLAGS = {"kernel": "kernel", "space": "space", "step": "step", "leapfrog": "n_leapfrog",
                "iters": "iters", "burnin": "burnin", "seed": "seed", "tune": "tune",
                "volume_mode": "volume_mode", "tag": "tag"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser():
    parser = _Parser(prog="dreamces", description="Calibration-emulation-sampling pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("calibrate", "run EKI/EKS and store the ensembles"),
                        ("emulate", "train the forward-map emulator"),
                        ("autoencode", "train the autoencoder"),
                        ("sample", "run MCMC chains"),
                        ("diagnose", "write diagnostic CSV files"),
                        ("pipeline", "run every stage")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="YAML configuration file")
        p.add_argument("--out", help="artifact directory (overrides 'output' in the config)")
        p.add_argument("--resume", action="store_true", help="reuse artifacts already present in --out")
        if name == "sample":
            p.add_argument("--kernel", choices=["pcn", "mala", "hmc"])
            p.add_argument("--space", choices=["exact", "emulative", "dream"])
            p.add_argument("--step", type=float)
            p.add_argument("--leapfrog", type=int)
            p.add_argument("--iters", type=int)
            p.add_argument("--burnin", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--tune", action="store_true", default=None)
            p.add_argument("--volume-mode", dest="volume_mode", choices=["accept", "reweight", "none"])
            p.add_argument("--tag")
    return parser


def _chain_from_flags(args, config):
    """One chain block: the first configured chain (if any) overridden by command-line flags."""
    overrides = {key: getattr(args, flag) for flag, key in SAMPLE_FLAGS.items() if getattr(args, flag) is not None}
    if not overrides:
        return None
    chain = dict(config.chains[0]) if config.chains else {}
    chain.update(overrides)
    if "tag" not in overrides:
        chain.pop("tag", None)
        chain["tag"] = chain_tag(chain)
    chain.setdefault("seed", 0)
    return chain


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = PipelineConfig.from_dict(load_config(args.config))
        upstream = () if args.command == "pipeline" else STAGES[:STAGES.index(args.command)]
        pipe = Pipeline(config, args.out, args.resume, reuse=upstream)
        if args.command == "pipeline":
            pipe.run()
        elif args.command == "sample":
            chain = _chain_from_flags(args, config)
            records = pipe.run_stage("sample", chains=[chain] if chain else None)
            for rec in records:
                print(f"{rec.tag}: acceptance {rec.acceptance_rate:.3f}, "
                      f"{rec.seconds_per_iter * 1e3:.3f} ms/iter, {rec.n_solves} exact solves")
        elif args.command == "diagnose":
            print(pipe.run_stage("diagnose"))
        else:
            pipe.run_stage(args.command)
        print(f"artifacts in {pipe.out}")
        return EXIT_OK
    except (ConfigError, ValidationError, FormatError) as exc:
        print(f"configuration error{_where(exc)}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure{_where(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _where(exc):
    stage = getattr(exc, "stage", None)
    return f" in stage '{stage}'" if stage else ""


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
