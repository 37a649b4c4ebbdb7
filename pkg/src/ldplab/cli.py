"""``ldplab <experiment> --config cfg.json [--seed S] [--out DIR]`` and ``ldplab validate``.

Exit codes: 0 pass, 1 acceptance failure, 2 validation error.
"""
import argparse
import sys

from .experiments import EXPERIMENTS, ConfigError, load_config, run


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ldplab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=EXPERIMENTS + ("validate",))
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    args = parser.parse_args(argv)

    experiment = None if args.command == "validate" else args.command
    try:
        cfg = load_config(args.config, experiment=experiment, seed=args.seed, out_dir=args.out)
    except ConfigError as exc:
        print(f"ldplab: invalid config: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"ok: {cfg.experiment}")
        return 0
    code = run(cfg)
    print(f"{cfg.experiment}: {'pass' if code == 0 else 'FAIL'} -> {cfg.out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
