"""
Command-line experiment runner.

::

    rhlearn run --config sec6a.cfg [--out DIR] [--jobs N]
    rhlearn selftest

``run`` writes ``trajectory.csv`` and ``summary.txt`` to the output
directory.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize_config
from .errors import NumericalFailure
from .estimator import init_estimator
from .lifting import LiftingConfig
from .rhc import EpsilonSchedule, RhcConfig
from .simulation import LinearPlant, RobotArmPlant, convergence_metrics, run_closed_loop, sec6a_plant

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERICAL",
    "CSV_COLUMNS",
    "Experiment",
    "build_experiment",
    "run_experiment",
    "write_trajectory_csv",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CSV_COLUMNS = ("eps", "gamma_over_eps", "v1_value", "est_residual", "lambda_used",
               "controllable")


@dataclass
class Experiment:
    plant: object
    lift_cfg: LiftingConfig
    est_state: object
    rhc_cfg: RhcConfig
    T: int


def build_experiment(cfg: ExperimentConfig):
    """Construct plant, lifting, estimator and controller from a config."""
    if cfg.plant_kind == "linear_sec6a":
        plant = sec6a_plant(cfg.z0)
    elif cfg.plant_kind == "robot_arm":
        plant = RobotArmPlant(cfg.z0)
    else:
        plant = LinearPlant(cfg.plant_F, cfg.plant_G, cfg.plant_H, cfg.z0)
    lift = LiftingConfig(cfg.m, plant.p, plant.q)
    theta0 = None if cfg.theta0 == "canonical" else np.array(cfg.theta0)
    est = init_estimator(lift.n_lifted, lift.q_lifted, cfg.N_bar, theta0=theta0,
                         lam_max=cfg.lam_max, restore_margin=cfg.restore_margin)
    rhc = RhcConfig.scaled(lift.n_augmented, lift.q, cfg.N, cfg.Q, cfg.R, cfg.Q_N,
                           cfg.alpha, EpsilonSchedule(cfg.eps_c0, cfg.eps_c1))
    return Experiment(plant, lift, est, rhc, cfg.T)


def _num(x):
    return repr(float(x))


def write_trajectory_csv(log, path, p, q):
    """Columns ``k, y_1..y_p, v_1..v_q`` followed by :data:`CSV_COLUMNS`."""
    header = (["k"] + [f"y_{i + 1}" for i in range(p)] + [f"v_{i + 1}" for i in range(q)]
              + list(CSV_COLUMNS))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in log:
            w.writerow([r.k] + [_num(v) for v in r.y] + [_num(v) for v in r.v]
                       + [_num(r.eps), _num(r.gamma_over_eps), _num(r.v1_value),
                          _num(r.est_residual), _num(r.lambda_used), int(r.controllable)])


def _write_summary(log, path):
    lines = [f"steps = {len(log)}"]
    if len(log):
        peak, tail, settle = convergence_metrics(log)
        lines += [f"peak = {_num(peak)}", f"tail_max = {_num(tail)}",
                  f"settle_k = {'none' if settle is None else settle}"]
    lines.append(f"failure = {log.failure or 'none'}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(cfg, out_dir=None):
    """Run one experiment and write its CSV and summary.

    Returns
    -------
    int
        Exit code; :data:`EXIT_NUMERICAL` if the loop stopped on a
        numerical failure.
    """
    out = Path(cfg.output if out_dir is None else out_dir)
    try:
        exp = build_experiment(cfg)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_closed_loop(exp.plant, exp.lift_cfg, exp.est_state, exp.rhc_cfg, exp.T)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(result.log, out / "trajectory.csv", exp.plant.p, exp.plant.q)
        _write_summary(result.log, out / "summary.txt")
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    if result.log.failure:
        print(f"error: {result.log.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _run_one(path, out_dir):
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(cfg, out_dir)


def _cmd_run(args):
    paths = args.config
    if len(paths) == 1:
        outs = [args.out]
    else:
        base = Path(args.out) if args.out else None
        outs = [None if base is None else base / Path(p).stem for p in paths]
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            codes = list(ex.map(_run_one, paths, outs))
    else:
        codes = [_run_one(p, o) for p, o in zip(paths, outs)]
    return max(codes)


def _selftest_checks():
    from .lifting import augment_model
    from .rhc import solve_v2, solve_v3
    from .signal_model import SignalModel, build_predictor_maps, is_controllable

    rng = np.random.default_rng(0)

    def random_controllable(n, q):
        while True:
            M = SignalModel(rng.normal(size=(n, n)) / np.sqrt(n), rng.normal(size=(n, q)))
            if is_controllable(M):
                return M

    def predictor_commutation():
        M = random_controllable(4, 2)
        maps = build_predictor_maps(M, 8)
        return max(np.abs(maps.A[i] @ M.B - M.A @ maps.B[i - 1]).max() for i in range(1, 8)) < 1e-10

    def v2_zero():
        M = random_controllable(3, 1)
        cfg = RhcConfig.scaled(3, 1, 4, 1.0, 1.0, 1.0)
        return solve_v2(build_predictor_maps(M, 4), rng.normal(size=3), cfg).value < 1e-9

    def v3_homogeneity():
        M = random_controllable(3, 1)
        cfg = RhcConfig.scaled(3, 1, 5, 1.0, 1.0, 1.0)
        maps = build_predictor_maps(M, 5)
        x = rng.normal(size=3)
        v = solve_v3(maps, x, np.zeros(3), cfg).value
        return abs(solve_v3(maps, 2.5 * x, np.zeros(3), cfg).value - 6.25 * v) <= 1e-9 * max(1, v)

    def augmentation_equivalence():
        lift = LiftingConfig(3, 1, 1)
        M = random_controllable(3, 3)
        aug = augment_model(M, lift).model
        x = rng.normal(size=3)
        xi = np.concatenate([x, np.zeros(2)])
        past = [0.0, 0.0]  # v(k-1), v(k-2)
        err = 0.0
        for _ in range(20):
            v = rng.normal()
            x = M.step(x, np.array([v] + past))
            xi = aug.step(xi, np.array([v]))
            past = [v, past[0]]
            err = max(err, np.abs(xi[:3] - x).max() / max(1.0, np.abs(x).max()))
        return err < 1e-12

    def config_round_trip():
        cfg = parse_config("plant.kind = linear_sec6a\nrhc.R = 10000\n")
        return parse_config(serialize_config(cfg)) == cfg

    return [("predictor commutation", predictor_commutation),
            ("V2 vanishes for controllable maps", v2_zero),
            ("V3 quadratic homogeneity", v3_homogeneity),
            ("augmented model matches lifted model", augmentation_equivalence),
            ("config round trip", config_round_trip)]


def _cmd_selftest(args):
    failed = 0
    for name, check in _selftest_checks():
        try:
            ok = bool(check())
        except Exception as exc:  # report, keep going
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if failed == 0 else 1


def _parser():
    ap = argparse.ArgumentParser(prog="rhlearn",
                                 description="Adaptive receding-horizon control experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run experiments from config files")
    run.add_argument("--config", nargs="+", required=True, metavar="PATH")
    run.add_argument("--out", metavar="DIR",
                     help="output directory (one subdirectory per config when several are given)")
    run.add_argument("--jobs", type=int, default=1, metavar="N",
                     help="run independent configs in parallel")
    run.set_defaults(func=_cmd_run)
    st = sub.add_parser("selftest", help="run built-in property checks")
    st.set_defaults(func=_cmd_selftest)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
