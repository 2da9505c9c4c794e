"""Batch command-line interface.

Subcommands: ``catalog``, ``eval``, ``certify``, ``simulate``, ``fit``,
``bench toy``, ``bench rates``.  Exit codes are a stable contract:
0 success, 1 usage error, 2 runtime or precision failure, 3 certification
failure.  Every run with a seed is deterministic down to output bytes;
floats are written with shortest round-trip formatting.  A JSON config file
may mirror any long flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bench import TOY_BANDWIDTH_GRID, bench_rates, bench_toy
from .calibrate import certify_gain, sandwich_check
from .errors import (
    CertificationFailureError,
    DegenerateIterateError,
    GainRegError,
    InvalidInputError,
    InvalidParameterError,
    PrecisionFailureError,
    SingularSystemError,
    UnsupportedOperationError,
)
from .features import (
    kernel_map,
    linear_map,
    model_from_json,
    model_to_json,
    subsample_centers,
)
from .gains import catalog, eval_gain, eval_gain_derivative, loss_from_gain
from .quadrature import QuadratureConfig
from .simulate import Dataset, NoiseSpec, gen_location, gen_toy
from .solver import (
    SolverConfig,
    cross_validate_sigma,
    fit_egm,
    predict_batch,
    sigma_schedule,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_CERTIFICATION = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(path: Optional[str], header: Sequence[str], rows: Sequence[Sequence]) -> None:
    def emit(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

    if path is None or path == "-":
        emit(sys.stdout)
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            emit(handle)


def _write_sidecar(out_path: str, metadata: dict) -> None:
    Path(str(out_path) + ".meta.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def dataset_to_csv(data: Dataset, path: str) -> None:
    d = data.inputs.shape[1]
    header = [f"x_{j}" for j in range(d)] + ["y"]
    rows = [list(x) + [y] for x, y in zip(data.inputs, data.outputs)]
    _write_rows(path, header, rows)


def dataset_from_csv(path: str) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if not header or header[-1] != "y":
            raise InvalidInputError(f"{path}: expected header x_0,...,y")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset(inputs=arr[:, :-1], outputs=arr[:, -1])


def parse_noise(text: str) -> NoiseSpec:
    """Noise from a shorthand (normal:mu:sd, student_t:nu, pareto:a, toy) or JSON."""
    text = text.strip()
    if text.startswith("{"):
        return noise_from_dict(json.loads(text))
    parts = text.split(":")
    kind = parts[0]
    if kind == "toy":
        from .simulate import toy_noise_spec

        return toy_noise_spec()
    if kind == "normal":
        mu = float(parts[1]) if len(parts) > 1 else 0.0
        sd = float(parts[2]) if len(parts) > 2 else 1.0
        return NoiseSpec.gaussian(mu, sd)
    if kind == "student_t":
        return NoiseSpec.student_t(float(parts[1]))
    if kind == "pareto":
        return NoiseSpec.symmetric_pareto(float(parts[1]))
    raise InvalidParameterError(f"unknown noise shorthand {text!r}")


def noise_from_dict(payload: dict) -> NoiseSpec:
    family = payload["family"]
    if family == "gaussian_mixture":
        return NoiseSpec.gaussian_mixture([tuple(c) for c in payload["mixture"]])
    if family == "student_t":
        return NoiseSpec.student_t(payload["df"])
    if family == "symmetric_pareto":
        return NoiseSpec.symmetric_pareto(payload["tail_index"])
    if family == "contaminated":
        return NoiseSpec.contaminated(
            noise_from_dict(payload["base"]), payload["rate"], payload["outlier_values"]
        )
    raise InvalidParameterError(f"unknown noise family {family!r}")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v != ""]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v != ""]


# --- subcommand implementations -----------------------------------------


def cmd_catalog(args) -> int:
    lines = []
    for spec in catalog().values():
        lines.append(f"gain: {spec.name}")
        lines.append(f"  formula: {spec.formula}")
        lines.append(f"  loss: {spec.loss_name}")
        lines.append(f"  loss_formula: {spec.loss_formula}")
        lines.append(
            f"  loss_identity: {_fmt(spec.loss_scale)} * s^{spec.loss_sigma_exponent}"
            " * (p(0) - p(t))"
        )
        alpha, c = spec.type_alpha
        exact = "exact " if spec.type_exact else ""
        lines.append(f"  local_order: {exact}alpha={alpha:g} c={_fmt(c)}")
        lines.append(f"  calibration: {spec.calibration}")
        if spec.constants is not None:
            k = spec.constants
            lines.append(
                f"  constants: L1={_fmt(k.L1)} L2={_fmt(k.L2)} L3={_fmt(k.L3)} c0={_fmt(k.c0)}"
            )
        lines.append(f"  support_radius: {_fmt(spec.support_radius)}")
        lines.append(f"  peak: {_fmt(spec.peak_value)}")
        lines.append("")
    text = "\n".join(lines)
    if args.out and args.out != "-":
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    specs = catalog()
    if args.gain not in specs:
        raise UsageError(f"unknown gain {args.gain!r}; see the catalog subcommand")
    spec = specs[args.gain]
    value = eval_gain(spec, args.sigma, args.t)
    print(f"gain {_fmt(value)}")
    if args.derivative:
        print(f"derivative {_fmt(eval_gain_derivative(spec, args.sigma, args.t))}")
    if args.loss:
        print(f"loss {_fmt(loss_from_gain(spec, args.sigma, args.t))}")
    return EXIT_OK


def cmd_certify(args) -> int:
    specs = catalog()
    names = [args.gain] if args.gain else list(specs)
    for name in names:
        if name not in specs:
            raise UsageError(f"unknown gain {name!r}")
    quad = QuadratureConfig(half_width=args.half_width, nodes=args.nodes)
    rows = []
    all_pass = True
    for name in names:
        spec = specs[name]
        for row in certify_gain(spec, quad):
            rows.append(
                [
                    row["gain"],
                    row["check"],
                    "pass" if row["passed"] else "fail",
                    row["estimated"],
                    row["declared"],
                    row["max_violation"],
                    row["note"],
                ]
            )
            all_pass = all_pass and row["passed"]
        if args.sandwich:
            report = sandwich_check(spec, 1.0, 1.0, (-1.0, -0.5, -0.1, 0.1, 0.5, 1.0), quad)
            rows.append(
                [
                    spec.name,
                    "sandwich",
                    "pass" if report.passed else "fail",
                    f"C={report.lower_constant:.6g}",
                    "" if report.upper_constant is None else f"C'={report.upper_constant:.6g}",
                    0.0 if report.passed else max(abs(d) for d in report.violations),
                    "two-sided quadratic bounds at sigma=1, M=1",
                ]
            )
            all_pass = all_pass and report.passed
    _write_rows(
        args.out, ["gain", "check", "status", "estimated", "declared", "max_violation", "note"], rows
    )
    return EXIT_OK if all_pass else EXIT_CERTIFICATION


def cmd_simulate(args) -> int:
    if args.model == "toy":
        data = gen_toy(args.n, args.seed)
    else:
        noise = parse_noise(args.noise)
        data = gen_location(args.n, args.truth, noise, args.seed, input_dim=args.input_dim)
    if not args.out:
        raise UsageError("simulate requires --out")
    dataset_to_csv(data, args.out)
    _write_sidecar(
        args.out,
        {
            "command": "simulate",
            "model": args.model,
            "n": args.n,
            "seed": args.seed,
            "truth": data.truth,
            "noise": None if data.noise is None else data.noise.describe(),
            "version": __version__,
        },
    )
    return EXIT_OK


def _resolve_sigma(args, data, spec, fmap, cfg) -> tuple[float, Optional[list]]:
    given = [
        args.sigma is not None,
        args.schedule is not None,
        bool(args.cv_sigma),
    ]
    if sum(given) != 1:
        raise UsageError("choose exactly one of --sigma, --schedule, --cv-sigma")
    if args.sigma is not None:
        return float(args.sigma), None
    if args.schedule is not None:
        if args.epsilon is None or args.q is None:
            raise UsageError("--schedule needs --epsilon and --q")
        return sigma_schedule(args.schedule, args.epsilon, args.q, data.n), None
    grid = _float_list(args.cv_sigma)
    best, table = cross_validate_sigma(data, spec, grid, fmap, cfg, args.folds, args.seed)
    return best, table


def cmd_fit(args) -> int:
    specs = catalog()
    if args.gain not in specs:
        raise UsageError(f"unknown gain {args.gain!r}")
    spec = specs[args.gain]
    data = dataset_from_csv(args.data)
    warm = None
    if args.load:
        loaded = model_from_json(Path(args.load).read_text(encoding="utf-8"))
        fmap = loaded.feature_map
        warm = loaded.coefficients
    elif args.features == "linear":
        fmap = linear_map(data.inputs.shape[1])
    else:
        if args.bandwidth is None:
            raise UsageError("kernel features need --bandwidth")
        centers = subsample_centers(data.inputs, args.centers_cap, args.seed)
        fmap = kernel_map(centers, args.bandwidth)
    method = args.method or ("grid_consensus" if args.gain == "uniform" else None)
    cfg_kwargs = dict(
        max_iters=args.max_iters,
        tol=args.tol,
        ridge=args.ridge,
        restarts=args.restarts,
        seed=args.seed,
        anneal=tuple(_float_list(args.anneal)) if args.anneal else (),
    )
    if method is None:
        from .solver import default_config

        cfg = default_config(spec, **cfg_kwargs)
    else:
        cfg = SolverConfig(method=method, **cfg_kwargs)
    sigma, cv_table = _resolve_sigma(args, data, spec, fmap, cfg)
    report = fit_egm(
        data, spec, sigma, fmap, cfg, M=args.M, clip=args.clip, init_coefficients=warm
    )
    print(f"sigma {_fmt(report.sigma)}")
    print(f"empirical_gain {_fmt(report.empirical_gain)}")
    print(f"iterations {report.iterations}")
    print(f"converged {report.converged}")
    if cv_table is not None:
        for s, g in cv_table:
            print(f"cv sigma={_fmt(s)} heldout_gain={_fmt(g)}")
    if args.save:
        Path(args.save).write_text(model_to_json(report.model) + "\n", encoding="utf-8")
    if args.residuals:
        predictions = predict_batch(report.model, data.inputs)
        residuals = data.outputs - predictions
        _write_rows(
            args.residuals,
            ["index", "prediction", "residual"],
            [[i, p, r] for i, (p, r) in enumerate(zip(predictions, residuals))],
        )
    return EXIT_OK


def cmd_predict(args) -> int:
    model = model_from_json(Path(args.model).read_text(encoding="utf-8"))
    data = dataset_from_csv(args.data)
    predictions = predict_batch(model, data.inputs)
    _write_rows(args.out, ["index", "prediction"], list(enumerate(predictions)))
    return EXIT_OK


def cmd_bench_toy(args) -> int:
    sigmas = _float_list(args.sigmas)
    results = bench_toy(
        args.n_train, args.n_test, sigmas, args.seed, folds=args.folds, restarts=args.restarts
    )
    rows = []
    for res in results:
        rows.append(
            ["summary", res.sigma, res.bandwidth, res.rmse_mean_ref, res.rmse_mode_ref,
             res.train_gain, "", ""]
        )
    for res in results:
        for x, yhat in zip(res.curve_x, res.curve_y):
            rows.append(["curve", res.sigma, res.bandwidth, "", "", "", x, yhat])
    header = ["kind", "sigma", "bandwidth", "rmse_mean_ref", "rmse_mode_ref",
              "train_gain", "x", "fhat"]
    _write_rows(args.out, header, rows)
    if args.out and args.out != "-":
        _write_sidecar(
            args.out,
            {
                "command": "bench toy",
                "n_train": args.n_train,
                "n_test": args.n_test,
                "sigmas": sorted(sigmas),
                "seed": args.seed,
                "folds": args.folds,
                "restarts": args.restarts,
                "bandwidth_grid": list(TOY_BANDWIDTH_GRID),
                "version": __version__,
            },
        )
    return EXIT_OK


def cmd_bench_rates(args) -> int:
    noise = parse_noise(args.noise)
    cells, slope = bench_rates(
        args.gain,
        noise,
        args.epsilon,
        args.q,
        args.schedule,
        _int_list(args.n_list),
        args.reps,
        args.seed,
        truth=args.truth,
        restarts=args.restarts,
    )
    rows = [
        ["cell", c.n, c.sigma, c.theta_exponent, c.egm_median, c.ols_median, ""]
        for c in cells
    ]
    rows.append(["slope", "", "", "", "", "", slope])
    header = ["kind", "n", "sigma", "theta_exponent", "egm_err_median", "ols_err_median", "slope"]
    _write_rows(args.out, header, rows)
    if args.out and args.out != "-":
        _write_sidecar(
            args.out,
            {
                "command": "bench rates",
                "gain": args.gain,
                "noise": noise.describe(),
                "epsilon": args.epsilon,
                "q": args.q,
                "schedule": args.schedule,
                "n_list": _int_list(args.n_list),
                "reps": args.reps,
                "seed": args.seed,
                "truth": args.truth,
                "version": __version__,
            },
        )
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="gainreg", description=__doc__)
    parser.add_argument("--config", help="JSON file of default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="export the gain catalog as text")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_catalog)

    p = sub.add_parser("eval", help="evaluate one gain")
    p.add_argument("--gain", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--derivative", action="store_true")
    p.add_argument("--loss", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("certify", help="run the certification checks")
    p.add_argument("--gain", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--half-width", type=float, default=40.0)
    p.add_argument("--nodes", type=int, default=4096)
    p.add_argument("--sandwich", action="store_true",
                   help="also run the two-sided quadratic bound check")
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("simulate", help="write a synthetic dataset as CSV")
    p.add_argument("--model", choices=["toy", "location"], default="toy")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", default="normal:0:1")
    p.add_argument("--truth", default="sine")
    p.add_argument("--input-dim", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("fit", help="fit a gain-maximizing model to CSV data")
    p.add_argument("--data", required=True)
    p.add_argument("--gain", required=True)
    p.add_argument("--features", choices=["linear", "kernel"], default="linear")
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--centers-cap", type=int, default=500)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--schedule", choices=["theta1", "theta2"], default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--cv-sigma", default=None, help="comma list of scales to cross-validate")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--method", choices=["irls", "gradient", "grid_consensus"], default=None)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--anneal", default=None, help="comma list of descending warm-up scales")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--M", type=float, default=None)
    p.add_argument("--clip", action="store_true")
    p.add_argument("--save", default=None)
    p.add_argument("--load", default=None,
                   help="warm-start from a saved model (also supplies the feature map)")
    p.add_argument("--residuals", default=None)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("predict", help="apply a saved model to CSV inputs")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("bench", help="batch experiments")
    bench_sub = p.add_subparsers(dest="bench_command", required=True)

    b = bench_sub.add_parser("toy", help="bimodal toy reproduction")
    b.add_argument("--n-train", type=int, default=200)
    b.add_argument("--n-test", type=int, default=200)
    b.add_argument("--sigmas", default="0.05,10")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--folds", type=int, default=5)
    b.add_argument("--restarts", type=int, default=3)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_bench_toy)

    b = bench_sub.add_parser("rates", help="error-vs-sample-size trend")
    b.add_argument("--gain", default="triweight")
    b.add_argument("--noise", default='{"family":"contaminated","rate":0.1,'
                   '"outlier_values":[-50,50],"base":{"family":"gaussian_mixture",'
                   '"mixture":[[1.0,0.0,1.0]]}}')
    b.add_argument("--epsilon", type=float, default=1.0)
    b.add_argument("--q", type=float, default=1.0)
    b.add_argument("--schedule", choices=["theta1", "theta2"], default="theta1")
    b.add_argument("--n-list", default="50,200,800,3200")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--truth", default="constant:1")
    b.add_argument("--restarts", type=int, default=3)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_bench_rates)

    return parser


def _iter_subparsers(parser: argparse.ArgumentParser):
    for action in parser._actions:  # noqa: SLF001 - argparse has no public walk
        if isinstance(action, argparse._SubParsersAction):  # noqa: SLF001
            for sub in action.choices.values():
                yield sub
                yield from _iter_subparsers(sub)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        # Apply config-file defaults before the real parse; flags override.
        if "--config" in argv:
            idx = argv.index("--config")
            config_path = argv[idx + 1]
            defaults = json.loads(Path(config_path).read_text(encoding="utf-8"))
            dests = {k.replace("-", "_"): v for k, v in defaults.items()}
            for sub in _iter_subparsers(parser):
                sub.set_defaults(**{k: v for k, v in dests.items() if _has_dest(sub, k)})
                for action in sub._actions:  # noqa: SLF001
                    if action.dest in dests:
                        action.required = False
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParameterError, InvalidInputError, UnsupportedOperationError) as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PrecisionFailureError, DegenerateIterateError, SingularSystemError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except CertificationFailureError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except GainRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _has_dest(subparser, key: str) -> bool:
    dest = key.replace("-", "_")
    return any(a.dest == dest for a in subparser._actions)  # noqa: SLF001


if __name__ == "__main__":
    raise SystemExit(main())
