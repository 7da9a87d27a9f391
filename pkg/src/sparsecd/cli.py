"""Command-line front end: solve, path, bench and diagnose.

Traces are written record-by-record with a flush after each row, so a
file is parseable even after abnormal termination. Exit codes: 0 success,
2 unsupported problem / bad arguments, 3 file errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, penalties
from .data import Dataset, LibsvmParseError, generate_correlated_gaussian, read_libsvm, scale_columns_to_sqrt_n
from .datafits import Logistic, Quadratic, QuadraticMultiTask, SVMDual
from .penalties import MCP, SCAD, Block, BoxIndicator, L1, L1L2, LHalf, semiconvexity_check
from .solver import SolverConfig, fit, path_fit

TRACE_SCHEMA = "sparsecd-trace v1"
BENCH_SCHEMA = "sparsecd-bench v1"
PATH_SCHEMA = "sparsecd-path v1"

EXIT_OK, EXIT_UNSUPPORTED, EXIT_FILE = 0, 2, 3

_DATAFITS = {"quadratic": Quadratic, "logistic": Logistic, "multitask": QuadraticMultiTask, "svm": SVMDual}
_SCALAR_PENALTIES = ("l1", "l1l2", "mcp", "scad", "lhalf")
_PENALTIES = _SCALAR_PENALTIES + ("box",) + tuple(f"block_{p}" for p in _SCALAR_PENALTIES)


class SpecError(ValueError):
    """RunSpec is inconsistent or names an unsupported combination."""


@dataclass
class RunSpec:
    command: str
    data: str | None = None
    synthetic: dict | None = None
    seed: int = 0
    datafit: str = "quadratic"
    penalty: str = "l1"
    lmbda: float | None = None
    lambda_ratio: float | None = None
    gamma: float = 3.0
    l1_ratio: float = 0.5
    box_c: float = 1.0
    normalize_columns: bool = False
    config: SolverConfig = field(default_factory=SolverConfig)
    output: str | None = None
    fmt: str = "csv"
    save_model: str | None = None
    lambda_ratios: list[float] | None = None
    budgets: list[int] | None = None
    arms: list[str] | None = None

    def validate(self):
        if (self.lmbda is None) == (self.lambda_ratio is None) and self.datafit != "svm":
            if self.lmbda is not None:
                raise SpecError("--lambda and --lambda-ratio are mutually exclusive")
        if self.datafit not in _DATAFITS:
            raise SpecError(f"unknown datafit {self.datafit!r}")
        if self.penalty not in _PENALTIES:
            raise SpecError(f"unknown penalty {self.penalty!r}")
        block = self.penalty.startswith("block_")
        if self.datafit == "svm" and self.penalty != "box":
            raise SpecError("the svm datafit requires the box penalty")
        if self.penalty == "box" and self.datafit != "svm":
            raise SpecError("the box penalty is only supported with the svm datafit")
        if block != (self.datafit == "multitask"):
            raise SpecError("block penalties pair with the multitask datafit, scalar ones with the rest")
        if self.datafit == "svm" and (self.lmbda is not None or self.lambda_ratio is not None):
            raise SpecError("the svm datafit takes --box-c, not a lambda")
        if self.gamma is not None and self.penalty.endswith("mcp") and self.gamma <= 1:
            raise SpecError("mcp needs gamma > 1")
        if self.penalty.endswith("scad") and self.gamma <= 2:
            raise SpecError("scad needs gamma > 2")


def _load_dataset(spec: RunSpec):
    """Returns (dataset, beta_star or None)."""
    if spec.synthetic is not None:
        params = dict(n=500, p=1000, rho=0.6, nnz=50, snr=5.0, tasks=1)
        params.update(spec.synthetic)
        dataset, beta_star = generate_correlated_gaussian(
            n=int(params["n"]), p=int(params["p"]), rho=float(params["rho"]),
            n_nonzero=int(params["nnz"]), snr=float(params["snr"]), seed=spec.seed,
        )
        if spec.datafit == "multitask":
            # row-sparse multitask target: shared support, per-task noise
            T = max(1, int(params["tasks"]))
            rng = np.random.default_rng(spec.seed + 1)
            X = dataset.X.toarray()
            signal = X @ beta_star
            cols = []
            for _ in range(T):
                eps = rng.standard_normal(len(signal))
                scale = np.linalg.norm(signal) / (float(params["snr"]) * np.linalg.norm(eps))
                cols.append(signal + scale * eps)
            from .data import DesignMatrix, Target

            dataset = Dataset(DesignMatrix(X), Target(np.column_stack(cols)))
        elif spec.datafit in ("svm", "logistic"):
            y = dataset.y.values
            labels = np.where(y >= np.median(y), 1.0, -1.0)
            dataset = Dataset.from_arrays(dataset.X, labels)
        # the generator's ground truth only describes the quadratic problem
        if spec.datafit != "quadratic":
            beta_star = None
        return dataset, beta_star
    if spec.data is None:
        raise SpecError("either --data or --synthetic is required")
    path = spec.data
    if not os.path.isabs(path) and not os.path.exists(path):
        data_dir = os.environ.get("SPARSECD_DATA_DIR")
        if data_dir and os.path.exists(os.path.join(data_dir, path)):
            path = os.path.join(data_dir, path)
    return read_libsvm(path), None


def _general_lambda_max(dataset, datafit) -> float:
    """Smallest L1 strength giving a zero solution: max_j |grad_j f(0)|."""
    bound = datafit.bind(dataset)
    zero = np.zeros((bound.design.n_features, bound.n_tasks)) if bound.multitask else np.zeros(bound.design.n_features)
    grads = bound.full_gradient(bound.init_cache(zero))
    if grads.ndim == 2:
        return float(np.max(np.linalg.norm(grads, axis=1)))
    return float(np.max(np.abs(grads)))


def _make_penalty(spec: RunSpec, lmbda: float | None):
    name = spec.penalty
    inner_name = name.removeprefix("block_")
    if inner_name == "l1":
        pen = L1(lmbda)
    elif inner_name == "l1l2":
        pen = L1L2(lmbda, spec.l1_ratio)
    elif inner_name == "mcp":
        pen = MCP(lmbda, spec.gamma)
    elif inner_name == "scad":
        pen = SCAD(lmbda, spec.gamma)
    elif inner_name == "lhalf":
        pen = LHalf(lmbda)
    else:
        return BoxIndicator(spec.box_c)
    return Block(pen) if name.startswith("block_") else pen


def _resolve_problem(spec: RunSpec):
    dataset, beta_star = _load_dataset(spec)
    if spec.normalize_columns:
        dataset, _ = scale_columns_to_sqrt_n(dataset)
    datafit = _DATAFITS[spec.datafit]()
    if spec.datafit == "svm":
        return dataset, beta_star, datafit, None, None
    lmax = _general_lambda_max(dataset, datafit)
    lmbda = spec.lmbda if spec.lmbda is not None else spec.lambda_ratio * lmax
    return dataset, beta_star, datafit, lmbda, lmax


class TraceWriter:
    """Flushes one row per record so partial traces stay parseable."""

    def __init__(self, path, fmt, schema=TRACE_SCHEMA, fieldnames=None, comments=()):
        self.fmt = fmt
        self.fh = open(path, "w", newline="")
        self.fieldnames = fieldnames or list(
            ("time_s", "epoch", "objective", "kkt_violation", "duality_gap",
             "ws_size", "gsupp_size", "anderson_accepted")
        )
        if fmt == "csv":
            self.fh.write(f"# {schema}\n")
            for comment in comments:
                self.fh.write(f"# {comment}\n")
            self.writer = csv.DictWriter(self.fh, fieldnames=self.fieldnames)
            self.writer.writeheader()
        else:
            head = {"schema": schema}
            if comments:
                head["notes"] = list(comments)
            self.fh.write(json.dumps(head) + "\n")
        self.fh.flush()

    def write(self, row: dict):
        row = {k: ("" if row.get(k) is None else row.get(k)) for k in self.fieldnames}
        if self.fmt == "csv":
            self.writer.writerow(row)
        else:
            self.fh.write(json.dumps(row) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def _write_model(spec: RunSpec, result, lmbda):
    payload = {
        "coef": np.asarray(result.beta).tolist(),
        "kkt_violation": result.kkt_violation,
        "stop_reason": result.stop_reason,
        "n_epochs": result.n_epochs,
        "datafit": spec.datafit,
        "penalty": spec.penalty,
        "lambda": lmbda,
    }
    with open(spec.save_model, "w") as fh:
        json.dump(payload, fh)


def cmd_solve(spec: RunSpec) -> int:
    dataset, _, datafit, lmbda, lmax = _resolve_problem(spec)
    penalty = _make_penalty(spec, lmbda)
    config = spec.config
    if spec.datafit == "quadratic" and isinstance(penalty, (L1, L1L2)):
        config.compute_gap = True
    writer = TraceWriter(spec.output, spec.fmt) if spec.output else None
    on_record = (lambda rec: writer.write(rec.row())) if writer else None
    t0 = time.monotonic()
    result = fit(dataset, datafit, penalty, config, on_record=on_record)
    wall = time.monotonic() - t0
    if writer:
        writer.close()
    if spec.save_model:
        _write_model(spec, result, lmbda)
    beta = result.beta
    nnz = int(np.count_nonzero(np.linalg.norm(beta, axis=1) if beta.ndim == 2 else beta))
    viol0 = next((r.kkt_violation for r in result.trace if r.kind == "outer"), float("nan"))
    rel = result.kkt_violation / viol0 if viol0 and viol0 > 0 else 0.0
    obj = result.trace.records[-1].objective if len(result.trace) else float("nan")
    print(f"stop_reason: {result.stop_reason}")
    print(f"objective: {obj:.12e}")
    print(f"kkt_violation: {result.kkt_violation:.6e} (relative to beta=0: {rel:.6e})")
    print(f"nnz: {nnz}")
    print(f"epochs: {result.n_epochs}  coordinate_updates: {result.total_coord_updates}")
    print(f"wall_time_s: {wall:.6f}")
    return EXIT_OK


def cmd_path(spec: RunSpec) -> int:
    dataset, beta_star, datafit, _, lmax = _resolve_problem(spec)
    ratios = spec.lambda_ratios or np.geomspace(1.0, 0.01, 20).tolist()
    ratios = sorted(set(float(r) for r in ratios), reverse=True)
    lambdas = [r * lmax for r in ratios]
    test_design = None
    if beta_star is not None and spec.synthetic is not None:
        params = dict(n=500, p=1000, rho=0.6, nnz=50, snr=5.0)
        params.update(spec.synthetic)
        test_ds, _ = generate_correlated_gaussian(
            n=int(params["n"]), p=int(params["p"]), rho=float(params["rho"]),
            n_nonzero=int(params["nnz"]), snr=float(params["snr"]), seed=spec.seed + 1000,
        )
        test_design = test_ds.X
    points = path_fit(dataset, datafit, lambda lam: _make_penalty(spec, lam),
                      lambdas, spec.config, beta_star=beta_star, test_design=test_design)
    fieldnames = ["lambda_ratio", "lambda", "nnz", "objective", "est_error", "pred_error", "epochs", "time_s"]
    writer = TraceWriter(spec.output, spec.fmt, schema=PATH_SCHEMA, fieldnames=fieldnames) if spec.output else None
    for ratio, point in zip(ratios, points):
        rec = point.result.trace.records[-1]
        row = {
            "lambda_ratio": ratio, "lambda": point.lmbda, "nnz": point.nnz,
            "objective": rec.objective, "est_error": point.est_error,
            "pred_error": point.pred_error, "epochs": point.result.n_epochs,
            "time_s": rec.time_s,
        }
        if writer:
            writer.write(row)
        else:
            print(row)
    if writer:
        writer.close()
    return EXIT_OK


_ARMS = {
    "ws+anderson": dict(use_working_sets=True, use_acceleration=True),
    "ws": dict(use_working_sets=True, use_acceleration=False),
    "anderson": dict(use_working_sets=False, use_acceleration=True),
    "plain": dict(use_working_sets=False, use_acceleration=False),
}


def cmd_bench(spec: RunSpec) -> int:
    dataset, _, datafit, lmbda, _ = _resolve_problem(spec)
    penalty = _make_penalty(spec, lmbda)
    arms = spec.arms or list(_ARMS)
    for arm in arms:
        if arm not in _ARMS:
            raise SpecError(f"unknown arm {arm!r}")
    budgets = spec.budgets or [2**k for k in range(11)]
    fieldnames = ["arm", "budget", "epochs", "coord_updates", "time_s", "objective", "kkt_violation"]
    writer = None
    if spec.output:
        writer = TraceWriter(
            spec.output, spec.fmt, schema=BENCH_SCHEMA, fieldnames=fieldnames,
            comments=("independent cold runs per budget; time-vs-objective curves are not monotonic",),
        )
    for arm in arms:
        for budget in budgets:
            cfg_kwargs = dict(
                tol=spec.config.tol, max_outer=spec.config.max_outer,
                max_inner=spec.config.max_inner, anderson_memory=spec.config.anderson_memory,
                initial_ws_size=spec.config.initial_ws_size, score_kind=spec.config.score_kind,
                max_total_epochs=int(budget), **_ARMS[arm],
            )
            t0 = time.monotonic()
            result = fit(dataset, datafit, penalty, SolverConfig(**cfg_kwargs))
            wall = time.monotonic() - t0
            rec = result.trace.records[-1]
            row = {
                "arm": arm, "budget": int(budget), "epochs": result.n_epochs,
                "coord_updates": result.total_coord_updates, "time_s": wall,
                "objective": rec.objective, "kkt_violation": result.kkt_violation,
            }
            if writer:
                writer.write(row)
            else:
                print(row)
    if writer:
        writer.close()
    return EXIT_OK


def cmd_diagnose(spec: RunSpec) -> int:
    dataset, _, datafit, lmbda, _ = _resolve_problem(spec)
    penalty = _make_penalty(spec, lmbda)
    config = spec.config
    config.record_gsupp_history = True
    result = fit(dataset, datafit, penalty, config)
    report: dict = {
        "kkt_violation": result.kkt_violation,
        "stop_reason": result.stop_reason,
        "identification_epoch": diagnostics.identification_epoch(result.gsupp_history),
    }
    try:
        spectral = diagnostics.cd_jacobian_spectral_radius(dataset, datafit, penalty, result.beta)
        report["spectral_radius"] = {"rho": spectral.rho, "support_size": int(spectral.support.size)}
        report["anderson_rate_bound"] = diagnostics.anderson_rate_bound(
            spectral.M, spectral.rho, config.anderson_memory
        )
    except (diagnostics.DiagnosticError, NotImplementedError, penalties.PenaltyKinkError) as exc:
        report["spectral_radius"] = {"status": "skipped", "reason": str(exc)}
        report["anderson_rate_bound"] = {"status": "skipped", "reason": str(exc)}
    try:
        bound = datafit.bind(dataset)
        lips = np.asarray(bound.lipschitz)
        pos = lips[lips > 0]
        check = semiconvexity_check(penalty, float(pos.min()) if pos.size else 1.0,
                                    np.linspace(-10, 10, 4001))
        report["semiconvexity"] = {"alpha": check.alpha_estimate, "holds": check.holds}
    except (ValueError, NotImplementedError) as exc:
        report["semiconvexity"] = {"status": "skipped", "reason": str(exc)}
    payload = json.dumps(report, indent=2, default=float)
    if spec.output:
        with open(spec.output, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return EXIT_OK


def _parse_kv(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item:
            continue
        key, _, value = item.partition("=")
        out[key.strip()] = float(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsecd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "path", "bench", "diagnose"):
        sp = sub.add_parser(name)
        sp.add_argument("--data", help="libsvm file (resolved against $SPARSECD_DATA_DIR)")
        sp.add_argument("--synthetic", help="generator spec, e.g. n=200,p=400,rho=0.6,nnz=40,snr=5")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--datafit", default="quadratic", choices=sorted(_DATAFITS))
        sp.add_argument("--penalty", default="l1")
        sp.add_argument("--lambda", dest="lmbda", type=float)
        sp.add_argument("--lambda-ratio", type=float)
        sp.add_argument("--gamma", type=float, default=3.0)
        sp.add_argument("--l1-ratio", type=float, default=0.5)
        sp.add_argument("--box-c", type=float, default=1.0)
        sp.add_argument("--normalize-columns", action="store_true")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-outer", type=int, default=50)
        sp.add_argument("--max-inner", type=int, default=1000)
        sp.add_argument("--anderson-memory", type=int, default=5)
        sp.add_argument("--ws-size", type=int, default=10)
        sp.add_argument("--no-acceleration", action="store_true")
        sp.add_argument("--no-working-sets", action="store_true")
        sp.add_argument("--score", default="auto", choices=("auto", "subdiff", "fixed_point"))
        sp.add_argument("--symmetric-sweep", action="store_true")
        sp.add_argument("--output", help="trace/table file")
        sp.add_argument("--format", dest="fmt", default="csv", choices=("csv", "json"))
        if name == "solve":
            sp.add_argument("--save-model", help="write coefficients and metadata as JSON")
        if name == "path":
            sp.add_argument("--lambda-ratios", help="comma-separated decreasing ratios")
        if name == "bench":
            sp.add_argument("--budgets", help="comma-separated epoch budgets")
            sp.add_argument("--arms", help=f"subset of {','.join(_ARMS)}")
    return parser


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    config = SolverConfig(
        tol=args.tol, max_outer=args.max_outer, max_inner=args.max_inner,
        anderson_memory=args.anderson_memory, initial_ws_size=args.ws_size,
        use_acceleration=not args.no_acceleration, use_working_sets=not args.no_working_sets,
        score_kind=args.score, symmetric_sweep=args.symmetric_sweep,
    )
    spec = RunSpec(
        command=args.command,
        data=args.data,
        synthetic=_parse_kv(args.synthetic) if args.synthetic else None,
        seed=args.seed,
        datafit=args.datafit,
        penalty=args.penalty,
        lmbda=args.lmbda,
        lambda_ratio=getattr(args, "lambda_ratio"),
        gamma=args.gamma,
        l1_ratio=args.l1_ratio,
        box_c=args.box_c,
        normalize_columns=args.normalize_columns,
        config=config,
        output=args.output,
        fmt=args.fmt,
        save_model=getattr(args, "save_model", None),
        lambda_ratios=[float(x) for x in args.lambda_ratios.split(",")] if getattr(args, "lambda_ratios", None) else None,
        budgets=[int(x) for x in args.budgets.split(",")] if getattr(args, "budgets", None) else None,
        arms=args.arms.split(",") if getattr(args, "arms", None) else None,
    )
    if spec.lmbda is None and spec.lambda_ratio is None and spec.datafit != "svm":
        spec.lambda_ratio = 0.1
    return spec


_COMMANDS = {"solve": cmd_solve, "path": cmd_path, "bench": cmd_bench, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        spec.validate()
        return _COMMANDS[spec.command](spec)
    except (SpecError, ValueError) as exc:
        if isinstance(exc, LibsvmParseError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FILE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE


if __name__ == "__main__":
    sys.exit(main())
