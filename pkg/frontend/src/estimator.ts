/**
 * Estimator-style interface over the solver CLI.
 *
 * The bindings marshal buffers and configuration only: fitting serializes
 * the problem to the solver's libsvm format, runs it in a subprocess, and
 * reads the coefficients back. No solver numerics live on this side.
 */

import { NotFittedError, ShapeMismatchError } from "./errors.js";
import { toLibsvm } from "./libsvm.js";
import { Matrix, matvec, validateProblem } from "./matrix.js";
import { runSolve } from "./runner.js";

export type PenaltyName = "l1" | "l1l2" | "mcp" | "scad" | "lhalf";

export interface EstimatorOptions {
  penalty?: PenaltyName;
  /** Absolute regularization strength; exclusive with lambdaRatio. */
  lambda?: number;
  /** Strength as a fraction of the data's lambda_max. */
  lambdaRatio?: number;
  /** MCP / SCAD concavity parameter. */
  gamma?: number;
  /** Elastic-net mixing weight. */
  l1Ratio?: number;
  datafit?: "quadratic" | "logistic";
  tol?: number;
  maxOuter?: number;
  maxInner?: number;
  andersonMemory?: number;
  useAcceleration?: boolean;
  useWorkingSets?: boolean;
  /** Python interpreter to run the solver with (default: $SPARSECD_PYTHON or python3). */
  pythonCommand?: string;
}

export class SparseLinearEstimator {
  readonly options: Required<Pick<EstimatorOptions, "penalty" | "datafit" | "tol">> &
    EstimatorOptions;

  private coef: Float64Array | null = null;
  private fittedFeatures = 0;

  /** Held by reference only; nothing is copied at construction or fit. */
  trainX: Matrix | null = null;
  trainY: Float64Array | null = null;

  /** Convergence metadata populated by fit. */
  kktViolation = NaN;
  nEpochs = 0;
  stopReason = "";
  lambdaUsed: number | null = null;

  constructor(options: EstimatorOptions = {}) {
    if (options.lambda !== undefined && options.lambdaRatio !== undefined) {
      throw new ShapeMismatchError("lambda and lambdaRatio are mutually exclusive");
    }
    this.options = { penalty: "l1", datafit: "quadratic", tol: 1e-8, ...options };
  }

  get coefficients(): Float64Array {
    if (this.coef === null) throw new NotFittedError();
    return this.coef;
  }

  get isFitted(): boolean {
    return this.coef !== null;
  }

  private cliArgs(): string[] {
    const o = this.options;
    const args = [
      "--datafit", o.datafit,
      "--penalty", o.penalty,
      "--tol", String(o.tol),
    ];
    if (o.lambda !== undefined) args.push("--lambda", String(o.lambda));
    else args.push("--lambda-ratio", String(o.lambdaRatio ?? 0.1));
    if (o.gamma !== undefined) args.push("--gamma", String(o.gamma));
    if (o.l1Ratio !== undefined) args.push("--l1-ratio", String(o.l1Ratio));
    if (o.maxOuter !== undefined) args.push("--max-outer", String(o.maxOuter));
    if (o.maxInner !== undefined) args.push("--max-inner", String(o.maxInner));
    if (o.andersonMemory !== undefined) args.push("--anderson-memory", String(o.andersonMemory));
    if (o.useAcceleration === false) args.push("--no-acceleration");
    if (o.useWorkingSets === false) args.push("--no-working-sets");
    return args;
  }

  fit(X: Matrix, y: Float64Array): this {
    validateProblem(X, y);
    this.trainX = X;
    this.trainY = y;
    const model = runSolve(toLibsvm(X, y), this.cliArgs(), this.options.pythonCommand);
    if (model.coef.length !== X.nFeatures) {
      throw new ShapeMismatchError(
        `solver returned ${model.coef.length} coefficients for ${X.nFeatures} features`,
      );
    }
    this.coef = Float64Array.from(model.coef);
    this.fittedFeatures = X.nFeatures;
    this.kktViolation = model.kkt_violation;
    this.nEpochs = model.n_epochs;
    this.stopReason = model.stop_reason;
    this.lambdaUsed = model.lambda;
    return this;
  }

  /** X beta for regression; the sign of the margin for logistic fits. */
  predict(X: Matrix): Float64Array {
    const margins = this.decisionFunction(X);
    if (this.options.datafit === "logistic") {
      return margins.map((m) => (m >= 0 ? 1 : -1));
    }
    return margins;
  }

  decisionFunction(X: Matrix): Float64Array {
    if (this.coef === null) throw new NotFittedError();
    if (X.nFeatures !== this.fittedFeatures) {
      throw new ShapeMismatchError(
        `X has ${X.nFeatures} columns but the model was fit with ${this.fittedFeatures}`,
      );
    }
    return matvec(X, this.coef);
  }

  /** P(label = +1) under the logistic model. */
  predictProba(X: Matrix): Float64Array {
    if (this.options.datafit !== "logistic") {
      throw new ShapeMismatchError("predictProba requires a logistic fit");
    }
    return this.decisionFunction(X).map((m) => 1 / (1 + Math.exp(-m)));
  }
}
