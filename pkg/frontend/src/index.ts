export {
  NonFiniteInputError,
  NotFittedError,
  ShapeMismatchError,
  SolverProcessError,
} from "./errors.js";
export { csc, denseColumnMajor, matvec } from "./matrix.js";
export type { CscMatrix, DenseMatrix, Matrix } from "./matrix.js";
export { toLibsvm } from "./libsvm.js";
export { pythonCommand, runSolve } from "./runner.js";
export type { SolveModel } from "./runner.js";
export { SparseLinearEstimator } from "./estimator.js";
export type { EstimatorOptions, PenaltyName } from "./estimator.js";
