/** Typed errors: invalid input never aborts the process. */

export class ShapeMismatchError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ShapeMismatchError";
  }
}

export class NonFiniteInputError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NonFiniteInputError";
  }
}

export class NotFittedError extends Error {
  constructor(message = "call fit() before predict()") {
    super(message);
    this.name = "NotFittedError";
  }
}

export class SolverProcessError extends Error {
  /** Exit code of the solver process, when it ran at all. */
  readonly exitCode: number | null;

  constructor(message: string, exitCode: number | null = null) {
    super(message);
    this.name = "SolverProcessError";
    this.exitCode = exitCode;
  }
}
