/**
 * Matrix views over caller-owned buffers.
 *
 * Nothing here copies: a view holds the exact typed arrays it was given,
 * and data only leaves process memory when a fit serializes it for the
 * solver. Dense data is column-major.
 */

import { NonFiniteInputError, ShapeMismatchError } from "./errors.js";

export interface DenseMatrix {
  readonly kind: "dense";
  /** Column-major values, length nSamples * nFeatures. */
  readonly data: Float64Array;
  readonly nSamples: number;
  readonly nFeatures: number;
}

export interface CscMatrix {
  readonly kind: "csc";
  readonly data: Float64Array;
  readonly indices: Int32Array;
  /** Column pointers, length nFeatures + 1. */
  readonly indptr: Int32Array;
  readonly nSamples: number;
  readonly nFeatures: number;
}

export type Matrix = DenseMatrix | CscMatrix;

/** Wrap a column-major buffer without copying it. */
export function denseColumnMajor(
  data: Float64Array,
  nSamples: number,
  nFeatures: number,
): DenseMatrix {
  if (data.length !== nSamples * nFeatures) {
    throw new ShapeMismatchError(
      `dense buffer has ${data.length} entries, expected ${nSamples} * ${nFeatures}`,
    );
  }
  return { kind: "dense", data, nSamples, nFeatures };
}

/** Wrap a CSC triplet without copying it. */
export function csc(
  data: Float64Array,
  indices: Int32Array,
  indptr: Int32Array,
  nSamples: number,
  nFeatures: number,
): CscMatrix {
  if (indptr.length !== nFeatures + 1) {
    throw new ShapeMismatchError(
      `indptr has length ${indptr.length}, expected nFeatures + 1 = ${nFeatures + 1}`,
    );
  }
  if (indptr[0] !== 0 || indptr[nFeatures] !== data.length || indices.length !== data.length) {
    throw new ShapeMismatchError("CSC triplet is inconsistent with its value buffer");
  }
  return { kind: "csc", data, indices, indptr, nSamples, nFeatures };
}

function assertFiniteArray(values: ArrayLike<number>, what: string): void {
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new NonFiniteInputError(`${what} contains a non-finite value at index ${i}`);
    }
  }
}

export function validateProblem(X: Matrix, y: Float64Array): void {
  if (y.length !== X.nSamples) {
    throw new ShapeMismatchError(
      `y has ${y.length} entries but X has ${X.nSamples} rows`,
    );
  }
  assertFiniteArray(X.data, "X");
  assertFiniteArray(y, "y");
  if (X.kind === "csc") {
    for (let j = 0; j < X.nFeatures; j++) {
      if (X.indptr[j + 1] < X.indptr[j]) {
        throw new ShapeMismatchError("CSC column pointers must be non-decreasing");
      }
    }
    for (let k = 0; k < X.indices.length; k++) {
      if (X.indices[k] < 0 || X.indices[k] >= X.nSamples) {
        throw new ShapeMismatchError(`CSC row index out of range at position ${k}`);
      }
    }
  }
}

/** X beta, used by predict; the only arithmetic the bindings perform. */
export function matvec(X: Matrix, beta: Float64Array): Float64Array {
  if (beta.length !== X.nFeatures) {
    throw new ShapeMismatchError(
      `coefficient vector has ${beta.length} entries but X has ${X.nFeatures} columns`,
    );
  }
  const out = new Float64Array(X.nSamples);
  if (X.kind === "dense") {
    for (let j = 0; j < X.nFeatures; j++) {
      const b = beta[j];
      if (b === 0) continue;
      const off = j * X.nSamples;
      for (let i = 0; i < X.nSamples; i++) {
        out[i] += b * X.data[off + i];
      }
    }
  } else {
    for (let j = 0; j < X.nFeatures; j++) {
      const b = beta[j];
      if (b === 0) continue;
      for (let k = X.indptr[j]; k < X.indptr[j + 1]; k++) {
        out[X.indices[k]] += b * X.data[k];
      }
    }
  }
  return out;
}
