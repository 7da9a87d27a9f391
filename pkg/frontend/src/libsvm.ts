/**
 * libsvm text serialization (1-based indices), the solver's wire format.
 *
 * Numbers are written with JavaScript's shortest round-trip formatting,
 * which the solver parses back to the identical double.
 */

import type { Matrix } from "./matrix.js";

export function toLibsvm(X: Matrix, y: Float64Array): string {
  const lines: string[] = [];
  if (X.kind === "dense") {
    for (let i = 0; i < X.nSamples; i++) {
      const parts: string[] = [String(y[i])];
      for (let j = 0; j < X.nFeatures; j++) {
        const v = X.data[j * X.nSamples + i];
        if (v !== 0) parts.push(`${j + 1}:${v}`);
      }
      lines.push(parts.join(" "));
    }
  } else {
    const rows: string[][] = [];
    for (let i = 0; i < X.nSamples; i++) rows.push([String(y[i])]);
    // CSC is column-ordered; walking columns in order keeps the per-row
    // indices strictly increasing, as the format requires
    for (let j = 0; j < X.nFeatures; j++) {
      for (let k = X.indptr[j]; k < X.indptr[j + 1]; k++) {
        const v = X.data[k];
        if (v !== 0) rows[X.indices[k]].push(`${j + 1}:${v}`);
      }
    }
    for (const parts of rows) lines.push(parts.join(" "));
  }
  return lines.join("\n") + "\n";
}
