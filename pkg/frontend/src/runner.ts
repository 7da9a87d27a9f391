/** Spawns the solver CLI and reads back the saved model. */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { SolverProcessError } from "./errors.js";

export interface SolveModel {
  coef: number[];
  kkt_violation: number;
  stop_reason: string;
  n_epochs: number;
  lambda: number | null;
}

export function pythonCommand(override?: string): string {
  return override ?? process.env.SPARSECD_PYTHON ?? "python3";
}

/**
 * Runs `solve` on libsvm-formatted content and returns the parsed model.
 * Extra CLI flags (penalty, lambda, tolerances) come from the caller.
 */
export function runSolve(
  libsvmContent: string,
  cliArgs: string[],
  python?: string,
): SolveModel {
  const dir = mkdtempSync(join(tmpdir(), "sparsecd-"));
  try {
    const dataPath = join(dir, "data.svm");
    const modelPath = join(dir, "model.json");
    writeFileSync(dataPath, libsvmContent);
    const args = [
      "-m",
      "sparsecd",
      "solve",
      "--data",
      dataPath,
      "--save-model",
      modelPath,
      ...cliArgs,
    ];
    const proc = spawnSync(pythonCommand(python), args, {
      encoding: "utf8",
      maxBuffer: 1 << 28,
    });
    if (proc.error) {
      throw new SolverProcessError(`failed to launch solver: ${proc.error.message}`);
    }
    if (proc.status !== 0) {
      throw new SolverProcessError(
        `solver exited with code ${proc.status}: ${proc.stderr.trim()}`,
        proc.status,
      );
    }
    return JSON.parse(readFileSync(modelPath, "utf8")) as SolveModel;
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
