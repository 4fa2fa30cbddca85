/**
 * Wire protocol (newline-delimited JSON, one evaluation per process):
 *   request   -> {"eval_id": int, "learning_rate": float, "epochs": int, "seed": int}
 *   per-epoch <- {"eval_id": int, "epoch": int, "loss": float, "accuracy": float|null}
 *   terminal  <- {"eval_id": int, "done": true, "diverged": bool}
 */

export interface EvalRequest {
  evalId: number;
  learningRate: number;
  epochs: number;
  seed: number;
}

export function parseRequest(line: string): EvalRequest {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error(`request is not valid JSON: ${line.slice(0, 120)}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new Error("request must be a JSON object");
  }
  const record = raw as Record<string, unknown>;
  const evalId = record["eval_id"];
  const learningRate = record["learning_rate"];
  const epochs = record["epochs"];
  const seed = record["seed"];
  if (!Number.isInteger(evalId)) throw new Error("eval_id must be an integer");
  if (typeof learningRate !== "number" || !Number.isFinite(learningRate) || learningRate < 0) {
    throw new Error("learning_rate must be a finite nonnegative number");
  }
  if (!Number.isInteger(epochs) || (epochs as number) < 1) {
    throw new Error("epochs must be a positive integer");
  }
  if (!Number.isInteger(seed)) throw new Error("seed must be an integer");
  return {
    evalId: evalId as number,
    learningRate,
    epochs: epochs as number,
    seed: seed as number,
  };
}

export function epochRecord(evalId: number, epoch: number, loss: number,
                            accuracy: number | null): string {
  return JSON.stringify({ eval_id: evalId, epoch, loss, accuracy });
}

export function terminalRecord(evalId: number, diverged: boolean): string {
  return JSON.stringify({ eval_id: evalId, done: true, diverged });
}

/** Resolve on the first full line from a stream. */
export function readFirstLine(stream: NodeJS.ReadableStream): Promise<string> {
  return new Promise((resolve, reject) => {
    let buffer = "";
    const onData = (chunk: Buffer | string) => {
      buffer += chunk.toString();
      const newline = buffer.indexOf("\n");
      if (newline >= 0) {
        cleanup();
        resolve(buffer.slice(0, newline));
      }
    };
    const onEnd = () => {
      cleanup();
      if (buffer.length > 0) resolve(buffer);
      else reject(new Error("stdin closed before a request arrived"));
    };
    const cleanup = () => {
      stream.off("data", onData);
      stream.off("end", onEnd);
      stream.off("error", onEnd);
    };
    stream.on("data", onData);
    stream.on("end", onEnd);
    stream.on("error", onEnd);
  });
}
