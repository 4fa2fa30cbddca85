/**
 * Training worker: reads one evaluation request from stdin, trains a small
 * MLP on a synthetic task at the requested learning rate, and streams
 * per-epoch records followed by a terminal record. One request per process.
 */

import { DatasetName, makeDataset } from "./data";
import { Mlp, NetOptions } from "./net";
import { epochRecord, parseRequest, readFirstLine, terminalRecord } from "./protocol";
import { mulberry32 } from "./rng";

const DIVERGENCE_FACTOR = 1e6;

interface WorkerConfig extends NetOptions {
  dataset: DatasetName;
}

function parseArgs(argv: string[]): WorkerConfig {
  const config: WorkerConfig = {
    dataset: "synthetic_moons",
    hiddenLayers: 1,
    hiddenWidth: 16,
    batch: 32,
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = argv[i + 1];
    switch (flag) {
      case "--dataset":
        if (value !== "synthetic_moons" && value !== "small_image_subset") {
          throw new Error(`unknown dataset: ${value}`);
        }
        config.dataset = value;
        i++;
        break;
      case "--hidden-layers":
        config.hiddenLayers = Number(value);
        i++;
        break;
      case "--hidden-width":
        config.hiddenWidth = Number(value);
        i++;
        break;
      case "--batch":
        config.batch = Number(value);
        i++;
        break;
      default:
        throw new Error(`unknown flag: ${flag}`);
    }
  }
  if (!Number.isInteger(config.hiddenLayers) || config.hiddenLayers < 1) {
    throw new Error("--hidden-layers must be a positive integer");
  }
  if (!Number.isInteger(config.hiddenWidth) || config.hiddenWidth < 1) {
    throw new Error("--hidden-width must be a positive integer");
  }
  if (!Number.isInteger(config.batch) || config.batch < 1) {
    throw new Error("--batch must be a positive integer");
  }
  return config;
}

function emit(line: string): void {
  process.stdout.write(line + "\n");
}

async function main(): Promise<number> {
  let config: WorkerConfig;
  try {
    config = parseArgs(process.argv.slice(2));
  } catch (err) {
    process.stderr.write(`config error: ${(err as Error).message}\n`);
    return 2;
  }

  let request;
  try {
    request = parseRequest(await readFirstLine(process.stdin));
  } catch (err) {
    process.stderr.write(`bad request: ${(err as Error).message}\n`);
    return 1;
  }

  const rng = mulberry32(request.seed);
  const data = makeDataset(config.dataset, rng);
  const net = new Mlp(data.inputs[0].length, config, rng);

  const initial = net.evaluate(data).loss;
  const limit = DIVERGENCE_FACTOR * initial;
  let diverged = false;
  for (let epoch = 1; epoch <= request.epochs; epoch++) {
    net.trainEpoch(data, request.learningRate, config.batch, rng);
    const { loss, accuracy } = net.evaluate(data);
    if (!Number.isFinite(loss) || loss > limit) {
      diverged = true; // skip the blown-up record; the terminal line says why
      break;
    }
    emit(epochRecord(request.evalId, epoch, loss, accuracy));
  }
  emit(terminalRecord(request.evalId, diverged));
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`worker crashed: ${err}\n`);
    process.exit(1);
  },
);
