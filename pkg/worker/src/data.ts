import { Rng, gaussian } from "./rng";

export interface LabelledData {
  inputs: number[][];
  targets: number[]; // 0 or 1
}

export type DatasetName = "synthetic_moons" | "small_image_subset";

/** Two interleaved half-moons with Gaussian jitter. */
export function makeMoons(n: number, rng: Rng, noise = 0.15): LabelledData {
  const inputs: number[][] = [];
  const targets: number[] = [];
  for (let i = 0; i < n; i++) {
    const label = i % 2;
    const theta = Math.PI * rng();
    let x: number;
    let y: number;
    if (label === 0) {
      x = Math.cos(theta);
      y = Math.sin(theta);
    } else {
      x = 1.0 - Math.cos(theta);
      y = 0.5 - Math.sin(theta);
    }
    inputs.push([x + noise * gaussian(rng), y + noise * gaussian(rng)]);
    targets.push(label);
  }
  return { inputs, targets };
}

/**
 * Procedural 8x8 grayscale patches: class 0 is a centered blob, class 1 is
 * vertical stripes, both with pixel noise. Stands in for a tiny image subset
 * without shipping binary data.
 */
export function makeImagePatches(n: number, rng: Rng, noise = 0.25): LabelledData {
  const side = 8;
  const inputs: number[][] = [];
  const targets: number[] = [];
  for (let i = 0; i < n; i++) {
    const label = i % 2;
    const pixels: number[] = new Array(side * side);
    for (let r = 0; r < side; r++) {
      for (let c = 0; c < side; c++) {
        let value: number;
        if (label === 0) {
          const dist = Math.hypot(r - 3.5, c - 3.5);
          value = Math.exp(-(dist * dist) / 6.0);
        } else {
          value = c % 2 === 0 ? 1.0 : 0.0;
        }
        pixels[r * side + c] = value + noise * gaussian(rng);
      }
    }
    inputs.push(pixels);
    targets.push(label);
  }
  return { inputs, targets };
}

export function makeDataset(name: DatasetName, rng: Rng): LabelledData {
  if (name === "synthetic_moons") return makeMoons(256, rng);
  return makeImagePatches(128, rng);
}
