import { LabelledData } from "./data";
import { Rng, gaussian, shuffle } from "./rng";

export interface NetOptions {
  hiddenLayers: number;
  hiddenWidth: number;
  batch: number;
}

interface Layer {
  weights: number[][]; // [out][in]
  biases: number[];
}

/** Small MLP: relu hidden layers, linear readout, squared-error loss.
 * The unbounded readout means oversized steps genuinely blow the loss up. */
export class Mlp {
  private layers: Layer[] = [];

  constructor(inputDim: number, options: NetOptions, rng: Rng) {
    const sizes = [inputDim];
    for (let i = 0; i < options.hiddenLayers; i++) sizes.push(options.hiddenWidth);
    sizes.push(1);
    for (let l = 0; l + 1 < sizes.length; l++) {
      const fanIn = sizes[l];
      const scale = Math.sqrt(2.0 / fanIn);
      const weights: number[][] = [];
      for (let o = 0; o < sizes[l + 1]; o++) {
        const row: number[] = [];
        for (let i = 0; i < fanIn; i++) row.push(scale * gaussian(rng));
        weights.push(row);
      }
      this.layers.push({ weights, biases: new Array(sizes[l + 1]).fill(0) });
    }
  }

  /** Activations per layer, input first; output layer stays linear. */
  private forwardOne(input: number[]): number[][] {
    const activations = [input];
    let current = input;
    for (let l = 0; l < this.layers.length; l++) {
      const { weights, biases } = this.layers[l];
      const next: number[] = new Array(weights.length);
      const isOutput = l === this.layers.length - 1;
      for (let o = 0; o < weights.length; o++) {
        let z = biases[o];
        const row = weights[o];
        for (let i = 0; i < row.length; i++) z += row[i] * current[i];
        next[o] = isOutput ? z : Math.max(z, 0.0);
      }
      activations.push(next);
      current = next;
    }
    return activations;
  }

  predict(input: number[]): number {
    const activations = this.forwardOne(input);
    return activations[activations.length - 1][0];
  }

  /** Mean squared error and accuracy (%) over a dataset. */
  evaluate(data: LabelledData): { loss: number; accuracy: number } {
    let sumSq = 0;
    let correct = 0;
    for (let i = 0; i < data.inputs.length; i++) {
      const p = this.predict(data.inputs[i]);
      const err = p - data.targets[i];
      sumSq += err * err;
      if ((p >= 0.5 ? 1 : 0) === data.targets[i]) correct++;
    }
    return {
      loss: sumSq / data.inputs.length,
      accuracy: (100.0 * correct) / data.inputs.length,
    };
  }

  /** One epoch of mini-batch SGD with a seeded shuffle. */
  trainEpoch(data: LabelledData, learningRate: number, batch: number, rng: Rng): void {
    const order = data.inputs.map((_, i) => i);
    shuffle(order, rng);
    for (let start = 0; start < order.length; start += batch) {
      const indices = order.slice(start, start + batch);
      this.applyBatch(data, indices, learningRate);
    }
  }

  private applyBatch(data: LabelledData, indices: number[], learningRate: number): void {
    const gradsW = this.layers.map((l) =>
      l.weights.map((row) => new Array(row.length).fill(0)));
    const gradsB = this.layers.map((l) => new Array(l.biases.length).fill(0));

    for (const idx of indices) {
      const activations = this.forwardOne(data.inputs[idx]);
      const output = activations[activations.length - 1][0];
      let delta = [2.0 * (output - data.targets[idx])];
      for (let l = this.layers.length - 1; l >= 0; l--) {
        const input = activations[l];
        const layer = this.layers[l];
        for (let o = 0; o < layer.weights.length; o++) {
          gradsB[l][o] += delta[o];
          const row = layer.weights[o];
          const gRow = gradsW[l][o];
          for (let i = 0; i < row.length; i++) gRow[i] += delta[o] * input[i];
        }
        if (l > 0) {
          const next: number[] = new Array(input.length).fill(0);
          for (let i = 0; i < input.length; i++) {
            if (input[i] <= 0) continue; // relu gate
            let s = 0;
            for (let o = 0; o < layer.weights.length; o++) {
              s += layer.weights[o][i] * delta[o];
            }
            next[i] = s;
          }
          delta = next;
        }
      }
    }

    const step = learningRate / indices.length;
    for (let l = 0; l < this.layers.length; l++) {
      const layer = this.layers[l];
      for (let o = 0; o < layer.weights.length; o++) {
        layer.biases[o] -= step * gradsB[l][o];
        const row = layer.weights[o];
        const gRow = gradsW[l][o];
        for (let i = 0; i < row.length; i++) row[i] -= step * gRow[i];
      }
    }
  }
}
