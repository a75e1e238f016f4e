/**
 * Minimal reverse-mode automatic differentiation over dense 2-D tensors.
 *
 * A forward pass registers one backward closure per operation on a Tape;
 * calling `tape.backward()` after the loss op runs them in reverse order.
 * Gradients accumulate with `+=` so tensors used by several consumers are
 * handled correctly.  Everything is Float64 so the finite-difference
 * gradient check can use tight tolerances.
 */

export class Tensor {
  readonly data: Float64Array;
  readonly grad: Float64Array;
  readonly rows: number;
  readonly cols: number;

  constructor(rows: number, cols: number, data?: Float64Array) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (this.data.length !== rows * cols) {
      throw new Error(`tensor data length ${this.data.length} != ${rows}x${cols}`);
    }
    this.grad = new Float64Array(rows * cols);
  }

  get size(): number {
    return this.data.length;
  }

  zeroGrad(): void {
    this.grad.fill(0);
  }
}

export class Tape {
  private readonly ops: Array<() => void> = [];

  record(backward: () => void): void {
    this.ops.push(backward);
  }

  /** Run all registered backward closures in reverse order. */
  backward(): void {
    for (let i = this.ops.length - 1; i >= 0; i--) this.ops[i]();
  }
}

/** y = x @ W + b  (b broadcast over rows; pass null to skip the bias). */
export function linear(tape: Tape, x: Tensor, w: Tensor, b: Tensor | null): Tensor {
  if (x.cols !== w.rows) throw new Error(`linear: ${x.cols} != ${w.rows}`);
  if (b !== null && (b.rows !== 1 || b.cols !== w.cols)) {
    throw new Error(`linear: bias shape ${b.rows}x${b.cols} != 1x${w.cols}`);
  }
  const n = x.rows;
  const inDim = x.cols;
  const outDim = w.cols;
  const y = new Tensor(n, outDim);
  for (let r = 0; r < n; r++) {
    const xOff = r * inDim;
    const yOff = r * outDim;
    if (b !== null) {
      for (let c = 0; c < outDim; c++) y.data[yOff + c] = b.data[c];
    }
    for (let k = 0; k < inDim; k++) {
      const xv = x.data[xOff + k];
      if (xv === 0) continue;
      const wOff = k * outDim;
      for (let c = 0; c < outDim; c++) y.data[yOff + c] += xv * w.data[wOff + c];
    }
  }
  tape.record(() => {
    for (let r = 0; r < n; r++) {
      const xOff = r * inDim;
      const yOff = r * outDim;
      for (let k = 0; k < inDim; k++) {
        const wOff = k * outDim;
        const xv = x.data[xOff + k];
        let dx = 0;
        for (let c = 0; c < outDim; c++) {
          const gy = y.grad[yOff + c];
          dx += gy * w.data[wOff + c];
          w.grad[wOff + c] += gy * xv;
        }
        x.grad[xOff + k] += dx;
      }
      if (b !== null) {
        for (let c = 0; c < outDim; c++) b.grad[c] += y.grad[yOff + c];
      }
    }
  });
  return y;
}

/** Elementwise rectifier. */
export function relu(tape: Tape, x: Tensor): Tensor {
  const y = new Tensor(x.rows, x.cols);
  for (let i = 0; i < x.size; i++) y.data[i] = x.data[i] > 0 ? x.data[i] : 0;
  tape.record(() => {
    for (let i = 0; i < x.size; i++) {
      if (x.data[i] > 0) x.grad[i] += y.grad[i];
    }
  });
  return y;
}

/** Elementwise sum of two same-shape tensors. */
export function add(tape: Tape, a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) {
    throw new Error(`add: shape mismatch ${a.rows}x${a.cols} vs ${b.rows}x${b.cols}`);
  }
  const y = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.size; i++) y.data[i] = a.data[i] + b.data[i];
  tape.record(() => {
    for (let i = 0; i < a.size; i++) {
      a.grad[i] += y.grad[i];
      b.grad[i] += y.grad[i];
    }
  });
  return y;
}

/**
 * Full-neighborhood mean aggregation: row v of the result is the mean of
 * x's rows over v's incoming neighbors, or zero when v has none.
 */
export function meanNeighbors(tape: Tape, x: Tensor, neighbors: number[][]): Tensor {
  if (neighbors.length !== x.rows) {
    throw new Error(`meanNeighbors: ${neighbors.length} lists for ${x.rows} rows`);
  }
  const d = x.cols;
  const y = new Tensor(x.rows, d);
  for (let v = 0; v < x.rows; v++) {
    const list = neighbors[v];
    if (list.length === 0) continue;
    const yOff = v * d;
    const inv = 1 / list.length;
    for (const u of list) {
      const xOff = u * d;
      for (let c = 0; c < d; c++) y.data[yOff + c] += x.data[xOff + c] * inv;
    }
  }
  tape.record(() => {
    for (let v = 0; v < x.rows; v++) {
      const list = neighbors[v];
      if (list.length === 0) continue;
      const yOff = v * d;
      const inv = 1 / list.length;
      for (const u of list) {
        const xOff = u * d;
        for (let c = 0; c < d; c++) x.grad[xOff + c] += y.grad[yOff + c] * inv;
      }
    }
  });
  return y;
}

/**
 * Per-node mean of character-embedding rows: row v of the result is the
 * mean of the embedding rows selected by tokens[v] (always nonempty; empty
 * feature strings are encoded upstream as a single unknown token).
 */
export function charMeanRows(tape: Tape, embedding: Tensor, tokens: Int32Array[]): Tensor {
  const e = embedding.cols;
  const y = new Tensor(tokens.length, e);
  for (let v = 0; v < tokens.length; v++) {
    const ids = tokens[v];
    if (ids.length === 0) throw new Error(`node ${v}: empty token list`);
    const yOff = v * e;
    const inv = 1 / ids.length;
    for (const tok of ids) {
      const eOff = tok * e;
      for (let c = 0; c < e; c++) y.data[yOff + c] += embedding.data[eOff + c] * inv;
    }
  }
  tape.record(() => {
    for (let v = 0; v < tokens.length; v++) {
      const ids = tokens[v];
      const yOff = v * e;
      const inv = 1 / ids.length;
      for (const tok of ids) {
        const eOff = tok * e;
        for (let c = 0; c < e; c++) embedding.grad[eOff + c] += y.grad[yOff + c] * inv;
      }
    }
  });
  return y;
}

export interface LossResult {
  /** Scalar node-normalized binary cross-entropy. */
  loss: number;
  /** Per-node sigmoid probabilities (detached copy). */
  probs: Float64Array;
}

/**
 * Fused sigmoid + clamped binary cross-entropy, normalized by node count.
 *
 * Matches the shared reference loss exactly: p = sigmoid(z) is clamped to
 * [1e-7, 1 - 1e-7] before the log.  Inside the clamp range the gradient is
 * the classic (p - t)/n; at the clamp boundary the hard clamp contributes
 * zero gradient, which keeps saturated nodes from exploding.
 */
export function sigmoidBce(
  tape: Tape,
  z: Tensor,
  targets: ArrayLike<boolean>,
  eps: number = 1e-7
): LossResult {
  if (z.cols !== 1) throw new Error(`sigmoidBce: expected n x 1 logits, got ${z.rows}x${z.cols}`);
  if (z.rows !== targets.length) {
    throw new Error(`sigmoidBce: ${targets.length} targets for ${z.rows} logits`);
  }
  const n = z.rows;
  const probs = new Float64Array(n);
  let total = 0;
  for (let i = 0; i < n; i++) {
    const p = 1 / (1 + Math.exp(-z.data[i]));
    probs[i] = p;
    const pc = Math.min(Math.max(p, eps), 1 - eps);
    total += targets[i] ? Math.log(pc) : Math.log(1 - pc);
  }
  const loss = -total / n;
  tape.record(() => {
    for (let i = 0; i < n; i++) {
      const p = probs[i];
      if (p <= eps || p >= 1 - eps) continue;
      z.grad[i] += (p - (targets[i] ? 1 : 0)) / n;
    }
  });
  return { loss, probs };
}
