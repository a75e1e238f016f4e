/**
 * Character-level GraphSAGE node classifier.
 *
 * Per-node input text is embedded character by character, the embeddings are
 * averaged, and the average passes through two fully connected layers to give
 * the initial node state (a fixed constant vector instead when node features
 * are disabled).  K mean-aggregating graph-convolution layers then combine
 * each node's state with the full-neighborhood mean of its neighbors under
 * the configured edge mode (no sampling — graphs are small), and a two-layer
 * head with a sigmoid emits one probability per node: whether the node
 * belongs to the inlined theorem body.
 */

import {
  CharVocab,
  EdgeMode,
  EDGE_MODES,
  GraphRecord,
  neighborLists,
} from "./data.js";
import {
  add,
  charMeanRows,
  linear,
  LossResult,
  meanNeighbors,
  relu,
  sigmoidBce,
  Tape,
  Tensor,
} from "./autograd.js";
import { Rng } from "./rng.js";

export interface ModelConfig {
  /** Number of graph-convolution layers (>= 1). */
  K: number;
  /** Hidden state size per node (>= 1). */
  d: number;
  /** Character embedding width. */
  charEmbedDim: number;
  /** Width of the fully connected layers in the encoder and head. */
  fcHidden: number;
  edgeMode: EdgeMode;
  useNodeFeatures: boolean;
  lr: number;
  epochs: number;
  seed: number;
}

export const CONFIG_DEFAULTS = {
  charEmbedDim: 128,
  fcHidden: 64,
  lr: 1e-4,
  epochs: 20,
  seed: 0,
  edgeMode: "bidirectional" as EdgeMode,
  useNodeFeatures: true,
};

/** Fill in defaults and validate ranges. */
export function resolveConfig(partial: Partial<ModelConfig> & { K: number; d: number }): ModelConfig {
  const config: ModelConfig = {
    K: partial.K,
    d: partial.d,
    charEmbedDim: partial.charEmbedDim ?? CONFIG_DEFAULTS.charEmbedDim,
    fcHidden: partial.fcHidden ?? CONFIG_DEFAULTS.fcHidden,
    edgeMode: partial.edgeMode ?? CONFIG_DEFAULTS.edgeMode,
    useNodeFeatures: partial.useNodeFeatures ?? CONFIG_DEFAULTS.useNodeFeatures,
    lr: partial.lr ?? CONFIG_DEFAULTS.lr,
    epochs: partial.epochs ?? CONFIG_DEFAULTS.epochs,
    seed: partial.seed ?? CONFIG_DEFAULTS.seed,
  };
  if (!Number.isInteger(config.K) || config.K < 1) throw new Error(`K must be >= 1, got ${config.K}`);
  if (!Number.isInteger(config.d) || config.d < 1) throw new Error(`d must be >= 1, got ${config.d}`);
  if (config.charEmbedDim < 1 || config.fcHidden < 1) {
    throw new Error("layer widths must be >= 1");
  }
  if (!(config.lr > 0)) throw new Error(`learning rate must be positive, got ${config.lr}`);
  if (!Number.isInteger(config.epochs) || config.epochs < 1) {
    throw new Error(`epochs must be >= 1, got ${config.epochs}`);
  }
  if (!EDGE_MODES.includes(config.edgeMode)) {
    throw new Error(`unknown edge mode ${JSON.stringify(config.edgeMode)}`);
  }
  return config;
}

/** Tensor bundle for one record: token ids, neighbor lists, labels. */
export interface EncodedGraph {
  graphId: string;
  tokens: Int32Array[];
  neighbors: number[][];
  targets: boolean[];
}

/**
 * Precompute everything the forward pass needs for one record: per-node
 * character token ids under the vocabulary (empty features become a single
 * unknown token) and incoming-neighbor lists under the config's edge mode.
 */
export function encodeGraph(record: GraphRecord, vocab: CharVocab, config: ModelConfig): EncodedGraph {
  return {
    graphId: record.graphId,
    tokens: record.features.map((feature) => vocab.encode(feature)),
    neighbors: neighborLists(record, config.edgeMode),
    targets: record.targets,
  };
}

interface NamedTensor {
  name: string;
  tensor: Tensor;
}

export class Model {
  readonly config: ModelConfig;
  readonly vocab: CharVocab;

  /** Character embedding table, one row per vocab entry (row 0 = unknown). */
  embed: Tensor;
  enc1W: Tensor;
  enc1B: Tensor;
  enc2W: Tensor;
  enc2B: Tensor;
  convSelfW: Tensor[];
  convNeighW: Tensor[];
  convB: Tensor[];
  head1W: Tensor;
  head1B: Tensor;
  head2W: Tensor;
  head2B: Tensor;

  constructor(config: ModelConfig, vocab: CharVocab) {
    this.config = config;
    this.vocab = vocab;
    const rng = new Rng(config.seed);
    const { charEmbedDim, fcHidden, d, K } = config;

    this.embed = gaussianTensor(rng, vocab.size, charEmbedDim, 1.0);
    this.enc1W = glorotTensor(rng, charEmbedDim, fcHidden);
    this.enc1B = new Tensor(1, fcHidden);
    this.enc2W = glorotTensor(rng, fcHidden, d);
    this.enc2B = new Tensor(1, d);
    this.convSelfW = [];
    this.convNeighW = [];
    this.convB = [];
    for (let k = 0; k < K; k++) {
      this.convSelfW.push(glorotTensor(rng, d, d));
      this.convNeighW.push(glorotTensor(rng, d, d));
      this.convB.push(new Tensor(1, d));
    }
    this.head1W = glorotTensor(rng, d, fcHidden);
    this.head1B = new Tensor(1, fcHidden);
    this.head2W = glorotTensor(rng, fcHidden, 1);
    this.head2B = new Tensor(1, 1);
  }

  /** All trainable parameters with stable names (serialization order). */
  parameters(): NamedTensor[] {
    const params: NamedTensor[] = [
      { name: "embed", tensor: this.embed },
      { name: "enc1W", tensor: this.enc1W },
      { name: "enc1B", tensor: this.enc1B },
      { name: "enc2W", tensor: this.enc2W },
      { name: "enc2B", tensor: this.enc2B },
    ];
    for (let k = 0; k < this.config.K; k++) {
      params.push({ name: `conv${k}SelfW`, tensor: this.convSelfW[k] });
      params.push({ name: `conv${k}NeighW`, tensor: this.convNeighW[k] });
      params.push({ name: `conv${k}B`, tensor: this.convB[k] });
    }
    params.push(
      { name: "head1W", tensor: this.head1W },
      { name: "head1B", tensor: this.head1B },
      { name: "head2W", tensor: this.head2W },
      { name: "head2B", tensor: this.head2B }
    );
    return params;
  }

  zeroGrads(): void {
    for (const { tensor } of this.parameters()) tensor.zeroGrad();
  }

  /**
   * Initial node states: char-mean embedding through the two encoder
   * layers, or a constant all-ones vector when node features are off.
   */
  initialStates(tape: Tape, graph: EncodedGraph): Tensor {
    const n = graph.tokens.length;
    if (!this.config.useNodeFeatures) {
      const h0 = new Tensor(n, this.config.d);
      h0.data.fill(1);
      return h0;
    }
    const charMean = charMeanRows(tape, this.embed, graph.tokens);
    const hidden = relu(tape, linear(tape, charMean, this.enc1W, this.enc1B));
    return linear(tape, hidden, this.enc2W, this.enc2B);
  }

  /** Per-node logits for one graph (registers backward ops on the tape). */
  logits(tape: Tape, graph: EncodedGraph): Tensor {
    let h = this.initialStates(tape, graph);
    for (let k = 0; k < this.config.K; k++) {
      const agg = meanNeighbors(tape, h, graph.neighbors);
      const self = linear(tape, h, this.convSelfW[k], null);
      const neigh = linear(tape, agg, this.convNeighW[k], this.convB[k]);
      h = relu(tape, add(tape, self, neigh));
    }
    const headHidden = relu(tape, linear(tape, h, this.head1W, this.head1B));
    return linear(tape, headHidden, this.head2W, this.head2B);
  }

  /** Forward + loss for one graph; call `tape.backward()` to get grads. */
  lossForward(tape: Tape, graph: EncodedGraph): LossResult {
    return sigmoidBce(tape, this.logits(tape, graph), graph.targets);
  }

  /** Inference only: per-node probabilities for one graph. */
  predictProbs(graph: EncodedGraph): Float64Array {
    const tape = new Tape();
    const z = this.logits(tape, graph);
    const probs = new Float64Array(z.rows);
    for (let i = 0; i < z.rows; i++) probs[i] = 1 / (1 + Math.exp(-z.data[i]));
    return probs;
  }

  /** Deep copy of all parameter values (for best-epoch snapshots). */
  snapshot(): Float64Array[] {
    return this.parameters().map(({ tensor }) => tensor.data.slice());
  }

  restore(snapshot: Float64Array[]): void {
    const params = this.parameters();
    if (snapshot.length !== params.length) {
      throw new Error(`snapshot has ${snapshot.length} tensors, expected ${params.length}`);
    }
    params.forEach(({ tensor }, i) => tensor.data.set(snapshot[i]));
  }

  toJSON(): object {
    return {
      schema_version: 1,
      config: this.config,
      vocab: this.vocab.toJSON(),
      parameters: Object.fromEntries(
        this.parameters().map(({ name, tensor }) => [
          name,
          { rows: tensor.rows, cols: tensor.cols, data: Array.from(tensor.data) },
        ])
      ),
    };
  }

  static fromJSON(obj: any): Model {
    const config = resolveConfig(obj.config);
    const vocab = CharVocab.fromJSON(obj.vocab);
    const model = new Model(config, vocab);
    for (const { name, tensor } of model.parameters()) {
      const stored = obj.parameters[name];
      if (!stored) throw new Error(`model file is missing parameter ${name}`);
      if (stored.rows !== tensor.rows || stored.cols !== tensor.cols) {
        throw new Error(
          `parameter ${name}: stored shape ${stored.rows}x${stored.cols} != ` +
            `expected ${tensor.rows}x${tensor.cols}`
        );
      }
      tensor.data.set(stored.data);
    }
    return model;
  }
}

function gaussianTensor(rng: Rng, rows: number, cols: number, std: number): Tensor {
  const t = new Tensor(rows, cols);
  for (let i = 0; i < t.size; i++) t.data[i] = rng.gaussian() * std;
  return t;
}

/** Glorot-normal weight init: std = sqrt(2 / (fanIn + fanOut)). */
function glorotTensor(rng: Rng, fanIn: number, fanOut: number): Tensor {
  const std = Math.sqrt(2 / (fanIn + fanOut));
  return gaussianTensor(rng, fanIn, fanOut, std);
}
