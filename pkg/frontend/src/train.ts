/**
 * Training loop: Adam over one graph at a time, early stopping on
 * validation proof accuracy.
 *
 * The objective is the per-graph node-normalized binary cross-entropy summed
 * over graphs — each graph contributes equally regardless of size, so the
 * batch is a single graph and one optimizer step follows each graph.  Metric
 * history records node and proof accuracy (the shared score definitions) for
 * every split after every epoch; training metrics come from the forward
 * passes made during the epoch itself.
 */

import { bceFromProbs, CharVocab, GraphRecord, scorePredictions, SplitScores } from "./data.js";
import { Tape, Tensor } from "./autograd.js";
import { encodeGraph, EncodedGraph, Model, ModelConfig } from "./model.js";
import { Rng } from "./rng.js";

/** Epochs without a validation proof-accuracy improvement before stopping. */
export const EARLY_STOP_PATIENCE = 10;

export class Adam {
  private readonly params: Tensor[];
  private readonly m: Float64Array[];
  private readonly v: Float64Array[];
  private t = 0;

  constructor(
    params: Tensor[],
    readonly lr: number,
    readonly beta1 = 0.9,
    readonly beta2 = 0.999,
    readonly eps = 1e-8
  ) {
    this.params = params;
    this.m = params.map((p) => new Float64Array(p.size));
    this.v = params.map((p) => new Float64Array(p.size));
  }

  /** Apply one update from the accumulated gradients, then zero them. */
  step(): void {
    this.t++;
    const correction1 = 1 - Math.pow(this.beta1, this.t);
    const correction2 = 1 - Math.pow(this.beta2, this.t);
    for (let p = 0; p < this.params.length; p++) {
      const param = this.params[p];
      const m = this.m[p];
      const v = this.v[p];
      const { data, grad } = param;
      for (let i = 0; i < data.length; i++) {
        const g = grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        const mHat = m[i] / correction1;
        const vHat = v[i] / correction2;
        data[i] -= (this.lr * mHat) / (Math.sqrt(vHat) + this.eps);
      }
      grad.fill(0);
    }
  }
}

export interface SplitMetrics {
  loss: number;
  node_accuracy: number;
  proof_accuracy: number;
}

export interface EpochEntry {
  epoch: number;
  train: SplitMetrics;
  valid: SplitMetrics;
  test?: SplitMetrics;
}

export interface TrainResult {
  model: Model;
  vocab: CharVocab;
  history: EpochEntry[];
  /** 1-based epoch whose weights the returned model carries. */
  bestEpoch: number;
  stoppedEarly: boolean;
}

export interface TrainOptions {
  /** Extra split evaluated after each epoch and recorded in the history. */
  testRecords?: GraphRecord[];
  log?: (message: string) => void;
  patience?: number;
}

/** Mean reference loss plus the shared accuracy scores over one split. */
export function evaluate(model: Model, records: GraphRecord[], encoded?: EncodedGraph[]): SplitMetrics {
  const graphs = encoded ?? records.map((r) => encodeGraph(r, model.vocab, model.config));
  const probsById = new Map<string, Float64Array>();
  let lossSum = 0;
  for (let i = 0; i < graphs.length; i++) {
    const probs = model.predictProbs(graphs[i]);
    probsById.set(graphs[i].graphId, probs);
    lossSum += bceFromProbs(records[i].targets, probs);
  }
  const scores = scorePredictions(records, probsById);
  return {
    loss: lossSum / records.length,
    node_accuracy: scores.nodeAccuracy,
    proof_accuracy: scores.proofAccuracy,
  };
}

/**
 * Train a fresh model on the given splits.
 *
 * The character vocabulary comes from the training records only.  Training
 * iterates graphs in a seeded shuffled order, takes one Adam step per graph,
 * and stops early when validation proof accuracy has not improved for
 * `patience` consecutive epochs; the returned model carries the weights of
 * the best validation epoch.  A non-finite loss aborts with diagnostics.
 */
export function trainModel(
  trainRecords: GraphRecord[],
  validRecords: GraphRecord[],
  config: ModelConfig,
  options: TrainOptions = {}
): TrainResult {
  if (trainRecords.length === 0) throw new Error("training set is empty");
  if (validRecords.length === 0) throw new Error("validation set is empty");
  const log = options.log ?? (() => {});
  const patience = options.patience ?? EARLY_STOP_PATIENCE;

  const vocab = CharVocab.fromRecords(trainRecords);
  const model = new Model(config, vocab);
  const trainGraphs = trainRecords.map((r) => encodeGraph(r, vocab, config));
  const validGraphs = validRecords.map((r) => encodeGraph(r, vocab, config));
  const testGraphs = options.testRecords?.map((r) => encodeGraph(r, vocab, config));

  const adam = new Adam(model.parameters().map((p) => p.tensor), config.lr);
  const shuffleRng = new Rng(config.seed ^ 0x5eed);
  const order = trainGraphs.map((_, i) => i);

  const history: EpochEntry[] = [];
  let bestProofAcc = -Infinity;
  let bestEpoch = 0;
  let bestSnapshot: Float64Array[] | null = null;
  let sinceBest = 0;
  let stoppedEarly = false;

  for (let epoch = 1; epoch <= config.epochs; epoch++) {
    shuffleRng.shuffle(order);
    let lossSum = 0;
    let nodeAccSum = 0;
    let nPerfect = 0;
    for (const idx of order) {
      const graph = trainGraphs[idx];
      const tape = new Tape();
      const { loss, probs } = model.lossForward(tape, graph);
      if (!Number.isFinite(loss)) {
        throw new Error(
          `non-finite loss at epoch ${epoch}, graph ${graph.graphId}: ${loss}; ` +
            "training aborted (divergence)"
        );
      }
      lossSum += loss;
      let correct = 0;
      for (let i = 0; i < probs.length; i++) {
        if ((probs[i] > 0.5) === graph.targets[i]) correct++;
      }
      nodeAccSum += correct / probs.length;
      if (correct === probs.length) nPerfect++;
      tape.backward();
      adam.step();
    }

    const entry: EpochEntry = {
      epoch,
      train: {
        loss: lossSum / trainGraphs.length,
        node_accuracy: nodeAccSum / trainGraphs.length,
        proof_accuracy: nPerfect / trainGraphs.length,
      },
      valid: evaluate(model, validRecords, validGraphs),
    };
    if (options.testRecords && testGraphs) {
      entry.test = evaluate(model, options.testRecords, testGraphs);
    }
    history.push(entry);
    log(
      `epoch ${epoch}: train loss ${entry.train.loss.toFixed(4)} ` +
        `proof ${entry.train.proof_accuracy.toFixed(3)} | ` +
        `valid proof ${entry.valid.proof_accuracy.toFixed(3)}`
    );

    if (entry.valid.proof_accuracy > bestProofAcc) {
      bestProofAcc = entry.valid.proof_accuracy;
      bestEpoch = epoch;
      bestSnapshot = model.snapshot();
      sinceBest = 0;
    } else {
      sinceBest++;
      if (sinceBest >= patience) {
        stoppedEarly = true;
        log(`early stop after epoch ${epoch} (best epoch ${bestEpoch})`);
        break;
      }
    }
  }

  if (bestSnapshot !== null) model.restore(bestSnapshot);
  return { model, vocab, history, bestEpoch, stoppedEarly };
}
