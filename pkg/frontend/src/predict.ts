/**
 * Batch inference: run a trained model over a record file and emit the
 * prediction JSON Lines (`{"graph_id", "probs"}`) that the Python
 * `extract` subcommand consumes.
 */

import { GraphRecord, writePredictions } from "./data.js";
import { encodeGraph, Model } from "./model.js";

/** Per-node probabilities for every record, keyed by graph id. */
export function predictAll(model: Model, records: GraphRecord[]): Map<string, number[]> {
  const probsById = new Map<string, number[]>();
  for (const record of records) {
    const graph = encodeGraph(record, model.vocab, model.config);
    probsById.set(record.graphId, Array.from(model.predictProbs(graph)));
  }
  return probsById;
}

/** Predict and write JSONL; returns the number of records written. */
export function predictToFile(model: Model, records: GraphRecord[], outPath: string): number {
  const probsById = predictAll(model, records);
  writePredictions(outPath, probsById);
  return probsById.size;
}
