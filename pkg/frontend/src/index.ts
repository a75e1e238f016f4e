export {
  bceFromProbs,
  CharVocab,
  DECISION_THRESHOLD,
  EDGE_MODES,
  LOSS_EPS,
  neighborLists,
  readRecords,
  recordFromJson,
  scorePredictions,
  writePredictions,
} from "./data.js";
export type { EdgeMode, GraphRecord, SplitScores } from "./data.js";
export { add, charMeanRows, linear, meanNeighbors, relu, sigmoidBce, Tape, Tensor } from "./autograd.js";
export type { LossResult } from "./autograd.js";
export { CONFIG_DEFAULTS, encodeGraph, Model, resolveConfig } from "./model.js";
export type { EncodedGraph, ModelConfig } from "./model.js";
export { Adam, EARLY_STOP_PATIENCE, evaluate, trainModel } from "./train.js";
export type { EpochEntry, SplitMetrics, TrainOptions, TrainResult } from "./train.js";
export { predictAll, predictToFile } from "./predict.js";
export { main } from "./cli.js";
export { Rng } from "./rng.js";
