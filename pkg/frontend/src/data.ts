/**
 * Dataset records, char vocabulary, edge modes, and scoring.
 *
 * The on-disk formats here mirror the Python pipeline exactly: graph records
 * arrive as JSON Lines with `nodes: [{label, prop, target}]` and
 * `edges: [[src, dst]]` where each edge points from an argument-subtree root
 * to the step that consumes it, and predictions leave as JSON Lines
 * `{"graph_id", "probs"}` that its `extract` subcommand accepts.
 */

import * as fs from "node:fs";

/** Probabilities are clamped to [EPS, 1-EPS] before taking logs. */
export const LOSS_EPS = 1e-7;

/** Threshold for turning a probability into a binary node decision. */
export const DECISION_THRESHOLD = 0.5;

export type EdgeMode = "none" | "leaves_to_root" | "root_to_leaves" | "bidirectional";

export const EDGE_MODES: readonly EdgeMode[] = [
  "none",
  "leaves_to_root",
  "root_to_leaves",
  "bidirectional",
];

/** One proof-expansion graph with binary per-node labels. */
export interface GraphRecord {
  graphId: string;
  targetTheorem: string;
  /** Per-node feature text: statement label + the proposition it proves. */
  features: string[];
  /** Per-node binary label: true iff the node belongs to the inlined body. */
  targets: boolean[];
  /** Directed edges [argumentRoot, consumer], argument toward consumer. */
  edges: Array<[number, number]>;
}

/** Parse one JSONL line into a GraphRecord. */
export function recordFromJson(obj: any): GraphRecord {
  const nodes: any[] = obj.nodes;
  if (!Array.isArray(nodes) || nodes.length === 0) {
    throw new Error(`record ${obj.graph_id ?? "?"}: empty or missing nodes`);
  }
  const features: string[] = [];
  const targets: boolean[] = [];
  for (const node of nodes) {
    features.push(`${node.label} ${node.prop}`);
    targets.push(Boolean(node.target));
  }
  const edges: Array<[number, number]> = [];
  for (const edge of obj.edges ?? []) {
    const [src, dst] = edge;
    if (src < 0 || src >= nodes.length || dst < 0 || dst >= nodes.length) {
      throw new Error(`record ${obj.graph_id}: edge [${src}, ${dst}] out of range`);
    }
    edges.push([src, dst]);
  }
  return {
    graphId: String(obj.graph_id),
    targetTheorem: String(obj.target_theorem),
    features,
    targets,
    edges,
  };
}

/** Read a JSON Lines dataset file. */
export function readRecords(path: string): GraphRecord[] {
  const text = fs.readFileSync(path, "utf-8");
  const records: GraphRecord[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (trimmed.length > 0) records.push(recordFromJson(JSON.parse(trimmed)));
  }
  return records;
}

/** Write predictions as JSON Lines, sorted by graph id like the Python side. */
export function writePredictions(path: string, probsById: Map<string, number[]>): void {
  const ids = [...probsById.keys()].sort();
  const lines = ids.map((graphId) =>
    JSON.stringify({ graph_id: graphId, probs: probsById.get(graphId) })
  );
  fs.writeFileSync(path, lines.join("\n") + (lines.length > 0 ? "\n" : ""));
}

// ---------------------------------------------------------------------------
// character vocabulary

/**
 * Character-to-index map built from training-set node features.
 *
 * Index 0 is reserved for unknown characters (anything absent from the
 * training features, and the stand-in token for an empty feature string).
 * Construction is deterministic: characters are sorted by code point.
 */
export class CharVocab {
  static readonly UNKNOWN = 0;

  private readonly index: Map<string, number>;
  readonly chars: string[];

  private constructor(chars: string[]) {
    this.chars = chars;
    this.index = new Map();
    chars.forEach((ch, i) => this.index.set(ch, i + 1));
  }

  /** Number of embedding rows: one per known char plus the unknown slot. */
  get size(): number {
    return this.chars.length + 1;
  }

  static fromRecords(records: Iterable<GraphRecord>): CharVocab {
    const seen = new Set<string>();
    for (const record of records) {
      for (const feature of record.features) {
        for (const ch of feature) seen.add(ch);
      }
    }
    return new CharVocab([...seen].sort());
  }

  static fromChars(chars: string[]): CharVocab {
    return new CharVocab([...chars].sort());
  }

  /** Index for one character; unseen characters map to the unknown slot. */
  indexOf(ch: string): number {
    return this.index.get(ch) ?? CharVocab.UNKNOWN;
  }

  /** Token ids for a feature string; empty strings become one unknown token. */
  encode(feature: string): Int32Array {
    if (feature.length === 0) return Int32Array.of(CharVocab.UNKNOWN);
    const ids = new Int32Array(feature.length);
    for (let i = 0; i < feature.length; i++) ids[i] = this.indexOf(feature[i]);
    return ids;
  }

  toJSON(): { chars: string[] } {
    return { chars: this.chars };
  }

  static fromJSON(obj: { chars: string[] }): CharVocab {
    return new CharVocab([...obj.chars]);
  }
}

// ---------------------------------------------------------------------------
// edge modes

/**
 * Per-node incoming-neighbor lists under the requested edge mode.
 *
 * A stored edge [src, dst] carries a message from the argument root `src`
 * to its consumer `dst`.  `leaves_to_root` keeps that direction (information
 * flows from argument subtrees up to the steps that use them),
 * `root_to_leaves` reverses it, `bidirectional` keeps both, and `none`
 * removes all edges.
 */
export function neighborLists(record: GraphRecord, mode: EdgeMode): number[][] {
  const neighbors: number[][] = record.features.map(() => []);
  if (mode === "none") return neighbors;
  for (const [src, dst] of record.edges) {
    if (mode === "leaves_to_root" || mode === "bidirectional") {
      neighbors[dst].push(src);
    }
    if (mode === "root_to_leaves" || mode === "bidirectional") {
      neighbors[src].push(dst);
    }
  }
  return neighbors;
}

// ---------------------------------------------------------------------------
// loss and scoring (mirrors the Python reference definitions)

/**
 * Node-normalized binary cross-entropy over one graph.
 *
 * Identical to the Python reference: clamp each probability to
 * [1e-7, 1 - 1e-7], take log(p) for target nodes and log(1-p) otherwise,
 * and return the negative mean.
 */
export function bceFromProbs(targets: ArrayLike<boolean>, probs: ArrayLike<number>): number {
  if (probs.length !== targets.length) {
    throw new Error(`expected ${targets.length} probabilities, got ${probs.length}`);
  }
  if (targets.length === 0) throw new Error("loss undefined for an empty graph");
  let total = 0;
  for (let i = 0; i < targets.length; i++) {
    const p = Math.min(Math.max(probs[i], LOSS_EPS), 1 - LOSS_EPS);
    total += targets[i] ? Math.log(p) : Math.log(1 - p);
  }
  return -total / targets.length;
}

export interface SplitScores {
  /** Mean over graphs of each graph's fraction of correct nodes. */
  nodeAccuracy: number;
  /** Fraction of graphs whose nodes are all classified correctly. */
  proofAccuracy: number;
  nRecords: number;
  nNodes: number;
}

/**
 * Node accuracy (averaged per graph) and proof accuracy, with a node
 * counted as predicted-target iff its probability exceeds 0.5.
 */
export function scorePredictions(
  records: GraphRecord[],
  probsById: Map<string, ArrayLike<number>>
): SplitScores {
  if (records.length === 0) throw new Error("no records to score");
  let perRecordAcc = 0;
  let nPerfect = 0;
  let nNodes = 0;
  for (const record of records) {
    const probs = probsById.get(record.graphId);
    if (probs === undefined) {
      throw new Error(`missing predictions for ${record.graphId}`);
    }
    if (probs.length !== record.targets.length) {
      throw new Error(
        `${record.graphId}: expected ${record.targets.length} probabilities, got ${probs.length}`
      );
    }
    let correct = 0;
    for (let i = 0; i < record.targets.length; i++) {
      if ((probs[i] > DECISION_THRESHOLD) === record.targets[i]) correct++;
    }
    perRecordAcc += correct / record.targets.length;
    if (correct === record.targets.length) nPerfect++;
    nNodes += record.targets.length;
  }
  return {
    nodeAccuracy: perRecordAcc / records.length,
    proofAccuracy: nPerfect / records.length,
    nRecords: records.length,
    nNodes,
  };
}
