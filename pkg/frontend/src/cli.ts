/**
 * Command-line interface.
 *
 *   train   --data dir/ [--K 5] [--d 64] [--edge-mode bidirectional]
 *           [--features true] [--seed 7] [--epochs N] [--lr F] [--out dir/]
 *   predict --model model.json --dataset records.jsonl --out preds.jsonl
 *
 * `train` reads train/valid/test.jsonl from the data directory, trains a
 * model, and writes model.json, metrics.json (node and proof accuracy per
 * split per epoch), and test_predictions.jsonl to the output directory
 * (default ./train_out).  `predict` runs a saved model over any record file.
 * Exit codes: 0 success, 1 domain error, 2 usage error.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";
import { EdgeMode, EDGE_MODES, readRecords } from "./data.js";
import { Model, resolveConfig } from "./model.js";
import { predictToFile } from "./predict.js";
import { evaluate, trainModel } from "./train.js";

const USAGE = `usage:
  train   --data dir/ [--K 5] [--d 64] [--edge-mode bidirectional]
          [--features true|false] [--seed 7] [--epochs N] [--lr F] [--out dir/]
  predict --model model.json --dataset records.jsonl --out preds.jsonl`;

class UsageError extends Error {}

function parseIntStrict(value: string, flag: string): number {
  const n = Number(value);
  if (!Number.isInteger(n)) throw new UsageError(`${flag} expects an integer, got ${value}`);
  return n;
}

function parseBool(value: string, flag: string): boolean {
  if (value === "true") return true;
  if (value === "false") return false;
  throw new UsageError(`${flag} expects true or false, got ${value}`);
}

function cmdTrain(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      data: { type: "string" },
      K: { type: "string" },
      d: { type: "string" },
      "edge-mode": { type: "string" },
      features: { type: "string" },
      seed: { type: "string" },
      epochs: { type: "string" },
      lr: { type: "string" },
      out: { type: "string" },
      quiet: { type: "boolean", default: false },
    },
  });
  if (!values.data) throw new UsageError("train requires --data");
  const dataDir = values.data;
  const edgeMode = (values["edge-mode"] ?? "bidirectional") as EdgeMode;
  if (!EDGE_MODES.includes(edgeMode)) {
    throw new UsageError(`--edge-mode must be one of ${EDGE_MODES.join(", ")}`);
  }
  const lr = values.lr === undefined ? undefined : Number(values.lr);
  if (lr !== undefined && !(lr > 0)) throw new UsageError(`--lr expects a positive number`);
  const config = resolveConfig({
    K: values.K === undefined ? 5 : parseIntStrict(values.K, "--K"),
    d: values.d === undefined ? 64 : parseIntStrict(values.d, "--d"),
    edgeMode,
    useNodeFeatures: values.features === undefined ? true : parseBool(values.features, "--features"),
    seed: values.seed === undefined ? 0 : parseIntStrict(values.seed, "--seed"),
    epochs: values.epochs === undefined ? undefined : parseIntStrict(values.epochs, "--epochs"),
    lr,
  });

  const splits = ["train", "valid", "test"].map((name) => path.join(dataDir, `${name}.jsonl`));
  for (const file of splits) {
    if (!fs.existsSync(file)) throw new Error(`missing dataset file: ${file}`);
  }
  const [trainRecords, validRecords, testRecords] = splits.map(readRecords);
  const log = values.quiet ? () => {} : (msg: string) => console.error(msg);
  log(
    `training K=${config.K} d=${config.d} edge_mode=${config.edgeMode} ` +
      `features=${config.useNodeFeatures} seed=${config.seed} on ` +
      `${trainRecords.length}/${validRecords.length}/${testRecords.length} records`
  );

  const result = trainModel(trainRecords, validRecords, config, { testRecords, log });
  const finalTest = evaluate(result.model, testRecords);

  const outDir = values.out ?? "train_out";
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(path.join(outDir, "model.json"), JSON.stringify(result.model.toJSON()));
  const metrics = {
    schema_version: 1,
    config: result.model.config,
    best_epoch: result.bestEpoch,
    stopped_early: result.stoppedEarly,
    epochs: result.history,
    final_test: finalTest,
  };
  fs.writeFileSync(path.join(outDir, "metrics.json"), JSON.stringify(metrics, null, 2) + "\n");
  const nWritten = predictToFile(
    result.model,
    testRecords,
    path.join(outDir, "test_predictions.jsonl")
  );
  log(
    `best epoch ${result.bestEpoch}; test proof accuracy ${finalTest.proof_accuracy.toFixed(3)}; ` +
      `wrote model.json, metrics.json, test_predictions.jsonl (${nWritten} graphs) to ${outDir}`
  );
  console.log(
    JSON.stringify({
      best_epoch: result.bestEpoch,
      stopped_early: result.stoppedEarly,
      test: finalTest,
      out_dir: outDir,
    })
  );
  return 0;
}

function cmdPredict(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string" },
      dataset: { type: "string" },
      out: { type: "string" },
    },
  });
  if (!values.model || !values.dataset || !values.out) {
    throw new UsageError("predict requires --model, --dataset, and --out");
  }
  const model = Model.fromJSON(JSON.parse(fs.readFileSync(values.model, "utf-8")));
  const records = readRecords(values.dataset);
  const n = predictToFile(model, records, values.out);
  console.log(JSON.stringify({ records: n, out: values.out }));
  return 0;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === "train") return cmdTrain(rest);
    if (command === "predict") return cmdPredict(rest);
    throw new UsageError(command ? `unknown command: ${command}` : "missing command");
  } catch (err) {
    if (
      err instanceof UsageError ||
      (err as { code?: string }).code === "ERR_PARSE_ARGS_UNKNOWN_OPTION" ||
      (err as { code?: string }).code === "ERR_PARSE_ARGS_INVALID_OPTION_VALUE"
    ) {
      console.error(`error: ${(err as Error).message}\n${USAGE}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
