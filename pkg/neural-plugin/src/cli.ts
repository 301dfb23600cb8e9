#!/usr/bin/env node
import { parseArgs } from "node:util";
import * as tf from "@tensorflow/tfjs";

import { loadModel } from "./model.js";
import { PluginSession, serve } from "./session.js";
import { ConfigError, parseTrainConfig, toyTrain } from "./train.js";

const USAGE = `usage:
  neural-plugin serve --edge EDGE --tile-size N [--model model.json]
  neural-plugin train --config config.json`;

async function cmdServe(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      edge: { type: "string" },
      "tile-size": { type: "string" },
      model: { type: "string" },
    },
  });
  if (!values.edge) throw new ConfigError("serve needs --edge");
  tf.setBackend("cpu");
  await tf.ready();
  const model = values.model ? await loadModel(values.model) : null;
  let tileSize = model ? model.meta.tileSize : NaN;
  if (values["tile-size"] !== undefined) {
    tileSize = Number(values["tile-size"]);
    if (!Number.isInteger(tileSize) || tileSize <= 0) {
      throw new ConfigError(`--tile-size must be a positive integer, got ${values["tile-size"]}`);
    }
    if (model && model.meta.tileSize !== tileSize) {
      throw new ConfigError(
        `--tile-size ${tileSize} contradicts model built for ${model.meta.tileSize}px tiles`,
      );
    }
  } else if (!model) {
    throw new ConfigError("serve needs --tile-size when no --model is given");
  }
  const session = new PluginSession(values.edge, tileSize, model);
  const result = await serve(session, process.stdin, process.stdout, process.stderr);
  return result.exitCode;
}

async function cmdTrain(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: { config: { type: "string" } },
  });
  if (!values.config) throw new ConfigError("train needs --config");
  const cfg = parseTrainConfig(values.config);
  const result = await toyTrain(cfg);
  const first = result.smoothedL1[0];
  const last = result.smoothedL1[result.smoothedL1.length - 1];
  console.error(`neural-plugin: smoothed_l1 ${first.toFixed(5)} -> ${last.toFixed(5)}`);
  console.log(result.modelPath);
  return 0;
}

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === "serve") return await cmdServe(rest);
    if (command === "train") return await cmdTrain(rest);
    console.error(USAGE);
    return 2;
  } catch (err) {
    if (err instanceof ConfigError || (err as any)?.code?.startsWith?.("ERR_PARSE_ARGS")) {
      console.error(`neural-plugin: ${(err as Error).message}`);
      return 2;
    }
    console.error(`neural-plugin: ${(err as Error).stack ?? err}`);
    return 1;
  }
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});
