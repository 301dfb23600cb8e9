import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";

import { decodePng } from "./png.js";
import { buildGenerator, buildDiscriminator, saveModel } from "./model.js";
import { mulberry32, randInt } from "./rng.js";

export class ConfigError extends Error {}

export interface LossMix {
  adversarial: number;
  l1: number;
}

export interface ToyTrainConfig {
  pairs: string;
  imageSize: number;
  steps: number;
  learningRate: number;
  loss: LossMix;
  seed: number;
  out: string;
  batchSize: number;
}

/**
 * Read a train config document. Paths inside the file are resolved
 * relative to the file itself, so a config directory can move as a unit.
 */
export function parseTrainConfig(configPath: string): ToyTrainConfig {
  let doc: any;
  try {
    doc = JSON.parse(fs.readFileSync(configPath, "utf8"));
  } catch (err) {
    throw new ConfigError(`cannot read ${configPath}: ${(err as Error).message}`);
  }
  const base = path.dirname(path.resolve(configPath));
  const need = (key: string) => {
    if (!(key in doc)) throw new ConfigError(`train config is missing "${key}"`);
    return doc[key];
  };
  const imageSize = Number(need("image_size"));
  if (!Number.isInteger(imageSize) || imageSize < 8 || imageSize > 128 ||
      (imageSize & (imageSize - 1)) !== 0) {
    throw new ConfigError(`image_size must be a power of two in [8, 128], got ${doc.image_size}`);
  }
  const steps = Number(need("steps"));
  if (!Number.isInteger(steps) || steps < 1) {
    throw new ConfigError(`steps must be a positive integer, got ${doc.steps}`);
  }
  const mix = need("loss");
  if (typeof mix !== "object" || !("adversarial" in mix) || !("l1" in mix)) {
    throw new ConfigError('loss mix must carry "adversarial" and "l1" weights');
  }
  return {
    pairs: path.resolve(base, String(need("pairs"))),
    imageSize,
    steps,
    learningRate: Number(doc.learning_rate ?? 2e-3),
    loss: { adversarial: Number(mix.adversarial), l1: Number(mix.l1) },
    seed: Number(doc.seed ?? 0),
    out: path.resolve(base, String(need("out"))),
    batchSize: Number(doc.batch_size ?? 4),
  };
}

interface PairSet {
  inputs: Float32Array[];
  targets: Float32Array[];
  count: number;
}

function toUnit(bytes: Uint8Array): Float32Array {
  const out = new Float32Array(bytes.length);
  for (let i = 0; i < bytes.length; i++) out[i] = bytes[i] / 127.5 - 1;
  return out;
}

function loadPairs(listPath: string, imageSize: number): PairSet {
  let lines: string[];
  try {
    lines = fs.readFileSync(listPath, "utf8").split("\n").filter((l) => l.trim().length > 0);
  } catch (err) {
    throw new ConfigError(`cannot read pair list ${listPath}: ${(err as Error).message}`);
  }
  if (lines.length < 8) {
    throw new ConfigError(`need at least 8 training pairs, pair list has ${lines.length}`);
  }
  const inputs: Float32Array[] = [];
  const targets: Float32Array[] = [];
  const raw: Buffer[] = [];
  for (const line of lines) {
    const cols = line.split("\t");
    if (cols.length !== 2) {
      throw new ConfigError(`pair line needs "input<TAB>target": ${line}`);
    }
    for (const [slot, file] of [[inputs, cols[0]], [targets, cols[1]]] as const) {
      const bytes = fs.readFileSync(file);
      const img = decodePng(bytes);
      if (img.width !== imageSize || img.height !== imageSize) {
        throw new ConfigError(
          `${file} is ${img.width}x${img.height}, config says image_size ${imageSize}`,
        );
      }
      slot.push(toUnit(img.data));
      raw.push(Buffer.from(img.data));
    }
  }
  if (raw.every((b) => b.equals(raw[0]))) {
    console.error("neural-plugin: warning: all training pairs are identical; "
      + "training will converge trivially");
  }
  return { inputs, targets, count: inputs.length };
}

export interface TrainResult {
  modelPath: string;
  lossCurvePath: string;
  smoothedL1: number[];
  adversarial: number[];
}

function lossCurvePathFor(modelPath: string): string {
  return modelPath.endsWith(".json")
    ? modelPath.slice(0, -5) + ".losses.json"
    : modelPath + ".losses.json";
}

/**
 * Train the toy conditional generator: smoothed-L1 reconstruction plus
 * a small adversarial term from a patch discriminator. Fully seeded, so
 * the loss curve is reproducible run to run.
 */
export async function toyTrain(cfg: ToyTrainConfig): Promise<TrainResult> {
  tf.setBackend("cpu");
  await tf.ready();
  const pairs = loadPairs(cfg.pairs, cfg.imageSize);
  const rng = mulberry32(cfg.seed);
  const gen = buildGenerator(cfg.imageSize, cfg.seed);
  const disc = buildDiscriminator(cfg.imageSize, cfg.seed + 1000);
  // LayerVariable.val is typed protected but is the only route to the
  // concrete tf.Variable objects an optimizer varList needs.
  const gVars = gen.trainableWeights.map((w) => (w as any).val as tf.Variable);
  const dVars = disc.trainableWeights.map((w) => (w as any).val as tf.Variable);
  const gOpt = tf.train.adam(cfg.learningRate);
  const dOpt = tf.train.adam(cfg.learningRate);
  const batch = Math.min(cfg.batchSize, pairs.count);
  const plane = cfg.imageSize * cfg.imageSize * 3;

  const smoothedL1: number[] = [];
  const adversarial: number[] = [];
  for (let step = 0; step < cfg.steps; step++) {
    const xBuf = new Float32Array(batch * plane);
    const yBuf = new Float32Array(batch * plane);
    for (let b = 0; b < batch; b++) {
      const pick = randInt(rng, pairs.count);
      xBuf.set(pairs.inputs[pick], b * plane);
      yBuf.set(pairs.targets[pick], b * plane);
    }
    const x = tf.tensor4d(xBuf, [batch, cfg.imageSize, cfg.imageSize, 3]);
    const y = tf.tensor4d(yBuf, [batch, cfg.imageSize, cfg.imageSize, 3]);

    // Discriminator sees detached generator output; label smoothing on
    // the real side keeps its lead gentle at this scale.
    const fake = tf.tidy(() => gen.predict(x) as tf.Tensor);
    dOpt.minimize(() => {
      const realLogits = disc.apply(tf.concat([x, y], 3)) as tf.Tensor;
      const fakeLogits = disc.apply(tf.concat([x, fake], 3)) as tf.Tensor;
      const realLoss = tf.losses.sigmoidCrossEntropy(tf.fill(realLogits.shape, 0.9), realLogits);
      const fakeLoss = tf.losses.sigmoidCrossEntropy(tf.zerosLike(fakeLogits), fakeLogits);
      return realLoss.add(fakeLoss) as tf.Scalar;
    }, false, dVars);
    fake.dispose();

    gOpt.minimize(() => {
      const out = gen.apply(x) as tf.Tensor;
      const logits = disc.apply(tf.concat([x, out], 3)) as tf.Tensor;
      const adv = tf.losses.sigmoidCrossEntropy(tf.onesLike(logits), logits);
      const l1 = tf.losses.huberLoss(y, out);
      smoothedL1.push((l1 as tf.Scalar).dataSync()[0]);
      adversarial.push((adv as tf.Scalar).dataSync()[0]);
      return adv.mul(cfg.loss.adversarial).add(l1.mul(cfg.loss.l1)) as tf.Scalar;
    }, false, gVars);

    x.dispose();
    y.dispose();
    if ((step + 1) % 50 === 0 || step + 1 === cfg.steps) {
      console.error(`neural-plugin: step ${step + 1}/${cfg.steps} `
        + `smoothed_l1=${smoothedL1[smoothedL1.length - 1].toFixed(5)}`);
    }
  }

  await saveModel(gen, { name: "toy-cgan", tileSize: cfg.imageSize }, cfg.out);
  const lossCurvePath = lossCurvePathFor(cfg.out);
  fs.writeFileSync(lossCurvePath, JSON.stringify({
    steps: cfg.steps,
    smoothed_l1: smoothedL1,
    adversarial,
  }) + "\n");
  return { modelPath: cfg.out, lossCurvePath, smoothedL1, adversarial };
}
