import * as fs from "node:fs";
import * as tf from "@tensorflow/tfjs";

const MODEL_FORMAT = "neural-plugin-model";

/** What a saved model file carries besides the network itself. */
export interface ModelMeta {
  name: string;
  tileSize: number;
}

export interface LoadedModel {
  meta: ModelMeta;
  net: tf.LayersModel;
}

/**
 * Conditional generator: RGB tile in, RGB tile out, same size.
 * Two stride-2 encoder convs, two transposed decoder convs, tanh output
 * on [-1, 1] pixels. Deliberately tiny; the contract is the protocol,
 * not fidelity.
 */
export function buildGenerator(tileSize: number, seed: number): tf.LayersModel {
  const init = (offset: number) => tf.initializers.glorotUniform({ seed: seed + offset });
  const net = tf.sequential();
  net.add(tf.layers.conv2d({
    inputShape: [tileSize, tileSize, 3],
    filters: 8, kernelSize: 3, strides: 2, padding: "same",
    activation: "relu", kernelInitializer: init(0),
  }));
  net.add(tf.layers.conv2d({
    filters: 16, kernelSize: 3, strides: 2, padding: "same",
    activation: "relu", kernelInitializer: init(1),
  }));
  net.add(tf.layers.conv2dTranspose({
    filters: 8, kernelSize: 2, strides: 2, padding: "same",
    activation: "relu", kernelInitializer: init(2),
  }));
  net.add(tf.layers.conv2dTranspose({
    filters: 3, kernelSize: 2, strides: 2, padding: "same",
    activation: "tanh", kernelInitializer: init(3),
  }));
  return net;
}

/**
 * Patch discriminator over an (input, candidate) pair stacked on the
 * channel axis; outputs a logit map, one logit per receptive patch.
 */
export function buildDiscriminator(tileSize: number, seed: number): tf.LayersModel {
  const init = (offset: number) => tf.initializers.glorotUniform({ seed: seed + offset });
  const net = tf.sequential();
  net.add(tf.layers.conv2d({
    inputShape: [tileSize, tileSize, 6],
    filters: 8, kernelSize: 3, strides: 2, padding: "same",
    kernelInitializer: init(0),
  }));
  net.add(tf.layers.leakyReLU({ alpha: 0.2 }));
  net.add(tf.layers.conv2d({
    filters: 16, kernelSize: 3, strides: 2, padding: "same",
    kernelInitializer: init(1),
  }));
  net.add(tf.layers.leakyReLU({ alpha: 0.2 }));
  net.add(tf.layers.conv2d({
    filters: 1, kernelSize: 3, strides: 1, padding: "same",
    kernelInitializer: init(2),
  }));
  return net;
}

/** Serialize a generator plus its metadata into one JSON file. */
export async function saveModel(net: tf.LayersModel, meta: ModelMeta, path: string): Promise<void> {
  let captured: tf.io.ModelArtifacts | null = null;
  await net.save(tf.io.withSaveHandler(async (artifacts) => {
    captured = artifacts;
    return { modelArtifactsInfo: { dateSaved: new Date(0), modelTopologyType: "JSON" } };
  }));
  const artifacts = captured as unknown as tf.io.ModelArtifacts;
  const weightData = artifacts.weightData as ArrayBuffer;
  const doc = {
    format: MODEL_FORMAT,
    version: 1,
    name: meta.name,
    tile_size: meta.tileSize,
    topology: artifacts.modelTopology,
    weight_specs: artifacts.weightSpecs,
    weights_b64: Buffer.from(weightData).toString("base64"),
  };
  fs.writeFileSync(path, JSON.stringify(doc) + "\n");
}

/** Load a model file written by saveModel. */
export async function loadModel(path: string): Promise<LoadedModel> {
  const doc = JSON.parse(fs.readFileSync(path, "utf8"));
  if (doc.format !== MODEL_FORMAT) {
    throw new Error(`${path} is not a ${MODEL_FORMAT} file`);
  }
  const weights = Buffer.from(doc.weights_b64, "base64");
  const net = await tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: doc.topology,
    weightSpecs: doc.weight_specs,
    weightData: weights.buffer.slice(weights.byteOffset, weights.byteOffset + weights.byteLength),
  }));
  return { meta: { name: doc.name, tileSize: doc.tile_size }, net };
}
