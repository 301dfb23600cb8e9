import type { Readable, Writable } from "node:stream";
import * as tf from "@tensorflow/tfjs";

import { StreamReader, readFrame, writeFrame, ProtocolError } from "./framing.js";
import { decodePng, encodePng, RgbImage } from "./png.js";
import { LoadedModel } from "./model.js";

export const PROTOCOL_VERSION = 1;

/** Handshake rejected; the reason travels back to the host verbatim. */
export class HandshakeRefused extends Error {}

interface Handshake {
  protocol: number;
  edge: string;
  tile_size: number;
}

/** Run one tile through the generator, staying in uint8 at both ends. */
export function runModel(net: tf.LayersModel, img: RgbImage): RgbImage {
  const out = tf.tidy(() => {
    const x = tf
      .tensor4d(Float32Array.from(img.data), [1, img.height, img.width, 3])
      .div(127.5)
      .sub(1);
    const y = net.predict(x) as tf.Tensor;
    return y.add(1).mul(127.5).clipByValue(0, 255).round();
  });
  const data = Uint8Array.from(out.dataSync());
  out.dispose();
  return { width: img.width, height: img.height, data };
}

/**
 * One plugin process bound to one edge. Requests are handled strictly
 * one at a time; the frame counters make that auditable.
 */
export class PluginSession {
  framesIn = 0;
  framesOut = 0;

  constructor(
    readonly edge: string,
    readonly tileSize: number,
    readonly model: LoadedModel | null = null,
  ) {}

  get name(): string {
    return this.model ? `neural-plugin/${this.model.meta.name}` : "neural-plugin/echo";
  }

  /** Validate the host's opening line; throws HandshakeRefused on any mismatch. */
  acceptHandshake(line: Buffer): void {
    let hello: Handshake;
    try {
      hello = JSON.parse(line.toString("utf8"));
    } catch {
      throw new HandshakeRefused("handshake is not valid JSON");
    }
    if (hello.protocol !== PROTOCOL_VERSION) {
      throw new HandshakeRefused(`unsupported protocol ${hello.protocol}`);
    }
    if (hello.edge !== this.edge) {
      throw new HandshakeRefused(`serving edge ${this.edge}, host asked for ${hello.edge}`);
    }
    if (hello.tile_size !== this.tileSize) {
      throw new HandshakeRefused(
        `expected tile_size ${this.tileSize}, host asked for ${hello.tile_size}`,
      );
    }
    if (this.model && this.model.meta.tileSize !== hello.tile_size) {
      throw new HandshakeRefused(
        `model expects ${this.model.meta.tileSize}px tiles, host asked for ${hello.tile_size}`,
      );
    }
  }

  /** Answer one framed PNG request with one framed PNG reply. */
  translateFrame(payload: Buffer): Buffer {
    this.framesIn += 1;
    const img = decodePng(payload);
    if (img.width !== this.tileSize || img.height !== this.tileSize) {
      throw new ProtocolError(
        `tile is ${img.width}x${img.height}, session expects ${this.tileSize}x${this.tileSize}`,
      );
    }
    // Echo mode returns the exact bytes received, so the reply is
    // byte-identical, not merely pixel-identical.
    const reply = this.model ? encodePng(runModel(this.model.net, img)) : payload;
    this.framesOut += 1;
    return reply;
  }
}

export interface ServeResult {
  exitCode: number;
  framesIn: number;
  framesOut: number;
}

/**
 * The protocol loop: handshake line, then framed PNG request/reply
 * pairs until the input closes. Exit code 0 on clean close, 3 on a
 * refused handshake, 1 on anything broken mid-stream.
 */
export async function serve(
  session: PluginSession,
  input: Readable,
  output: Writable,
  diagnostics: Writable,
): Promise<ServeResult> {
  const reader = new StreamReader(input);
  const done = (exitCode: number): ServeResult => ({
    exitCode,
    framesIn: session.framesIn,
    framesOut: session.framesOut,
  });

  let line: Buffer | null;
  try {
    line = await reader.readLine();
  } catch (err) {
    diagnostics.write(`neural-plugin: ${(err as Error).message}\n`);
    return done(1);
  }
  if (line === null) return done(0);

  try {
    session.acceptHandshake(line);
  } catch (err) {
    const reason = err instanceof HandshakeRefused ? err.message : String(err);
    output.write(JSON.stringify({ ok: false, reason }) + "\n");
    return done(3);
  }
  output.write(JSON.stringify({ ok: true, name: session.name }) + "\n");

  for (;;) {
    let payload: Buffer | null;
    try {
      payload = await readFrame(reader);
    } catch (err) {
      diagnostics.write(`neural-plugin: ${(err as Error).message}\n`);
      return done(1);
    }
    if (payload === null) return done(0);
    let reply: Buffer;
    try {
      reply = session.translateFrame(payload);
    } catch (err) {
      diagnostics.write(`neural-plugin: inference failed: ${(err as Error).message}\n`);
      return done(1);
    }
    await writeFrame(output, reply);
  }
}
