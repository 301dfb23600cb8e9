import type { Readable, Writable } from "node:stream";

/** Frames larger than this are treated as a protocol violation. */
export const MAX_FRAME = 64 * 1024 * 1024;

export class ProtocolError extends Error {}

/**
 * Pull-style reader over a byte stream: buffers incoming chunks and
 * hands out exact byte counts, so frame boundaries never depend on how
 * the OS happened to chunk the pipe.
 */
export class StreamReader {
  private chunks: Buffer[] = [];
  private buffered = 0;
  private ended = false;
  private wakeup: (() => void) | null = null;

  constructor(stream: Readable) {
    stream.on("data", (chunk: Buffer) => {
      this.chunks.push(chunk);
      this.buffered += chunk.length;
      this.wake();
    });
    stream.on("end", () => {
      this.ended = true;
      this.wake();
    });
    stream.on("error", () => {
      this.ended = true;
      this.wake();
    });
  }

  private wake() {
    if (this.wakeup) {
      const w = this.wakeup;
      this.wakeup = null;
      w();
    }
  }

  private take(n: number): Buffer {
    const out = Buffer.concat(this.chunks, this.buffered).subarray(0, n);
    const rest = Buffer.concat(this.chunks, this.buffered).subarray(n);
    this.chunks = rest.length ? [Buffer.from(rest)] : [];
    this.buffered = rest.length;
    return Buffer.from(out);
  }

  /** Read exactly n bytes, or null if the stream ends before any arrive. */
  async readExact(n: number): Promise<Buffer | null> {
    while (this.buffered < n) {
      if (this.ended) {
        if (this.buffered === 0) return null;
        throw new ProtocolError(
          `stream closed mid-frame: wanted ${n} bytes, got ${this.buffered}`,
        );
      }
      await new Promise<void>((resolve) => (this.wakeup = resolve));
    }
    return this.take(n);
  }

  /** Read bytes up to and including a newline, or null on clean end. */
  async readLine(): Promise<Buffer | null> {
    for (;;) {
      const joined = Buffer.concat(this.chunks, this.buffered);
      const at = joined.indexOf(0x0a);
      if (at >= 0) return this.take(at + 1);
      if (this.ended) {
        if (this.buffered === 0) return null;
        throw new ProtocolError("stream closed before end of line");
      }
      await new Promise<void>((resolve) => (this.wakeup = resolve));
    }
  }
}

/** Read one length-prefixed frame; null when the stream ended cleanly. */
export async function readFrame(reader: StreamReader): Promise<Buffer | null> {
  const header = await reader.readExact(4);
  if (header === null) return null;
  const length = header.readUInt32BE(0);
  if (length === 0 || length > MAX_FRAME) {
    throw new ProtocolError(`unreasonable frame length ${length}`);
  }
  const payload = await reader.readExact(length);
  if (payload === null) throw new ProtocolError("stream closed after frame header");
  return payload;
}

/** Write one length-prefixed frame, honouring stream backpressure. */
export async function writeFrame(stream: Writable, payload: Buffer): Promise<void> {
  const header = Buffer.alloc(4);
  header.writeUInt32BE(payload.length, 0);
  for (const part of [header, payload]) {
    if (!stream.write(part)) {
      await new Promise<void>((resolve) => stream.once("drain", resolve));
    }
  }
}
