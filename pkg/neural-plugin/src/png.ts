import { PNG } from "pngjs";

/** A decoded tile: tightly packed RGB bytes, row major. */
export interface RgbImage {
  width: number;
  height: number;
  data: Uint8Array;
}

/** Decode a PNG buffer to RGB, dropping any alpha channel. */
export function decodePng(bytes: Buffer): RgbImage {
  const png = PNG.sync.read(bytes);
  const { width, height } = png;
  const rgb = new Uint8Array(width * height * 3);
  for (let i = 0, j = 0; i < width * height; i++, j += 4) {
    rgb[i * 3] = png.data[j];
    rgb[i * 3 + 1] = png.data[j + 1];
    rgb[i * 3 + 2] = png.data[j + 2];
  }
  return { width, height, data: rgb };
}

/** Encode tightly packed RGB bytes as an RGB PNG. */
export function encodePng(image: RgbImage): Buffer {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0, j = 0; i < image.width * image.height; i++, j += 4) {
    png.data[j] = image.data[i * 3];
    png.data[j + 1] = image.data[i * 3 + 1];
    png.data[j + 2] = image.data[i * 3 + 2];
    png.data[j + 3] = 255;
  }
  return PNG.sync.write(png, { colorType: 2 });
}
