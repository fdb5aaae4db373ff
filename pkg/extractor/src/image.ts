/**
 * Image decoding and deterministic preprocessing.
 *
 * Decoding is dispatched on magic bytes (PNG, JPEG), not file extension.
 * Preprocessing follows the usual evaluation recipe: bilinear resize so the
 * short side hits the target, then a center crop to target x target, then
 * scale pixels to [-1, 1]. No augmentation anywhere; the same file always
 * produces the same tensor.
 */

import * as tf from '@tensorflow/tfjs'
import { PNG } from 'pngjs'
import * as jpeg from 'jpeg-js'

export interface RawImage {
  width: number
  height: number
  /** RGB, row-major, 3 bytes per pixel. */
  data: Uint8Array
}

function stripAlpha(rgba: Uint8Array, pixels: number): Uint8Array {
  const rgb = new Uint8Array(pixels * 3)
  for (let i = 0; i < pixels; i++) {
    rgb[i * 3] = rgba[i * 4]
    rgb[i * 3 + 1] = rgba[i * 4 + 1]
    rgb[i * 3 + 2] = rgba[i * 4 + 2]
  }
  return rgb
}

/** Decode a PNG or JPEG buffer to raw RGB. Throws on anything else. */
export function decodeImage(buf: Buffer): RawImage {
  if (buf.length >= 8 && buf[0] === 0x89 && buf[1] === 0x50 && buf[2] === 0x4e && buf[3] === 0x47) {
    const png = PNG.sync.read(buf)
    return {
      width: png.width,
      height: png.height,
      data: stripAlpha(new Uint8Array(png.data.buffer, png.data.byteOffset, png.data.length), png.width * png.height),
    }
  }
  if (buf.length >= 2 && buf[0] === 0xff && buf[1] === 0xd8) {
    const img = jpeg.decode(buf, { useTArray: true, formatAsRGBA: true })
    return {
      width: img.width,
      height: img.height,
      data: stripAlpha(img.data, img.width * img.height),
    }
  }
  throw new Error('not a PNG or JPEG')
}

/**
 * Resize so min(height, width) == size, center-crop to size x size and
 * scale to [-1, 1]. Returns a [size, size, 3] float tensor.
 */
export function prepareInput(img: RawImage, size: number): tf.Tensor3D {
  return tf.tidy(() => {
    const pixels = tf.tensor3d(img.data, [img.height, img.width, 3], 'float32')
    let h: number
    let w: number
    if (img.height <= img.width) {
      h = size
      w = Math.max(size, Math.round((img.width * size) / img.height))
    } else {
      w = size
      h = Math.max(size, Math.round((img.height * size) / img.width))
    }
    const resized = tf.image.resizeBilinear(pixels, [h, w])
    const top = Math.floor((h - size) / 2)
    const left = Math.floor((w - size) / 2)
    const cropped = resized.slice([top, left, 0], [size, size, 3])
    return tf.div(cropped, 127.5).sub(1.0) as tf.Tensor3D
  })
}
