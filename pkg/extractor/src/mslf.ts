/**
 * MSLF feature file codec.
 *
 * Layout (all little-endian):
 *   offset 0   magic "MSLF"
 *   offset 4   version u8 (= 1)
 *   offset 5   dtype u8 (0 = float32, 1 = float64)
 *   offset 6   two zero pad bytes
 *   offset 8   order u32
 *   offset 12  dims, order x u64
 *   then       payload in C order, last mode fastest
 *
 * The layout is normative: files written here must read back bit-exact
 * through any conforming consumer.
 */

const MAGIC = 'MSLF'
const VERSION = 1
const MAX_ORDER = 8

export type Dtype = 'f32' | 'f64'

const DTYPE_CODES: Record<Dtype, number> = { f32: 0, f64: 1 }

export function encodeFeature(
  values: ArrayLike<number>,
  dims: number[],
  dtype: Dtype = 'f32',
): Buffer {
  if (dims.length < 1 || dims.length > MAX_ORDER) {
    throw new Error(`order must be 1..${MAX_ORDER}, got ${dims.length}`)
  }
  let count = 1
  for (const d of dims) {
    if (!Number.isInteger(d) || d < 1) {
      throw new Error(`dims must be positive integers, got ${dims}`)
    }
    count *= d
  }
  if (values.length !== count) {
    throw new Error(`expected ${count} values for dims ${dims}, got ${values.length}`)
  }
  const itemSize = dtype === 'f32' ? 4 : 8
  const buf = Buffer.alloc(12 + 8 * dims.length + itemSize * count)
  buf.write(MAGIC, 0, 'ascii')
  buf.writeUInt8(VERSION, 4)
  buf.writeUInt8(DTYPE_CODES[dtype], 5)
  // pad bytes at 6..7 stay zero
  buf.writeUInt32LE(dims.length, 8)
  dims.forEach((d, k) => buf.writeBigUInt64LE(BigInt(d), 12 + 8 * k))
  let off = 12 + 8 * dims.length
  for (let i = 0; i < count; i++) {
    const v = values[i]
    if (!Number.isFinite(v)) {
      throw new Error(`non-finite value at index ${i}`)
    }
    if (dtype === 'f32') {
      buf.writeFloatLE(Math.fround(v), off)
      off += 4
    } else {
      buf.writeDoubleLE(v, off)
      off += 8
    }
  }
  return buf
}

export interface DecodedFeature {
  dtype: Dtype
  dims: number[]
  values: Float64Array
}

/** Inverse of encodeFeature; used by tests to close the round trip. */
export function decodeFeature(buf: Buffer): DecodedFeature {
  if (buf.length < 4 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('bad magic at offset 0')
  }
  if (buf.length < 12) {
    throw new Error(`header truncated at offset ${buf.length}`)
  }
  const version = buf.readUInt8(4)
  if (version !== VERSION) {
    throw new Error(`unsupported version ${version} at offset 4`)
  }
  const code = buf.readUInt8(5)
  if (code !== 0 && code !== 1) {
    throw new Error(`unknown dtype code ${code} at offset 5`)
  }
  if (buf.readUInt8(6) !== 0 || buf.readUInt8(7) !== 0) {
    throw new Error('non-zero pad bytes at offset 6')
  }
  const order = buf.readUInt32LE(8)
  if (order < 1 || order > MAX_ORDER) {
    throw new Error(`order ${order} out of range 1..${MAX_ORDER} at offset 8`)
  }
  if (buf.length < 12 + 8 * order) {
    throw new Error(`dims truncated at offset ${buf.length}`)
  }
  const dims: number[] = []
  let count = 1
  for (let k = 0; k < order; k++) {
    const d = buf.readBigUInt64LE(12 + 8 * k)
    if (d < 1n) {
      throw new Error(`dim ${k} is zero at offset ${12 + 8 * k}`)
    }
    dims.push(Number(d))
    count *= Number(d)
  }
  const itemSize = code === 0 ? 4 : 8
  const start = 12 + 8 * order
  if (buf.length !== start + itemSize * count) {
    throw new Error(`payload is ${buf.length - start} bytes, expected ${itemSize * count}`)
  }
  const values = new Float64Array(count)
  for (let i = 0; i < count; i++) {
    values[i] =
      code === 0 ? buf.readFloatLE(start + 4 * i) : buf.readDoubleLE(start + 8 * i)
  }
  return { dtype: code === 0 ? 'f32' : 'f64', dims, values }
}
