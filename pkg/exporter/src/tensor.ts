/**
 * Minimal row-major float32 tensors and their on-disk serialization.
 *
 * Trace tensor files are raw IEEE-754 binary32, little-endian, C order,
 * no header. Serialization goes through a DataView so the bytes are
 * little-endian regardless of host endianness.
 */

export interface NdArray {
  shape: number[];
  data: Float32Array;
}

export function zeros(shape: number[]): NdArray {
  return { shape: [...shape], data: new Float32Array(shape.reduce((a, b) => a * b, 1)) };
}

export function numel(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function assertShape(t: NdArray, shape: number[], name: string): void {
  if (t.shape.length !== shape.length || t.shape.some((d, i) => d !== shape[i])) {
    throw new Error(`tensor ${name} has shape ${t.shape.join("x")}, expected ${shape.join("x")}`);
  }
  if (t.data.length !== numel(t.shape)) {
    throw new Error(`tensor ${name} data length ${t.data.length} disagrees with its shape`);
  }
}

export function toLittleEndianBytes(t: NdArray): Buffer {
  const buf = Buffer.alloc(t.data.length * 4);
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  for (let i = 0; i < t.data.length; i++) {
    view.setFloat32(i * 4, t.data[i], true);
  }
  return buf;
}

/** Running elementwise mean that never materializes the full stack. */
export class RunningMean {
  private sum: Float64Array | null = null;
  private shape: number[] = [];
  private count = 0;

  add(t: NdArray): void {
    if (this.sum === null) {
      this.shape = [...t.shape];
      this.sum = new Float64Array(t.data.length);
    } else if (t.data.length !== this.sum.length) {
      throw new Error("running mean fed tensors of differing sizes");
    }
    for (let i = 0; i < t.data.length; i++) this.sum[i] += t.data[i];
    this.count += 1;
  }

  get n(): number {
    return this.count;
  }

  mean(): NdArray {
    if (this.sum === null || this.count === 0) {
      throw new Error("running mean has no samples");
    }
    const out = new Float32Array(this.sum.length);
    for (let i = 0; i < out.length; i++) out[i] = this.sum[i] / this.count;
    return { shape: [...this.shape], data: out };
  }
}
