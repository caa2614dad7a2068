/**
 * Wire format for the one-shot binary loss/gradient service.
 *
 * All integers little-endian, C-struct layout, version-tagged.
 *
 * Request:  "SLBR" | u32 version | u32 op | u32 reserved | u64 nSamples
 *           | u64 configLen | config JSON | ref float64[2N] | est float64[2N]
 * Response: "SLBR" | u32 version | u32 status | u32 flags | u64 nGrad
 *           | u64 msgLen | 7x float64 breakdown | gradient | message
 *
 * Waveforms are interleaved [L, R] rows. The breakdown order is
 * lsd, tl, iid, ipd, ic, opd, total.
 */

export const MAGIC = "SLBR";
export const ABI_VERSION = 1;

export const OP_LOSS = 1;
export const OP_GRAD = 2;
export const OP_BOTH = 3;

export enum Status {
  Ok = 0,
  BadMagic = 1,
  VersionMismatch = 2,
  BadShape = 3,
  BadConfig = 4,
  ComputeError = 5,
}

const REQ_HEADER_BYTES = 32;
const RESP_HEADER_BYTES = 32;
const BREAKDOWN_FIELDS = 7;

export interface LossBreakdown {
  lsd: number;
  tl: number;
  iid: number;
  ipd: number;
  ic: number;
  opd: number;
  total: number;
}

export interface BridgeResponse {
  status: Status;
  singular: boolean;
  breakdown: LossBreakdown;
  /** Interleaved [L, R] gradient rows; empty unless a gradient op was requested. */
  grad: Float64Array;
  message: string;
}

export function encodeRequest(
  ref: Float64Array,
  est: Float64Array,
  config: unknown,
  op: number,
  version: number = ABI_VERSION,
): Buffer {
  if (ref.length !== est.length) {
    throw new RangeError(`reference and estimate differ: ${ref.length} vs ${est.length}`);
  }
  if (ref.length === 0 || ref.length % 2 !== 0) {
    throw new RangeError(`need interleaved stereo float64 pairs, got length ${ref.length}`);
  }
  const nSamples = ref.length / 2;
  const configBytes = Buffer.from(JSON.stringify(config ?? {}), "utf-8");
  const header = Buffer.alloc(REQ_HEADER_BYTES);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(version, 4);
  header.writeUInt32LE(op, 8);
  header.writeUInt32LE(0, 12);
  header.writeBigUInt64LE(BigInt(nSamples), 16);
  header.writeBigUInt64LE(BigInt(configBytes.length), 24);
  return Buffer.concat([
    header,
    configBytes,
    Buffer.from(ref.buffer, ref.byteOffset, ref.byteLength),
    Buffer.from(est.buffer, est.byteOffset, est.byteLength),
  ]);
}

export function decodeResponse(payload: Buffer): BridgeResponse {
  if (payload.length < RESP_HEADER_BYTES + BREAKDOWN_FIELDS * 8) {
    throw new RangeError(`response truncated at ${payload.length} bytes`);
  }
  if (payload.toString("ascii", 0, 4) !== MAGIC) {
    throw new RangeError("response missing protocol magic");
  }
  const status = payload.readUInt32LE(8) as Status;
  const flags = payload.readUInt32LE(12);
  const nGrad = Number(payload.readBigUInt64LE(16));
  const msgLen = Number(payload.readBigUInt64LE(24));

  const values = new Float64Array(BREAKDOWN_FIELDS);
  for (let i = 0; i < BREAKDOWN_FIELDS; i++) {
    values[i] = payload.readDoubleLE(RESP_HEADER_BYTES + 8 * i);
  }
  const gradStart = RESP_HEADER_BYTES + BREAKDOWN_FIELDS * 8;
  const grad = new Float64Array(nGrad);
  for (let i = 0; i < nGrad; i++) {
    grad[i] = payload.readDoubleLE(gradStart + 8 * i);
  }
  const msgStart = gradStart + nGrad * 8;
  return {
    status,
    singular: (flags & 1) !== 0,
    breakdown: {
      lsd: values[0],
      tl: values[1],
      iid: values[2],
      ipd: values[3],
      ic: values[4],
      opd: values[5],
      total: values[6],
    },
    grad,
    message: payload.toString("utf-8", msgStart, msgStart + msgLen),
  };
}

/** Raw bytes of the breakdown + gradient section, for bit-exact comparisons. */
export function numericPayload(payload: Buffer): Buffer {
  const nGrad = Number(payload.readBigUInt64LE(16));
  return payload.subarray(
    RESP_HEADER_BYTES,
    RESP_HEADER_BYTES + (BREAKDOWN_FIELDS + nGrad) * 8,
  );
}
