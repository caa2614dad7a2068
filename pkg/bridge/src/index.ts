/**
 * Array-in/array-out access to the stereo-aware enhancement loss and its
 * analytic gradient for Node training loops.
 *
 * Each call is a one-shot synchronous exchange with the `stereoloss bridge`
 * service over a versioned binary protocol; buffers stay caller-owned and
 * the bridge adds no numerics of its own, so results are bit-identical to
 * in-process calls on the Python side.
 */

import { spawnSync } from "node:child_process";

import {
  ABI_VERSION,
  BridgeResponse,
  LossBreakdown,
  OP_BOTH,
  OP_LOSS,
  Status,
  decodeResponse,
  encodeRequest,
} from "./protocol.js";

export {
  ABI_VERSION,
  OP_BOTH,
  OP_GRAD,
  OP_LOSS,
  Status,
  decodeResponse,
  encodeRequest,
  numericPayload,
} from "./protocol.js";
export type { BridgeResponse, LossBreakdown } from "./protocol.js";

/** Loss configuration mirrored from the Python side; all fields optional. */
export interface LossConfig {
  stft?: { window_len?: number; hop?: number; window?: string; crop_frames?: number | null };
  bands?: { bins_per_band?: number };
  genlog?: { gamma?: number };
  terms?: Partial<Record<"lsd" | "tl" | "iid" | "ipd" | "ic" | "opd", boolean>>;
  weights?: Partial<Record<"tl" | "iid" | "ipd" | "ic" | "opd", number>>;
}

export interface BridgeOptions {
  /** Command that serves one request on stdin/stdout. */
  command?: string[];
  /** Protocol version to send (tests use this to exercise rejection). */
  version?: number;
  timeoutMs?: number;
}

const DEFAULT_COMMAND = ["python3", "-m", "stereoloss", "bridge"];

export class BridgeError extends Error {
  constructor(
    readonly code: Status | -1,
    message: string,
  ) {
    super(message);
    this.name = "BridgeError";
  }
}

export interface GradientResult {
  breakdown: LossBreakdown;
  /** Interleaved [L, R] rows, length 2 * nSamples. */
  grad: Float64Array;
  /** True when some band sat within epsilon of a non-smooth configuration. */
  singular: boolean;
}

function exchange(
  ref: Float64Array,
  est: Float64Array,
  config: LossConfig,
  op: number,
  opts: BridgeOptions,
): BridgeResponse {
  const request = encodeRequest(ref, est, config, op, opts.version ?? ABI_VERSION);
  const command = opts.command ?? DEFAULT_COMMAND;
  const proc = spawnSync(command[0], command.slice(1), {
    input: request,
    maxBuffer: 1 << 30,
    timeout: opts.timeoutMs ?? 120_000,
  });
  if (proc.error) {
    throw new BridgeError(-1, `bridge process failed to run: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    throw new BridgeError(-1, `bridge process exited with ${proc.status}: ${proc.stderr}`);
  }
  const response = decodeResponse(proc.stdout);
  if (response.status !== Status.Ok) {
    throw new BridgeError(
      response.status,
      `bridge refused request (status ${Status[response.status]}): ${response.message}`,
    );
  }
  return response;
}

/**
 * Total loss of an estimate against a reference.
 *
 * Both waveforms are interleaved stereo float64 rows [L0, R0, L1, R1, ...].
 */
export function bridgeLoss(
  ref: Float64Array,
  est: Float64Array,
  config: LossConfig = {},
  opts: BridgeOptions = {},
): LossBreakdown {
  return exchange(ref, est, config, OP_LOSS, opts).breakdown;
}

/** Loss plus its gradient with respect to every estimate sample. */
export function bridgeGrad(
  ref: Float64Array,
  est: Float64Array,
  config: LossConfig = {},
  opts: BridgeOptions = {},
): GradientResult {
  const response = exchange(ref, est, config, OP_BOTH, opts);
  return {
    breakdown: response.breakdown,
    grad: response.grad,
    singular: response.singular,
  };
}
