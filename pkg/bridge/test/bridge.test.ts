import { execFileSync, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  ABI_VERSION,
  BridgeError,
  LossConfig,
  OP_BOTH,
  OP_LOSS,
  Status,
  bridgeGrad,
  bridgeLoss,
  encodeRequest,
  numericPayload,
} from "../src/index.js";

const N = 1500;
const PAIRS = 100;
const CONFIG: LossConfig = {
  stft: { window_len: 256, hop: 64 },
  bands: { bins_per_band: 32 },
};

const testDir = fileURLToPath(new URL(".", import.meta.url));

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomPair(rand: () => number): [Float64Array, Float64Array] {
  const ref = new Float64Array(2 * N);
  const est = new Float64Array(2 * N);
  for (let i = 0; i < ref.length; i++) {
    ref[i] = 0.3 * (2 * rand() - 1);
    est[i] = ref[i] + 0.05 * (2 * rand() - 1);
  }
  return [ref, est];
}

function toBuffer(arr: Float64Array): Buffer {
  return Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength);
}

describe("loss/gradient bridge", () => {
  let workdir: string;
  const pairs: Array<[Float64Array, Float64Array]> = [];

  beforeAll(() => {
    workdir = mkdtempSync(join(tmpdir(), "bridge-"));
    const rand = mulberry32(2024);
    writeFileSync(join(workdir, "config.json"), JSON.stringify(CONFIG));
    for (let i = 0; i < PAIRS; i++) {
      const [ref, est] = randomPair(rand);
      pairs.push([ref, est]);
      writeFileSync(join(workdir, `s_${i}.f64`), toBuffer(ref));
      writeFileSync(join(workdir, `sh_${i}.f64`), toBuffer(est));
    }
    execFileSync(
      "python3",
      [join(testDir, "direct_compute.py"), workdir, String(PAIRS)],
      { stdio: ["ignore", "inherit", "inherit"], timeout: 300_000 },
    );
  }, 300_000);

  afterAll(() => {
    rmSync(workdir, { recursive: true, force: true });
  });

  it(
    `matches direct calls to the last bit on ${PAIRS} random pairs`,
    () => {
      for (let i = 0; i < PAIRS; i++) {
        const [ref, est] = pairs[i];
        const direct = readFileSync(join(workdir, `direct_${i}.bin`));
        const op = i % 2 === 0 ? OP_LOSS : OP_BOTH;
        const proc = spawnSync("python3", ["-m", "stereoloss", "bridge"], {
          input: encodeRequest(ref, est, CONFIG, op),
          maxBuffer: 1 << 30,
        });
        expect(proc.status).toBe(0);
        const numeric = numericPayload(proc.stdout);
        if (op === OP_LOSS) {
          // breakdown only; the direct file carries breakdown + gradient
          expect(numeric.equals(direct.subarray(0, 7 * 8))).toBe(true);
        } else {
          expect(numeric.equals(direct)).toBe(true);
        }
      }
    },
    600_000,
  );

  it("returns a zero breakdown and zero gradient at the identity", () => {
    const [ref] = pairs[0];
    const result = bridgeGrad(ref, ref, CONFIG);
    expect(Math.abs(result.breakdown.total)).toBeLessThan(1e-15);
    expect(result.grad.length).toBe(2 * N);
    expect(result.grad.every((v) => v === 0)).toBe(true);
  }, 120_000);

  it("rejects a stale ABI version with a structured code, no crash", () => {
    const [ref, est] = pairs[1];
    let caught: unknown;
    try {
      bridgeLoss(ref, est, CONFIG, { version: ABI_VERSION + 7 });
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(BridgeError);
    expect((caught as BridgeError).code).toBe(Status.VersionMismatch);
    expect((caught as BridgeError).message).toMatch(/version/i);
  }, 120_000);

  it("returns a gradient of exactly 2N values", () => {
    const [ref, est] = pairs[2];
    const result = bridgeGrad(ref, est, CONFIG);
    expect(result.grad.length).toBe(2 * N);
    expect(result.breakdown.total).toBeGreaterThan(0);
  }, 120_000);

  it("validates shapes at the boundary before spawning anything", () => {
    const [ref] = pairs[0];
    expect(() => bridgeLoss(ref, ref.subarray(0, 100), CONFIG)).toThrow(RangeError);
    expect(() => bridgeLoss(new Float64Array(3), new Float64Array(3), CONFIG)).toThrow(
      RangeError,
    );
  });

  it("surfaces config rejection as a structured error", () => {
    const [ref, est] = pairs[3];
    let caught: unknown;
    try {
      bridgeLoss(ref, est, { bands: { bins_per_band: 48 } });
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(BridgeError);
    expect((caught as BridgeError).code).toBe(Status.BadConfig);
  }, 120_000);
});
