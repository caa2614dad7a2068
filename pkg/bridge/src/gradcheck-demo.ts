/**
 * Gradient-check demo: compares the bridged analytic gradient against
 * central finite differences of the bridged loss on a small random pair.
 *
 * Run with `npm run demo` (needs the Python package on PATH as python3).
 */

import { bridgeGrad, bridgeLoss, LossConfig } from "./index.js";

const N = 1200;
const CONFIG: LossConfig = {
  stft: { window_len: 256, hop: 64 },
  bands: { bins_per_band: 32 },
};

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianPair(rand: () => number): [number, number] {
  const u = Math.max(rand(), 1e-12);
  const v = rand();
  const r = Math.sqrt(-2 * Math.log(u));
  return [r * Math.cos(2 * Math.PI * v), r * Math.sin(2 * Math.PI * v)];
}

function randomSignal(rand: () => number, n: number, scale: number): Float64Array {
  const out = new Float64Array(2 * n);
  for (let i = 0; i < out.length; i += 2) {
    const [a, b] = gaussianPair(rand);
    out[i] = scale * a;
    out[i + 1] = scale * b;
  }
  return out;
}

const rand = mulberry32(7);
const ref = randomSignal(rand, N, 0.3);
const est = new Float64Array(ref);
const noise = randomSignal(rand, N, 0.05);
for (let i = 0; i < est.length; i++) est[i] += noise[i];

const { breakdown, grad, singular } = bridgeGrad(ref, est, CONFIG);
console.log("breakdown:", breakdown);
if (singular) {
  console.log("instance flagged singular; finite differences may disagree");
}

let rms = 0;
for (const v of est) rms += v * v;
const step = 1e-4 * Math.sqrt(rms / est.length);

let gradMax = 0;
for (const v of grad) gradMax = Math.max(gradMax, Math.abs(v));

const probes = 10;
let worst = 0;
for (let p = 0; p < probes; p++) {
  const k = Math.floor(rand() * est.length);
  const up = new Float64Array(est);
  up[k] += step;
  const down = new Float64Array(est);
  down[k] -= step;
  const fd =
    (bridgeLoss(ref, up, CONFIG).total - bridgeLoss(ref, down, CONFIG).total) / (2 * step);
  const err = Math.abs(fd - grad[k]) / gradMax;
  worst = Math.max(worst, err);
  console.log(
    `coord ${k}: analytic ${grad[k].toExponential(6)}  fd ${fd.toExponential(6)}  rel ${err.toExponential(2)}`,
  );
}
console.log(`max relative error over ${probes} probes: ${worst.toExponential(3)}`);
if (!singular && worst > 1e-5) {
  console.error("FAIL: finite differences disagree with the analytic gradient");
  process.exit(1);
}
console.log("OK");
