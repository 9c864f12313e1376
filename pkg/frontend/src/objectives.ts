/**
 * Mock fitness functions served over the line protocol.
 *
 * Every objective here is a pure function of (candidate, noiseKey): repeated
 * identical requests must yield bitwise-identical responses.
 */

import type { NoiseKey } from "./protocol.js";

export type ObjectiveFn = (candidate: number[], key: NoiseKey) => number;

/** Plain sphere: sum of squares. Conformance target for the harness. */
export function sphere(candidate: number[]): number {
  let acc = 0;
  for (const v of candidate) acc += v * v;
  return acc;
}

/** Squared distance to a fixed point (all-ones by default). */
export function quadraticAtPoint(target?: number[]): ObjectiveFn {
  return (candidate) => {
    let acc = 0;
    for (let i = 0; i < candidate.length; i++) {
      const t = target ? target[i] : 1.0;
      const diff = candidate[i] - t;
      acc += diff * diff;
    }
    return acc;
  };
}

/**
 * Adapter skeleton for a real reconstruction loss.
 *
 * A production bridge would, per candidate embedding:
 *   1. derive the diffusion timestep and noise tensor from the noise key
 *      (so every candidate in a generation is scored under identical
 *      corruption),
 *   2. run the frozen text-to-image model's denoiser on the noised target
 *      images conditioned on the candidate embedding,
 *   3. return the mean squared error between predicted and true noise.
 *
 * Shipping model weights is out of scope, so this stub returns a
 * deterministic placeholder that still honours the purity contract: it
 * depends only on the candidate values and the noise key.
 */
export function adapterStub(candidate: number[], key: NoiseKey): number {
  const scale = 1.0 + ((key.t_seed % 1000) + (key.eps_seed % 1000)) * 1e-6;
  return sphere(candidate) * scale;
}

export function resolveObjective(name: string): ObjectiveFn {
  switch (name) {
    case "sphere":
      return (c) => sphere(c);
    case "quadratic-at-point":
      return quadraticAtPoint();
    case "adapter-stub":
      return adapterStub;
    default:
      throw new Error(`unknown objective: ${name}`);
  }
}
