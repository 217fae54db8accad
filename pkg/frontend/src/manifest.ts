/** Scene-bundle manifest types and loader (the contract with the exporter). */

import { Scenario } from "./scenario.js";

export interface ManifestKeyframe {
  id: number;
  t: number; // video time, seconds
  p: [number, number, number];
  q: [number, number, number, number]; // [w, x, y, z], world <- camera
  frame: string; // path relative to the bundle root
}

export interface SceneManifest {
  schema_version: number;
  mesh: string;
  mesh_sidecar?: string;
  frame_dir: string;
  keyframes: ManifestKeyframe[];
  scenario: Scenario;
  alignment?: Record<string, unknown>;
  tool_version?: string;
}

export class ManifestError extends Error {}

export function parseManifest(doc: unknown): SceneManifest {
  if (typeof doc !== "object" || doc === null) throw new ManifestError("manifest is not an object");
  const m = doc as Record<string, unknown>;
  if (m.schema_version !== 1) throw new ManifestError(`unsupported schema_version ${m.schema_version}`);
  for (const key of ["mesh", "frame_dir", "keyframes", "scenario"]) {
    if (!(key in m)) throw new ManifestError(`manifest missing ${key}`);
  }
  const kfs = m.keyframes as unknown[];
  if (!Array.isArray(kfs) || kfs.length === 0) throw new ManifestError("manifest has no keyframes");
  for (const kf of kfs as Array<Record<string, unknown>>) {
    for (const key of ["id", "t", "p", "q", "frame"]) {
      if (!(key in kf)) throw new ManifestError(`keyframe missing ${key}`);
    }
  }
  return m as unknown as SceneManifest;
}

export async function loadManifest(baseUrl: string): Promise<SceneManifest> {
  const resp = await fetch(`${baseUrl}/manifest.json`);
  if (!resp.ok) throw new ManifestError(`manifest fetch failed: ${resp.status}`);
  return parseManifest(await resp.json());
}
