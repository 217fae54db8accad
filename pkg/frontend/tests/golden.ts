import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

/** Load a shared golden-vector file from the repository's goldens/ directory. */
export function loadGolden<T>(name: string): T {
  const path = fileURLToPath(new URL(`../../goldens/${name}`, import.meta.url));
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}
