/**
 * Timed flood-evacuation scenario rules.
 *
 * Deliberate re-implementation of the exporter's scenario semantics so the
 * viewer stays buildable stand-alone; cross-checked against
 * goldens/scenario_cases.json. The rules, in evaluation order:
 *   1. inside any evacuation radius (boundary inclusive) -> Evacuated:<name>
 *   2. past the time limit the avatar cannot outrun water already scheduled:
 *      the surface is the max of the current interpolated surface and the
 *      highest schedule entry with ts <= t
 *   3. water depth >= drownDepth (boundary inclusive) -> Overtaken
 *   4. otherwise Ongoing
 */

export interface EvacuationPoint {
  name: string;
  pos: [number, number];
  radius: number;
}

export interface Scenario {
  points: EvacuationPoint[];
  time_limit: number;
  schedule: [number, number][]; // (time s, surface elevation m), strictly increasing times
  drown_depth?: number;
}

export const STATUS_ONGOING = "Ongoing";
export const STATUS_OVERTAKEN = "Overtaken";

export function statusEvacuated(name: string): string {
  return `Evacuated:${name}`;
}

/** Piecewise-linear surface elevation, clamped to the first/last entry. */
export function waterElevation(schedule: [number, number][], t: number): number {
  const first = schedule[0];
  const last = schedule[schedule.length - 1];
  if (first === undefined || last === undefined) {
    throw new RangeError("schedule needs at least one entry");
  }
  if (t <= first[0]) return first[1];
  if (t >= last[0]) return last[1];
  for (let i = 0; i + 1 < schedule.length; i++) {
    const [t0, z0] = schedule[i]!;
    const [t1, z1] = schedule[i + 1]!;
    if (t0 <= t && t <= t1) {
      return z0 + ((t - t0) / (t1 - t0)) * (z1 - z0);
    }
  }
  throw new Error("unreachable");
}

export type TerrainFn = (x: number, y: number) => number;

export function scenarioStep(
  sc: Scenario, avatar: [number, number], t: number, terrain: TerrainFn,
): string {
  if (t < 0) throw new RangeError("time must be >= 0");
  for (const pt of sc.points) {
    if (Math.hypot(avatar[0] - pt.pos[0], avatar[1] - pt.pos[1]) <= pt.radius) {
      return statusEvacuated(pt.name);
    }
  }
  const ground = terrain(avatar[0], avatar[1]);
  let surface = waterElevation(sc.schedule, t);
  if (t > sc.time_limit) {
    const reached = sc.schedule.filter(([ts]) => ts <= t).map(([, z]) => z);
    if (reached.length > 0) surface = Math.max(surface, Math.max(...reached));
  }
  const drown = sc.drown_depth ?? 0.5;
  if (Math.max(0, surface - ground) >= drown) return STATUS_OVERTAKEN;
  return STATUS_ONGOING;
}
