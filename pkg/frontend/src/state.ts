/**
 * Viewer state machine: avatar movement, scenario clock, flood status.
 *
 * Pure function of (state, input, dt) so it is unit-testable without a DOM.
 * Status transitions only Ongoing -> Evacuated:<name> or Ongoing -> Overtaken;
 * both terminal states are absorbing (scenarioStep is no longer consulted and
 * the clock freezes).
 */

import { KeyframeLike, nearestCamera } from "./camera.js";
import { Scenario, STATUS_ONGOING, scenarioStep, TerrainFn, waterElevation } from "./scenario.js";

export const WALK_SPEED = 1.5; // m/s
export const RUN_SPEED = 4.0; // m/s

export interface ViewerState {
  x: number;
  y: number;
  heading: number; // radians, 0 = +x, counter-clockwise
  activeKeyframe: number;
  clock: number; // scenario seconds
  status: string;
  waterElevation: number;
}

export interface InputState {
  forward: boolean;
  back: boolean;
  left: boolean;
  right: boolean;
  run: boolean;
  headingDelta: number; // radians this tick, from pointer movement
}

export const IDLE_INPUT: InputState = {
  forward: false, back: false, left: false, right: false, run: false, headingDelta: 0,
};

export function initialState(
  keyframes: KeyframeLike[], scenario: Scenario, start: [number, number], heading = 0,
): ViewerState {
  return {
    x: start[0],
    y: start[1],
    heading,
    activeKeyframe: nearestCamera(keyframes, start),
    clock: 0,
    status: STATUS_ONGOING,
    waterElevation: waterElevation(scenario.schedule, 0),
  };
}

export function tick(
  state: ViewerState,
  input: InputState,
  dt: number,
  keyframes: KeyframeLike[],
  scenario: Scenario,
  terrain: TerrainFn,
): ViewerState {
  if (dt <= 0) throw new RangeError("dt must be > 0");
  if (state.status !== STATUS_ONGOING) {
    return state; // terminal states are absorbing
  }
  const heading = state.heading + input.headingDelta;
  const speed = input.run ? RUN_SPEED : WALK_SPEED;
  let ax = 0; // camera-relative: +x forward, +y left
  let ay = 0;
  if (input.forward) ax += 1;
  if (input.back) ax -= 1;
  if (input.left) ay += 1;
  if (input.right) ay -= 1;
  const norm = Math.hypot(ax, ay);
  let x = state.x;
  let y = state.y;
  if (norm > 0) {
    const step = (speed * dt) / norm;
    x += step * (ax * Math.cos(heading) - ay * Math.sin(heading));
    y += step * (ax * Math.sin(heading) + ay * Math.cos(heading));
  }
  const clock = state.clock + dt;
  return {
    x,
    y,
    heading,
    activeKeyframe: nearestCamera(keyframes, [x, y]),
    clock,
    status: scenarioStep(scenario, [x, y], clock, terrain),
    waterElevation: waterElevation(scenario.schedule, clock),
  };
}
