/** Active-keyframe selection: nearest camera by horizontal distance. */

export interface KeyframeLike {
  id: number;
  p: [number, number, number];
}

/**
 * Keyframe id minimizing horizontal (x, y) distance to the avatar; exact
 * ties resolve to the lower id. Matches goldens/nearest_camera_cases.json.
 */
export function nearestCamera(keyframes: KeyframeLike[], avatar: [number, number]): number {
  if (keyframes.length === 0) throw new RangeError("empty trajectory");
  let bestId = Number.POSITIVE_INFINITY;
  let bestD = Number.POSITIVE_INFINITY;
  for (const kf of keyframes) {
    const d = Math.hypot(kf.p[0] - avatar[0], kf.p[1] - avatar[1]);
    if (d < bestD || (d === bestD && kf.id < bestId)) {
      bestD = d;
      bestId = kf.id;
    }
  }
  return bestId;
}
