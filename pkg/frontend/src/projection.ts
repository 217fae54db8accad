/**
 * Equirectangular 360 camera model.
 *
 * The pixel convention is a cross-runtime contract with the exporter (and is
 * pinned by goldens/equirect_cases.json): directions are evaluated at pixel
 * centers; azimuth alpha = 2*pi*((u+0.5)/W - 0.5); elevation
 * beta = pi*(0.5 - (v+0.5)/H); camera frame: forward +x, left +y, up +z;
 * direction = (cos b cos a, -cos b sin a, sin b). The projective-texturing
 * shader in render.ts embeds the same formula in GLSL and must be kept in
 * sync with dirToUv below.
 */

export type Vec3 = [number, number, number];

export function pixelToDir(u: number, v: number, width: number, height: number): Vec3 {
  if (u < 0 || u >= width || v < 0 || v >= height) {
    throw new RangeError(`pixel (${u}, ${v}) out of range for ${width}x${height}`);
  }
  const alpha = 2 * Math.PI * ((u + 0.5) / width - 0.5);
  const beta = Math.PI * (0.5 - (v + 0.5) / height);
  const cb = Math.cos(beta);
  return [cb * Math.cos(alpha), -cb * Math.sin(alpha), Math.sin(beta)];
}

/** Real-valued pixel coordinates; inverse of pixelToDir away from the poles. */
export function dirToPixel(
  d: Vec3, width: number, height: number,
): { u: number; v: number } {
  const n = Math.hypot(d[0], d[1], d[2]);
  if (n === 0) throw new RangeError("zero direction vector");
  const x = d[0] / n, y = d[1] / n, z = d[2] / n;
  const alpha = Math.atan2(-y, x);
  const beta = Math.asin(Math.min(1, Math.max(-1, z)));
  return {
    u: (alpha / (2 * Math.PI) + 0.5) * width - 0.5,
    v: (0.5 - beta / Math.PI) * height - 0.5,
  };
}

/** Normalized [0,1]^2 texture coordinate for a view direction (any image size). */
export function dirToUv(d: Vec3): { s: number; t: number } {
  const n = Math.hypot(d[0], d[1], d[2]);
  const x = d[0] / n, y = d[1] / n, z = d[2] / n;
  const alpha = Math.atan2(-y, x);
  const beta = Math.asin(Math.min(1, Math.max(-1, z)));
  // t = 1 samples the image's top row (upward directions)
  return { s: alpha / (2 * Math.PI) + 0.5, t: 0.5 + beta / Math.PI };
}

export type Quat = [number, number, number, number]; // [w, x, y, z], world <- camera

/** Rotate a world-frame vector into the camera frame (apply the inverse quaternion). */
export function worldToCamera(q: Quat, d: Vec3): Vec3 {
  const [w, x, y, z] = [q[0], -q[1], -q[2], -q[3]]; // conjugate
  // v' = v + 2*qv x (qv x v + w*v)
  const tx = 2 * (y * d[2] - z * d[1]);
  const ty = 2 * (z * d[0] - x * d[2]);
  const tz = 2 * (x * d[1] - y * d[0]);
  return [
    d[0] + w * tx + (y * tz - z * ty),
    d[1] + w * ty + (z * tx - x * tz),
    d[2] + w * tz + (x * ty - y * tx),
  ];
}

/**
 * Pixel of the projected frame sampled for a mesh fragment, i.e. the
 * projective-texturing map: world direction from the projecting camera center
 * to the fragment, rotated into the camera frame, converted with the shared
 * equirectangular convention.
 */
export function projectedFramePixel(
  cameraPos: Vec3, cameraQuat: Quat, fragmentPos: Vec3, width: number, height: number,
): { u: number; v: number } {
  const dWorld: Vec3 = [
    fragmentPos[0] - cameraPos[0],
    fragmentPos[1] - cameraPos[1],
    fragmentPos[2] - cameraPos[2],
  ];
  return dirToPixel(worldToCamera(cameraQuat, dWorld), width, height);
}
