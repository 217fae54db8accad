/**
 * Three.js rendering: spherical projective texturing of the active 360 frame
 * onto the city mesh, plus the rising water plane.
 *
 * The scene bundle uses z-up world coordinates; we keep them as-is and set
 * the camera's up vector accordingly. Projective texturing deliberately has
 * no occlusion test: fragments facing away from or hidden from the
 * projecting camera receive stretched texture (accepted artifact of
 * single-frame projection).
 */

import * as THREE from "three";
import { GLTFLoader } from "three/examples/jsm/loaders/GLTFLoader.js";
import { ManifestKeyframe } from "./manifest.js";

// GLSL mirror of projection.ts dirToUv/worldToCamera; keep in sync (the
// vitest suite pins the TS side against the shared golden vectors).
const PROJECTIVE_VERTEX = /* glsl */ `
  varying vec3 vWorldPos;
  void main() {
    vec4 wp = modelMatrix * vec4(position, 1.0);
    vWorldPos = wp.xyz;
    gl_Position = projectionMatrix * viewMatrix * wp;
  }
`;

const PROJECTIVE_FRAGMENT = /* glsl */ `
  precision highp float;
  varying vec3 vWorldPos;
  uniform vec3 projCamPos;
  uniform vec4 projCamQuat; // [x, y, z, w] of the world<-camera quaternion
  uniform sampler2D frameTex;
  uniform bool hasFrame;
  uniform vec3 fallbackColor;

  vec3 worldToCamera(vec4 q, vec3 d) {
    vec3 qv = -q.xyz; // conjugate
    float w = q.w;
    vec3 t = 2.0 * cross(qv, d);
    return d + w * t + cross(qv, t);
  }

  void main() {
    if (!hasFrame) {
      gl_FragColor = vec4(fallbackColor, 1.0);
      return;
    }
    vec3 dWorld = vWorldPos - projCamPos;
    vec3 d = normalize(worldToCamera(projCamQuat, dWorld));
    float alpha = atan(-d.y, d.x);
    float beta = asin(clamp(d.z, -1.0, 1.0));
    vec2 uv = vec2(alpha / 6.283185307179586 + 0.5, 0.5 + beta / 3.141592653589793);
    gl_FragColor = texture2D(frameTex, uv);
  }
`;

export class ProjectiveMaterial extends THREE.ShaderMaterial {
  constructor() {
    super({
      vertexShader: PROJECTIVE_VERTEX,
      fragmentShader: PROJECTIVE_FRAGMENT,
      uniforms: {
        projCamPos: { value: new THREE.Vector3() },
        projCamQuat: { value: new THREE.Vector4(0, 0, 0, 1) },
        frameTex: { value: null },
        hasFrame: { value: false },
        fallbackColor: { value: new THREE.Color(0x8a8a8a) },
      },
      side: THREE.DoubleSide,
    });
  }

  setProjector(kf: ManifestKeyframe, texture: THREE.Texture | null): void {
    const u = this.uniforms;
    u.projCamPos!.value.set(kf.p[0], kf.p[1], kf.p[2]);
    // manifest stores [w, x, y, z]; the shader wants xyz in .xyz and w in .w
    u.projCamQuat!.value.set(kf.q[1], kf.q[2], kf.q[3], kf.q[0]);
    u.frameTex!.value = texture;
    u.hasFrame!.value = texture !== null;
  }
}

export interface CityScene {
  root: THREE.Group;
  material: ProjectiveMaterial;
  groundMeshes: THREE.Mesh[];
}

export async function loadCity(url: string): Promise<CityScene> {
  const gltf = await new GLTFLoader().loadAsync(url);
  const material = new ProjectiveMaterial();
  const groundMeshes: THREE.Mesh[] = [];
  gltf.scene.traverse((obj) => {
    if (obj instanceof THREE.Mesh) {
      obj.material = material;
      if (obj.userData?.label === "Ground") groundMeshes.push(obj);
    }
  });
  return { root: gltf.scene, material, groundMeshes };
}

/** Ground elevation under (x, y) from a downward ray against the city mesh. */
export function groundElevation(city: CityScene, x: number, y: number): number {
  const caster = new THREE.Raycaster(
    new THREE.Vector3(x, y, 10_000), new THREE.Vector3(0, 0, -1),
  );
  const targets = city.groundMeshes.length > 0 ? city.groundMeshes : [city.root];
  const hits = caster.intersectObjects(targets as THREE.Object3D[], true);
  const first = hits[0];
  if (first === undefined) throw new RangeError(`no ground under (${x}, ${y})`);
  return first.point.z;
}

export function makeWaterPlane(extent: number): THREE.Mesh {
  const geo = new THREE.PlaneGeometry(extent, extent);
  const mat = new THREE.MeshBasicMaterial({
    color: 0x2060c0, transparent: true, opacity: 0.55, depthWrite: false,
  });
  return new THREE.Mesh(geo, mat); // PlaneGeometry already lies in the xy plane
}

export function loadFrameTexture(url: string): Promise<THREE.Texture> {
  return new Promise((resolve, reject) => {
    new THREE.TextureLoader().load(
      url,
      (tex) => {
        // sample with t = 1 at the image's top row (matches dirToUv)
        tex.flipY = true;
        tex.colorSpace = THREE.SRGBColorSpace;
        resolve(tex);
      },
      undefined,
      () => reject(new Error(`failed to load frame ${url}`)),
    );
  });
}
