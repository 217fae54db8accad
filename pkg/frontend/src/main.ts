/** Browser entry point: wire assets, input, state machine and render loop. */

import * as THREE from "three";
import { loadManifest, ManifestKeyframe, SceneManifest } from "./manifest.js";
import {
  CityScene, groundElevation, loadCity, loadFrameTexture, makeWaterPlane,
} from "./render.js";
import { IDLE_INPUT, initialState, InputState, tick, ViewerState } from "./state.js";
import { STATUS_ONGOING } from "./scenario.js";

const EYE_HEIGHT = 1.6;
const POINTER_SENSITIVITY = 0.0025;

class Hud {
  private el: HTMLElement;
  private banner: HTMLElement;

  constructor(parent: HTMLElement) {
    this.el = document.createElement("div");
    this.el.className = "hud";
    this.banner = document.createElement("div");
    this.banner.className = "banner";
    this.banner.hidden = true;
    parent.append(this.el, this.banner);
  }

  update(state: ViewerState): void {
    this.el.textContent =
      `t = ${state.clock.toFixed(1)} s | water ${state.waterElevation.toFixed(2)} m` +
      ` | ${state.status}`;
    if (state.status !== STATUS_ONGOING) {
      this.banner.textContent = state.status.startsWith("Evacuated")
        ? `✓ ${state.status.replace(":", " at ")}`
        : "✗ Overtaken by the flood";
      this.banner.hidden = false;
    }
  }
}

class FrameCache {
  private cache = new Map<number, THREE.Texture>();

  constructor(private baseUrl: string, private keyframes: ManifestKeyframe[]) {}

  async get(id: number): Promise<THREE.Texture | null> {
    const cached = this.cache.get(id);
    if (cached !== undefined) return cached;
    const kf = this.keyframes.find((k) => k.id === id);
    if (kf === undefined) return null;
    try {
      const tex = await loadFrameTexture(`${this.baseUrl}/${kf.frame}`);
      this.cache.set(id, tex);
      return tex;
    } catch {
      return null; // untextured fallback shading
    }
  }
}

async function boot(): Promise<void> {
  const container = document.getElementById("app");
  if (container === null) throw new Error("missing #app container");
  container.textContent = "loading scene bundle...";

  const baseUrl = new URLSearchParams(location.search).get("scene") ?? "./scene";
  const manifest: SceneManifest = await loadManifest(baseUrl);
  const city: CityScene = await loadCity(`${baseUrl}/${manifest.mesh}`);
  container.textContent = "";

  const renderer = new THREE.WebGLRenderer({ antialias: true });
  renderer.setSize(window.innerWidth, window.innerHeight);
  container.appendChild(renderer.domElement);
  const hud = new Hud(container);

  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0xbfd8ef);
  scene.add(city.root);
  const water = makeWaterPlane(5000);
  scene.add(water);

  const camera = new THREE.PerspectiveCamera(
    75, window.innerWidth / window.innerHeight, 0.05, 4000,
  );
  camera.up.set(0, 0, 1);
  window.addEventListener("resize", () => {
    camera.aspect = window.innerWidth / window.innerHeight;
    camera.updateProjectionMatrix();
    renderer.setSize(window.innerWidth, window.innerHeight);
  });

  const kf0 = manifest.keyframes[0]!;
  let state = initialState(manifest.keyframes, manifest.scenario, [kf0.p[0], kf0.p[1]]);
  let pitch = 0;

  const keys = new Set<string>();
  window.addEventListener("keydown", (e) => keys.add(e.code));
  window.addEventListener("keyup", (e) => keys.delete(e.code));
  let headingDelta = 0;
  renderer.domElement.addEventListener("click", () => renderer.domElement.requestPointerLock());
  window.addEventListener("mousemove", (e) => {
    if (document.pointerLockElement === renderer.domElement) {
      headingDelta -= e.movementX * POINTER_SENSITIVITY;
      pitch = Math.max(-1.5, Math.min(1.5, pitch - e.movementY * POINTER_SENSITIVITY));
    }
  });

  const frames = new FrameCache(baseUrl, manifest.keyframes);
  const terrain = (x: number, y: number): number => groundElevation(city, x, y);
  let shownKeyframe = -1;

  let last = performance.now();
  async function loop(now: number): Promise<void> {
    const dt = Math.min((now - last) / 1000, 0.1);
    last = now;
    const input: InputState = {
      ...IDLE_INPUT,
      forward: keys.has("KeyW") || keys.has("ArrowUp"),
      back: keys.has("KeyS") || keys.has("ArrowDown"),
      left: keys.has("KeyA") || keys.has("ArrowLeft"),
      right: keys.has("KeyD") || keys.has("ArrowRight"),
      run: keys.has("ShiftLeft") || keys.has("ShiftRight"),
      headingDelta,
    };
    headingDelta = 0;
    if (dt > 0) {
      state = tick(state, input, dt, manifest.keyframes, manifest.scenario, terrain);
    }

    if (state.activeKeyframe !== shownKeyframe) {
      shownKeyframe = state.activeKeyframe;
      const kf = manifest.keyframes.find((k) => k.id === shownKeyframe);
      if (kf !== undefined) {
        city.material.setProjector(kf, await frames.get(kf.id));
      }
    }

    const z = terrain(state.x, state.y) + EYE_HEIGHT;
    camera.position.set(state.x, state.y, z);
    camera.lookAt(
      state.x + Math.cos(state.heading) * Math.cos(pitch),
      state.y + Math.sin(state.heading) * Math.cos(pitch),
      z + Math.sin(pitch),
    );
    water.position.set(state.x, state.y, state.waterElevation);

    hud.update(state);
    renderer.render(scene, camera);
    requestAnimationFrame((n) => void loop(n));
  }
  requestAnimationFrame((n) => void loop(n));
}

boot().catch((err) => {
  const container = document.getElementById("app");
  if (container !== null) container.textContent = `failed to start viewer: ${err}`;
  console.error(err);
});
