import { describe, expect, it } from "vitest";
import { DemGrid, terrainElevation } from "../src/dem.js";
import { Scenario, scenarioStep, waterElevation } from "../src/scenario.js";
import { loadGolden } from "./golden.js";

interface ScenarioGolden {
  dem: DemGrid;
  scenario: Scenario;
  cases: { avatar: [number, number]; time: number; expected: string }[];
}

const golden = loadGolden<ScenarioGolden>("scenario_cases.json");

describe("waterElevation", () => {
  it("clamps before the first and after the last entry", () => {
    const sched: [number, number][] = [[10, 1], [20, 3]];
    expect(waterElevation(sched, 0)).toBe(1);
    expect(waterElevation(sched, 10)).toBe(1);
    expect(waterElevation(sched, 25)).toBe(3);
  });

  it("interpolates linearly between entries", () => {
    const sched: [number, number][] = [[0, 0], [10, 2]];
    expect(waterElevation(sched, 5)).toBeCloseTo(1, 12);
    expect(waterElevation(sched, 2.5)).toBeCloseTo(0.5, 12);
  });
});

describe("terrainElevation", () => {
  it("samples cell centers exactly", () => {
    const dem = golden.dem;
    expect(terrainElevation(dem, dem.origin[0], dem.origin[1]))
      .toBe(dem.elevation[0]![0]!);
    const x = dem.origin[0] + 2 * dem.spacing;
    const y = dem.origin[1] - 3 * dem.spacing;
    expect(terrainElevation(dem, x, y)).toBe(dem.elevation[3]![2]!);
  });

  it("rejects queries outside the cell-center hull", () => {
    expect(() => terrainElevation(golden.dem, golden.dem.origin[0] - 1, golden.dem.origin[1]))
      .toThrow(RangeError);
  });
});

describe("scenarioStep golden agreement", () => {
  const terrain = (x: number, y: number): number => terrainElevation(golden.dem, x, y);

  it("has at least 12 cases spanning all statuses", () => {
    expect(golden.cases.length).toBeGreaterThanOrEqual(12);
    const kinds = new Set(golden.cases.map((c) => c.expected.split(":")[0]));
    expect(kinds).toEqual(new Set(["Ongoing", "Evacuated", "Overtaken"]));
  });

  it("matches every shared golden case", () => {
    for (const c of golden.cases) {
      expect(scenarioStep(golden.scenario, c.avatar, c.time, terrain), JSON.stringify(c))
        .toBe(c.expected);
    }
  });

  it("checks evacuation before the flood rule", () => {
    // deep water over an evacuation point still counts as evacuated
    const sc: Scenario = {
      points: [{ name: "roof", pos: [0, 0], radius: 2 }],
      time_limit: 10,
      schedule: [[0, 100]],
    };
    expect(scenarioStep(sc, [1, 1], 5, () => 0)).toBe("Evacuated:roof");
  });

  it("uses the high-water mark after the deadline", () => {
    const sc: Scenario = {
      points: [],
      time_limit: 10,
      schedule: [[0, 0], [5, 3], [20, 0]],
    };
    // at t=15 the interpolated surface has receded to 1 m, but the crest of
    // 3 m was already scheduled at t=5, so ground at 0 m is still flooded
    expect(scenarioStep(sc, [0, 0], 15, () => 0)).toBe("Overtaken");
    // before the deadline the receding surface is taken at face value
    expect(scenarioStep(sc, [0, 0], 9, () => 2.9)).toBe("Ongoing");
  });

  it("treats drown depth as boundary inclusive", () => {
    const sc: Scenario = {
      points: [], time_limit: 100, schedule: [[0, 0.5]], drown_depth: 0.5,
    };
    expect(scenarioStep(sc, [0, 0], 1, () => 0)).toBe("Overtaken");
    expect(scenarioStep(sc, [0, 0], 1, () => 0.01)).toBe("Ongoing");
  });

  it("rejects negative time", () => {
    expect(() => scenarioStep(golden.scenario, [20, 20], -1, terrain)).toThrow(RangeError);
  });
});
