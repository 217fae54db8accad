/**
 * Regular elevation grid with bilinear sampling between cell centers.
 * Mirrors the exporter's convention: row 0 is the northernmost row,
 * x = origin[0] + col*spacing, y = origin[1] - row*spacing.
 */

export interface DemGrid {
  origin: [number, number];
  spacing: number;
  ncols: number;
  nrows: number;
  nodata: number;
  elevation: number[][]; // [row][col]
}

export function terrainElevation(dem: DemGrid, x: number, y: number): number {
  const col = (x - dem.origin[0]) / dem.spacing;
  const row = (dem.origin[1] - y) / dem.spacing;
  const eps = 1e-9;
  if (col < -eps || col > dem.ncols - 1 + eps || row < -eps || row > dem.nrows - 1 + eps) {
    throw new RangeError("terrain query outside the DEM cell-center hull");
  }
  const colC = Math.min(Math.max(col, 0), dem.ncols - 1);
  const rowC = Math.min(Math.max(row, 0), dem.nrows - 1);
  const c0 = Math.min(Math.floor(colC), dem.ncols - 2);
  const r0 = Math.min(Math.floor(rowC), dem.nrows - 2);
  const fc = colC - c0;
  const fr = rowC - r0;
  const z00 = dem.elevation[r0]![c0]!;
  const z01 = dem.elevation[r0]![c0 + 1]!;
  const z10 = dem.elevation[r0 + 1]![c0]!;
  const z11 = dem.elevation[r0 + 1]![c0 + 1]!;
  for (const z of [z00, z01, z10, z11]) {
    if (z === dem.nodata) throw new RangeError("nodata cell in interpolation neighborhood");
  }
  return z00 * (1 - fc) * (1 - fr) + z01 * fc * (1 - fr)
    + z10 * (1 - fc) * fr + z11 * fc * fr;
}
