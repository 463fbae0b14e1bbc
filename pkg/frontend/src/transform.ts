// World <-> screen mapping: meters to pixels with a y-flip (screen y grows
// downward) around a camera center.

export interface Camera {
  centerX: number; // world meters
  centerY: number;
  pxPerMeter: number;
  width: number; // canvas pixels
  height: number;
}

export function worldToScreen(cam: Camera, wx: number, wy: number): [number, number] {
  const sx = cam.width / 2 + (wx - cam.centerX) * cam.pxPerMeter;
  const sy = cam.height / 2 - (wy - cam.centerY) * cam.pxPerMeter;
  return [sx, sy];
}

export function screenToWorld(cam: Camera, sx: number, sy: number): [number, number] {
  const wx = cam.centerX + (sx - cam.width / 2) / cam.pxPerMeter;
  const wy = cam.centerY - (sy - cam.height / 2) / cam.pxPerMeter;
  return [wx, wy];
}

export function followCamera(
  prev: Camera,
  robotX: number,
  robotY: number,
  smoothing = 0.15,
): Camera {
  return {
    ...prev,
    centerX: prev.centerX + (robotX - prev.centerX) * smoothing,
    centerY: prev.centerY + (robotY - prev.centerY) * smoothing,
  };
}
