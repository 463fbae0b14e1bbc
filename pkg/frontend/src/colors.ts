// Linear green -> yellow -> red ramp for predicted disengagement probability.

export const RAMP_LOW: [number, number, number] = [46, 160, 67]; // green
const RAMP_MID: [number, number, number] = [227, 179, 65]; // yellow
const RAMP_HIGH: [number, number, number] = [205, 49, 49]; // red

function lerp(a: number, b: number, t: number): number {
  return Math.round(a + (b - a) * t);
}

export function riskColor(p: number): string {
  const t = Math.min(1, Math.max(0, p));
  const [from, to, u] = t < 0.5 ? [RAMP_LOW, RAMP_MID, t * 2] : [RAMP_MID, RAMP_HIGH, (t - 0.5) * 2];
  return `rgb(${lerp(from[0], to[0], u)}, ${lerp(from[1], to[1], u)}, ${lerp(from[2], to[2], u)})`;
}

export function candidateRisk(probs: number[]): number {
  return probs.length ? Math.max(...probs) : 0;
}

// terrain classes 0..4: sidewalk, street, driveway, obstacle, offmap
export const TERRAIN_COLORS = ['#b8b8b8', '#4a4f58', '#c9a36a', '#30343a', '#20262b'];
