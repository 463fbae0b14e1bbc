// Wire types and command encoders for the serve protocol.
// Server -> client: frames and error messages; client -> server: commands.

export interface RobotPose {
  x: number;
  y: number;
  heading: number;
}

export interface PlanCandidate {
  actions: number[];
  probs: number[];
  cost: number;
}

export interface PlanInfo {
  candidates: PlanCandidate[];
  chosen: number;
}

export interface Frame {
  type: 'frame';
  step: number;
  robot: RobotPose;
  engaged: boolean;
  world_digest: string;
  observation: string; // 576 class digits, row-major
  plan: PlanInfo | null;
  metrics: { distance_since_disengagement: number };
}

export interface ErrorMessage {
  type: 'error';
  message: string;
}

export type ServerMessage = Frame | ErrorMessage;

export type Command =
  | { type: 'disengage' }
  | { type: 'engage' }
  | { type: 'reposition'; x: number; y: number; heading: number }
  | { type: 'set_goal'; g: number }
  | { type: 'pause' }
  | { type: 'resume' };

export function encodeDisengage(): string {
  return JSON.stringify({ type: 'disengage' });
}

export function encodeEngage(): string {
  return JSON.stringify({ type: 'engage' });
}

export function encodeReposition(x: number, y: number, heading: number): string {
  return JSON.stringify({ type: 'reposition', x, y, heading });
}

export function encodeSetGoal(g: number): string {
  return JSON.stringify({ type: 'set_goal', g });
}

export function encodePause(): string {
  return JSON.stringify({ type: 'pause' });
}

export function encodeResume(): string {
  return JSON.stringify({ type: 'resume' });
}

export function parseServerMessage(raw: string): ServerMessage | null {
  try {
    const msg = JSON.parse(raw);
    if (msg && (msg.type === 'frame' || msg.type === 'error')) {
      return msg as ServerMessage;
    }
    return null;
  } catch {
    return null;
  }
}

// World geometry document fetched by digest over the same port.
export interface WorldDoc {
  format: string;
  spec: { sidewalk_width_m: number; street_side: string; [k: string]: unknown };
  centerline: [number, number][];
  obstacles: [number, number, number][];
  driveways: [number, number, number, number][];
  driveway_quads: [number, number][][];
  sidewalk_polygon: [number, number][];
}
