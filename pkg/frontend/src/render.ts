// Canvas painting: static world layers, the live robot, planner candidate
// paths colored by risk, and the egocentric observation inset.

import { candidateRisk, riskColor, TERRAIN_COLORS } from './colors.js';
import type { Frame, WorldDoc } from './protocol.js';
import { Camera, worldToScreen } from './transform.js';

export const GRID_SIDE = 24;
const STREET_RENDER_DEPTH_M = 5.0;

export interface SessionView {
  world: WorldDoc | null;
  frame: Frame | null;
  staleMs: number;
}

export function drawWorld(ctx: CanvasRenderingContext2D, cam: Camera, world: WorldDoc): void {
  ctx.fillStyle = TERRAIN_COLORS[4];
  ctx.fillRect(0, 0, cam.width, cam.height);

  // street strip: offset band beyond the sidewalk edge on the street side
  const half = world.spec.sidewalk_width_m / 2;
  const sign = world.spec.street_side === 'right' ? -1 : 1;
  const street: [number, number][] = [];
  const outer: [number, number][] = [];
  for (let i = 0; i < world.centerline.length - 1; i++) {
    const [x0, y0] = world.centerline[i];
    const [x1, y1] = world.centerline[i + 1];
    const len = Math.hypot(x1 - x0, y1 - y0) || 1;
    const nx = (-(y1 - y0) / len) * sign;
    const ny = ((x1 - x0) / len) * sign;
    street.push([x0 + nx * half, y0 + ny * half]);
    outer.push([x0 + nx * (half + STREET_RENDER_DEPTH_M), y0 + ny * (half + STREET_RENDER_DEPTH_M)]);
  }
  fillPolygon(ctx, cam, street.concat(outer.reverse()), TERRAIN_COLORS[1]);

  for (const quad of world.driveway_quads) {
    fillPolygon(ctx, cam, quad, TERRAIN_COLORS[2]);
  }
  fillPolygon(ctx, cam, world.sidewalk_polygon, TERRAIN_COLORS[0]);
  ctx.fillStyle = TERRAIN_COLORS[3];
  for (const [x, y, r] of world.obstacles) {
    const [sx, sy] = worldToScreen(cam, x, y);
    ctx.beginPath();
    ctx.arc(sx, sy, r * cam.pxPerMeter, 0, Math.PI * 2);
    ctx.fill();
  }
}

function fillPolygon(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  pts: [number, number][],
  color: string,
): void {
  if (pts.length < 3) return;
  ctx.fillStyle = color;
  ctx.beginPath();
  const [x0, y0] = worldToScreen(cam, pts[0][0], pts[0][1]);
  ctx.moveTo(x0, y0);
  for (let i = 1; i < pts.length; i++) {
    const [x, y] = worldToScreen(cam, pts[i][0], pts[i][1]);
    ctx.lineTo(x, y);
  }
  ctx.closePath();
  ctx.fill();
}

// integrate a candidate's heading changes into a world-frame polyline,
// mirroring the simulator kinematics (0.5 m per step)
export function candidatePath(
  robot: { x: number; y: number; heading: number },
  actions: number[],
): [number, number][] {
  const pts: [number, number][] = [[robot.x, robot.y]];
  let heading = robot.heading;
  let x = robot.x;
  let y = robot.y;
  for (const a of actions) {
    heading += Math.max(-0.4, Math.min(0.4, a));
    x += 0.5 * Math.cos(heading);
    y += 0.5 * Math.sin(heading);
    pts.push([x, y]);
  }
  return pts;
}

export function drawFrame(ctx: CanvasRenderingContext2D, cam: Camera, frame: Frame): void {
  if (frame.plan) {
    for (const cand of frame.plan.candidates) {
      ctx.strokeStyle = riskColor(candidateRisk(cand.probs));
      ctx.globalAlpha = 0.55;
      ctx.lineWidth = 1.2;
      ctx.beginPath();
      const path = candidatePath(frame.robot, cand.actions);
      const [sx, sy] = worldToScreen(cam, path[0][0], path[0][1]);
      ctx.moveTo(sx, sy);
      for (let i = 1; i < path.length; i++) {
        const [x, y] = worldToScreen(cam, path[i][0], path[i][1]);
        ctx.lineTo(x, y);
      }
      ctx.stroke();
    }
    ctx.globalAlpha = 1.0;
  }

  // robot: triangle pointing along the heading
  const { x, y, heading } = frame.robot;
  const r = 0.21 * cam.pxPerMeter * 1.6;
  const [cx, cy] = worldToScreen(cam, x, y);
  ctx.save();
  ctx.translate(cx, cy);
  ctx.rotate(-heading); // screen y is flipped
  ctx.fillStyle = frame.engaged ? '#4fc3f7' : '#ef5350';
  ctx.beginPath();
  ctx.moveTo(r, 0);
  ctx.lineTo(-0.6 * r, 0.6 * r);
  ctx.lineTo(-0.6 * r, -0.6 * r);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}

export function drawObservationInset(
  ctx: CanvasRenderingContext2D,
  digits: string,
  x0: number,
  y0: number,
  size: number,
): void {
  const cell = size / GRID_SIDE;
  ctx.fillStyle = '#000';
  ctx.fillRect(x0 - 2, y0 - 2, size + 4, size + 4);
  for (let i = 0; i < GRID_SIDE; i++) {
    for (let j = 0; j < GRID_SIDE; j++) {
      const cls = digits.charCodeAt(i * GRID_SIDE + j) - 48;
      ctx.fillStyle = TERRAIN_COLORS[cls] ?? '#f0f';
      // grid row 0 is nearest the robot, column 0 its far left; draw with
      // forward pointing up and the robot at the bottom edge
      ctx.fillRect(x0 + j * cell, y0 + (GRID_SIDE - 1 - i) * cell, cell + 0.5, cell + 0.5);
    }
  }
}
