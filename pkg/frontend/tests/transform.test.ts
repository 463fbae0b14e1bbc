import { describe, expect, it } from 'vitest';
import { Camera, followCamera, screenToWorld, worldToScreen } from '../src/transform.js';

const cam: Camera = { centerX: 12.5, centerY: -3.2, pxPerMeter: 30, width: 800, height: 600 };

describe('world/screen transform', () => {
  it('maps the camera center to the canvas center', () => {
    expect(worldToScreen(cam, 12.5, -3.2)).toEqual([400, 300]);
  });

  it('flips the y axis', () => {
    const [, syUp] = worldToScreen(cam, 12.5, -2.2); // one meter up in the world
    expect(syUp).toBe(300 - 30);
  });

  it('round-trips world -> screen -> world', () => {
    for (const [wx, wy] of [[0, 0], [25.3, 7.7], [-4.1, 18.9]] as [number, number][]) {
      const [sx, sy] = worldToScreen(cam, wx, wy);
      const [bx, by] = screenToWorld(cam, sx, sy);
      expect(bx).toBeCloseTo(wx, 10);
      expect(by).toBeCloseTo(wy, 10);
    }
  });

  it('renders a frame pose within one pixel of the oracle transform', () => {
    // oracle: independent direct computation of the affine map
    const robot = { x: 17.21, y: -1.84 };
    const oracleX = cam.width / 2 + (robot.x - cam.centerX) * cam.pxPerMeter;
    const oracleY = cam.height / 2 - (robot.y - cam.centerY) * cam.pxPerMeter;
    const [sx, sy] = worldToScreen(cam, robot.x, robot.y);
    expect(Math.abs(sx - oracleX)).toBeLessThan(1.0);
    expect(Math.abs(sy - oracleY)).toBeLessThan(1.0);
  });

  it('follow camera converges toward the robot', () => {
    let c = cam;
    for (let i = 0; i < 200; i++) c = followCamera(c, 40, 40);
    expect(c.centerX).toBeCloseTo(40, 3);
    expect(c.centerY).toBeCloseTo(40, 3);
  });
});
