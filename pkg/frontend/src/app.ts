// Session wiring: WebSocket lifecycle, keyboard/mouse monitor controls,
// stale-frame watchdog, and the render loop.

import {
  encodeDisengage,
  encodeEngage,
  encodePause,
  encodeReposition,
  encodeResume,
  encodeSetGoal,
  parseServerMessage,
  WorldDoc,
} from './protocol.js';
import { drawFrame, drawObservationInset, drawWorld, SessionView } from './render.js';
import { Camera, followCamera, screenToWorld } from './transform.js';

const STALE_AFTER_MS = 2000;

interface Elements {
  canvas: HTMLCanvasElement;
  banner: HTMLElement;
  engageBtn: HTMLButtonElement;
  pauseBtn: HTMLButtonElement;
  distance: HTMLElement;
  status: HTMLElement;
  goal: HTMLInputElement;
}

export class MonitorApp {
  private ws: WebSocket | null = null;
  private view: SessionView = { world: null, frame: null, staleMs: 0 };
  private cam: Camera;
  private lastFrameAt = 0;
  private paused = false;
  // reposition drag state: press sets position, drag direction sets heading
  private dragStart: [number, number] | null = null;
  private dragNow: [number, number] | null = null;

  constructor(private el: Elements) {
    this.cam = {
      centerX: 0,
      centerY: 0,
      pxPerMeter: 28,
      width: el.canvas.width,
      height: el.canvas.height,
    };
    this.bindControls();
    requestAnimationFrame(() => this.renderLoop());
  }

  connect(url: string): void {
    this.el.status.textContent = `connecting to ${url}`;
    const ws = new WebSocket(url);
    this.ws = ws;
    ws.onopen = () => (this.el.status.textContent = 'connected');
    ws.onclose = () => (this.el.status.textContent = 'disconnected');
    ws.onerror = () => (this.el.status.textContent = 'socket error');
    ws.onmessage = (ev: MessageEvent) => this.onMessage(String(ev.data));
  }

  private onMessage(raw: string): void {
    const msg = parseServerMessage(raw);
    if (!msg) return;
    if (msg.type === 'error') {
      this.el.status.textContent = `server: ${msg.message}`;
      return;
    }
    this.lastFrameAt = performance.now();
    const firstFrame = this.view.frame === null;
    this.view.frame = msg;
    if (firstFrame) {
      this.cam.centerX = msg.robot.x;
      this.cam.centerY = msg.robot.y;
      void this.fetchWorld(msg.world_digest);
    }
  }

  private async fetchWorld(digest: string): Promise<void> {
    const res = await fetch(`/world/${digest}`);
    if (res.ok) {
      this.view.world = (await res.json()) as WorldDoc;
    } else {
      this.el.status.textContent = `world fetch failed (${res.status})`;
    }
  }

  private send(payload: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(payload);
    }
  }

  private bindControls(): void {
    window.addEventListener('keydown', (ev) => {
      if (ev.code === 'Space') {
        ev.preventDefault();
        this.send(encodeDisengage()); // single keypress, reaction-time path
      }
    });
    this.el.engageBtn.addEventListener('click', () => this.send(encodeEngage()));
    this.el.pauseBtn.addEventListener('click', () => {
      this.paused = !this.paused;
      this.send(this.paused ? encodePause() : encodeResume());
      this.el.pauseBtn.textContent = this.paused ? 'resume' : 'pause';
    });
    this.el.goal.addEventListener('change', () => {
      const g = parseFloat(this.el.goal.value);
      if (!Number.isNaN(g)) this.send(encodeSetGoal(g));
    });

    const canvas = this.el.canvas;
    canvas.addEventListener('mousedown', (ev) => {
      if (this.view.frame?.engaged) return; // reposition only while disengaged
      this.dragStart = this.canvasPoint(ev);
      this.dragNow = this.dragStart;
    });
    canvas.addEventListener('mousemove', (ev) => {
      if (this.dragStart) this.dragNow = this.canvasPoint(ev);
    });
    canvas.addEventListener('mouseup', (ev) => {
      if (!this.dragStart) return;
      const [sx0, sy0] = this.dragStart;
      const [sx1, sy1] = this.canvasPoint(ev);
      const [wx, wy] = screenToWorld(this.cam, sx0, sy0);
      const [wx1, wy1] = screenToWorld(this.cam, sx1, sy1);
      const heading =
        Math.hypot(wx1 - wx, wy1 - wy) > 0.2
          ? Math.atan2(wy1 - wy, wx1 - wx)
          : this.view.frame?.robot.heading ?? 0;
      this.send(encodeReposition(wx, wy, heading));
      this.dragStart = null;
      this.dragNow = null;
    });
  }

  private canvasPoint(ev: MouseEvent): [number, number] {
    const rect = this.el.canvas.getBoundingClientRect();
    return [ev.clientX - rect.left, ev.clientY - rect.top];
  }

  private renderLoop(): void {
    const ctx = this.el.canvas.getContext('2d')!;
    const { frame, world } = this.view;
    this.view.staleMs = frame ? performance.now() - this.lastFrameAt : 0;

    ctx.clearRect(0, 0, this.cam.width, this.cam.height);
    if (world && frame) {
      this.cam = followCamera(this.cam, frame.robot.x, frame.robot.y);
      drawWorld(ctx, this.cam, world);
      drawFrame(ctx, this.cam, frame);
      drawObservationInset(ctx, frame.observation, this.cam.width - 124, 8, 116);
      if (this.dragStart && this.dragNow) {
        ctx.strokeStyle = '#fff';
        ctx.setLineDash([4, 4]);
        ctx.beginPath();
        ctx.moveTo(this.dragStart[0], this.dragStart[1]);
        ctx.lineTo(this.dragNow[0], this.dragNow[1]);
        ctx.stroke();
        ctx.setLineDash([]);
      }
    }

    if (frame) {
      const stale = this.view.staleMs > STALE_AFTER_MS;
      this.el.banner.textContent = stale
        ? 'CONNECTION STALE'
        : frame.engaged
          ? 'ENGAGED'
          : 'DISENGAGED — drag on the map to reposition, then engage';
      this.el.banner.className = stale ? 'stale' : frame.engaged ? 'engaged' : 'disengaged';
      this.el.engageBtn.disabled = frame.engaged;
      this.el.distance.textContent = `${frame.metrics.distance_since_disengagement.toFixed(1)} m since disengagement`;
    }
    requestAnimationFrame(() => this.renderLoop());
  }
}
