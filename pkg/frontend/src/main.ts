import { MonitorApp } from './app.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

window.addEventListener('load', () => {
  const app = new MonitorApp({
    canvas: el<HTMLCanvasElement>('map'),
    banner: el('banner'),
    engageBtn: el<HTMLButtonElement>('engage'),
    pauseBtn: el<HTMLButtonElement>('pause'),
    distance: el('distance'),
    status: el('status'),
    goal: el<HTMLInputElement>('goal'),
  });
  const proto = location.protocol === 'https:' ? 'wss' : 'ws';
  app.connect(`${proto}://${location.host}/ws`);
});
