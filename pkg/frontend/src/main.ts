/** Page wiring: canvas, HUD, devices, and the telemetry connection. */

import { TelemetryClient } from './client.js';
import { KeyboardSource, gamepadToAxes, mergeAxes } from './input.js';
import type { Axes } from './protocol.js';
import { ArenaRenderer } from './render.js';

const params = new URLSearchParams(location.search);
const host = params.get('host') ?? location.hostname ?? '127.0.0.1';
const port = params.get('port') ?? '8765';
const role = params.get('role') === 'observer' ? 'observer' : 'controller';
const tag = params.get('tag') ?? 'combined';
const token = params.get('token') ?? undefined;

const canvas = document.getElementById('arena') as HTMLCanvasElement;
const hud = document.getElementById('hud') as HTMLElement;
const banner = document.getElementById('banner') as HTMLElement;
const ctx = canvas.getContext('2d')!;
const renderer = new ArenaRenderer(ctx);
const keyboard = new KeyboardSource();

function currentAxes(): Axes {
  const pads = navigator.getGamepads ? navigator.getGamepads() : [];
  const pad = Array.from(pads ?? []).find((p) => p && p.connected);
  const padAxes = pad ? gamepadToAxes(pad.axes) : ([0, 0, 0, 0] as Axes);
  return mergeAxes(keyboard.axes(), padAxes);
}

const client = new TelemetryClient({
  url: `ws://${host}:${port}`,
  role,
  token,
  axesProvider: currentAxes,
});
client.connect();

window.addEventListener('keydown', (e) => {
  if (e.repeat) return;
  if (e.code === 'Space') {
    client.toggleOverride();
    e.preventDefault();
    return;
  }
  if (e.code === 'KeyR') {
    client.toggleRecording(tag);
    e.preventDefault();
    return;
  }
  if (keyboard.keyDown(e.code)) e.preventDefault();
});
window.addEventListener('keyup', (e) => {
  if (keyboard.keyUp(e.code)) e.preventDefault();
});
window.addEventListener('blur', () => keyboard.releaseAll());

function resize(): void {
  canvas.width = canvas.clientWidth * devicePixelRatio;
  canvas.height = canvas.clientHeight * devicePixelRatio;
}
window.addEventListener('resize', resize);
resize();

function frame(nowMs: number): void {
  const store = client.store;
  renderer.draw(store.latest, store.isStale(Date.now()), nowMs);

  const axes = store.transmittedAxes.map((v) => v.toFixed(2)).join(' ');
  const s = store.latest;
  hud.textContent = [
    `conn ${store.connection} (${store.role})`,
    `fps ${renderer.fps.toFixed(0)}`,
    s ? `t ${s.t.toFixed(2)} ep ${s.episode}` : 'no state',
    s ? `verdict ${s.verdict}${s.margin ? ' @' + s.margin : ''}` : '',
    `axes ${axes}`,
    `override ${store.manualRequested ? 'MANUAL' : 'auto'}`,
    `rec ${store.recording ? 'ON' : 'off'}${store.pendingRecord ? ' …' : ''}`,
    s && !s.valid ? 'TARGETS LOST (held)' : '',
  ].filter(Boolean).join('  |  ');

  banner.style.display = store.connection === 'closed' ? 'block' : 'none';
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
