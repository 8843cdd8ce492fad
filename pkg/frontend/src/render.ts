/**
 * Top-down arena rendering. The red dot marks the camera image center (the
 * point directly below the UAV); the blue dot and circle mark the UGV
 * centroid and actual spread seen in the image, re-projected to the ground;
 * the dashed circle is the ideal spread.
 */

import type { StateUpdate } from './protocol.js';

export interface Viewport {
  scale: number;   // pixels per meter
  offsetX: number; // canvas x of world x_min
  offsetY: number; // canvas y of world y_max (world +y points up)
}

export function fitViewport(
  bounds: [number, number, number, number],
  width: number,
  height: number,
  padding = 24,
): Viewport {
  const [xMin, xMax, yMin, yMax] = bounds;
  const scale = Math.min(
    (width - 2 * padding) / (xMax - xMin),
    (height - 2 * padding) / (yMax - yMin),
  );
  const offsetX = (width - (xMax - xMin) * scale) / 2 - xMin * scale;
  const offsetY = (height + (yMax - yMin) * scale) / 2 + yMin * scale;
  return { scale, offsetX, offsetY };
}

export function worldToScreen(v: Viewport, x: number, y: number): [number, number] {
  return [v.offsetX + x * v.scale, v.offsetY - y * v.scale];
}

/** Re-project an image-plane point to the ground under the camera pose. */
export function imagePointToWorld(
  u: number,
  v: number,
  uavX: number,
  uavY: number,
  z: number,
  heading: number,
  focal: number,
): [number, number] {
  const c = Math.cos(heading);
  const s = Math.sin(heading);
  const dx = (c * u - s * v) * (z / focal);
  const dy = (s * u + c * v) * (z / focal);
  return [uavX + dx, uavY + dy];
}

/** Image-plane radius to ground meters at altitude z. */
export function imageRadiusToWorld(r: number, z: number, focal: number): number {
  return (r * z) / focal;
}

/** Margin rectangles sit exactly the margin width outside obstacle edges. */
export function inflateRect(
  rect: [number, number, number, number],
  margin: number,
): [number, number, number, number] {
  const [xMin, xMax, yMin, yMax] = rect;
  return [xMin - margin, xMax + margin, yMin - margin, yMax + margin];
}

const VERDICT_STYLE: Record<string, { label: string; color: string }> = {
  pass: { label: 'PASS', color: '#3ba55c' },
  hover: { label: 'HOVER', color: '#e67e22' },
  manual: { label: 'MANUAL', color: '#3498db' },
};

export class ArenaRenderer {
  private frames = 0;
  private fpsWindowStart = 0;
  fps = 0;

  constructor(private ctx: CanvasRenderingContext2D) {}

  draw(state: StateUpdate | null, stale: boolean, nowMs: number): void {
    const canvas = this.ctx.canvas;
    this.ctx.fillStyle = '#10141a';
    this.ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (state) {
      const view = fitViewport(state.bounds, canvas.width, canvas.height);
      this.drawArena(view, state);
      this.drawFormation(view, state);
      this.drawUav(view, state);
      this.drawBadges(state);
    }
    if (stale || !state) {
      this.ctx.fillStyle = 'rgba(30, 30, 30, 0.65)';
      this.ctx.fillRect(0, 0, canvas.width, canvas.height);
      this.ctx.fillStyle = '#ccc';
      this.ctx.font = '16px system-ui';
      this.ctx.textAlign = 'center';
      this.ctx.fillText(state ? 'telemetry stale' : 'waiting for telemetry',
        canvas.width / 2, canvas.height / 2);
      this.ctx.textAlign = 'left';
    }
    this.tickFps(nowMs);
  }

  private tickFps(nowMs: number): void {
    this.frames += 1;
    if (nowMs - this.fpsWindowStart >= 1000) {
      this.fps = (this.frames * 1000) / (nowMs - this.fpsWindowStart);
      this.frames = 0;
      this.fpsWindowStart = nowMs;
    }
  }

  private rect(view: Viewport, r: [number, number, number, number]): [number, number, number, number] {
    const [x0, y0] = worldToScreen(view, r[0], r[3]);
    const [x1, y1] = worldToScreen(view, r[1], r[2]);
    return [x0, y0, x1 - x0, y1 - y0];
  }

  private drawArena(view: Viewport, s: StateUpdate): void {
    const ctx = this.ctx;
    // arena boundary and its inner safety band
    ctx.strokeStyle = '#8899aa';
    ctx.lineWidth = 2;
    ctx.setLineDash([]);
    ctx.strokeRect(...this.rect(view, s.bounds));
    ctx.strokeStyle = '#aa6644';
    ctx.lineWidth = 1;
    ctx.setLineDash([6, 4]);
    ctx.strokeRect(...this.rect(view, inflateRect(s.bounds, -s.margin_width)));
    // obstacles with their inflated margins
    for (const o of s.obstacles) {
      ctx.setLineDash([]);
      ctx.fillStyle = '#55404a';
      ctx.fillRect(...this.rect(view, o));
      ctx.setLineDash([6, 4]);
      ctx.strokeStyle = '#aa6644';
      ctx.strokeRect(...this.rect(view, inflateRect(o, s.margin_width)));
    }
    ctx.setLineDash([]);
  }

  private drawFormation(view: Viewport, s: StateUpdate): void {
    const ctx = this.ctx;
    for (const [x, y] of s.ugv) {
      const [px, py] = worldToScreen(view, x, y);
      ctx.fillStyle = '#d9c24a';
      ctx.beginPath();
      ctx.arc(px, py, 6, 0, 2 * Math.PI);
      ctx.fill();
    }
    const [ux, uy, uz] = s.uav.pos;
    const heading = s.uav.heading;
    // image-plane quantities re-projected onto the ground
    const [cxu, cyu] = imagePointToWorld(s.obs[2], s.obs[3], ux, uy, uz, heading, s.focal);
    const [bx, by] = worldToScreen(view, cxu, cyu);
    const actual = imageRadiusToWorld(s.obs[6], uz, s.focal) * view.scale;
    const ideal = imageRadiusToWorld(s.obs[5], uz, s.focal) * view.scale;
    ctx.strokeStyle = s.valid ? '#4a9eff' : '#666d77';
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(bx, by, Math.max(actual, 1), 0, 2 * Math.PI);
    ctx.stroke();
    ctx.setLineDash([4, 4]);
    ctx.strokeStyle = '#2ecc71';
    ctx.beginPath();
    ctx.arc(bx, by, Math.max(ideal, 1), 0, 2 * Math.PI);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = s.valid ? '#4a9eff' : '#666d77';
    ctx.beginPath();
    ctx.arc(bx, by, 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  private drawUav(view: Viewport, s: StateUpdate): void {
    const ctx = this.ctx;
    const [ux, uy, uz] = s.uav.pos;
    const [px, py] = worldToScreen(view, ux, uy);
    // field-of-view footprint on the ground
    const fov = imageRadiusToWorld(s.fov_extent, uz, s.focal) * view.scale;
    ctx.strokeStyle = 'rgba(255, 255, 255, 0.35)';
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.arc(px, py, fov, 0, 2 * Math.PI);
    ctx.stroke();
    // camera image center
    ctx.fillStyle = '#e74c3c';
    ctx.beginPath();
    ctx.arc(px, py, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.font = '12px system-ui';
    ctx.fillStyle = '#aab4c0';
    ctx.fillText(`z ${uz.toFixed(2)} m`, px + 8, py - 8);
  }

  private drawBadges(s: StateUpdate): void {
    const ctx = this.ctx;
    const style = VERDICT_STYLE[s.verdict] ?? VERDICT_STYLE.pass;
    ctx.fillStyle = style.color;
    ctx.fillRect(12, 12, 86, 24);
    ctx.fillStyle = '#fff';
    ctx.font = 'bold 13px system-ui';
    ctx.fillText(style.label, 22, 29);
    if (s.recording) {
      ctx.fillStyle = '#e74c3c';
      ctx.beginPath();
      ctx.arc(120, 24, 7, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = '#ddd';
      ctx.font = '12px system-ui';
      ctx.fillText('REC', 132, 28);
    }
  }
}
