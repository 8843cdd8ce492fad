/**
 * Wire protocol shared with the telemetry service: JSON text frames over a
 * WebSocket. Every outbound message carries a monotone sequence number.
 */

export type Axes = [number, number, number, number]; // pitch, roll, vertical, yaw rate

export interface StateUpdate {
  type: 'state';
  seq: number;
  t: number;
  uav: { pos: [number, number, number]; heading: number; vel: Axes };
  ugv: [number, number][];
  obs: number[];
  valid: boolean;
  visible: boolean[];
  verdict: 'pass' | 'hover' | 'manual';
  unsafe: number;
  margin: string | null;
  action: Axes;
  manual: boolean;
  recording: boolean;
  episode: number;
  bounds: [number, number, number, number];
  obstacles: [number, number, number, number][];
  margin_width: number;
  fov_extent: number;
  focal: number;
  replay?: boolean;
}

export interface Welcome {
  type: 'welcome';
  seq: number;
  ref_seq?: number;
  role: string;
  protocol: number;
  stream_rate: number;
  dt: number;
  manoeuvre: string;
}

export interface Ack {
  type: 'ack';
  seq: number;
  ref_seq: number;
  ok: boolean;
  detail: string;
}

export interface ErrorMsg {
  type: 'error';
  seq?: number;
  ref_seq?: number;
  message: string;
}

export type ServerMessage = StateUpdate | Welcome | Ack | ErrorMsg;

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== 'object' || data === null) return null;
  const msg = data as { type?: unknown };
  switch (msg.type) {
    case 'state': {
      const s = data as StateUpdate;
      if (!Array.isArray(s.obs) || s.obs.length !== 11) return null;
      if (!s.uav || !Array.isArray(s.uav.pos)) return null;
      return s;
    }
    case 'welcome':
      return data as Welcome;
    case 'ack':
      return data as Ack;
    case 'error': {
      const e = data as ErrorMsg;
      return typeof e.message === 'string' ? e : null;
    }
    default:
      return null;
  }
}

export class MessageEncoder {
  private seq = 0;

  next(): number {
    return this.seq++;
  }

  hello(role: 'controller' | 'observer', token?: string): string {
    const msg: Record<string, unknown> = { type: 'hello', seq: this.next(), role };
    if (token !== undefined) msg.token = token;
    return JSON.stringify(msg);
  }

  action(axes: Axes): string {
    return JSON.stringify({ type: 'action', seq: this.next(), action: axes });
  }

  override(manual: boolean, axes?: Axes): string {
    const msg: Record<string, unknown> = {
      type: 'override',
      seq: this.next(),
      mode: manual ? 'manual' : 'autonomous',
    };
    if (axes) msg.action = axes;
    return JSON.stringify(msg);
  }

  record(start: boolean, tag: string): string {
    return JSON.stringify({
      type: 'record',
      seq: this.next(),
      command: start ? 'start' : 'stop',
      tag,
    });
  }
}
