/**
 * Connection management: hello handshake, action streaming, override and
 * recording commands, reconnect with backoff. The page never mutates sim
 * state except through these messages.
 */

import type { Axes } from './protocol.js';
import { MessageEncoder, parseServerMessage } from './protocol.js';
import { SessionStore } from './state.js';

export interface ClientOptions {
  url: string;
  role: 'controller' | 'observer';
  token?: string;
  actionRateHz?: number;
  axesProvider?: () => Axes;
  webSocketFactory?: (url: string) => WebSocket;
}

export class TelemetryClient {
  readonly store = new SessionStore();
  private encoder = new MessageEncoder();
  private ws: WebSocket | null = null;
  private actionTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectAttempts = 0;
  private closedByUser = false;

  constructor(private opts: ClientOptions) {}

  connect(): void {
    this.closedByUser = false;
    this.store.connection = 'connecting';
    const factory = this.opts.webSocketFactory ?? ((u: string) => new WebSocket(u));
    const ws = factory(this.opts.url);
    this.ws = ws;

    ws.onopen = () => {
      this.reconnectAttempts = 0;
      this.encoder = new MessageEncoder();
      ws.send(this.encoder.hello(this.opts.role, this.opts.token));
      this.startActionStream();
    };
    ws.onmessage = (ev: MessageEvent) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg) this.store.onMessage(msg, Date.now());
    };
    ws.onclose = () => {
      this.stopActionStream();
      this.store.onDisconnect();
      if (!this.closedByUser) this.scheduleReconnect();
    };
  }

  close(): void {
    this.closedByUser = true;
    this.stopActionStream();
    this.ws?.close();
  }

  private scheduleReconnect(): void {
    const delay = Math.min(1000 * 2 ** this.reconnectAttempts, 15000);
    this.reconnectAttempts += 1;
    setTimeout(() => {
      if (!this.closedByUser) this.connect();
    }, delay);
  }

  private startActionStream(): void {
    if (this.opts.role !== 'controller' || !this.opts.axesProvider) return;
    const period = 1000 / (this.opts.actionRateHz ?? 20);
    this.actionTimer = setInterval(() => this.sendAxes(), period);
  }

  private stopActionStream(): void {
    if (this.actionTimer !== null) {
      clearInterval(this.actionTimer);
      this.actionTimer = null;
    }
  }

  private sendAxes(): void {
    if (!this.ws || this.ws.readyState !== 1 /* OPEN */) return;
    const axes = this.opts.axesProvider!();
    this.store.transmittedAxes = axes;
    this.ws.send(this.encoder.action(axes));
  }

  toggleOverride(): void {
    if (!this.ws || this.ws.readyState !== 1) return;
    const manual = !this.store.manualRequested;
    this.store.manualRequested = manual;
    const axes = this.opts.axesProvider ? this.opts.axesProvider() : undefined;
    this.ws.send(this.encoder.override(manual, axes));
  }

  toggleRecording(tag: string): void {
    if (!this.ws || this.ws.readyState !== 1) return;
    if (this.store.pendingRecord) return; // wait for the server's answer
    const start = !this.store.recording;
    const frame = this.encoder.record(start, tag);
    const seq = JSON.parse(frame).seq as number;
    this.store.pendingRecord = { seq, start };
    this.ws.send(frame);
  }
}
