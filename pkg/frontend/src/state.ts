/**
 * Session store: one consistent snapshot of everything the page renders.
 * Network events and device polling write into it; the render loop reads.
 */

import type { Axes, ServerMessage, StateUpdate } from './protocol.js';

export const STALE_AFTER_MS = 1000;

export type ConnectionState = 'connecting' | 'connected' | 'closed';

export interface PendingRecord {
  seq: number;
  start: boolean;
}

export class SessionStore {
  connection: ConnectionState = 'connecting';
  role = 'observer';
  latest: StateUpdate | null = null;
  lastUpdateMs = 0;
  manualRequested = false;
  pendingRecord: PendingRecord | null = null;
  transmittedAxes: Axes = [0, 0, 0, 0];
  errors: string[] = [];

  /** Recording truth comes from the server, never from local intent. */
  get recording(): boolean {
    return this.latest?.recording ?? false;
  }

  get manualActive(): boolean {
    return this.latest?.manual ?? false;
  }

  isStale(nowMs: number): boolean {
    return this.latest !== null && nowMs - this.lastUpdateMs > STALE_AFTER_MS;
  }

  onMessage(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case 'state':
        this.latest = msg;
        this.lastUpdateMs = nowMs;
        break;
      case 'welcome':
        this.connection = 'connected';
        this.role = msg.role;
        break;
      case 'ack':
        if (this.pendingRecord && msg.ref_seq === this.pendingRecord.seq) {
          this.pendingRecord = null;
        }
        break;
      case 'error':
        this.errors.push(msg.message);
        if (this.errors.length > 20) this.errors.shift();
        if (this.pendingRecord && msg.ref_seq === this.pendingRecord.seq) {
          this.pendingRecord = null; // request failed; indicator stays honest
        }
        break;
    }
  }

  onDisconnect(): void {
    this.connection = 'closed';
    this.pendingRecord = null;
    this.transmittedAxes = [0, 0, 0, 0];
  }
}
