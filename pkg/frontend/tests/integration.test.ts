/**
 * Live end-to-end check against the real telemetry service: handshake,
 * state stream, override round trip, and session recording.
 * Skipped automatically when python3/fovtrack is unavailable.
 */

import { spawn, spawnSync } from 'node:child_process';
import { mkdtempSync, readdirSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import WebSocket from 'ws';

import type { ServerMessage, StateUpdate } from '../src/protocol.js';
import { MessageEncoder, parseServerMessage } from '../src/protocol.js';

const havePython = spawnSync('python3', ['-c', 'import fovtrack'], {
  timeout: 20000,
}).status === 0;

const SERVER_SNIPPET = `
import asyncio, sys
from fovtrack.config import scenario_from_dict
from fovtrack.server import TelemetryServer

async def main():
    scenario = scenario_from_dict({"manoeuvre": {"primitive_duration": 8.0}})
    server = TelemetryServer(scenario, manoeuvre="climb", port=0,
                             realtime=4.0, out_dir=sys.argv[1])
    await server.start()
    print(server.port, flush=True)
    await asyncio.Event().wait()

asyncio.run(main())
`;

class Probe {
  ws: WebSocket;
  enc = new MessageEncoder();
  queue: ServerMessage[] = [];
  private waiters: ((m: ServerMessage) => void)[] = [];

  constructor(port: number) {
    this.ws = new WebSocket(`ws://127.0.0.1:${port}`);
    this.ws.on('message', (data) => {
      const msg = parseServerMessage(data.toString());
      if (!msg) return;
      const waiter = this.waiters.shift();
      if (waiter) waiter(msg);
      else this.queue.push(msg);
    });
  }

  open(): Promise<void> {
    return new Promise((resolve) => this.ws.on('open', () => resolve()));
  }

  next(): Promise<ServerMessage> {
    const queued = this.queue.shift();
    if (queued) return Promise.resolve(queued);
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  async nextOfType<T extends ServerMessage['type']>(
    type: T, limit = 300,
  ): Promise<Extract<ServerMessage, { type: T }>> {
    for (let i = 0; i < limit; i++) {
      const msg = await this.next();
      if (msg.type === type) return msg as Extract<ServerMessage, { type: T }>;
    }
    throw new Error(`no ${type} within ${limit} messages`);
  }

  send(frame: string): void {
    this.ws.send(frame);
  }
}

describe.runIf(havePython)('against the live telemetry service', () => {
  let child: ReturnType<typeof spawn>;
  let port = 0;
  let outDir = '';

  beforeAll(async () => {
    outDir = mkdtempSync(join(tmpdir(), 'fovtrack-ui-'));
    child = spawn('python3', ['-c', SERVER_SNIPPET, outDir]);
    port = await new Promise<number>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error('server start timeout')), 20000);
      child.stdout!.on('data', (d) => {
        clearTimeout(timer);
        resolve(parseInt(d.toString(), 10));
      });
      child.on('exit', () => reject(new Error('server died')));
    });
  }, 30000);

  afterAll(() => {
    child?.kill();
  });

  it('handshakes, streams state, overrides, and records a session', async () => {
    const probe = new Probe(port);
    await probe.open();
    probe.send(probe.enc.hello('controller'));
    const welcome = await probe.nextOfType('welcome');
    expect(welcome.role).toBe('controller');
    expect(welcome.stream_rate).toBe(20);

    const state = await probe.nextOfType('state');
    expect(state.obs).toHaveLength(11);
    expect(state.bounds).toEqual([-5, 5, -5, 5]);

    // recording round trip: indicator flips only after the server ack/state
    probe.send(probe.enc.record(true, 'climb'));
    await probe.nextOfType('ack');

    // fly for a while: regulate spread error through the vertical channel
    let flown = 0;
    while (flown < 40) {
      const s = await probe.nextOfType('state');
      if (!s.recording) continue;
      flown += 1;
      const err = s.obs[6] - s.obs[5];
      probe.send(probe.enc.action([0, 0, Math.max(-1, Math.min(1, 4 * err)), 0]));
    }

    // manual override must reflect in the verdict within two updates
    probe.send(probe.enc.override(true, [0, 0.1, 0, 0]));
    await probe.nextOfType('ack');
    let updates = 0;
    for (;;) {
      const s = await probe.nextOfType('state');
      updates += 1;
      if (s.manual) {
        expect(s.verdict).toBe('manual');
        break;
      }
      expect(updates).toBeLessThanOrEqual(2);
    }
    probe.send(probe.enc.override(false));
    await probe.nextOfType('ack');

    probe.send(probe.enc.record(false, 'climb'));
    await probe.nextOfType('ack');
    probe.ws.close();

    const files = readdirSync(outDir);
    expect(files.some((f) => f.endsWith('.demos'))).toBe(true);
    expect(files.some((f) => f.endsWith('.traj'))).toBe(true);
  }, 60000);
});
