/**
 * Keyboard and gamepad mapping to the four stick axes.
 *
 * Keys express pilot intent; the wire carries platform stick values where
 * negative pitch flies forward (+x) and negative roll flies left (+y).
 */

import type { Axes } from './protocol.js';

export const DEFAULT_DEADZONE = 0.05;

export interface AxisIntent {
  forward: number;  // +1 = fly toward +x
  left: number;     // +1 = fly toward +y
  climb: number;    // +1 = up
  turn: number;     // +1 = counter-clockwise
}

// key code -> partial intent contribution
const KEY_INTENTS = new Map<string, Partial<AxisIntent>>([
  ['KeyW', { forward: 1 }],
  ['KeyS', { forward: -1 }],
  ['KeyA', { left: 1 }],
  ['KeyD', { left: -1 }],
  ['ArrowUp', { climb: 1 }],
  ['ArrowDown', { climb: -1 }],
  ['KeyQ', { turn: 1 }],
  ['KeyE', { turn: -1 }],
  ['ArrowLeft', { turn: 1 }],
  ['ArrowRight', { turn: -1 }],
]);

export function isBoundKey(code: string): boolean {
  return KEY_INTENTS.has(code);
}

export function intentToAxes(intent: AxisIntent): Axes {
  return [
    clampUnit(-intent.forward), // stick pitch: nose down (negative) = forward
    clampUnit(-intent.left),    // stick roll: negative = left
    clampUnit(intent.climb),
    clampUnit(intent.turn),
  ];
}

export function applyDeadzone(value: number, deadzone = DEFAULT_DEADZONE): number {
  // values above the deadzone pass through unchanged
  return Math.abs(value) < deadzone ? 0 : clampUnit(value);
}

export class KeyboardSource {
  private held = new Set<string>();

  keyDown(code: string): boolean {
    if (!KEY_INTENTS.has(code)) return false;
    this.held.add(code);
    return true;
  }

  keyUp(code: string): boolean {
    if (!KEY_INTENTS.has(code)) return false;
    this.held.delete(code);
    return true;
  }

  releaseAll(): void {
    this.held.clear();
  }

  intent(): AxisIntent {
    const sum: AxisIntent = { forward: 0, left: 0, climb: 0, turn: 0 };
    for (const code of this.held) {
      const part = KEY_INTENTS.get(code)!;
      sum.forward += part.forward ?? 0;
      sum.left += part.left ?? 0;
      sum.climb += part.climb ?? 0;
      sum.turn += part.turn ?? 0;
    }
    return sum;
  }

  axes(): Axes {
    return intentToAxes(this.intent());
  }
}

/** Raw gamepad axes (standard mapping) to stick axes with deadzone. */
export function gamepadToAxes(
  raw: readonly number[],
  deadzone = DEFAULT_DEADZONE,
): Axes {
  const lx = applyDeadzone(raw[0] ?? 0, deadzone); // +1 = right
  const ly = applyDeadzone(raw[1] ?? 0, deadzone); // -1 = stick forward
  const rx = applyDeadzone(raw[2] ?? 0, deadzone);
  const ry = applyDeadzone(raw[3] ?? 0, deadzone);
  return [
    clampUnit(ly),   // stick forward (-1) = fly forward = pitch -1
    clampUnit(lx),   // stick right (+1) = fly right = roll +1
    clampUnit(-ry),  // stick forward (-1) = climb +1
    clampUnit(-rx),
  ];
}

export function mergeAxes(keyboard: Axes, gamepad: Axes): Axes {
  // the stronger deflection wins per axis, so either device can fly
  return keyboard.map((k, i) =>
    Math.abs(gamepad[i]) > Math.abs(k) ? gamepad[i] : k) as Axes;
}

function clampUnit(v: number): number {
  if (!Number.isFinite(v)) return 0; // wedged or disconnected device axis
  return Math.min(1, Math.max(-1, v)) + 0; // +0 folds -0 into 0
}
