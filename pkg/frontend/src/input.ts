/**
 * Input mapping: pointer drags (and device-orientation sensors, when the
 * browser exposes them) become sensor angles in degrees.
 *
 *   horizontal drag            -> heading
 *   vertical drag              -> pitch
 *   shift- or right-button drag -> roll
 *
 * Angles accumulate across drags — releasing the pointer keeps the current
 * orientation, and the next drag continues from it. While nothing is
 * engaged, sample() returns null and the orientation stream stays quiet.
 */

import type { OrientationAngles } from "./client.js";

export const DEG_PER_PIXEL = 0.25;
export const PITCH_LIMIT_DEG = 60;
export const ROLL_LIMIT_DEG = 60;

/** Wrap a heading angle into [-180, 180). */
export function wrapHeading(deg: number): number {
  let wrapped = deg % 360;
  if (wrapped >= 180) {
    wrapped -= 360;
  } else if (wrapped < -180) {
    wrapped += 360;
  }
  return wrapped;
}

function clamp(value: number, limit: number): number {
  return Math.min(Math.max(value, -limit), limit);
}

/**
 * Apply a drag of (dx, dy) pixels to a base orientation. Screen y grows
 * downward, so dragging up raises the pitch. In roll mode the horizontal
 * motion twists instead of turning.
 */
export function applyDrag(
  base: OrientationAngles,
  dx: number,
  dy: number,
  rollMode: boolean,
  degPerPixel: number = DEG_PER_PIXEL,
): OrientationAngles {
  if (rollMode) {
    return {
      heading: base.heading,
      pitch: base.pitch,
      roll: clamp(base.roll + dx * degPerPixel, ROLL_LIMIT_DEG),
    };
  }
  return {
    heading: wrapHeading(base.heading + dx * degPerPixel),
    pitch: clamp(base.pitch - dy * degPerPixel, PITCH_LIMIT_DEG),
    roll: base.roll,
  };
}

interface DragStart {
  x: number;
  y: number;
  rollMode: boolean;
  base: OrientationAngles;
}

export class PointerInput {
  private current: OrientationAngles = { heading: 0, pitch: 0, roll: 0 };
  private drag: DragStart | null = null;
  private sensorEngaged = false;
  private readonly degPerPixel: number;

  constructor(degPerPixel: number = DEG_PER_PIXEL) {
    this.degPerPixel = degPerPixel;
  }

  /** Wire pointer events from a canvas (or any element) into this mapper. */
  attach(element: HTMLElement): void {
    element.addEventListener("pointerdown", (event) => {
      element.setPointerCapture?.(event.pointerId);
      this.pointerDown(event.clientX, event.clientY, event.shiftKey || event.button === 2);
      event.preventDefault();
    });
    element.addEventListener("pointermove", (event) => {
      this.pointerMove(event.clientX, event.clientY);
    });
    element.addEventListener("pointerup", () => this.pointerUp());
    element.addEventListener("pointercancel", () => this.pointerUp());
    element.addEventListener("contextmenu", (event) => event.preventDefault());
  }

  pointerDown(x: number, y: number, rollMode: boolean): void {
    this.drag = { x, y, rollMode, base: { ...this.current } };
  }

  pointerMove(x: number, y: number): void {
    if (this.drag === null) {
      return;
    }
    this.current = applyDrag(
      this.drag.base,
      x - this.drag.x,
      y - this.drag.y,
      this.drag.rollMode,
      this.degPerPixel,
    );
  }

  pointerUp(): void {
    this.drag = null;
  }

  engaged(): boolean {
    return this.drag !== null || this.sensorEngaged;
  }

  /** Current angles while engaged, null otherwise. */
  sample(): OrientationAngles | null {
    return this.engaged() ? { ...this.current } : null;
  }

  /** Latest angles regardless of engagement (for on-screen readouts). */
  angles(): OrientationAngles {
    return { ...this.current };
  }

  reset(): void {
    this.current = { heading: 0, pitch: 0, roll: 0 };
    this.drag = null;
  }

  static deviceOrientationSupported(win: Window = window): boolean {
    return "DeviceOrientationEvent" in win;
  }

  /**
   * Feed device-orientation sensor events instead of the pointer. While
   * enabled the input counts as engaged, so the stream runs continuously.
   */
  enableDeviceOrientation(win: Window = window): void {
    if (!PointerInput.deviceOrientationSupported(win)) {
      return;
    }
    this.sensorEngaged = true;
    win.addEventListener("deviceorientation", this.onDeviceOrientation);
  }

  disableDeviceOrientation(win: Window = window): void {
    this.sensorEngaged = false;
    win.removeEventListener("deviceorientation", this.onDeviceOrientation);
  }

  private onDeviceOrientation = (event: DeviceOrientationEvent): void => {
    if (event.alpha === null || event.beta === null || event.gamma === null) {
      return;
    }
    this.current = {
      heading: wrapHeading(event.alpha),
      pitch: clamp(event.beta, PITCH_LIMIT_DEG),
      roll: clamp(event.gamma, ROLL_LIMIT_DEG),
    };
  };
}
