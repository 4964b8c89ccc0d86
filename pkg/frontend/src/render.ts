/**
 * Scene rendering: the robot backbone as a polyline in an oblique 2.5D
 * projection, plus a ground shadow and tip marker.
 *
 * Everything drawn here comes straight from server state frames — the UI
 * never re-derives the pose from cable lengths or orientation angles. Pose
 * interpolation between consecutive frames is pure and exported so the
 * frame-pacing behaviour can be tested without a canvas.
 */

import type { BackbonePoint, StateMessage } from "./protocol.js";

export interface Pose {
  theta: number;
  phi: number;
  backbone: BackbonePoint[];
}

/** Linear interpolation. */
export function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

/** Interpolate two angles in degrees along the shortest arc. */
export function lerpAngleDeg(a: number, b: number, t: number): number {
  let delta = (b - a) % 360;
  if (delta > 180) {
    delta -= 360;
  } else if (delta < -180) {
    delta += 360;
  }
  let result = (a + delta * t) % 360;
  if (result >= 180) {
    result -= 360;
  } else if (result < -180) {
    result += 360;
  }
  return result;
}

/**
 * Blend two consecutive state frames. The bend direction wraps, so theta is
 * interpolated on the circle; everything else is linear. Backbones of
 * mismatched length fall back to the newer frame unblended.
 */
export function interpolatePose(
  a: Pick<StateMessage, "theta" | "phi" | "backbone">,
  b: Pick<StateMessage, "theta" | "phi" | "backbone">,
  t: number,
): Pose {
  if (t <= 0) {
    return { theta: a.theta, phi: a.phi, backbone: a.backbone };
  }
  if (t >= 1 || a.backbone.length !== b.backbone.length) {
    return { theta: b.theta, phi: b.phi, backbone: b.backbone };
  }
  const backbone = a.backbone.map((pa, i): BackbonePoint => {
    const pb = b.backbone[i];
    return [lerp(pa[0], pb[0], t), lerp(pa[1], pb[1], t), lerp(pa[2], pb[2], t)];
  });
  return {
    theta: lerpAngleDeg(a.theta, b.theta, t),
    phi: lerp(a.phi, b.phi, t),
    backbone,
  };
}

export interface Viewport {
  /** Pixels per metre. */
  scale: number;
  /** Canvas x of the robot base. */
  baseX: number;
  /** Canvas y of the robot base. */
  baseY: number;
}

/** Depth slope of the oblique projection (y-axis receding up-right). */
const DEPTH_X = 0.38;
const DEPTH_Y = 0.18;

/**
 * Project a robot-frame point (metres, z up) to canvas pixels. x runs right,
 * y recedes into the scene, z is height above the base plate.
 */
export function projectPoint(point: BackbonePoint, view: Viewport): [number, number] {
  const [x, y, z] = point;
  return [
    view.baseX + view.scale * (x + DEPTH_X * y),
    view.baseY - view.scale * (z + DEPTH_Y * y),
  ];
}

/** Fit a robot of backbone length l0 into a canvas, with breathing room. */
export function fitViewport(width: number, height: number, l0: number): Viewport {
  const scale = Math.min(width, height) / (1.6 * Math.max(l0, 1e-6));
  return { scale, baseX: width / 2, baseY: height * 0.88 };
}

const COLORS = {
  background: "#10141a",
  grid: "#232a33",
  shadow: "#1c232c",
  backbone: "#58a6ff",
  backboneStale: "#8b949e",
  tip: "#f0b429",
  base: "#30363d",
};

export class SceneRenderer {
  private readonly ctx: CanvasRenderingContext2D;
  private readonly width: number;
  private readonly height: number;
  private lastPose: Pose | null = null;

  constructor(ctx: CanvasRenderingContext2D, width: number, height: number) {
    this.ctx = ctx;
    this.width = width;
    this.height = height;
  }

  /**
   * Draw one frame. A null pose keeps the previously rendered one so the
   * robot holds still across gaps in the stream instead of vanishing.
   */
  render(pose: Pose | null, l0: number, fresh: boolean): void {
    if (pose !== null) {
      this.lastPose = pose;
    }
    const ctx = this.ctx;
    ctx.fillStyle = COLORS.background;
    ctx.fillRect(0, 0, this.width, this.height);

    const view = fitViewport(this.width, this.height, l0);
    this.drawGround(view, l0);
    const drawn = this.lastPose;
    if (drawn === null) {
      return;
    }

    const shadow = drawn.backbone.map((p): BackbonePoint => [p[0], p[1], 0]);
    this.drawPolyline(shadow, view, COLORS.shadow, 3);
    this.drawPolyline(drawn.backbone, view, fresh ? COLORS.backbone : COLORS.backboneStale, 4);

    const tip = drawn.backbone[drawn.backbone.length - 1];
    const [tx, ty] = projectPoint(tip, view);
    ctx.beginPath();
    ctx.arc(tx, ty, 6, 0, 2 * Math.PI);
    ctx.fillStyle = COLORS.tip;
    ctx.fill();
  }

  private drawGround(view: Viewport, l0: number): void {
    const ctx = this.ctx;
    const r = 0.45 * l0;
    ctx.strokeStyle = COLORS.grid;
    ctx.lineWidth = 1;
    for (const radius of [r / 2, r]) {
      ctx.beginPath();
      const steps = 48;
      for (let i = 0; i <= steps; i += 1) {
        const a = (2 * Math.PI * i) / steps;
        const [px, py] = projectPoint([radius * Math.cos(a), radius * Math.sin(a), 0], view);
        if (i === 0) {
          ctx.moveTo(px, py);
        } else {
          ctx.lineTo(px, py);
        }
      }
      ctx.stroke();
    }
    const [bx, by] = projectPoint([0, 0, 0], view);
    ctx.beginPath();
    ctx.arc(bx, by, 5, 0, 2 * Math.PI);
    ctx.fillStyle = COLORS.base;
    ctx.fill();
  }

  private drawPolyline(
    points: BackbonePoint[],
    view: Viewport,
    color: string,
    width: number,
  ): void {
    const ctx = this.ctx;
    ctx.beginPath();
    points.forEach((point, i) => {
      const [px, py] = projectPoint(point, view);
      if (i === 0) {
        ctx.moveTo(px, py);
      } else {
        ctx.lineTo(px, py);
      }
    });
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.stroke();
  }
}
