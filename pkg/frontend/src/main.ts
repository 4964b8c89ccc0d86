/**
 * Teleoperation panel: wires the gateway client, pointer input, and scene
 * renderer into a single page. The panel renders only what the server
 * reports — connection state, condition, live bend state, backbone, game
 * phase and coin counts — and sends only protocol-built client frames.
 */

import { ConnectionState, GatewayClient, SessionView } from "./client.js";
import { PointerInput } from "./input.js";
import { SceneRenderer } from "./render.js";
import { CONDITIONS, ConditionName, PayoutMessage, STAGES, StageName } from "./protocol.js";

const CANVAS_WIDTH = 640;
const CANVAS_HEIGHT = 520;
const PAYOUT_STEP_MS = 150;
const PAYOUT_LINGER_MS = 4000;

/**
 * Coins shown by the payout animation after `elapsedMs`: the first coin
 * drops immediately and one more follows every step until all are out.
 */
export function payoutDisplayCount(elapsedMs: number, coins: number, stepMs: number = PAYOUT_STEP_MS): number {
  if (coins <= 0 || elapsedMs < 0) {
    return 0;
  }
  return Math.min(coins, 1 + Math.floor(elapsedMs / stepMs));
}

/** Derive the gateway WebSocket URL from ?gateway=... or the page origin. */
export function gatewayUrl(location: { search: string; protocol: string; host: string }): string {
  const fromQuery = new URLSearchParams(location.search).get("gateway");
  if (fromQuery !== null && fromQuery !== "") {
    return fromQuery;
  }
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const host = location.host !== "" ? location.host : "127.0.0.1:8000";
  return `${scheme}://${host}/ws`;
}

const CONNECTION_LABELS: Record<ConnectionState, string> = {
  idle: "idle",
  connecting: "connecting…",
  connected: "connected",
  reconnecting: "reconnecting…",
  closed: "closed",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className !== undefined) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class TeleopPanel {
  private readonly client: GatewayClient;
  private readonly input = new PointerInput();
  private readonly root = el("div", "teleop");

  private renderer: SceneRenderer | null = null;
  private connectionPill = el("span", "pill");
  private latencyLabel = el("span", "latency");
  private errorBadge = el("span", "error-badge");
  private conditionBadge = el("span", "badge");
  private stageLabel = el("span");
  private phaseLabel = el("span");
  private insertedLabel = el("span");
  private returnedLabel = el("span");
  private anglesLabel = el("span", "angles");
  private conditionSelect = el("select");
  private coinButton = el("button", "coin", "Insert coin");
  private stageButtons = new Map<StageName, HTMLButtonElement>();
  private payoutBanner = el("div", "payout");
  private payoutStartedMs: number | null = null;
  private payoutCoins = 0;
  private animationFrame: number | null = null;

  constructor(url: string) {
    this.client = new GatewayClient(url, {
      onPayout: (payout) => this.onPayout(payout),
    });
  }

  mount(parent: HTMLElement): void {
    const header = el("div", "header");
    header.append(this.connectionPill, this.conditionBadge, this.latencyLabel, this.errorBadge);

    const canvas = el("canvas", "scene");
    canvas.width = CANVAS_WIDTH;
    canvas.height = CANVAS_HEIGHT;
    const ctx = canvas.getContext("2d");
    if (ctx !== null) {
      this.renderer = new SceneRenderer(ctx, CANVAS_WIDTH, CANVAS_HEIGHT);
    }
    this.input.attach(canvas);

    const controls = el("div", "controls");
    controls.append(
      this.buildConditionRow(),
      this.buildStageRow(),
      this.buildGameRow(),
      this.buildSessionRow(),
      this.payoutBanner,
    );

    this.root.append(header, canvas, controls);
    parent.append(this.root);

    this.client.connect();
    this.client.startOrientationStream(() => this.input.sample());
    const loop = (): void => {
      this.renderFrame();
      this.animationFrame = requestAnimationFrame(loop);
    };
    this.animationFrame = requestAnimationFrame(loop);
  }

  unmount(): void {
    if (this.animationFrame !== null) {
      cancelAnimationFrame(this.animationFrame);
      this.animationFrame = null;
    }
    this.client.close();
    this.root.remove();
  }

  private buildConditionRow(): HTMLElement {
    const row = el("div", "row");
    this.fillConditionOptions([...CONDITIONS]);
    this.conditionSelect.addEventListener("change", () => {
      this.client.setCondition(this.conditionSelect.value as ConditionName);
    });
    row.append(el("label", undefined, "Condition"), this.conditionSelect);
    return row;
  }

  private fillConditionOptions(conditions: string[]): void {
    this.conditionSelect.replaceChildren();
    for (const condition of conditions) {
      const option = el("option", undefined, condition);
      option.value = condition;
      this.conditionSelect.append(option);
    }
  }

  private buildStageRow(): HTMLElement {
    const row = el("div", "row");
    row.append(el("label", undefined, "Stage"));
    for (const stage of STAGES) {
      const button = el("button", "stage", stage);
      button.addEventListener("click", () => this.client.setStage(stage));
      this.stageButtons.set(stage, button);
      row.append(button);
    }
    row.append(this.stageLabel);
    return row;
  }

  private buildGameRow(): HTMLElement {
    const row = el("div", "row");
    this.coinButton.addEventListener("click", () => this.client.insertCoin());
    row.append(
      this.coinButton,
      el("label", undefined, "phase"),
      this.phaseLabel,
      el("label", undefined, "in"),
      this.insertedLabel,
      el("label", undefined, "out"),
      this.returnedLabel,
    );
    return row;
  }

  private buildSessionRow(): HTMLElement {
    const row = el("div", "row");
    const reset = el("button", undefined, "Reset session");
    reset.addEventListener("click", () => {
      this.client.reset();
      this.input.reset();
    });
    row.append(reset);
    if (PointerInput.deviceOrientationSupported()) {
      const sensors = el("button", undefined, "Use device sensors");
      let enabled = false;
      sensors.addEventListener("click", () => {
        enabled = !enabled;
        if (enabled) {
          this.input.enableDeviceOrientation();
          sensors.textContent = "Stop device sensors";
        } else {
          this.input.disableDeviceOrientation();
          sensors.textContent = "Use device sensors";
        }
      });
      row.append(sensors);
    }
    row.append(this.anglesLabel);
    return row;
  }

  private onPayout(payout: PayoutMessage): void {
    this.payoutStartedMs = performance.now();
    this.payoutCoins = payout.coins;
  }

  private renderFrame(): void {
    const now = performance.now();
    const view = this.client.view();
    this.renderer?.render(this.client.sample(now), view.config?.l0 ?? 1.0, view.fresh);
    this.renderStatus(view, now);
  }

  private renderStatus(view: SessionView, nowMs: number): void {
    this.connectionPill.textContent = CONNECTION_LABELS[view.connection];
    this.connectionPill.dataset.state = view.connection;
    this.latencyLabel.textContent =
      view.staleMs === null ? "— ms" : `${Math.round(view.staleMs)} ms`;
    this.latencyLabel.dataset.stale = view.staleMs !== null && view.staleMs > 500 ? "yes" : "no";

    const problems: string[] = [];
    if (view.malformedFrames > 0) {
      problems.push(`${view.malformedFrames} malformed frame${view.malformedFrames === 1 ? "" : "s"}`);
    }
    if (view.lastError !== null) {
      problems.push(view.lastError);
    }
    this.errorBadge.textContent = problems.join(" · ");
    this.errorBadge.style.display = problems.length > 0 ? "inline-block" : "none";

    this.conditionBadge.textContent = view.condition ?? "—";
    // The server's condition list is authoritative once it arrives.
    const conditions = view.config?.conditions ?? [...CONDITIONS];
    const current = Array.from(this.conditionSelect.options, (option) => option.value);
    if (current.join(",") !== conditions.join(",")) {
      this.fillConditionOptions(conditions);
    }
    if (view.condition !== null && this.conditionSelect.value !== view.condition) {
      this.conditionSelect.value = view.condition;
    }
    this.stageLabel.textContent = view.stage ?? "—";
    for (const [stage, button] of this.stageButtons) {
      button.dataset.active = stage === view.stage ? "yes" : "no";
    }
    this.phaseLabel.textContent = view.gamePhase ?? "—";
    this.insertedLabel.textContent = String(view.coinsInserted);
    this.returnedLabel.textContent = String(view.coinsReturned);

    const limitReached =
      view.config !== null && view.coinsInserted >= view.config.coin_limit;
    this.coinButton.disabled =
      view.connection !== "connected" ||
      view.stage !== "game" ||
      view.gamePhase === "paying" ||
      view.gamePhase === "done" ||
      limitReached;

    const angles = this.input.angles();
    this.anglesLabel.textContent =
      `h ${angles.heading.toFixed(0)}°  p ${angles.pitch.toFixed(0)}°  r ${angles.roll.toFixed(0)}°`;

    if (this.payoutStartedMs !== null) {
      const elapsed = nowMs - this.payoutStartedMs;
      if (elapsed > PAYOUT_LINGER_MS) {
        this.payoutStartedMs = null;
        this.payoutBanner.textContent = "";
        this.payoutBanner.style.display = "none";
      } else {
        const shown = payoutDisplayCount(elapsed, this.payoutCoins);
        this.payoutBanner.textContent = `Returned ${shown} / ${this.payoutCoins} coins ${"●".repeat(shown)}`;
        this.payoutBanner.style.display = "block";
      }
    }
  }
}

function bootstrap(): void {
  const parent = document.getElementById("app");
  if (parent === null) {
    return;
  }
  const panel = new TeleopPanel(gatewayUrl(window.location));
  panel.mount(parent);
}

if (typeof document !== "undefined" && typeof window !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", bootstrap);
  } else {
    bootstrap();
  }
}
