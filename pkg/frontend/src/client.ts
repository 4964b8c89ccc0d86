/**
 * Gateway session client.
 *
 * Owns the WebSocket lifecycle: connects, reconnects with exponential
 * backoff after drops, and parses every incoming frame through the protocol
 * guards. Incoming state goes into a latest-state buffer — rendering reads
 * the newest frame (interpolating from the one before it) at its own pace,
 * so a slow or bursty stream never blocks ingestion and vice versa.
 *
 * Outgoing frames are only ever produced by the protocol builders, and an
 * orientation source can be streamed at a fixed rate while it is engaged.
 */

import {
  ClientMessage,
  ConditionName,
  ConfigMessage,
  PayoutMessage,
  StageName,
  StateMessage,
  coinMessage,
  orientationMessage,
  parseServerMessage,
  resetMessage,
  setConditionMessage,
  setStageMessage,
} from "./protocol.js";
import { Pose, interpolatePose } from "./render.js";

export type ConnectionState = "idle" | "connecting" | "connected" | "reconnecting" | "closed";

/** The subset of the WebSocket API the client relies on (injectable in tests). */
export interface SocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
}

const SOCKET_OPEN = 1;

const BACKOFF_BASE_MS = 500;
const BACKOFF_MAX_MS = 8000;
export const ORIENTATION_RATE_HZ = 50;

export interface OrientationAngles {
  heading: number;
  pitch: number;
  roll: number;
}

/** Everything the panel needs to render one moment of the session. */
export interface SessionView {
  connection: ConnectionState;
  config: ConfigMessage | null;
  condition: string | null;
  stage: string | null;
  gamePhase: string | null;
  coinsInserted: number;
  coinsReturned: number;
  fresh: boolean;
  /** Milliseconds since the newest state frame arrived, null before the first. */
  staleMs: number | null;
  lastError: string | null;
  malformedFrames: number;
}

export interface GatewayClientOptions {
  socketFactory?: (url: string) => SocketLike;
  /** Monotonic clock in milliseconds; defaults to performance.now. */
  now?: () => number;
  onUpdate?: () => void;
  onPayout?: (payout: PayoutMessage) => void;
  onError?: (error: string) => void;
}

interface BufferedState {
  state: StateMessage;
  arrivedMs: number;
}

export class GatewayClient {
  private readonly url: string;
  private readonly socketFactory: (url: string) => SocketLike;
  private readonly now: () => number;
  private readonly onUpdate: () => void;
  private readonly onPayout: (payout: PayoutMessage) => void;
  private readonly onError: (error: string) => void;

  private socket: SocketLike | null = null;
  private connection: ConnectionState = "idle";
  private attempt = 0;
  private shouldRun = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private streamTimer: ReturnType<typeof setInterval> | null = null;

  private config: ConfigMessage | null = null;
  private latest: BufferedState | null = null;
  private previous: BufferedState | null = null;
  private lastPayout: PayoutMessage | null = null;
  private lastError: string | null = null;
  private malformedFrames = 0;

  constructor(url: string, options: GatewayClientOptions = {}) {
    this.url = url;
    this.socketFactory =
      options.socketFactory ?? ((target) => new WebSocket(target) as unknown as SocketLike);
    this.now = options.now ?? (() => performance.now());
    this.onUpdate = options.onUpdate ?? (() => {});
    this.onPayout = options.onPayout ?? (() => {});
    this.onError = options.onError ?? (() => {});
  }

  /** Open the connection and keep it alive until close() is called. */
  connect(): void {
    if (this.shouldRun) {
      return;
    }
    this.shouldRun = true;
    this.attempt = 0;
    this.open();
  }

  /** Close the connection and stop reconnecting. */
  close(): void {
    this.shouldRun = false;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.stopOrientationStream();
    if (this.socket !== null) {
      const socket = this.socket;
      this.socket = null;
      socket.onopen = null;
      socket.onclose = null;
      socket.onerror = null;
      socket.onmessage = null;
      socket.close();
    }
    this.connection = "closed";
    this.onUpdate();
  }

  private open(): void {
    this.connection = this.attempt === 0 ? "connecting" : "reconnecting";
    this.onUpdate();
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempt = 0;
      this.connection = "connected";
      this.onUpdate();
    };
    socket.onclose = () => {
      if (this.socket !== socket) {
        return;
      }
      this.socket = null;
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // The close handler owns recovery; nothing to do here.
    };
    socket.onmessage = (event) => {
      if (typeof event.data === "string") {
        this.handleFrame(event.data);
      }
    };
  }

  private scheduleReconnect(): void {
    if (!this.shouldRun) {
      return;
    }
    this.connection = "reconnecting";
    this.onUpdate();
    const delay = Math.min(BACKOFF_BASE_MS * 2 ** this.attempt, BACKOFF_MAX_MS);
    this.attempt += 1;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (this.shouldRun) {
        this.open();
      }
    }, delay);
  }

  private handleFrame(data: string): void {
    const message = parseServerMessage(data);
    if (message === null) {
      this.malformedFrames += 1;
      this.onUpdate();
      return;
    }
    switch (message.type) {
      case "config":
        this.config = message;
        // A config frame marks a session restart; interpolating a pose
        // across it would sweep the robot through meaningless positions.
        this.latest = null;
        this.previous = null;
        break;
      case "state":
        this.previous = this.latest;
        this.latest = { state: message, arrivedMs: this.now() };
        break;
      case "payout":
        this.lastPayout = message;
        this.onPayout(message);
        break;
      case "error":
        this.lastError = message.error;
        this.onError(message.error);
        break;
    }
    this.onUpdate();
  }

  private send(message: ClientMessage): void {
    if (this.socket !== null && this.socket.readyState === SOCKET_OPEN) {
      this.socket.send(JSON.stringify(message));
    }
  }

  sendOrientation(heading: number, pitch: number, roll: number): void {
    this.send(orientationMessage(heading, pitch, roll));
  }

  insertCoin(): void {
    this.send(coinMessage());
  }

  setCondition(condition: ConditionName): void {
    this.send(setConditionMessage(condition));
  }

  setStage(stage: StageName): void {
    this.send(setStageMessage(stage));
  }

  reset(): void {
    this.send(resetMessage());
  }

  /**
   * Poll `source` at the orientation rate and forward every non-null sample.
   * The source returns null while the pointer (or sensor) is not engaged,
   * which pauses the stream without tearing down the timer.
   */
  startOrientationStream(
    source: () => OrientationAngles | null,
    rateHz: number = ORIENTATION_RATE_HZ,
  ): void {
    this.stopOrientationStream();
    this.streamTimer = setInterval(() => {
      const angles = source();
      if (angles !== null) {
        this.sendOrientation(angles.heading, angles.pitch, angles.roll);
      }
    }, 1000 / rateHz);
  }

  stopOrientationStream(): void {
    if (this.streamTimer !== null) {
      clearInterval(this.streamTimer);
      this.streamTimer = null;
    }
  }

  /** Snapshot of everything except the pose (see sample() for that). */
  view(): SessionView {
    const state = this.latest?.state ?? null;
    return {
      connection: this.connection,
      config: this.config,
      condition: state?.condition ?? this.config?.condition ?? null,
      stage: state?.stage ?? this.config?.stage ?? null,
      gamePhase: state?.game_phase ?? null,
      coinsInserted: state?.coins_inserted ?? 0,
      coinsReturned: state?.coins_returned ?? 0,
      fresh: state?.fresh ?? false,
      staleMs: this.latest === null ? null : Math.max(this.now() - this.latest.arrivedMs, 0),
      lastError: this.lastError,
      malformedFrames: this.malformedFrames,
    };
  }

  payout(): PayoutMessage | null {
    return this.lastPayout;
  }

  /**
   * Pose to draw at wall-clock time `nowMs`, rendered one broadcast interval
   * behind the newest frame so consecutive frames can be blended. Once the
   * stream pauses the newest pose is returned as-is — the robot holds still
   * rather than extrapolating.
   */
  sample(nowMs: number): Pose | null {
    if (this.latest === null) {
      return null;
    }
    const { state: latest, arrivedMs } = this.latest;
    if (this.previous === null) {
      return { theta: latest.theta, phi: latest.phi, backbone: latest.backbone };
    }
    const gap = Math.max(arrivedMs - this.previous.arrivedMs, 1e-3);
    const alpha = Math.min(Math.max((nowMs - arrivedMs) / gap, 0), 1);
    return interpolatePose(this.previous.state, latest, alpha);
  }
}
