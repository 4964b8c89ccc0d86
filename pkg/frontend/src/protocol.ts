/**
 * Gateway wire protocol.
 *
 * Every WebSocket text frame carries exactly one JSON object, and every
 * object carries the protocol version under `v`.
 *
 * Client -> server:
 *   {v, type: "orientation", heading, pitch, roll}   angles in degrees
 *   {v, type: "coin"}                                insert one coin
 *   {v, type: "set_condition", condition}            switch motion condition
 *   {v, type: "set_stage", stage}                    switch session stage
 *   {v, type: "reset"}                               restart the session
 *
 * Server -> client:
 *   {v, type: "config", ...}   session constants, sent on connect and reset
 *   {v, type: "state", ...}    pose + game snapshot at the broadcast rate
 *   {v, type: "payout", ...}   trust-game decision result
 *   {v, type: "error", error}  rejected or unreadable client frame
 *
 * The builders below are the only way the UI constructs outgoing frames,
 * so a schema check over their output covers everything the UI can send.
 */

export const PROTOCOL_VERSION = 1;

export const CONDITIONS = ["simple", "random", "synchronized", "replay"] as const;
export const STAGES = ["explore", "questionnaire", "game"] as const;

export type ConditionName = (typeof CONDITIONS)[number];
export type StageName = (typeof STAGES)[number];

export interface OrientationMessage {
  v: typeof PROTOCOL_VERSION;
  type: "orientation";
  heading: number;
  pitch: number;
  roll: number;
}

export interface CoinMessage {
  v: typeof PROTOCOL_VERSION;
  type: "coin";
}

export interface SetConditionMessage {
  v: typeof PROTOCOL_VERSION;
  type: "set_condition";
  condition: ConditionName;
}

export interface SetStageMessage {
  v: typeof PROTOCOL_VERSION;
  type: "set_stage";
  stage: StageName;
}

export interface ResetMessage {
  v: typeof PROTOCOL_VERSION;
  type: "reset";
}

export type ClientMessage =
  | OrientationMessage
  | CoinMessage
  | SetConditionMessage
  | SetStageMessage
  | ResetMessage;

export interface ConfigMessage {
  v: number;
  type: "config";
  condition: string;
  conditions: string[];
  stages: string[];
  stage: string;
  loop_rate: number;
  broadcast_rate: number;
  phi_max_deg: number;
  l0: number;
  coin_limit: number;
  decision_idle_seconds: number;
}

export type BackbonePoint = [number, number, number];

export interface StateMessage {
  v: number;
  type: "state";
  t: number;
  theta: number;
  phi: number;
  backbone: BackbonePoint[];
  dl: number[];
  condition: string;
  stage: string;
  game_phase: string;
  coins_inserted: number;
  coins_returned: number;
  fresh: boolean;
}

export interface PayoutMessage {
  v: number;
  type: "payout";
  coins: number;
  inserted: number;
}

export interface ErrorMessage {
  v: number;
  type: "error";
  error: string;
}

export type ServerMessage = ConfigMessage | StateMessage | PayoutMessage | ErrorMessage;

function requireFinite(value: number, name: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new Error(`${name} must be a finite number, got ${value}`);
  }
  return value;
}

/** Build an orientation frame; angles are degrees and must be finite. */
export function orientationMessage(
  heading: number,
  pitch: number,
  roll: number,
): OrientationMessage {
  return {
    v: PROTOCOL_VERSION,
    type: "orientation",
    heading: requireFinite(heading, "heading"),
    pitch: requireFinite(pitch, "pitch"),
    roll: requireFinite(roll, "roll"),
  };
}

export function coinMessage(): CoinMessage {
  return { v: PROTOCOL_VERSION, type: "coin" };
}

export function setConditionMessage(condition: ConditionName): SetConditionMessage {
  if (!CONDITIONS.includes(condition)) {
    throw new Error(`unknown condition: ${condition}`);
  }
  return { v: PROTOCOL_VERSION, type: "set_condition", condition };
}

export function setStageMessage(stage: StageName): SetStageMessage {
  if (!STAGES.includes(stage)) {
    throw new Error(`unknown stage: ${stage}`);
  }
  return { v: PROTOCOL_VERSION, type: "set_stage", stage };
}

export function resetMessage(): ResetMessage {
  return { v: PROTOCOL_VERSION, type: "reset" };
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function isNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

function isString(value: unknown): value is string {
  return typeof value === "string";
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every(isString);
}

function isBackbone(value: unknown): value is BackbonePoint[] {
  return (
    Array.isArray(value) &&
    value.length > 0 &&
    value.every(
      (point) => Array.isArray(point) && point.length === 3 && point.every(isNumber),
    )
  );
}

function isConfigMessage(msg: Record<string, unknown>): msg is ConfigMessage & Record<string, unknown> {
  return (
    isString(msg.condition) &&
    isStringArray(msg.conditions) &&
    isStringArray(msg.stages) &&
    isString(msg.stage) &&
    isNumber(msg.loop_rate) &&
    isNumber(msg.broadcast_rate) &&
    isNumber(msg.phi_max_deg) &&
    isNumber(msg.l0) &&
    isNumber(msg.coin_limit) &&
    isNumber(msg.decision_idle_seconds)
  );
}

function isStateMessage(msg: Record<string, unknown>): msg is StateMessage & Record<string, unknown> {
  return (
    isNumber(msg.t) &&
    isNumber(msg.theta) &&
    isNumber(msg.phi) &&
    isBackbone(msg.backbone) &&
    Array.isArray(msg.dl) &&
    msg.dl.length === 3 &&
    msg.dl.every(isNumber) &&
    isString(msg.condition) &&
    isString(msg.stage) &&
    isString(msg.game_phase) &&
    isNumber(msg.coins_inserted) &&
    isNumber(msg.coins_returned) &&
    typeof msg.fresh === "boolean"
  );
}

function isPayoutMessage(msg: Record<string, unknown>): msg is PayoutMessage & Record<string, unknown> {
  return isNumber(msg.coins) && isNumber(msg.inserted);
}

function isErrorMessage(msg: Record<string, unknown>): msg is ErrorMessage & Record<string, unknown> {
  return isString(msg.error);
}

/**
 * Parse one incoming text frame. Returns null for anything that is not a
 * well-formed server message of the expected protocol version; callers keep
 * their last good state when that happens.
 */
export function parseServerMessage(data: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(data);
  } catch {
    return null;
  }
  if (!isRecord(raw) || raw.v !== PROTOCOL_VERSION) {
    return null;
  }
  switch (raw.type) {
    case "config":
      return isConfigMessage(raw) ? raw : null;
    case "state":
      return isStateMessage(raw) ? raw : null;
    case "payout":
      return isPayoutMessage(raw) ? raw : null;
    case "error":
      return isErrorMessage(raw) ? raw : null;
    default:
      return null;
  }
}
