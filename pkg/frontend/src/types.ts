/**
 * Wire types for the task API. The server speaks camelCase JSON; answers are
 * positional booleans, one per task, in the exact order the page lists them.
 */

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface PatchTask {
  taskId: string;
  kind: string;
  rect: Rect;
  imageId: string;
  jobId: string | null;
  imageUrl: string;
}

export interface QuestionPage {
  pageToken: string;
  jobLabel: string;
  tasks: PatchTask[];
  issuedAtMs: number;
}

export interface SubmitAck {
  status: "accepted" | "rejected";
  /** present when this submission closed the assignment */
  validity?: Record<string, unknown>;
  /** true when a retry found the submission already applied server-side */
  deduplicated?: boolean;
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function asNumber(value: unknown, field: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new TypeError(`${field} must be a finite number, got ${JSON.stringify(value)}`);
  }
  return value;
}

function asString(value: unknown, field: string): string {
  if (typeof value !== "string") {
    throw new TypeError(`${field} must be a string, got ${JSON.stringify(value)}`);
  }
  return value;
}

function parseRect(value: unknown, field: string): Rect {
  if (!isRecord(value)) throw new TypeError(`${field} must be an object`);
  return {
    x: asNumber(value.x, `${field}.x`),
    y: asNumber(value.y, `${field}.y`),
    w: asNumber(value.w, `${field}.w`),
    h: asNumber(value.h, `${field}.h`),
  };
}

function parseTask(value: unknown, field: string): PatchTask {
  if (!isRecord(value)) throw new TypeError(`${field} must be an object`);
  const jobId = value.jobId === null || value.jobId === undefined ? null : asString(value.jobId, `${field}.jobId`);
  return {
    taskId: asString(value.taskId, `${field}.taskId`),
    kind: asString(value.kind, `${field}.kind`),
    rect: parseRect(value.rect, `${field}.rect`),
    imageId: asString(value.imageId, `${field}.imageId`),
    jobId,
    imageUrl: asString(value.imageUrl, `${field}.imageUrl`),
  };
}

/** Validate a next-page response body; throws TypeError on shape mismatch. */
export function parseQuestionPage(data: unknown): QuestionPage {
  if (!isRecord(data)) throw new TypeError("page payload must be an object");
  const rawTasks = data.tasks;
  if (!Array.isArray(rawTasks) || rawTasks.length === 0) {
    throw new TypeError("page payload must carry a non-empty tasks array");
  }
  return {
    pageToken: asString(data.pageToken, "pageToken"),
    jobLabel: asString(data.jobLabel, "jobLabel"),
    tasks: rawTasks.map((task, i) => parseTask(task, `tasks[${i}]`)),
    issuedAtMs: asNumber(data.issuedAtMs, "issuedAtMs"),
  };
}

export function parseSubmitAck(data: unknown): SubmitAck {
  if (!isRecord(data)) throw new TypeError("submit ack must be an object");
  const status = asString(data.status, "status");
  if (status !== "accepted" && status !== "rejected") {
    throw new TypeError(`unexpected submit status ${JSON.stringify(status)}`);
  }
  const ack: SubmitAck = { status };
  if (isRecord(data.validity)) ack.validity = data.validity;
  return ack;
}
