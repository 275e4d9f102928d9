import { describe, expect, it } from "vitest";

import { parseQuestionPage, parseSubmitAck } from "../src/types.js";

const validPage = {
  pageToken: "pg-000000",
  jobLabel: "bicycle",
  tasks: [
    {
      taskId: "job-0000:r0:p0:v0",
      kind: "patch-label",
      rect: { x: 0, y: 0, w: 80, h: 80 },
      imageId: "img-000",
      jobId: "job-0000",
      imageUrl: "/patches/job-0000:r0:p0:v0.png",
    },
  ],
  issuedAtMs: 123,
};

describe("parseQuestionPage", () => {
  it("accepts a well-formed payload", () => {
    const page = parseQuestionPage(validPage);
    expect(page.pageToken).toBe("pg-000000");
    expect(page.tasks[0]!.rect.w).toBe(80);
  });

  it("accepts a null jobId on test questions", () => {
    const payload = structuredClone(validPage) as Record<string, unknown>;
    (payload.tasks as Array<Record<string, unknown>>)[0]!.jobId = null;
    expect(parseQuestionPage(payload).tasks[0]!.jobId).toBeNull();
  });

  it.each([
    ["missing token", (p: Record<string, unknown>) => delete p.pageToken],
    ["empty tasks", (p: Record<string, unknown>) => (p.tasks = [])],
    ["tasks not a list", (p: Record<string, unknown>) => (p.tasks = "nope")],
    [
      "non-numeric rect",
      (p: Record<string, unknown>) =>
        ((p.tasks as Array<Record<string, unknown>>)[0]!.rect = { x: "0" }),
    ],
    ["non-numeric issuedAtMs", (p: Record<string, unknown>) => (p.issuedAtMs = "later")],
  ])("rejects %s", (_name, mutate) => {
    const payload = structuredClone(validPage) as Record<string, unknown>;
    mutate(payload);
    expect(() => parseQuestionPage(payload)).toThrow(TypeError);
  });

  it("rejects non-object payloads", () => {
    expect(() => parseQuestionPage(null)).toThrow(TypeError);
    expect(() => parseQuestionPage([1, 2])).toThrow(TypeError);
  });
});

describe("parseSubmitAck", () => {
  it("passes through accepted and rejected", () => {
    expect(parseSubmitAck({ status: "accepted" }).status).toBe("accepted");
    expect(parseSubmitAck({ status: "rejected" }).status).toBe("rejected");
  });

  it("keeps the validity payload when present", () => {
    const ack = parseSubmitAck({ status: "accepted", validity: { score: 1.0 } });
    expect(ack.validity).toEqual({ score: 1.0 });
  });

  it("rejects unknown statuses", () => {
    expect(() => parseSubmitAck({ status: "maybe" })).toThrow(TypeError);
    expect(() => parseSubmitAck("accepted")).toThrow(TypeError);
  });
});
