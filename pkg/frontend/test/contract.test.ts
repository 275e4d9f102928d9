/**
 * Contract tests against a mock task server: answer ordering, elapsed-time
 * reporting, polygon gating, and idempotent retry on a flaky network.
 */
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { PageViewState } from "../src/pageState.js";
import { PolygonDraft } from "../src/polygon.js";
import { MockTaskServer } from "./mockServer.js";

let server: MockTaskServer;
let baseUrl: string;

beforeEach(async () => {
  server = new MockTaskServer({ taskCount: 6, pages: 4 });
  baseUrl = await server.start();
});

afterEach(async () => {
  await server.close();
});

describe("question page round trip", () => {
  it("submits a six-patch page in task order with positive elapsedMs", async () => {
    const client = new ApiClient(baseUrl);
    const page = await client.nextPage("w00");
    expect(page).not.toBeNull();
    expect(page!.tasks).toHaveLength(6);

    let now = 10_000;
    const state = new PageViewState(page!, () => now);
    expect(state.canSubmit).toBe(false);
    page!.tasks.forEach((_, i) => state.markLoaded(i));
    expect(state.canSubmit).toBe(true);

    state.toggle(1);
    state.toggle(4);
    now = 16_350;

    const ack = await client.submitAnswers(
      page!.pageToken,
      "w00",
      state.answers(),
      state.elapsedMs(),
    );
    expect(ack.status).toBe("accepted");

    expect(server.submissions).toHaveLength(1);
    const seen = server.submissions[0]!;
    expect(seen.pageToken).toBe(page!.pageToken);
    expect(seen.taskIds).toEqual(page!.tasks.map((t) => t.taskId));
    expect(seen.answers).toEqual([false, true, false, false, true, false]);
    expect(seen.elapsedMs).toBe(6350);
    expect(seen.elapsedMs).toBeGreaterThan(0);

    const selectedTaskIds = seen.taskIds.filter((_, i) => seen.answers[i]);
    expect(selectedTaskIds).toEqual([page!.tasks[1]!.taskId, page!.tasks[4]!.taskId]);
  });

  it("returns null when the server has no work", async () => {
    server.pagesRemaining = 0;
    const client = new ApiClient(baseUrl);
    expect(await client.nextPage("w00")).toBeNull();
  });

  it("surfaces server-side validation as ApiError", async () => {
    const client = new ApiClient(baseUrl);
    const page = await client.nextPage("w00");
    await expect(
      client.submitAnswers(page!.pageToken, "w00", [true], 100),
    ).rejects.toMatchObject({ name: "ApiError", status: 422 });
  });
});

describe("polygon mode", () => {
  it("gates submission at five vertices and round-trips to the server", async () => {
    const client = new ApiClient(baseUrl);
    const draft = new PolygonDraft("img-000", 256, 256);
    draft.addVertex(10, 10);
    draft.addVertex(200, 15);
    draft.addVertex(210, 190);
    draft.addVertex(100, 230);
    expect(draft.canSubmit).toBe(false);
    draft.addVertex(12, 180);
    expect(draft.canSubmit).toBe(true);

    const ack = await client.submitPolygon("img-000", "w00", draft.toRequestPoints(), 4200);
    expect(ack.accepted).toBe(true);
    expect(server.polygons).toHaveLength(1);
  });

  it("the server rejects what the client gate prevents", async () => {
    const client = new ApiClient(baseUrl);
    const four: Array<[number, number]> = [
      [10, 10],
      [50, 10],
      [50, 50],
      [10, 50],
    ];
    await expect(client.submitPolygon("img-000", "w00", four, 1000)).rejects.toMatchObject({
      name: "ApiError",
      status: 422,
    });
  });
});

describe("idempotent retry", () => {
  it("a response lost in transit is retried and lands exactly once", async () => {
    server.dropResponses = 1;
    const client = new ApiClient(baseUrl, { retryDelayMs: 5 });
    const page = await client.nextPage("w01");
    const state = new PageViewState(page!, () => 1);
    page!.tasks.forEach((_, i) => state.markLoaded(i));
    state.toggle(0);

    const ack = await client.submitAnswers(page!.pageToken, "w01", state.answers(), 900);
    expect(ack.status).toBe("accepted");
    expect(ack.deduplicated).toBe(true);

    expect(server.submissions).toHaveLength(1);
    expect(server.submissions[0]!.answers).toEqual([true, false, false, false, false, false]);
  });

  it("a plain double submit is refused and leaves one effect", async () => {
    const client = new ApiClient(baseUrl);
    const page = await client.nextPage("w02");
    const answers = [false, false, true, false, false, false];

    const first = await client.submitAnswers(page!.pageToken, "w02", answers, 500);
    expect(first.status).toBe("accepted");
    await expect(
      client.submitAnswers(page!.pageToken, "w02", answers, 500),
    ).rejects.toMatchObject({ name: "ApiError", status: 409 });
    expect(server.submissions).toHaveLength(1);
  });

  it("gives up after exhausting retries when the network stays down", async () => {
    server.blackhole = true;
    const client = new ApiClient(baseUrl, { retries: 2, retryDelayMs: 5 });
    const page = await client.nextPage("w03");
    await expect(
      client.submitAnswers(page!.pageToken, "w03", new Array(6).fill(false), 100),
    ).rejects.toThrow();
    expect(server.submissions).toHaveLength(0);
  });
});
