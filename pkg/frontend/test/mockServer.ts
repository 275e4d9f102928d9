/**
 * In-process mock of the task API for contract tests. Mirrors the server's
 * observable behavior: positional boolean answers, one submission per page
 * token (409 on repeats), 204 when no work remains, and polygon validation.
 * A drop counter simulates a flaky network by applying the submission effect
 * and then severing the connection before any response bytes are written.
 */
import { createServer, type IncomingMessage, type Server, type ServerResponse } from "node:http";
import type { AddressInfo } from "node:net";

export interface RecordedSubmission {
  pageToken: string;
  workerId: string;
  answers: boolean[];
  elapsedMs: number;
  taskIds: string[];
}

interface IssuedPage {
  taskIds: string[];
  answered: boolean;
}

const IMAGE_SIDE = 256;

function sendJson(res: ServerResponse, status: number, body: unknown): void {
  const payload = JSON.stringify(body);
  res.writeHead(status, { "content-type": "application/json" });
  res.end(payload);
}

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (chunk: Buffer) => chunks.push(chunk));
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf8")));
    req.on("error", reject);
  });
}

export class MockTaskServer {
  readonly submissions: RecordedSubmission[] = [];
  readonly polygons: unknown[] = [];
  /** submissions to absorb and then kill the socket, no response sent */
  dropResponses = 0;
  /** sever every answers connection before processing (network fully down) */
  blackhole = false;
  pagesRemaining: number;

  private readonly taskCount: number;
  private readonly pages = new Map<string, IssuedPage>();
  private counter = 0;
  private server: Server | null = null;

  constructor(options: { taskCount?: number; pages?: number } = {}) {
    this.taskCount = options.taskCount ?? 6;
    this.pagesRemaining = options.pages ?? 1;
  }

  start(): Promise<string> {
    this.server = createServer((req, res) => {
      void this.route(req, res).catch(() => sendJson(res, 500, { error: "mock failure" }));
    });
    return new Promise((resolve) => {
      const server = this.server as Server;
      server.listen(0, "127.0.0.1", () => {
        const { port } = server.address() as AddressInfo;
        resolve(`http://127.0.0.1:${port}`);
      });
    });
  }

  close(): Promise<void> {
    return new Promise((resolve, reject) => {
      if (!this.server) return resolve();
      this.server.close((err) => (err ? reject(err) : resolve()));
    });
  }

  private issuePage(): Record<string, unknown> {
    const token = `pg-${String(this.counter).padStart(6, "0")}`;
    this.counter += 1;
    const taskIds = Array.from(
      { length: this.taskCount },
      (_, i) => `job-0000:r0:p${i}:v0`,
    );
    this.pages.set(token, { taskIds, answered: false });
    return {
      pageToken: token,
      jobLabel: "bicycle",
      tasks: taskIds.map((taskId, i) => ({
        taskId,
        kind: "patch-label",
        rect: { x: (i % 3) * 80, y: Math.floor(i / 3) * 80, w: 80, h: 80 },
        imageId: "img-000",
        jobId: "job-0000",
        imageUrl: `/patches/${taskId}.png`,
      })),
      issuedAtMs: Date.now(),
    };
  }

  private async route(req: IncomingMessage, res: ServerResponse): Promise<void> {
    const url = req.url ?? "";
    const nextPage = /^\/workers\/[^/]+\/next-page$/.exec(url);
    if (req.method === "GET" && nextPage) {
      if (this.pagesRemaining <= 0) {
        res.writeHead(204);
        res.end();
        return;
      }
      this.pagesRemaining -= 1;
      sendJson(res, 200, this.issuePage());
      return;
    }

    const answers = /^\/pages\/([^/]+)\/answers$/.exec(url);
    if (req.method === "POST" && answers) {
      if (this.blackhole) {
        req.socket.destroy();
        return;
      }
      const token = decodeURIComponent(answers[1] as string);
      const body = JSON.parse(await readBody(req)) as {
        workerId: string;
        answers: boolean[];
        elapsedMs: number;
      };
      const page = this.pages.get(token);
      if (!page) {
        sendJson(res, 404, { error: `unknown page token '${token}'` });
        return;
      }
      if (page.answered) {
        sendJson(res, 409, { error: `page ${token} already answered` });
        return;
      }
      if (!Array.isArray(body.answers) || body.answers.length !== page.taskIds.length) {
        sendJson(res, 422, {
          error: `expected ${page.taskIds.length} answers, got ${body.answers?.length ?? 0}`,
        });
        return;
      }
      if (!(body.elapsedMs > 0)) {
        sendJson(res, 422, { error: "elapsedMs must be positive" });
        return;
      }
      page.answered = true;
      this.submissions.push({
        pageToken: token,
        workerId: body.workerId,
        answers: body.answers.map(Boolean),
        elapsedMs: body.elapsedMs,
        taskIds: page.taskIds.slice(),
      });
      if (this.dropResponses > 0) {
        this.dropResponses -= 1;
        req.socket.destroy();
        return;
      }
      sendJson(res, 200, { status: "accepted" });
      return;
    }

    if (req.method === "POST" && url === "/polygons") {
      const body = JSON.parse(await readBody(req)) as {
        imageId: string;
        workerId: string;
        points: Array<[number, number]>;
        elapsedMs: number;
      };
      if (!Array.isArray(body.points) || body.points.length < 5) {
        sendJson(res, 422, {
          error: `polygon needs at least 5 points, got ${body.points?.length ?? 0}`,
        });
        return;
      }
      for (const [x, y] of body.points) {
        if (!(x >= 0 && x <= IMAGE_SIDE && y >= 0 && y <= IMAGE_SIDE)) {
          sendJson(res, 422, { error: `point (${x}, ${y}) outside image bounds` });
          return;
        }
      }
      this.polygons.push(body);
      sendJson(res, 200, { accepted: true });
      return;
    }

    sendJson(res, 404, { error: `no route for ${req.method} ${url}` });
  }
}
