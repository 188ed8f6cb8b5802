/**
 * Scripted end-to-end drive of a live engine (RUN_E2E=1 to enable).
 *
 * Walks the exact code paths the browser uses: the typed API client, the
 * SSE stream, and the HTML renderers — the case study runs with a task
 * delay so both parallel tasks are observably running at once, then the
 * high-impact campaign parks on an approval that this script decides.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, ConsoleApi, RunEvent, SseParser } from "../src/api.js";
import { mergeEvents, pendingApprovals, splitSections } from "../src/model.js";
import { renderApprovals, renderDashboard, renderTaskGraph } from "../src/view.js";

const PORT = 8491;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO = path.resolve(__dirname, "..", "..");

const enabled = process.env.RUN_E2E === "1";

async function waitFor<T>(probe: () => Promise<T | null>, timeoutMs = 60_000, stepMs = 100): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const value = await probe();
      if (value !== null && value !== false) return value;
    } catch (error) {
      lastError = error;
    }
    await new Promise((resolve) => setTimeout(resolve, stepMs));
  }
  throw new Error(`timed out waiting: ${lastError ?? "condition never met"}`);
}

describe.skipIf(!enabled)("console end to end", () => {
  let server: ChildProcess;
  const api = new ConsoleApi(BASE);

  beforeAll(async () => {
    server = spawn(
      "python3",
      ["-m", "autobus.cli", "serve", "--workspace", "fixtures", "--port", String(PORT),
       "--out", mkdtempSync(path.join(tmpdir(), "console-e2e-"))],
      { cwd: REPO, stdio: "ignore" },
    );
    await waitFor(async () => (await api.listInitiatives()).length > 0);
  }, 90_000);

  afterAll(() => {
    server?.kill();
  });

  it("shows parallel tasks, gates the campaign, and resumes on approve", async () => {
    const { run_id } = await api.startRun("i1", {
      auto_approve: false,
      task_delay_s: 0.8,
    });

    // tasks 1 and 2 run concurrently while task 3 waits on its preconditions
    const concurrent = await waitFor(async () => {
      const tasks = await api.getTasks(run_id);
      const byId = Object.fromEntries(tasks.map((t) => [t.id, t.status]));
      return byId["task1"] === "running" && byId["task2"] === "running" ? byId : null;
    });
    expect(concurrent["task3"]).toBe("pending");
    const graph = renderTaskGraph(await api.getTasks(run_id), null);
    expect(graph).toContain("running");

    // the marketing program parks awaiting a human decision
    const approval = await waitFor(async () => pendingApprovals({
      ...emptyStateWith(await api.getApprovals(run_id)),
    })[0] ?? null);
    expect(approval.task).toBe("task3");
    expect(approval.reasons.join(" ")).toContain("high-impact");
    const queueHtml = renderApprovals([approval]);
    expect(queueHtml).toContain('data-decision="approved"');

    await api.decideApproval(run_id, approval.id, "approved", "e2e");
    // double-click: the second decision conflicts, surfaced verbatim
    let conflict: ApiError | null = null;
    try {
      await api.decideApproval(run_id, approval.id, "approved", "e2e-again");
    } catch (error) {
      conflict = error as ApiError;
    }
    expect(conflict?.status).toBe(409);
    expect(conflict?.detail).toContain("already");

    const summary = await waitFor(async () => {
      const run = await api.getRun(run_id);
      return run.finished ? run : null;
    });
    expect(summary.statuses).toEqual({
      task1: "completed",
      task2: "completed",
      task3: "completed",
    });
    expect(summary.evaluation?.success).toBe(true);

    // stream the full event log over SSE and render the final dashboard
    const response = await fetch(`${BASE}/runs/${run_id}/events/stream`);
    const parser = new SseParser();
    const reader = response.body!.getReader();
    const decoder = new TextDecoder();
    let events: RunEvent[] = [];
    while (true) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const data of parser.push(decoder.decode(value))) {
        if (data !== "{}") events = mergeEvents(events, [JSON.parse(data) as RunEvent]);
      }
      if (events.some((e) => e.kind === "run_finished")) break;
    }
    reader.cancel();
    const seqs = events.map((e) => e.seq);
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
    const sends = events.filter(
      (e) => e.kind === "action_invoked" && e.payload["tool"] === "marketing_send",
    );
    expect(sends.length).toBeGreaterThan(0);

    const program = await api.getProgram(run_id, "task3");
    expect(splitSections(program.program).map((s) => s.name)).toEqual([
      "facts", "rules", "actions",
    ]);

    const html = renderDashboard({
      run: summary,
      tasks: await api.getTasks(run_id),
      events,
      approvals: await api.getApprovals(run_id),
      selectedTask: "task3",
      program: program.program,
      toasts: [],
      connection: "ok",
    });
    expect(html).toContain("finished: success");
    expect(html).toContain("prog-actions");
  }, 120_000);

  it("unknown run surfaces a 404 detail", async () => {
    let failure: ApiError | null = null;
    try {
      await api.getRun("run-does-not-exist");
    } catch (error) {
      failure = error as ApiError;
    }
    expect(failure?.status).toBe(404);
    expect(failure?.detail).toContain("run-does-not-exist");
  });
});

function emptyStateWith(approvals: import("../src/api.js").Approval[]) {
  return {
    run: null,
    tasks: [],
    events: [],
    approvals,
    selectedTask: null,
    program: null,
    toasts: [],
    connection: "ok" as const,
  };
}
