/**
 * Typed client for the engine's HTTP API.
 *
 * The console is read-only except for approval decisions; every mutation
 * in this file goes through decideApproval.
 */

export interface RunSummary {
  run_id: string;
  initiative: string;
  statuses: Record<string, string>;
  rounds: number;
  finished: boolean;
  evaluation: { success: boolean; bindings: Record<string, unknown> } | null;
  stopped_early: boolean;
}

export interface TaskInfo {
  id: string;
  status: string;
  iteration: number;
  preconditions: string[];
  postconditions: string[];
}

export interface RunEvent {
  seq: number;
  timestamp: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface Approval {
  id: string;
  task: string;
  program: string;
  reasons: string[];
  decision: string;
  decider: string;
}

export interface InitiativeInfo {
  id: string;
  name: string;
  tasks: string[];
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the bare status
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ConsoleApi {
  constructor(private base: string = "") {}

  listInitiatives(): Promise<InitiativeInfo[]> {
    return request(`${this.base}/initiatives`);
  }

  startRun(initiative: string, config: Record<string, unknown> = {}): Promise<{ run_id: string }> {
    return request(`${this.base}/runs`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ initiative, config }),
    });
  }

  getRun(runId: string): Promise<RunSummary> {
    return request(`${this.base}/runs/${runId}`);
  }

  getTasks(runId: string): Promise<TaskInfo[]> {
    return request(`${this.base}/runs/${runId}/tasks`);
  }

  getEvents(runId: string, since = 0): Promise<RunEvent[]> {
    return request(`${this.base}/runs/${runId}/events?since=${since}`);
  }

  getApprovals(runId: string): Promise<Approval[]> {
    return request(`${this.base}/runs/${runId}/approvals`);
  }

  getProgram(runId: string, taskId: string): Promise<{ task: string; program: string }> {
    return request(`${this.base}/runs/${runId}/programs/${taskId}`);
  }

  decideApproval(
    runId: string,
    approvalId: string,
    decision: "approved" | "rejected",
    decider = "console",
  ): Promise<Approval> {
    return request(`${this.base}/runs/${runId}/approvals/${approvalId}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ decision, decider }),
    });
  }
}

/**
 * Incremental server-sent-events parser. Feed it raw chunks; it yields
 * the data payload of each complete event. Used by the node-side tests;
 * the browser path uses the native EventSource instead.
 */
export class SseParser {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const out: string[] = [];
    let index;
    while ((index = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, index);
      this.buffer = this.buffer.slice(index + 2);
      for (const line of block.split("\n")) {
        if (line.startsWith("data: ")) out.push(line.slice(6));
      }
    }
    return out;
  }
}

/** Subscribe to the run's event stream with the browser EventSource. */
export function subscribeEvents(
  base: string,
  runId: string,
  since: number,
  onEvent: (event: RunEvent) => void,
): () => void {
  const source = new EventSource(`${base}/runs/${runId}/events/stream?since=${since}`);
  source.onmessage = (message) => onEvent(JSON.parse(message.data) as RunEvent);
  source.addEventListener("end", () => source.close());
  return () => source.close();
}
