/**
 * View-model: pure state derived from API responses. No business logic
 * lives here — readiness, gating, and evaluation all happen server-side;
 * the console only arranges what the API reports.
 */

import type { Approval, RunEvent, RunSummary, TaskInfo } from "./api.js";

export interface ConsoleState {
  run: RunSummary | null;
  tasks: TaskInfo[];
  events: RunEvent[]; // strictly ordered by seq, deduplicated
  approvals: Approval[];
  selectedTask: string | null;
  program: string | null;
  toasts: string[];
  connection: "ok" | "unreachable";
}

export function emptyState(): ConsoleState {
  return {
    run: null,
    tasks: [],
    events: [],
    approvals: [],
    selectedTask: null,
    program: null,
    toasts: [],
    connection: "ok",
  };
}

/** Merge incoming events, keeping the list deduplicated and seq-sorted. */
export function mergeEvents(existing: RunEvent[], incoming: RunEvent[]): RunEvent[] {
  if (!incoming.length) return existing;
  const bySeq = new Map<number, RunEvent>();
  for (const event of existing) bySeq.set(event.seq, event);
  for (const event of incoming) bySeq.set(event.seq, event);
  return [...bySeq.values()].sort((a, b) => a.seq - b.seq);
}

export function lastSeq(events: RunEvent[]): number {
  return events.length ? events[events.length - 1].seq : 0;
}

/**
 * Predicate indicator of a condition term, e.g. "task_done(task1)" ->
 * "task_done/1". Only the functor and the top-level argument count are
 * read; the console never parses term structure beyond that.
 */
export function predicateIndicator(term: string): string {
  const trimmed = term.trim();
  const open = trimmed.indexOf("(");
  if (open < 0) return `${trimmed}/0`;
  const name = trimmed.slice(0, open);
  const inner = trimmed.slice(open + 1, trimmed.lastIndexOf(")"));
  let depth = 0;
  let args = inner.trim() === "" ? 0 : 1;
  for (const ch of inner) {
    if (ch === "(" || ch === "[") depth += 1;
    else if (ch === ")" || ch === "]") depth -= 1;
    else if (ch === "," && depth === 0) args += 1;
  }
  return `${name}/${args}`;
}

export interface TaskEdge {
  from: string;
  to: string;
  via: string;
}

/** Producer->consumer edges: a task whose postcondition predicate
 * matches another task's precondition predicate feeds it. */
export function taskEdges(tasks: TaskInfo[]): TaskEdge[] {
  const producers = new Map<string, string[]>();
  for (const task of tasks) {
    for (const post of task.postconditions) {
      const key = predicateIndicator(post);
      const list = producers.get(key) ?? [];
      list.push(task.id);
      producers.set(key, list);
    }
  }
  const edges: TaskEdge[] = [];
  const seen = new Set<string>();
  for (const task of tasks) {
    for (const pre of task.preconditions) {
      const key = predicateIndicator(pre);
      for (const producer of producers.get(key) ?? []) {
        if (producer === task.id) continue;
        const edgeKey = `${producer}->${task.id}`;
        if (!seen.has(edgeKey)) {
          seen.add(edgeKey);
          edges.push({ from: producer, to: task.id, via: key });
        }
      }
    }
  }
  return edges;
}

export const STATUS_COLORS: Record<string, string> = {
  pending: "#8888a0",
  ready: "#3b82f6",
  running: "#eab308",
  awaiting_approval: "#a855f7",
  completed: "#22c55e",
  failed: "#ef4444",
  exhausted: "#f97316",
  cancelled: "#b91c1c",
};

export function statusColor(status: string): string {
  return STATUS_COLORS[status] ?? "#8888a0";
}

export interface ProgramSection {
  name: string;
  lines: string[];
}

/**
 * Split rendered program text on its section markers. The sections come
 * from the "% SECTION: <name>" magic comments — no clause parsing here.
 */
export function splitSections(program: string): ProgramSection[] {
  const sections: ProgramSection[] = [];
  let current: ProgramSection | null = null;
  for (const line of program.split("\n")) {
    const match = line.match(/^%\s*SECTION:\s*(\w+)\s*$/);
    if (match) {
      current = { name: match[1], lines: [] };
      sections.push(current);
      continue;
    }
    if (!current) {
      current = { name: "program", lines: [] };
      sections.push(current);
    }
    if (line.trim() !== "") current.lines.push(line);
  }
  return sections;
}

export function pendingApprovals(state: ConsoleState): Approval[] {
  return state.approvals.filter((a) => a.decision === "pending");
}

export function addToast(state: ConsoleState, message: string): ConsoleState {
  return { ...state, toasts: [...state.toasts.slice(-4), message] };
}
