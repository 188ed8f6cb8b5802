/**
 * HTML renderers. Pure string-in, string-out so the same code paths run
 * in the browser and in node-side tests; main.ts owns the only DOM
 * bindings.
 */

import type { Approval, RunEvent, TaskInfo } from "./api.js";
import {
  ConsoleState,
  ProgramSection,
  pendingApprovals,
  splitSections,
  statusColor,
  taskEdges,
} from "./model.js";

function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderHeader(state: ConsoleState): string {
  const run = state.run;
  if (!run) return `<header class="bar"><h1>autobus console</h1><span>no run selected</span></header>`;
  const summary = run.finished
    ? run.evaluation?.success
      ? "finished: success"
      : "finished: not_success"
    : "live";
  const bindings = run.evaluation?.bindings ?? {};
  const extra = Object.entries(bindings)
    .map(([key, value]) => `${esc(key)}=${esc(value)}`)
    .join(" ");
  return `<header class="bar">
  <h1>autobus console</h1>
  <span class="run-id">${esc(run.run_id)}</span>
  <span class="state">${esc(summary)} ${extra}</span>
</header>`;
}

export function renderBanner(state: ConsoleState): string {
  if (state.connection === "unreachable") {
    return `<div class="banner error">engine unreachable — retrying…</div>`;
  }
  return "";
}

export function renderTaskGraph(tasks: TaskInfo[], selected: string | null): string {
  if (!tasks.length) return `<section class="graph"><em>no tasks</em></section>`;
  const edges = taskEdges(tasks);
  const byId = new Map(tasks.map((t) => [t.id, t]));
  const nodes = tasks
    .map((task) => {
      const color = statusColor(task.status);
      const cls = task.id === selected ? "node selected" : "node";
      const iteration = task.iteration > 1 ? ` ×${task.iteration}` : "";
      return `<div class="${cls}" data-task="${esc(task.id)}" style="border-color:${color}">
  <span class="dot" style="background:${color}"></span>
  <span class="name">${esc(task.id)}</span>
  <span class="status" style="color:${color}">${esc(task.status)}${iteration}</span>
</div>`;
    })
    .join("\n");
  const edgeRows = edges
    .filter((e) => byId.has(e.from) && byId.has(e.to))
    .map((e) => `<div class="edge">${esc(e.from)} ─${esc(e.via)}→ ${esc(e.to)}</div>`)
    .join("\n");
  return `<section class="graph"><h2>tasks</h2>${nodes}<div class="edges">${edgeRows}</div></section>`;
}

export function renderApprovals(approvals: Approval[]): string {
  if (!approvals.length) return `<section class="approvals"><h2>approvals</h2><em>queue empty</em></section>`;
  const rows = approvals
    .map((approval) => {
      const reasons = approval.reasons.map((r) => `<li>${esc(r)}</li>`).join("");
      const buttons =
        approval.decision === "pending"
          ? `<button class="approve" data-approval="${esc(approval.id)}" data-decision="approved">approve</button>
             <button class="reject" data-approval="${esc(approval.id)}" data-decision="rejected">reject</button>`
          : `<span class="decided">${esc(approval.decision)} by ${esc(approval.decider)}</span>`;
      return `<div class="approval ${esc(approval.decision)}">
  <div class="meta"><strong>${esc(approval.task)}</strong> <code>${esc(approval.id)}</code></div>
  <ul class="reasons">${reasons}</ul>
  <div class="actions">${buttons}</div>
</div>`;
    })
    .join("\n");
  return `<section class="approvals"><h2>approvals</h2>${rows}</section>`;
}

export function renderProgram(taskId: string | null, program: string | null): string {
  if (!taskId || program === null) {
    return `<section class="program"><h2>program</h2><em>select a task</em></section>`;
  }
  const sections = splitSections(program)
    .map((section: ProgramSection) => {
      const lines = section.lines.map((line) => esc(line)).join("\n");
      return `<div class="prog-section prog-${esc(section.name)}">
  <div class="section-label">${esc(section.name)}</div>
  <pre>${lines}</pre>
</div>`;
    })
    .join("\n");
  return `<section class="program"><h2>program — ${esc(taskId)}</h2>${sections}</section>`;
}

export function renderTicker(events: RunEvent[]): string {
  const rows = events
    .map((event) => {
      const task = event.payload["task"] ? ` ${esc(event.payload["task"])}` : "";
      let note = "";
      if (event.kind === "action_invoked") note = ` ${esc(event.payload["tool"])}(${esc(event.payload["params_abl"] ?? "")})`;
      if (event.kind === "approval_decided") note = ` ${esc(event.payload["decision"])}`;
      if (event.kind === "initiative_evaluated") note = ` ${esc(event.payload["result"])}`;
      return `<div class="evt evt-${esc(event.kind)}"><span class="seq">#${event.seq}</span> ${esc(event.kind)}${task}${note}</div>`;
    })
    .join("\n");
  return `<section class="ticker"><h2>events</h2><div class="evt-rows">${rows}</div></section>`;
}

export function renderToasts(toasts: string[]): string {
  if (!toasts.length) return "";
  return `<div class="toasts">${toasts.map((t) => `<div class="toast">${esc(t)}</div>`).join("")}</div>`;
}

export function renderDashboard(state: ConsoleState): string {
  return [
    renderHeader(state),
    renderBanner(state),
    `<main class="columns">`,
    renderTaskGraph(state.tasks, state.selectedTask),
    renderApprovals(state.approvals),
    renderProgram(state.selectedTask, state.program),
    renderTicker(state.events),
    `</main>`,
    renderToasts(state.toasts),
  ].join("\n");
}

export { pendingApprovals };
