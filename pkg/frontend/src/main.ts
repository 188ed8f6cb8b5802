/**
 * Browser bootstrap: poll run state, stream events, delegate clicks.
 *
 * URL forms:
 *   /console/            -> start button for the first initiative
 *   /console/?run=<id>   -> live dashboard for an existing run
 */

import { ApiError, ConsoleApi, RunEvent, subscribeEvents } from "./api.js";
import { ConsoleState, addToast, emptyState, lastSeq, mergeEvents } from "./model.js";
import { renderDashboard } from "./view.js";

const api = new ConsoleApi("");
let state: ConsoleState = emptyState();
let runId: string | null = new URLSearchParams(window.location.search).get("run");
let unsubscribe: (() => void) | null = null;

const app = document.getElementById("app")!;

function redraw() {
  app.innerHTML = renderDashboard(state);
}

function setState(next: ConsoleState) {
  state = next;
  redraw();
}

async function refresh() {
  if (!runId) return;
  try {
    const [run, tasks, approvals] = await Promise.all([
      api.getRun(runId),
      api.getTasks(runId),
      api.getApprovals(runId),
    ]);
    setState({ ...state, run, tasks, approvals, connection: "ok" });
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      setState(addToast({ ...state, connection: "ok" }, `unknown run ${runId}`));
      runId = null;
      return;
    }
    setState({ ...state, connection: "unreachable" });
  }
}

function onEvent(event: RunEvent) {
  setState({ ...state, events: mergeEvents(state.events, [event]) });
  // statuses move on the next poll; nudge it so the graph tracks the ticker
  void refresh();
}

async function attach(run: string) {
  runId = run;
  history.replaceState(null, "", `?run=${run}`);
  await refresh();
  const backlog = await api.getEvents(run, 0);
  setState({ ...state, events: mergeEvents(state.events, backlog) });
  if (unsubscribe) unsubscribe();
  unsubscribe = subscribeEvents("", run, lastSeq(state.events), onEvent);
}

async function startRun() {
  const initiatives = await api.listInitiatives();
  if (!initiatives.length) {
    setState(addToast(state, "no initiatives loaded"));
    return;
  }
  const started = await api.startRun(initiatives[0].id, {});
  await attach(started.run_id);
}

app.addEventListener("click", async (raw) => {
  const target = raw.target as HTMLElement;
  if (target.id === "start-run") {
    await startRun();
    return;
  }
  const node = target.closest<HTMLElement>(".node");
  if (node && runId) {
    const taskId = node.dataset.task!;
    try {
      const { program } = await api.getProgram(runId, taskId);
      setState({ ...state, selectedTask: taskId, program });
    } catch (error) {
      setState(addToast(state, `no program for ${taskId} yet`));
    }
    return;
  }
  const button = target.closest<HTMLButtonElement>("button[data-approval]");
  if (button && runId) {
    const approvalId = button.dataset.approval!;
    const decision = button.dataset.decision as "approved" | "rejected";
    try {
      await api.decideApproval(runId, approvalId, decision);
      setState(addToast(state, `${approvalId}: ${decision}`));
    } catch (error) {
      // decide-once conflicts surface verbatim
      const message = error instanceof ApiError ? error.detail : String(error);
      setState(addToast(state, message));
    }
    await refresh();
  }
});

if (runId) {
  void attach(runId);
} else {
  app.innerHTML = `<header class="bar"><h1>autobus console</h1></header>
<main class="columns"><section class="graph">
  <button id="start-run">start case-study run</button>
</section></main>`;
}

setInterval(() => void refresh(), 700);
