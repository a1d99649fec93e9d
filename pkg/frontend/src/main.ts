/**
 * Browser entry point: binds the controller to a minimal page. All state
 * lives in one SessionView; every handler swaps it wholesale and re-renders.
 */

import { ApiClient } from "./api.js";
import { changeK, selectVideo, startSession, submitTurn, restoreSession } from "./controller.js";
import { renderAttention, renderRanking, renderTranscript } from "./render.js";
import { K_CHOICES, SessionView } from "./state.js";

const SESSION_KEY = "dtv-session-id";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const client = new ApiClient("");
  const input = element<HTMLInputElement>("turn-input");
  const submit = element<HTMLButtonElement>("turn-submit");
  const transcriptList = element<HTMLUListElement>("transcript");
  const rankingBody = element<HTMLTableSectionElement>("ranking-body");
  const attentionPane = element<HTMLDivElement>("attention");
  const kSelect = element<HTMLSelectElement>("k-select");
  const noticePane = element<HTMLDivElement>("notice");

  for (const k of K_CHOICES) {
    const option = document.createElement("option");
    option.value = String(k);
    option.textContent = `top ${k}`;
    kSelect.appendChild(option);
  }
  kSelect.value = "5";

  const savedSession = window.localStorage.getItem(SESSION_KEY);
  let view: SessionView;
  try {
    view = savedSession !== null
      ? await restoreSession(client, savedSession)
      : await startSession(client);
  } catch {
    view = await startSession(client);
  }
  window.localStorage.setItem(SESSION_KEY, view.sessionId);

  function render(): void {
    submit.disabled = view.busy;
    transcriptList.replaceChildren(
      ...renderTranscript(view).map((line) => {
        const item = document.createElement("li");
        item.textContent = line;
        return item;
      }),
    );
    rankingBody.replaceChildren(
      ...renderRanking(view).map((row) => {
        const tr = document.createElement("tr");
        for (const cell of [String(row.rank), row.videoId, String(row.score), row.deltaLabel]) {
          const td = document.createElement("td");
          td.textContent = cell;
          tr.appendChild(td);
        }
        tr.addEventListener("click", () => {
          void selectVideo(client, view, row.videoId).then(update);
        });
        return tr;
      }),
    );
    if (view.attention !== null) {
      const display = renderAttention(view.attention);
      attentionPane.replaceChildren(
        ...display.bars.map((bar) => {
          const rowNode = document.createElement("div");
          rowNode.className = "attention-bar";
          rowNode.style.width = `${Math.round(bar.relativeWidth * 100)}%`;
          rowNode.textContent = `frame ${bar.frame}: ${bar.weight}`;
          return rowNode;
        }),
      );
    }
    noticePane.textContent = view.notice ?? view.error ?? "";
    noticePane.onclick = () => {
      view = { ...view, notice: null, error: null };
      render();
    };
  }

  function update(next: SessionView): void {
    view = next;
    render();
  }

  submit.addEventListener("click", () => {
    void submitTurn(client, view, input.value).then((next) => {
      if (next.transcript.length > view.transcript.length) input.value = "";
      update(next);
    });
  });
  kSelect.addEventListener("change", () => {
    void changeK(client, view, Number(kSelect.value)).then(update);
  });

  render();
}

void boot();
