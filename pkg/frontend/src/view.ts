import type { ChatTurn } from "./transcript.js";
import type { JokeResponseDoc } from "./types.js";

export interface TurnHandlers {
  onToggleTrace(turnId: number): void;
  onRetry(turnId: number): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function section(doc: Document, title: string): HTMLElement {
  const wrap = el(doc, "section", "trace-section");
  wrap.appendChild(el(doc, "h4", "trace-heading", title));
  return wrap;
}

/**
 * The construction panel: handles, both association lists, the punch line
 * with its chosen pair, and the final joke with an intactness badge —
 * in pipeline order.
 */
export function buildTracePanel(doc: Document, joke: JokeResponseDoc): HTMLElement {
  const panel = el(doc, "div", "trace-panel");

  const handles = section(doc, "Topic handles");
  const handleList = el(doc, "ul", "handle-list");
  for (const handle of [joke.handles.first, joke.handles.second]) {
    handleList.appendChild(el(doc, "li", "handle", handle));
  }
  handles.appendChild(handleList);
  panel.appendChild(handles);

  for (const assoc of joke.associations) {
    const block = section(doc, `Associations for "${assoc.handle}"`);
    const list = el(doc, "ul", "association-list");
    for (const item of assoc.items) {
      list.appendChild(el(doc, "li", "association", item));
    }
    block.appendChild(list);
    panel.appendChild(block);
  }

  const punch = section(doc, "Punch line");
  punch.appendChild(el(doc, "p", "punchline-text", joke.punchline.text));
  punch.appendChild(
    el(
      doc,
      "p",
      "punchline-pair",
      `links "${joke.punchline.chosen_a}" with "${joke.punchline.chosen_b}"`,
    ),
  );
  panel.appendChild(punch);

  const final = section(doc, "Joke");
  final.appendChild(el(doc, "p", "final-joke", joke.joke_text));
  final.appendChild(
    el(
      doc,
      "span",
      joke.punchline_intact ? "badge intact" : "badge replaced",
      joke.punchline_intact ? "punch line intact" : "punch line replaced",
    ),
  );
  panel.appendChild(final);

  return panel;
}

/** One transcript entry: the user bubble plus the reply (or its state). */
export function buildTurnElement(
  doc: Document,
  turn: ChatTurn,
  expanded: boolean,
  handlers: TurnHandlers,
): HTMLElement {
  const item = el(doc, "li", `turn turn-${turn.status}`);
  item.dataset.turnId = String(turn.id);

  item.appendChild(el(doc, "div", "bubble user", turn.userText));

  if (turn.status === "pending") {
    item.appendChild(el(doc, "div", "bubble joke pending", "thinking of a joke…"));
    return item;
  }

  if (turn.status === "error") {
    const error = turn.error!;
    const where = error.stage ? ` at stage ${error.stage}` : "";
    item.appendChild(
      el(doc, "div", "bubble error", `${error.code}${where}: ${error.message}`),
    );
    if (error.retryable) {
      const retry = el(doc, "button", "retry", "retry");
      retry.type = "button";
      retry.addEventListener("click", () => handlers.onRetry(turn.id));
      item.appendChild(retry);
    }
    return item;
  }

  const joke = turn.joke!;
  item.appendChild(el(doc, "div", "bubble joke", joke.joke_text));

  const toggle = el(
    doc,
    "button",
    "trace-toggle",
    expanded ? "hide construction" : "show construction",
  );
  toggle.type = "button";
  toggle.setAttribute("aria-expanded", String(expanded));
  toggle.addEventListener("click", () => handlers.onToggleTrace(turn.id));
  item.appendChild(toggle);

  const panel = buildTracePanel(doc, joke);
  panel.hidden = !expanded;
  item.appendChild(panel);

  return item;
}
