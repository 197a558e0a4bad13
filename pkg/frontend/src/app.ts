import { ApiError, JokeApiClient } from "./api.js";
import { Transcript } from "./transcript.js";
import { buildTurnElement } from "./view.js";

/**
 * The chat application: an input box, the transcript, and a health line.
 * One request in flight at a time; the transcript always renders in
 * submission order no matter when responses land.
 */
export class ChatApp {
  readonly transcript = new Transcript();
  private readonly expandedTurns = new Set<number>();
  private readonly doc: Document;
  private readonly client: JokeApiClient;

  private listElement!: HTMLUListElement;
  private inputElement!: HTMLInputElement;
  private buttonElement!: HTMLButtonElement;
  private statusElement!: HTMLElement;

  constructor(root: HTMLElement, client: JokeApiClient) {
    this.doc = root.ownerDocument;
    this.client = client;
    this.buildSkeleton(root);
  }

  private buildSkeleton(root: HTMLElement): void {
    const doc = this.doc;
    root.innerHTML = "";

    const header = doc.createElement("header");
    const title = doc.createElement("h1");
    title.textContent = "witscript2";
    this.statusElement = doc.createElement("p");
    this.statusElement.className = "health";
    this.statusElement.textContent = "checking backend…";
    header.appendChild(title);
    header.appendChild(this.statusElement);
    root.appendChild(header);

    this.listElement = doc.createElement("ul");
    this.listElement.className = "transcript";
    root.appendChild(this.listElement);

    const form = doc.createElement("form");
    form.className = "composer";
    this.inputElement = doc.createElement("input");
    this.inputElement.type = "text";
    this.inputElement.placeholder = "Tell me something that happened…";
    this.inputElement.setAttribute("aria-label", "topic sentence");
    this.buttonElement = doc.createElement("button");
    this.buttonElement.type = "submit";
    this.buttonElement.textContent = "send";
    form.appendChild(this.inputElement);
    form.appendChild(this.buttonElement);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit(this.inputElement.value);
    });
    this.inputElement.addEventListener("input", () => this.syncComposer());
    root.appendChild(form);

    this.syncComposer();
  }

  async loadHealth(): Promise<void> {
    try {
      const health = await this.client.health();
      this.statusElement.textContent =
        `backend: ${health.backend_kind} (${health.model_name}) — ${health.status}`;
    } catch {
      this.statusElement.textContent = "backend unreachable";
    }
  }

  /** Submit one topic; returns false when input is empty or a turn is pending. */
  async submit(text: string): Promise<boolean> {
    const trimmed = text.trim();
    if (!this.transcript.canSubmit(trimmed)) {
      return false;
    }
    const turn = this.transcript.begin(trimmed);
    this.inputElement.value = "";
    this.render();
    try {
      const joke = await this.client.requestJoke(trimmed);
      this.transcript.complete(turn.id, joke);
    } catch (error) {
      if (error instanceof ApiError) {
        this.transcript.fail(turn.id, {
          code: error.code,
          stage: error.stage,
          message: error.message,
          retryable: false,
        });
      } else {
        this.transcript.fail(turn.id, {
          code: "NetworkError",
          stage: null,
          message: error instanceof Error ? error.message : String(error),
          retryable: true,
        });
      }
    }
    this.render();
    return true;
  }

  toggleTrace(turnId: number): void {
    if (this.expandedTurns.has(turnId)) {
      this.expandedTurns.delete(turnId);
    } else {
      this.expandedTurns.add(turnId);
    }
    this.render();
  }

  retry(turnId: number): void {
    const turn = this.transcript.all.find((t) => t.id === turnId);
    if (turn && turn.status === "error") {
      void this.submit(turn.userText);
    }
  }

  render(): void {
    this.listElement.innerHTML = "";
    const handlers = {
      onToggleTrace: (id: number) => this.toggleTrace(id),
      onRetry: (id: number) => this.retry(id),
    };
    for (const turn of this.transcript.all) {
      this.listElement.appendChild(
        buildTurnElement(this.doc, turn, this.expandedTurns.has(turn.id), handlers),
      );
    }
    this.syncComposer();
  }

  private syncComposer(): void {
    const pending = this.transcript.pending !== undefined;
    this.inputElement.disabled = pending;
    this.buttonElement.disabled =
      pending || this.inputElement.value.trim().length === 0;
  }
}
