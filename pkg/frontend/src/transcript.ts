import type { JokeResponseDoc } from "./types.js";

export type TurnStatus = "pending" | "done" | "error";

export interface TurnError {
  code: string;
  stage: string | null;
  message: string;
  /** Network-level failures get a retry affordance; server verdicts do not. */
  retryable: boolean;
}

export interface ChatTurn {
  id: number;
  userText: string;
  status: TurnStatus;
  joke?: JokeResponseDoc;
  error?: TurnError;
  timestamp: number;
}

/**
 * Chat state, DOM-free. Turns keep submission order and at most one may be
 * pending at a time, which keeps scripted-backend demos deterministic.
 */
export class Transcript {
  private turns: ChatTurn[] = [];
  private nextId = 1;

  get all(): readonly ChatTurn[] {
    return this.turns;
  }

  get pending(): ChatTurn | undefined {
    return this.turns.find((turn) => turn.status === "pending");
  }

  canSubmit(text: string): boolean {
    return text.trim().length > 0 && this.pending === undefined;
  }

  begin(userText: string): ChatTurn {
    if (this.pending !== undefined) {
      throw new Error("a turn is already pending");
    }
    const turn: ChatTurn = {
      id: this.nextId++,
      userText,
      status: "pending",
      timestamp: Date.now(),
    };
    this.turns.push(turn);
    return turn;
  }

  complete(id: number, joke: JokeResponseDoc): void {
    const turn = this.byId(id);
    turn.status = "done";
    turn.joke = joke;
  }

  fail(id: number, error: TurnError): void {
    const turn = this.byId(id);
    turn.status = "error";
    turn.error = error;
  }

  private byId(id: number): ChatTurn {
    const turn = this.turns.find((t) => t.id === id);
    if (turn === undefined) {
      throw new Error(`no turn with id ${id}`);
    }
    return turn;
  }
}
