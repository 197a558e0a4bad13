import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { Window } from "happy-dom";

import type { JokeResponseDoc } from "../src/types.js";

export const TESTS_DIR = dirname(fileURLToPath(import.meta.url));
export const REPO_ROOT = join(TESTS_DIR, "..", "..");

export const WORKED_EXAMPLE_TOPIC =
  "The U.S. is planning to buy 22 aging fighter jets from Switzerland.";
export const WORKED_EXAMPLE_JOKE = "I hear they're delicious Swiss Chocolate F-22s.";

/** A real service response captured as a fixture; the UI renders only its fields. */
export function jokeFixture(): JokeResponseDoc {
  const raw = readFileSync(join(TESTS_DIR, "fixtures", "joke_response.json"), "utf-8");
  return JSON.parse(raw) as JokeResponseDoc;
}

/** A fresh DOM document plus a root element, happy-dom backed. */
export function makeRoot(): { document: Document; root: HTMLElement } {
  const window = new Window();
  const document = window.document as unknown as Document;
  const root = document.createElement("div");
  root.id = "app";
  document.body.appendChild(root);
  return { document, root };
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
