import { JokeApiClient } from "./api.js";
import { ChatApp } from "./app.js";

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app element");
  }
  const app = new ChatApp(root, new JokeApiClient(""));
  void app.loadHealth();
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", bootstrap);
} else {
  bootstrap();
}
