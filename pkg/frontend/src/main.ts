// Boot: ?study=<id>&session=<token>&base=<service-url>

import { ListeningApi } from "./api.js";
import { StudyApp } from "./app.js";
import { htmlAudioFactory } from "./player.js";

function start(): void {
  const params = new URLSearchParams(window.location.search);
  const studyId = params.get("study");
  const sessionId = params.get("session");
  const base = params.get("base") ?? "";
  const root = document.getElementById("app");
  if (!root) return;
  if (!studyId || !sessionId) {
    root.textContent =
      "Missing ?study=<id>&session=<token> query parameters.";
    return;
  }
  const app = new StudyApp(root, new ListeningApi(base), htmlAudioFactory,
    studyId, sessionId);
  void app.start();
}

document.addEventListener("DOMContentLoaded", start);
