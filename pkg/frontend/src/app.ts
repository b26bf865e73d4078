// Session driver: fetch the next blinded trial, run it, advance on
// acceptance, and show the completion screen when the study is done.

import { ApiError, ListeningApi } from "./api.js";
import { AudioFactory, ExclusivePlayer } from "./player.js";
import { TrialScreen } from "./trial.js";

export class StudyApp {
  constructor(
    private readonly root: HTMLElement,
    private readonly api: ListeningApi,
    private readonly audioFactory: AudioFactory,
    private readonly studyId: string,
    private readonly sessionId: string,
  ) {}

  async start(): Promise<void> {
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    try {
      const next = await this.api.nextTrial(this.studyId, this.sessionId);
      if (next.kind === "complete") {
        this.renderComplete();
        return;
      }
      const player = new ExclusivePlayer(this.audioFactory);
      const screen = new TrialScreen(
        this.root, this.api, player, this.studyId, this.sessionId,
        next.trial, () => void this.loadNext());
      screen.render();
    } catch (err) {
      this.renderError(err instanceof ApiError
        ? err.message
        : "Could not reach the server.");
    }
  }

  private renderComplete(): void {
    this.root.innerHTML = "";
    const done = document.createElement("div");
    done.className = "complete";
    const heading = document.createElement("h2");
    heading.textContent = "Study complete";
    const thanks = document.createElement("p");
    thanks.textContent = "All trials are submitted. Thank you for rating!";
    done.append(heading, thanks);
    this.root.appendChild(done);
  }

  private renderError(message: string): void {
    this.root.innerHTML = "";
    const box = document.createElement("div");
    box.className = "error";
    const text = document.createElement("p");
    text.textContent = message;
    const retry = document.createElement("button");
    retry.className = "retry-load";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => void this.loadNext());
    box.append(text, retry);
    this.root.appendChild(box);
  }
}
