// One trial's screen: a reference player, a slider row per blinded stimulus,
// and a submit button that stays disabled until every slider has been touched.

import { ListeningApi, TrialView } from "./api.js";
import { ExclusivePlayer } from "./player.js";

const REFERENCE_ID = "__reference__";

interface SliderState {
  value: number;
  touched: boolean;
}

export class TrialScreen {
  private sliders = new Map<string, SliderState>();
  private submitting = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ListeningApi,
    private readonly player: ExclusivePlayer,
    private readonly studyId: string,
    private readonly sessionId: string,
    private readonly trial: TrialView,
    private readonly onAccepted: () => void,
  ) {}

  render(): void {
    this.root.innerHTML = "";
    this.sliders.clear();

    const heading = document.createElement("h2");
    heading.textContent = `Trial ${this.trial.index + 1} of ${this.trial.total}`;
    this.root.appendChild(heading);

    const prompt = document.createElement("p");
    prompt.className = "prompt";
    prompt.textContent = this.trial.prompt;   // verbatim from the study config
    this.root.appendChild(prompt);

    this.player.register(REFERENCE_ID, this.api.audioUrl(this.trial.reference.audio));
    this.root.appendChild(this.audioRow(REFERENCE_ID, "Reference", true));

    const list = document.createElement("div");
    list.className = "stimuli";
    this.trial.stimuli.forEach((stimulus, k) => {
      this.sliders.set(stimulus.slot, { value: 50, touched: false });
      this.player.register(stimulus.slot, this.api.audioUrl(stimulus.audio));
      const row = this.audioRow(stimulus.slot,
        `Stimulus ${String.fromCharCode(65 + k)}`, false);
      list.appendChild(row);
    });
    this.root.appendChild(list);

    const status = document.createElement("p");
    status.className = "status";
    status.setAttribute("role", "alert");
    this.root.appendChild(status);

    const submit = document.createElement("button");
    submit.className = "submit";
    submit.textContent = "Submit ratings";
    submit.disabled = true;
    submit.addEventListener("click", () => void this.submit());
    this.root.appendChild(submit);

    this.player.onChange(() => this.refreshRows());
    this.refreshRows();
  }

  private audioRow(id: string, label: string, isReference: boolean): HTMLElement {
    const row = document.createElement("div");
    row.className = isReference ? "row reference" : "row stimulus";
    row.dataset.id = id;

    const name = document.createElement("span");
    name.className = "label";
    name.textContent = label;
    row.appendChild(name);

    const play = document.createElement("button");
    play.className = "play";
    play.textContent = "Play";
    play.addEventListener("click", () => {
      if (this.player.playing === id) this.player.stop(id);
      else this.player.play(id);
    });
    row.appendChild(play);

    const loop = document.createElement("input");
    loop.type = "checkbox";
    loop.className = "loop";
    loop.title = "Loop";
    loop.addEventListener("change", () => this.player.setLoop(id, loop.checked));
    row.appendChild(loop);

    const retry = document.createElement("button");
    retry.className = "retry";
    retry.textContent = "Retry audio";
    retry.hidden = true;
    retry.addEventListener("click", () => this.player.retry(id));
    row.appendChild(retry);

    if (!isReference) {
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "100";
      slider.step = "1";
      slider.value = "50";
      slider.className = "rating untouched";
      slider.addEventListener("input", () => {
        this.setRating(id, Number(slider.value));
        slider.classList.remove("untouched");
        valueLabel.textContent = slider.value;
        this.refreshSubmit();
      });
      row.appendChild(slider);

      const valueLabel = document.createElement("span");
      valueLabel.className = "value";
      valueLabel.textContent = "—";   // em dash until touched
      row.appendChild(valueLabel);
    }
    return row;
  }

  /** Programmatic rating entry (also used by tests). */
  setRating(slot: string, value: number): void {
    const state = this.sliders.get(slot);
    if (!state) return;
    state.value = Math.min(100, Math.max(0, Math.round(value)));
    state.touched = true;
  }

  get allTouched(): boolean {
    return [...this.sliders.values()].every((s) => s.touched);
  }

  ratings(): Record<string, number> {
    const out: Record<string, number> = {};
    for (const [slot, state] of this.sliders) out[slot] = state.value;
    return out;
  }

  private refreshSubmit(): void {
    const submit = this.root.querySelector<HTMLButtonElement>("button.submit");
    if (submit) submit.disabled = !this.allTouched || this.submitting;
  }

  private refreshRows(): void {
    for (const row of this.root.querySelectorAll<HTMLElement>(".row")) {
      const id = row.dataset.id ?? "";
      const failed = this.player.isFailed(id);
      row.classList.toggle("disabled", failed);
      const play = row.querySelector<HTMLButtonElement>("button.play");
      const retry = row.querySelector<HTMLButtonElement>("button.retry");
      if (play) {
        play.disabled = failed;
        play.textContent = this.player.playing === id ? "Stop" : "Play";
      }
      if (retry) retry.hidden = !failed;
    }
  }

  private setStatus(message: string): void {
    const status = this.root.querySelector<HTMLElement>(".status");
    if (status) status.textContent = message;
  }

  async submit(): Promise<void> {
    if (!this.allTouched || this.submitting) return;
    this.submitting = true;
    this.refreshSubmit();
    this.player.stopAll();
    try {
      const result = await this.api.submitRatings(
        this.studyId, this.sessionId, this.trial.trial_id, this.ratings());
      if (result.accepted) {
        this.onAccepted();
        return;
      }
      // rejected: surface the server's (non-revealing) reason, keep sliders
      this.setStatus(result.reason);
    } catch {
      this.setStatus("Could not reach the server. Check your connection and "
        + "press Submit again; your ratings are kept.");
    } finally {
      this.submitting = false;
      this.refreshSubmit();
    }
  }
}
