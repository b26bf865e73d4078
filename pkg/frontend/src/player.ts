// Exclusive audio playback: at most one stimulus is ever audible, no matter
// what sequence of play/stop/loop actions the rater performs.

export interface AudioHandle {
  play(): void | Promise<void>;
  pause(): void;
  currentTime: number;
  loop: boolean;
  addEventListener(type: "ended" | "error", listener: () => void): void;
}

export type AudioFactory = (url: string) => AudioHandle;

export function htmlAudioFactory(url: string): AudioHandle {
  return new Audio(url);
}

interface Registration {
  handle: AudioHandle;
  url: string;
  failed: boolean;
}

export class ExclusivePlayer {
  private items = new Map<string, Registration>();
  private current: string | null = null;
  private listeners = new Set<() => void>();

  constructor(private readonly createAudio: AudioFactory) {}

  register(id: string, url: string): void {
    const handle = this.createAudio(url);
    const registration: Registration = { handle, url, failed: false };
    handle.addEventListener("ended", () => {
      if (!handle.loop && this.current === id) {
        this.current = null;
        this.notify();
      }
    });
    handle.addEventListener("error", () => {
      registration.failed = true;
      if (this.current === id) this.current = null;
      this.notify();
    });
    this.items.set(id, registration);
  }

  /** Re-create a failed handle so the rater can retry the download. */
  retry(id: string): void {
    const registration = this.items.get(id);
    if (!registration) return;
    this.register(id, registration.url);
    this.notify();
  }

  play(id: string): void {
    const registration = this.items.get(id);
    if (!registration || registration.failed) return;
    if (this.current !== null && this.current !== id) {
      this.haltCurrent();
    }
    this.current = id;
    void registration.handle.play();
    this.notify();
  }

  stop(id: string): void {
    const registration = this.items.get(id);
    if (!registration) return;
    registration.handle.pause();
    registration.handle.currentTime = 0;
    if (this.current === id) this.current = null;
    this.notify();
  }

  stopAll(): void {
    if (this.current !== null) this.haltCurrent();
    this.current = null;
    this.notify();
  }

  setLoop(id: string, loop: boolean): void {
    const registration = this.items.get(id);
    if (registration) registration.handle.loop = loop;
  }

  isFailed(id: string): boolean {
    return this.items.get(id)?.failed ?? false;
  }

  get playing(): string | null {
    return this.current;
  }

  onChange(listener: () => void): void {
    this.listeners.add(listener);
  }

  private haltCurrent(): void {
    const active = this.current && this.items.get(this.current);
    if (active) {
      active.handle.pause();
      active.handle.currentTime = 0;
    }
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }
}
