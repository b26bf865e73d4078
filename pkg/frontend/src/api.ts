// Thin typed client for the listening-service HTTP API. The server blinds
// everything: we only ever see slot tokens and opaque audio URLs.

export interface StimulusView {
  slot: string;
  audio: string;
}

export interface TrialView {
  trial_id: string;
  index: number;
  total: number;
  protocol: string;
  prompt: string;
  reference: { audio: string };
  stimuli: StimulusView[];
}

export type NextResult =
  | { kind: "trial"; trial: TrialView }
  | { kind: "complete" };

export type SubmitResult =
  | { accepted: true }
  | { accepted: false; reason: string };

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: { error?: string } };
    return body.detail?.error ?? `server error (${res.status})`;
  } catch {
    return `server error (${res.status})`;
  }
}

export class ListeningApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  audioUrl(path: string): string {
    return this.baseUrl + path;
  }

  async nextTrial(studyId: string, sessionId: string): Promise<NextResult> {
    const res = await this.fetchFn(
      `${this.baseUrl}/studies/${encodeURIComponent(studyId)}` +
        `/sessions/${encodeURIComponent(sessionId)}/next`,
    );
    if (res.status === 404) {
      const reason = await errorDetail(res);
      if (reason === "study_complete") return { kind: "complete" };
      throw new ApiError(reason, 404);
    }
    if (!res.ok) throw new ApiError(await errorDetail(res), res.status);
    return { kind: "trial", trial: (await res.json()) as TrialView };
  }

  async submitRatings(
    studyId: string,
    sessionId: string,
    trialId: string,
    ratings: Record<string, number>,
  ): Promise<SubmitResult> {
    const res = await this.fetchFn(
      `${this.baseUrl}/studies/${encodeURIComponent(studyId)}` +
        `/sessions/${encodeURIComponent(sessionId)}` +
        `/trials/${encodeURIComponent(trialId)}/ratings`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ ratings }),
      },
    );
    if (res.ok) return { accepted: true };
    const reason = await errorDetail(res);
    if (res.status === 422 || res.status === 409) {
      // validation rejections (e.g. the MUSHRA 100-rule) are surfaced to the
      // rater verbatim; the server words them without unblinding anything
      return { accepted: false, reason };
    }
    throw new ApiError(reason, res.status);
  }
}
