/** HTTP client for the careflow service — the UI's only backend contact. */

import type {
  AllocateRequestWire,
  AllocationResponseWire,
  BaselineBuildRequestWire,
  BaselineWire,
  DatasetSummaryWire,
  Discipline,
  JobAcceptedWire,
  JobWire,
  ScenarioReportWire,
  ScenarioRequestWire,
  TuneRequestWire,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(status === 0 ? detail : `HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;
type SleepFn = (ms: number) => Promise<void>;

export interface ClientOptions {
  /** Injectable for tests; defaults to the global fetch. */
  fetchFn?: FetchFn;
  /** Injectable for tests; defaults to a real timer. */
  sleepFn?: SleepFn;
  /** First poll delay, milliseconds. */
  pollIntervalMs?: number;
  /** Multiplier applied to the delay after each poll (backoff). */
  pollBackoff?: number;
  /** Upper bound for a single poll delay. */
  pollMaxIntervalMs?: number;
  /** Total polling budget before giving up. */
  pollTimeoutMs?: number;
}

const defaultSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class CareflowClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchFn;
  private readonly sleepFn: SleepFn;
  private readonly pollIntervalMs: number;
  private readonly pollBackoff: number;
  private readonly pollMaxIntervalMs: number;
  private readonly pollTimeoutMs: number;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.sleepFn = options.sleepFn ?? defaultSleep;
    this.pollIntervalMs = options.pollIntervalMs ?? 250;
    this.pollBackoff = options.pollBackoff ?? 1.5;
    this.pollMaxIntervalMs = options.pollMaxIntervalMs ?? 2000;
    this.pollTimeoutMs = options.pollTimeoutMs ?? 10 * 60 * 1000;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : String(err));
    }
    if (!response.ok) {
      let detail = response.statusText || `request failed`;
      try {
        const body: unknown = await response.json();
        if (body && typeof body === "object" && "detail" in body) {
          detail = String((body as { detail: unknown }).detail);
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  uploadDataset(csv: string): Promise<DatasetSummaryWire> {
    return this.json<DatasetSummaryWire>("/v1/datasets", {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csv,
    });
  }

  startTune(req: TuneRequestWire): Promise<JobAcceptedWire> {
    return this.post<JobAcceptedWire>("/v1/tune", req);
  }

  buildBaseline(req: BaselineBuildRequestWire): Promise<BaselineWire> {
    return this.post<BaselineWire>("/v1/baselines", req);
  }

  getBaseline(discipline: Discipline): Promise<BaselineWire> {
    return this.json<BaselineWire>(`/v1/baselines/${discipline}`);
  }

  allocate(req: AllocateRequestWire): Promise<AllocationResponseWire> {
    return this.post<AllocationResponseWire>("/v1/allocate", req);
  }

  submitScenario(req: ScenarioRequestWire): Promise<JobAcceptedWire> {
    return this.post<JobAcceptedWire>("/v1/scenarios", req);
  }

  getJob(jobId: string): Promise<JobWire> {
    return this.json<JobWire>(`/v1/jobs/${jobId}`);
  }

  /**
   * Poll a job until it reaches a terminal state. Delays grow by
   * `pollBackoff` up to `pollMaxIntervalMs`; gives up after `pollTimeoutMs`.
   */
  async pollJob(jobId: string): Promise<JobWire> {
    let delay = this.pollIntervalMs;
    let waited = 0;
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.status === "Done" || job.status === "Failed") return job;
      if (waited >= this.pollTimeoutMs) {
        throw new ApiError(0, `job ${jobId} still ${job.status} after ${waited}ms`);
      }
      await this.sleepFn(delay);
      waited += delay;
      delay = Math.min(delay * this.pollBackoff, this.pollMaxIntervalMs);
    }
  }

  /**
   * A scenario report as both parsed data and the verbatim body text. The
   * text is what display code feeds to the renderer so numbers survive
   * character-for-character.
   */
  async getScenario(scenarioId: string): Promise<{ report: ScenarioReportWire; text: string }> {
    const response = await this.request(`/v1/scenarios/${scenarioId}`);
    const text = await response.text();
    return { report: JSON.parse(text) as ScenarioReportWire, text };
  }

  /** Submit a scenario, wait for its job, then fetch the stored report. */
  async runScenario(
    req: ScenarioRequestWire,
  ): Promise<{ job: JobWire; report: ScenarioReportWire; text: string }> {
    const accepted = await this.submitScenario(req);
    const job = await this.pollJob(accepted.job_id);
    if (job.status === "Failed") {
      throw new ApiError(0, job.error ?? "scenario job failed");
    }
    if (accepted.scenario_id === null) {
      throw new ApiError(0, "scenario submission returned no scenario id");
    }
    const { report, text } = await this.getScenario(accepted.scenario_id);
    return { job, report, text };
  }
}
