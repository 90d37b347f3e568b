/** Single-page view state for the what-if loop.
 *
 * Guarantees: a scenario can only be submitted with a non-zero delta and no
 * job already in flight (mirroring the service's one-job-per-discipline
 * rule); a report renders only for a completed job; a failed baseline fetch
 * leaves an error banner and never a stale map.
 */

import type { BaselineWire, Discipline, ScenarioReportWire } from "./types.js";

export type JobPhase = "Idle" | "Queued" | "Running" | "Done" | "Failed";

const PHASE_ORDER: Record<JobPhase, number> = {
  Idle: 0,
  Queued: 1,
  Running: 2,
  Done: 3,
  Failed: 3,
};

export interface ScenarioViewSnapshot {
  discipline: Discipline;
  baseline: BaselineWire | null;
  pendingDelta: number;
  jobPhase: JobPhase;
  jobId: string | null;
  report: ScenarioReportWire | null;
  reportText: string | null;
  error: string | null;
}

export class ScenarioView {
  private discipline: Discipline;
  private baseline: BaselineWire | null = null;
  private pendingDelta = 0;
  private jobPhase: JobPhase = "Idle";
  private jobId: string | null = null;
  private report: ScenarioReportWire | null = null;
  private reportText: string | null = null;
  private error: string | null = null;

  constructor(discipline: Discipline) {
    this.discipline = discipline;
  }

  snapshot(): ScenarioViewSnapshot {
    return {
      discipline: this.discipline,
      baseline: this.baseline,
      pendingDelta: this.pendingDelta,
      jobPhase: this.jobPhase,
      jobId: this.jobId,
      report: this.report,
      reportText: this.reportText,
      error: this.error,
    };
  }

  /** Switching discipline drops everything tied to the old one. */
  selectDiscipline(discipline: Discipline): void {
    this.discipline = discipline;
    this.baseline = null;
    this.jobPhase = "Idle";
    this.jobId = null;
    this.report = null;
    this.reportText = null;
    this.error = null;
  }

  baselineLoaded(baseline: BaselineWire): void {
    if (baseline.discipline !== this.discipline) {
      throw new Error(
        `baseline is for ${baseline.discipline}, view shows ${this.discipline}`,
      );
    }
    this.baseline = baseline;
    this.error = null;
  }

  /** Fetch failure: error banner, no stale render. */
  baselineFailed(message: string): void {
    this.baseline = null;
    this.error = message;
  }

  setPendingDelta(delta: number): void {
    if (!Number.isInteger(delta)) throw new Error("delta must be an integer");
    this.pendingDelta = delta;
  }

  jobInFlight(): boolean {
    return this.jobPhase === "Queued" || this.jobPhase === "Running";
  }

  canSubmit(): boolean {
    return this.pendingDelta !== 0 && !this.jobInFlight();
  }

  submitted(jobId: string): void {
    if (this.pendingDelta === 0) throw new Error("delta must be non-zero");
    if (this.jobInFlight()) {
      throw new Error(`a scenario job is already in flight for ${this.discipline}`);
    }
    this.jobId = jobId;
    this.jobPhase = "Queued";
    this.report = null;
    this.reportText = null;
    this.error = null;
  }

  /** Job status updates may only move forward (Queued → Running → terminal). */
  jobUpdate(phase: Exclude<JobPhase, "Idle">, error?: string): void {
    if (this.jobPhase === "Idle") throw new Error("no job submitted");
    if (PHASE_ORDER[phase] < PHASE_ORDER[this.jobPhase]) {
      throw new Error(`job cannot move ${this.jobPhase} → ${phase}`);
    }
    this.jobPhase = phase;
    if (phase === "Failed") {
      this.error = error ?? "scenario job failed";
      this.report = null;
      this.reportText = null;
    }
  }

  /** A report is visible only once its job is Done. */
  reportLoaded(text: string, report: ScenarioReportWire): void {
    if (this.jobPhase !== "Done") {
      throw new Error(`report requires a completed job (job is ${this.jobPhase})`);
    }
    this.report = report;
    this.reportText = text;
    this.error = null;
  }
}
