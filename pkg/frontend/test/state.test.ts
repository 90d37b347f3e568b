import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { ScenarioView } from "../src/state";
import type { BaselineWire, ScenarioReportWire } from "../src/types";

const here = dirname(fileURLToPath(import.meta.url));
const baseline = JSON.parse(
  readFileSync(join(here, "fixtures", "baseline.json"), "utf8"),
) as BaselineWire;
const reportText = readFileSync(join(here, "fixtures", "scenario-degenerate.json"), "utf8");
const report = JSON.parse(reportText) as ScenarioReportWire;

describe("ScenarioView", () => {
  it("blocks submission while the pending delta is zero", () => {
    const view = new ScenarioView("RN");
    expect(view.canSubmit()).toBe(false);
    expect(() => view.submitted("job-1")).toThrow("non-zero");
    view.setPendingDelta(-1);
    expect(view.canSubmit()).toBe(true);
  });

  it("allows at most one in-flight job", () => {
    const view = new ScenarioView("RN");
    view.setPendingDelta(1);
    view.submitted("job-1");
    expect(view.canSubmit()).toBe(false);
    expect(() => view.submitted("job-2")).toThrow("already in flight");
    view.jobUpdate("Done");
    expect(view.canSubmit()).toBe(true);
  });

  it("only accepts forward job transitions", () => {
    const view = new ScenarioView("RN");
    view.setPendingDelta(1);
    view.submitted("job-1");
    view.jobUpdate("Running");
    expect(() => view.jobUpdate("Queued")).toThrow("cannot move");
    view.jobUpdate("Done");
  });

  it("shows a report only for a completed job", () => {
    const view = new ScenarioView("RN");
    expect(() => view.reportLoaded(reportText, report)).toThrow("completed job");
    view.setPendingDelta(-1);
    view.submitted("job-1");
    view.jobUpdate("Running");
    expect(() => view.reportLoaded(reportText, report)).toThrow("completed job");
    view.jobUpdate("Done");
    view.reportLoaded(reportText, report);
    const snap = view.snapshot();
    expect(snap.report).toBe(report);
    expect(snap.reportText).toBe(reportText);
    expect(snap.error).toBeNull();
  });

  it("drops the report and records the error when the job fails", () => {
    const view = new ScenarioView("RN");
    view.setPendingDelta(2);
    view.submitted("job-1");
    view.jobUpdate("Failed", "kaput");
    const snap = view.snapshot();
    expect(snap.jobPhase).toBe("Failed");
    expect(snap.error).toBe("kaput");
    expect(snap.report).toBeNull();
  });

  it("keeps an error banner and no stale baseline after a failed fetch", () => {
    const view = new ScenarioView("RN");
    view.baselineLoaded(baseline);
    expect(view.snapshot().baseline).not.toBeNull();
    view.baselineFailed("service unreachable");
    const snap = view.snapshot();
    expect(snap.baseline).toBeNull();
    expect(snap.error).toBe("service unreachable");
  });

  it("rejects a baseline for a different discipline", () => {
    const view = new ScenarioView("PT");
    expect(() => view.baselineLoaded(baseline)).toThrow("view shows PT");
  });

  it("resets everything when the discipline changes", () => {
    const view = new ScenarioView("RN");
    view.baselineLoaded(baseline);
    view.setPendingDelta(1);
    view.submitted("job-1");
    view.jobUpdate("Done");
    view.reportLoaded(reportText, report);
    view.selectDiscipline("PT");
    const snap = view.snapshot();
    expect(snap.discipline).toBe("PT");
    expect(snap.baseline).toBeNull();
    expect(snap.report).toBeNull();
    expect(snap.jobPhase).toBe("Idle");
    expect(snap.error).toBeNull();
  });

  it("requires integer deltas", () => {
    const view = new ScenarioView("RN");
    expect(() => view.setPendingDelta(0.5)).toThrow("integer");
  });
});
