import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { ApiError, CareflowClient } from "../src/api";
import type { JobWire } from "../src/types";

const here = dirname(fileURLToPath(import.meta.url));
const scenarioText = readFileSync(join(here, "fixtures", "scenario-degenerate.json"), "utf8");

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(typeof body === "string" ? body : JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

interface Call {
  url: string;
  init?: RequestInit;
}

function scriptedClient(
  script: Array<(url: string, init?: RequestInit) => Response>,
): { client: CareflowClient; calls: Call[]; sleeps: number[] } {
  const calls: Call[] = [];
  const sleeps: number[] = [];
  let step = 0;
  const client = new CareflowClient("http://svc.test/", {
    fetchFn: async (url, init) => {
      calls.push({ url, init });
      const handler = script[step];
      if (!handler) throw new Error(`unexpected request #${step + 1} to ${url}`);
      step += 1;
      return handler(url, init);
    },
    sleepFn: async (ms) => {
      sleeps.push(ms);
    },
    pollIntervalMs: 100,
    pollBackoff: 2,
    pollMaxIntervalMs: 300,
    pollTimeoutMs: 10_000,
  });
  return { client, calls, sleeps };
}

const job = (status: JobWire["status"], error: string | null = null): JobWire => ({
  id: "job-1",
  kind: "scenario",
  discipline: "RN",
  status,
  error,
  result: null,
});

describe("CareflowClient", () => {
  it("strips trailing slashes and hits versioned paths", async () => {
    const { client, calls } = scriptedClient([() => jsonResponse(job("Done"))]);
    await client.getJob("job-1");
    expect(calls[0]!.url).toBe("http://svc.test/v1/jobs/job-1");
  });

  it("polls with growing, capped delays until the job completes", async () => {
    const { client, sleeps } = scriptedClient([
      () => jsonResponse(job("Queued")),
      () => jsonResponse(job("Running")),
      () => jsonResponse(job("Running")),
      () => jsonResponse(job("Running")),
      () => jsonResponse(job("Done")),
    ]);
    const done = await client.pollJob("job-1");
    expect(done.status).toBe("Done");
    expect(sleeps).toEqual([100, 200, 300, 300]);
  });

  it("surfaces HTTP 400 details inline as ApiError", async () => {
    const { client } = scriptedClient([
      () => jsonResponse({ detail: "delta must be non-zero" }, 400),
    ]);
    const err = await client
      .submitScenario({ discipline: "RN", delta: 0 })
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(400);
    expect((err as ApiError).detail).toBe("delta must be non-zero");
  });

  it("wraps network failures as status-0 ApiErrors", async () => {
    const client = new CareflowClient("http://svc.test", {
      fetchFn: async () => {
        throw new Error("connection refused");
      },
    });
    await expect(client.getJob("job-1")).rejects.toMatchObject({
      name: "ApiError",
      status: 0,
      detail: "connection refused",
    });
  });

  it("returns the scenario body text verbatim alongside parsed data", async () => {
    const { client } = scriptedClient([() => jsonResponse(scenarioText)]);
    const { report, text } = await client.getScenario("RN-dm1-r6-s4");
    expect(text).toBe(scenarioText);
    expect(report.rows).toHaveLength(2);
    expect(report.rows[0]!.t_stat).toBeNull();
  });

  it("runScenario submits, polls, and fetches the stored report", async () => {
    const { client, calls } = scriptedClient([
      () => jsonResponse({ job_id: "job-1", scenario_id: "RN-dm1-r6-s4" }, 202),
      () => jsonResponse(job("Running")),
      () => jsonResponse(job("Done")),
      () => jsonResponse(scenarioText),
    ]);
    const { job: finished, text } = await client.runScenario({
      discipline: "RN",
      delta: -1,
      replications: 6,
      seed: 4,
    });
    expect(finished.status).toBe("Done");
    expect(text).toBe(scenarioText);
    expect(calls.map((c) => c.url)).toEqual([
      "http://svc.test/v1/scenarios",
      "http://svc.test/v1/jobs/job-1",
      "http://svc.test/v1/jobs/job-1",
      "http://svc.test/v1/scenarios/RN-dm1-r6-s4",
    ]);
    const submitted = JSON.parse(String(calls[0]!.init?.body));
    expect(submitted).toEqual({ discipline: "RN", delta: -1, replications: 6, seed: 4 });
  });

  it("turns a Failed job into an ApiError carrying the job's message", async () => {
    const { client } = scriptedClient([
      () => jsonResponse({ job_id: "job-1", scenario_id: "PT-dp1-r2-s0" }, 202),
      () => jsonResponse(job("Failed", "no records (hence no caregivers) for discipline PT")),
    ]);
    await expect(client.runScenario({ discipline: "PT", delta: 1 })).rejects.toMatchObject({
      detail: "no records (hence no caregivers) for discipline PT",
    });
  });

  it("gives up polling after the timeout budget", async () => {
    let requests = 0;
    const client = new CareflowClient("http://svc.test", {
      fetchFn: async () => {
        requests += 1;
        return jsonResponse(job("Running"));
      },
      sleepFn: async () => {},
      pollIntervalMs: 400,
      pollBackoff: 1,
      pollMaxIntervalMs: 400,
      pollTimeoutMs: 1000,
    });
    await expect(client.pollJob("job-1")).rejects.toMatchObject({ status: 0 });
    expect(requests).toBe(4); // 0ms, 400ms, 800ms, 1200ms > budget
  });
});
