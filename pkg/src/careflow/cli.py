"""Command-line client for the allocation service.

Every data-touching subcommand talks to the REST API — either a remote
server named by ``--server`` or an in-process instance of the app — so the
CLI stays a thin transport over the same contract the UI uses.  ``synth``
generates datasets locally (no server state involved) and ``serve`` runs
the API under uvicorn.

Exit codes: 0 success, 1 domain/IO error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from .config import load_config
from .ingest import Discipline, SynthConfig, generate_synthetic_dataset, records_to_csv

POLL_INTERVAL_SECONDS = 0.2


class ClientError(Exception):
    """Domain-level failure reported to the user with exit code 1."""


class ApiClient:
    def __init__(self, server: str | None, config_path: str | None):
        if server:
            import httpx

            self.http = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self.http = TestClient(create_app(load_config(config_path)))

    def request(self, method: str, path: str, **kwargs) -> dict:
        response = self.http.request(method, path, **kwargs)
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ClientError(f"{method} {path} failed ({response.status_code}): {detail}")
        return response.json()

    def wait_for_job(self, job_id: str, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        while True:
            job = self.request("GET", f"/v1/jobs/{job_id}")
            if job["status"] == "Done":
                return job["result"]
            if job["status"] == "Failed":
                raise ClientError(f"job {job_id} failed: {job.get('error')}")
            if time.monotonic() > deadline:
                raise ClientError(f"job {job_id} did not finish within {timeout:.0f}s")
            time.sleep(POLL_INTERVAL_SECONDS)


def _write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        n_caregivers=args.caregivers,
        n_patients=args.patients,
        cluster_spread=args.spread,
        region=tuple(args.box),
        weeks=args.weeks,
        discipline=Discipline(args.discipline),
        n_centers=args.centers,
        min_center_separation=args.min_separation,
    )
    records, truth = generate_synthetic_dataset(config, args.seed)
    with open(args.out, "w") as fh:
        records_to_csv(records, fh)
    if args.truth_out:
        _write_json(
            args.truth_out,
            {
                "centers": [
                    {"lat": c.latitude, "lon": c.longitude} for c in truth.centers
                ],
                "patient_center": truth.patient_center,
                "caregiver_homes": {
                    cid: {"lat": p.latitude, "lon": p.longitude}
                    for cid, p in sorted(truth.caregiver_homes.items())
                },
            },
        )
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    client = ApiClient(args.server, args.config)
    text = Path(args.input).read_text()
    summary = client.request(
        "POST", "/v1/datasets", content=text.encode(), headers={"content-type": "text/csv"}
    )
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _cmd_tune(args: argparse.Namespace) -> int:
    client = ApiClient(args.server, args.config)
    body = {"discipline": args.discipline, "seed": args.seed}
    if args.generations is not None:
        body["generations"] = args.generations
    if args.population is not None:
        body["population"] = args.population
    accepted = client.request("POST", "/v1/tune", json=body)
    result = client.wait_for_job(accepted["job_id"], args.timeout)
    out = args.out or f"tune-{args.discipline}.json"
    _write_json(out, result)
    print(f"best fitness {result['best_fitness']:.4f} after {result['evaluations']} evaluations -> {out}")
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    client = ApiClient(args.server, args.config)
    body = {"discipline": args.discipline, "seed": args.seed, "use_tuned": not args.no_tuned}
    baseline = client.request("POST", "/v1/baselines", json=body)
    out = args.out or f"baseline-{args.discipline}.json"
    _write_json(out, baseline)
    print(f"baseline with {baseline['assignment']['C']} clusters -> {out}")
    return 0


def _read_patients_csv(path: str) -> list[dict]:
    patients = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"patient_id", "lat", "lon"} <= set(reader.fieldnames):
            raise ClientError(f"{path} must have columns patient_id,lat,lon")
        for row in reader:
            entry = {
                "id": row["patient_id"].strip(),
                "lat": float(row["lat"]),
                "lon": float(row["lon"]),
            }
            if row.get("weekly_visits"):
                entry["weekly_visits"] = int(row["weekly_visits"])
            if row.get("visit_length_hours"):
                entry["visit_length"] = float(row["visit_length_hours"])
            patients.append(entry)
    if not patients:
        raise ClientError(f"no patients in {path}")
    return patients


def _cmd_allocate(args: argparse.Namespace) -> int:
    client = ApiClient(args.server, args.config)
    body = {"discipline": args.discipline, "patients": _read_patients_csv(args.patients)}
    if args.max_retries is not None:
        body["max_retries"] = args.max_retries
    result = client.request("POST", "/v1/allocate", json=body)
    with open(args.out, "w") as fh:
        fh.write("patient_id,caregiver_id,extrapolated,retry_round\n")
        for row in result["assignments"]:
            flag = "true" if row["extrapolated"] else "false"
            fh.write(f"{row['patient_id']},{row['caregiver_id']},{flag},{row['retry_round']}\n")
    violations = [
        cid for cid, e in result["feasibility"].items() if e["status"] != "Feasible"
    ]
    print(
        f"allocated {len(result['assignments'])} patients in {result['retries']} retries -> {args.out}"
        + (f" (violations: {', '.join(sorted(violations))})" if violations else "")
    )
    return 0


def _cmd_sensitivity(args: argparse.Namespace) -> int:
    client = ApiClient(args.server, args.config)
    try:
        deltas = [int(d) for d in args.deltas.split(",") if d.strip()]
    except ValueError:
        raise ClientError(f"bad --deltas value {args.deltas!r}; expected e.g. -1,1")
    if not deltas:
        raise ClientError("no deltas given")
    rows: list[dict] = []
    scenario_ids: list[str] = []
    merged: dict | None = None
    for delta in deltas:
        accepted = client.request(
            "POST",
            "/v1/scenarios",
            json={
                "discipline": args.discipline,
                "delta": delta,
                "replications": args.replications,
                "alpha": args.alpha,
                "seed": args.seed,
            },
        )
        report = client.wait_for_job(accepted["job_id"], args.timeout)
        scenario_ids.append(report["scenario_id"])
        rows.extend(report["rows"])
        merged = report
    assert merged is not None
    payload = {
        "discipline": merged["discipline"],
        "replications": merged["replications"],
        "alpha": merged["alpha"],
        "seed": merged["seed"],
        "scenario_ids": scenario_ids,
        "rows": rows,
    }
    out = args.out or f"sensitivity-{args.discipline}.json"
    _write_json(out, payload)
    header = f"{'delta':>6} {'metric':<6} {'baseline':>12} {'alt':>12} {'apc%':>9} {'p':>8}  signif"
    print(header)
    for row in rows:
        print(
            f"{row['delta']:>+6d} {row['metric']:<6} {row['baseline_mean']:>12.4f} "
            f"{row['alt_mean']:>12.4f} {row['apc']:>9.2f} {row['p_value']:>8.4f}  "
            + ("yes" if row["significant"] else "no")
        )
    print(f"-> {out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(load_config(args.config)), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="careflow", description="Travel-aware caregiver allocation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--server", help="base URL of a running service (default: in-process)")
        p.add_argument("--config", help="path to a TOML config file")

    p = sub.add_parser("synth", help="generate a synthetic visit log")
    p.add_argument("--out", default="dataset.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--caregivers", type=int, default=4)
    p.add_argument("--patients", type=int, default=40)
    p.add_argument("--weeks", type=int, default=4)
    p.add_argument("--spread", type=float, default=0.05)
    p.add_argument(
        "--box",
        type=float,
        nargs=4,
        metavar=("LAT_MIN", "LAT_MAX", "LON_MIN", "LON_MAX"),
        default=[35.5, 36.5, -84.5, -83.5],
    )
    p.add_argument("--discipline", default="RN", choices=[d.value for d in Discipline])
    p.add_argument("--centers", type=int, default=None)
    p.add_argument("--min-separation", type=float, default=None)
    p.add_argument("--truth-out", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="upload a visit log to the service")
    common(p)
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("tune", help="run the GA hyperparameter search")
    common(p)
    p.add_argument("--discipline", required=True, choices=[d.value for d in Discipline])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--timeout", type=float, default=600.0)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("baseline", help="build and persist a baseline clustering")
    common(p)
    p.add_argument("--discipline", required=True, choices=[d.value for d in Discipline])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-tuned", action="store_true", help="ignore tuned params, use defaults")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("allocate", help="allocate a week of incoming patients")
    common(p)
    p.add_argument("--discipline", required=True, choices=[d.value for d in Discipline])
    p.add_argument("--patients", required=True, help="CSV with patient_id,lat,lon[,weekly_visits,visit_length_hours]")
    p.add_argument("--max-retries", type=int, default=None)
    p.add_argument("--out", default="allocation.csv")
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("sensitivity", help="run caregiver-supply scenarios")
    common(p)
    p.add_argument("--discipline", required=True, choices=[d.value for d in Discipline])
    p.add_argument(
        "--deltas",
        default="-1,1",
        help="comma-separated caregiver deltas; use the = form for leading minus, e.g. --deltas=-1,1",
    )
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--timeout", type=float, default=600.0)
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="path to a TOML config file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
