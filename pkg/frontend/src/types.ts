/** Wire types mirroring the careflow REST API exactly. */

export const DISCIPLINES = [
  "RN",
  "PT",
  "PTA",
  "CNA",
  "LPN",
  "OT",
  "COTA",
  "CH",
  "SLP",
  "MSW",
  "BSW",
] as const;

export type Discipline = (typeof DISCIPLINES)[number];

export interface SpectralParamsWire {
  kernel: "RBF" | "KNearest";
  psi: number;
  knn_k: number;
  embed_dim: number;
  kmeans_n_init: number;
  eig_strategy: "Dense" | "Iterative";
  eig_max_iter: number;
  eig_tol: number;
}

export interface AssignmentWire {
  discipline: Discipline;
  C: number;
  labels: number[];
  params: SpectralParamsWire;
  seed: number;
}

export interface TrainingPointWire {
  id: string;
  lat: number;
  lon: number;
  cluster: number;
}

export interface CaregiverWire {
  id: string;
  lat: number;
  lon: number;
}

export interface BaselineWire {
  discipline: Discipline;
  assignment: AssignmentWire;
  training: TrainingPointWire[];
  /** Keys are cluster indices serialized as strings. */
  centroid_of: Record<string, string>;
  caregivers: CaregiverWire[];
  params: SpectralParamsWire;
  seed: number;
  created_at: string;
}

export type MetricName = "AMPM" | "ATPM";

export interface SensitivityRowWire {
  delta: number;
  metric: MetricName;
  baseline_mean: number;
  alt_mean: number;
  apc: number;
  /** null for degenerate (zero-variance) replication sets. */
  t_stat: number | null;
  p_value: number;
  significant: boolean;
}

export interface ScenarioReportWire {
  discipline: Discipline;
  replications: number;
  alpha: number;
  seed: number;
  rows: SensitivityRowWire[];
  scenario_id: string;
}

export interface GammaSummaryWire {
  gamma_curr: number;
  gamma_lim: number;
  n_home: number;
  n_total: number;
}

export interface DatasetSummaryWire {
  records: number;
  dropped: number;
  disciplines: Record<string, number>;
  gamma: Record<string, GammaSummaryWire>;
}

export type JobStatus = "Queued" | "Running" | "Done" | "Failed";

export interface JobWire {
  id: string;
  kind: string;
  discipline: string;
  status: JobStatus;
  error: string | null;
  result: Record<string, unknown> | null;
}

export interface JobAcceptedWire {
  job_id: string;
  scenario_id: string | null;
}

export interface TuneRequestWire {
  discipline: Discipline;
  seed?: number;
  generations?: number;
  population?: number;
}

export interface BaselineBuildRequestWire {
  discipline: Discipline;
  seed?: number;
  use_tuned?: boolean;
}

export interface PatientInWire {
  id?: string;
  lat: number;
  lon: number;
  weekly_visits?: number;
  visit_length?: number;
}

export interface AllocateRequestWire {
  discipline: Discipline;
  patients: PatientInWire[];
  max_retries?: number;
}

export interface AssignmentRowWire {
  patient_id: string;
  caregiver_id: string;
  extrapolated: boolean;
  retry_round: number;
}

export interface FeasibilityEntryWire {
  status: "Feasible" | "BelowMin" | "AboveMax";
  workload: number;
  hours_min: number;
  hours_max: number;
}

export interface AllocationResponseWire {
  discipline: Discipline;
  retries: number;
  assignments: AssignmentRowWire[];
  feasibility: Record<string, FeasibilityEntryWire>;
}

export interface ScenarioRequestWire {
  discipline: Discipline;
  delta: number;
  replications?: number;
  alpha?: number;
  seed?: number;
}
