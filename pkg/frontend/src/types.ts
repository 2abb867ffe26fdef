// Wire types for the slicescope HTTP service. Field names mirror the
// machine-readable description served at /api/v1/interface; the client
// renders these values verbatim and never recomputes counts or averages.

export type SliceKeyPair = [string, string];
export type SliceKey = SliceKeyPair[];

export interface ModelSummary {
    model_id: string;
    overall_perf: number;
    error_slices: number;
}

export interface ModelsResponse {
    version: string;
    models: ModelSummary[];
}

export interface ReportSlice {
    key: SliceKey;
    count: number;
    avg_perf: number;
    depth: number;
}

export interface ReportPage {
    version: string;
    model_id: string;
    C: number;
    overall_perf: number;
    total: number;
    offset: number;
    limit: number;
    slices: ReportSlice[];
}

export interface SliceChild {
    key: SliceKey;
    count: number;
    avg_perf?: number;
}

export interface SliceModelStat {
    model_id: string;
    avg_perf: number | null;
    retained: boolean;
    is_error_slice: boolean;
}

export interface SliceDetail {
    version: string;
    key: SliceKey;
    count: number;
    depth: number;
    parents: SliceKey[];
    children: SliceChild[];
    models: SliceModelStat[];
}

export interface SamplesResponse {
    version: string;
    key: SliceKey;
    ids: string[];
}

export interface MarksResponse {
    version: string;
    marks: SliceKey[];
}

export interface ExportManifest {
    version: string;
    kind: string;
    command: string[];
    marks: SliceKey[];
}

export interface OverlapResponse {
    version: string;
    a: string;
    b: string;
    fraction: number;
    overlap: number;
    symmetric_overlap: number;
}

export interface SchemaDocument {
    version: string;
    task: string;
    "main object": Record<string, string[]>;
    background: Record<string, string[]>;
    global: Record<string, string[]>;
}
