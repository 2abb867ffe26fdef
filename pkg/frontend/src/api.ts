import type {
    ExportManifest,
    MarksResponse,
    ModelsResponse,
    OverlapResponse,
    ReportPage,
    SamplesResponse,
    SchemaDocument,
    SliceDetail,
    SliceKey,
} from "./types.js";
import { keyString } from "./keys.js";

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

// Thin typed client over /api/v1; the transport is injectable so tests
// can replay recorded fixtures without a network.
export class ApiClient {
    constructor(
        private base: string = "",
        private fetchFn: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const resp = await this.fetchFn(`${this.base}/api/v1${path}`, init);
        const body = await resp.json();
        if (!resp.ok) {
            throw new ApiError(resp.status, body?.error ?? `HTTP ${resp.status}`);
        }
        return body as T;
    }

    models(): Promise<ModelsResponse> {
        return this.request("/models");
    }

    schema(): Promise<SchemaDocument> {
        return this.request("/schema");
    }

    report(modelId: string, offset = 0, limit = 50): Promise<ReportPage> {
        return this.request(`/report/${encodeURIComponent(modelId)}?offset=${offset}&limit=${limit}`);
    }

    slice(key: SliceKey, modelId?: string): Promise<SliceDetail> {
        const model = modelId ? `&model=${encodeURIComponent(modelId)}` : "";
        return this.request(`/slice?key=${encodeURIComponent(keyString(key))}${model}`);
    }

    samples(key: SliceKey): Promise<SamplesResponse> {
        return this.request(`/slice/samples?key=${encodeURIComponent(keyString(key))}`);
    }

    overlap(a: string, b: string, fraction = 0.1): Promise<OverlapResponse> {
        return this.request(
            `/overlap?a=${encodeURIComponent(a)}&b=${encodeURIComponent(b)}&fraction=${fraction}`,
        );
    }

    marks(): Promise<MarksResponse> {
        return this.request("/marks");
    }

    addMark(key: SliceKey): Promise<MarksResponse> {
        return this.request("/marks", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ key }),
        });
    }

    removeMark(key: SliceKey): Promise<MarksResponse> {
        return this.request(`/marks?key=${encodeURIComponent(keyString(key))}`, {
            method: "DELETE",
        });
    }

    exportMarks(budget: number, pool?: string): Promise<ExportManifest> {
        const poolArg = pool ? `&pool=${encodeURIComponent(pool)}` : "";
        return this.request(`/marks/export?budget=${budget}${poolArg}`);
    }
}
