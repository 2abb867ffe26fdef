import type {
    ExportManifest,
    MarksResponse,
    OverlapResponse,
    ReportPage,
    SchemaDocument,
    SliceDetail,
    SliceKey,
} from "./types.js";
import { canonicalKey, keyLabel, keyString } from "./keys.js";

// Pure builders from service responses to render-ready rows. Every count
// and average in a Row is a verbatim service value; the only derived
// number is the delta against the service-reported overall mean.

export interface Row {
    key: SliceKey;
    label: string;
    depth: number;
    count: number;
    avgPerf: number | null;
    delta: number | null;
}

export function reportRows(page: ReportPage): Row[] {
    return page.slices.map((s) => ({
        key: canonicalKey(s.key),
        label: keyLabel(s.key),
        depth: s.depth,
        count: s.count,
        avgPerf: s.avg_perf,
        delta: s.avg_perf - page.overall_perf,
    }));
}

export function drillDownRows(detail: SliceDetail, overallPerf: number | null): Row[] {
    const rows = detail.children.map((child) => {
        const avg = child.avg_perf ?? null;
        return {
            key: canonicalKey(child.key),
            label: keyLabel(child.key),
            depth: child.key.length,
            count: child.count,
            avgPerf: avg,
            delta: avg !== null && overallPerf !== null ? avg - overallPerf : null,
        };
    });
    rows.sort((a, b) => {
        const av = a.avgPerf ?? Number.POSITIVE_INFINITY;
        const bv = b.avgPerf ?? Number.POSITIVE_INFINITY;
        if (av !== bv) return av - bv;
        return keyString(a.key) < keyString(b.key) ? -1 : 1;
    });
    return rows;
}

// A drill target that disappeared server-side (stale artifact): the row
// goes away and the user gets told why.
export function dropStaleRow(rows: Row[], key: SliceKey): { rows: Row[]; notice: string } {
    const stale = keyString(key);
    return {
        rows: rows.filter((r) => keyString(r.key) !== stale),
        notice: `slice ${keyLabel(key)} is no longer in the loaded artifacts`,
    };
}

// -- model comparison ---------------------------------------------------------

export interface CompareRow {
    key: SliceKey;
    label: string;
    depth: number;
    avgA: number | null;
    avgB: number | null;
    countA: number | null;
    countB: number | null;
}

export function compareRows(pageA: ReportPage | null, pageB: ReportPage | null): CompareRow[] {
    const byKey = new Map<string, CompareRow>();
    const fold = (page: ReportPage | null, side: "a" | "b") => {
        if (!page) return;
        for (const s of page.slices) {
            const id = keyString(s.key);
            let row = byKey.get(id);
            if (!row) {
                row = {
                    key: canonicalKey(s.key),
                    label: keyLabel(s.key),
                    depth: s.depth,
                    avgA: null,
                    avgB: null,
                    countA: null,
                    countB: null,
                };
                byKey.set(id, row);
            }
            if (side === "a") {
                row.avgA = s.avg_perf;
                row.countA = s.count;
            } else {
                row.avgB = s.avg_perf;
                row.countB = s.count;
            }
        }
    };
    fold(pageA, "a");
    fold(pageB, "b");
    const rows = [...byKey.values()];
    rows.sort((x, y) => {
        const xv = Math.min(x.avgA ?? Infinity, x.avgB ?? Infinity);
        const yv = Math.min(y.avgA ?? Infinity, y.avgB ?? Infinity);
        if (xv !== yv) return xv - yv;
        return keyString(x.key) < keyString(y.key) ? -1 : 1;
    });
    return rows;
}

export function overlapSummary(resp: OverlapResponse): string {
    const pct = (x: number) => `${Math.round(x * 1000) / 10}%`;
    return (
        `top ${pct(resp.fraction)} overlap ${resp.a} vs ${resp.b}: ` +
        `${pct(resp.overlap)} (symmetric ${pct(resp.symmetric_overlap)})`
    );
}

// -- filters -------------------------------------------------------------------

export interface Filters {
    category?: "main object" | "background" | "global";
    attribute?: string;
    tag?: string;
    maxDepth?: number;
}

export function attributeCategories(schema: SchemaDocument): Map<string, string> {
    const out = new Map<string, string>();
    for (const cat of ["main object", "background", "global"] as const) {
        for (const attr of Object.keys(schema[cat] ?? {})) {
            out.set(attr, cat);
        }
    }
    return out;
}

export function filterRows(rows: Row[], schema: SchemaDocument | null, filters: Filters): Row[] {
    const categories = schema ? attributeCategories(schema) : null;
    return rows.filter((row) => {
        if (filters.maxDepth !== undefined && row.depth > filters.maxDepth) return false;
        if (filters.attribute && !row.key.some(([a]) => a === filters.attribute)) return false;
        if (filters.tag && !row.key.some(([, t]) => t === filters.tag)) return false;
        if (filters.category && categories) {
            if (!row.key.some(([a]) => categories.get(a) === filters.category)) return false;
        }
        return true;
    });
}

// Slice cards group the pairs by what they describe, the way users
// reason about causes.
export function groupPairsByCategory(
    key: SliceKey,
    schema: SchemaDocument,
): Record<string, [string, string][]> {
    const categories = attributeCategories(schema);
    const out: Record<string, [string, string][]> = {
        "main object": [],
        background: [],
        global: [],
    };
    for (const [attr, tag] of canonicalKey(key)) {
        const cat = categories.get(attr) ?? "main object";
        out[cat].push([attr, tag]);
    }
    return out;
}

// -- marks -----------------------------------------------------------------------

export function markMirror(resp: MarksResponse): string[] {
    return resp.marks.map((k) => keyString(k));
}

export function exportCommandLine(manifest: ExportManifest): string {
    return manifest.command.join(" ");
}
