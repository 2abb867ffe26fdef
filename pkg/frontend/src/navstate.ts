import type { SliceKey } from "./types.js";
import type { Filters } from "./viewmodel.js";
import { canonicalKey } from "./keys.js";

// The whole view is URL-encodable: model selection, comparison partner,
// the breadcrumb path of expanded slices, filters, and the report page.
// Reloading a deep link reproduces the view exactly.

export interface NavState {
    model: string | null;
    compare: string | null;
    path: SliceKey[];
    filters: Filters;
    page: number;
}

export function emptyNav(): NavState {
    return { model: null, compare: null, path: [], filters: {}, page: 0 };
}

export function encodeNav(state: NavState): string {
    const params = new URLSearchParams();
    if (state.model) params.set("m", state.model);
    if (state.compare) params.set("cmp", state.compare);
    if (state.path.length) {
        params.set("path", JSON.stringify(state.path.map(canonicalKey)));
    }
    if (state.filters.category) params.set("fc", state.filters.category);
    if (state.filters.attribute) params.set("fa", state.filters.attribute);
    if (state.filters.tag) params.set("ft", state.filters.tag);
    if (state.filters.maxDepth !== undefined) params.set("fd", String(state.filters.maxDepth));
    if (state.page) params.set("p", String(state.page));
    return params.toString();
}

export function decodeNav(query: string): NavState {
    const params = new URLSearchParams(query.startsWith("#") ? query.slice(1) : query);
    const state = emptyNav();
    state.model = params.get("m");
    state.compare = params.get("cmp");
    const path = params.get("path");
    if (path) {
        const parsed = JSON.parse(path) as [string, string][][];
        state.path = parsed.map((key) => canonicalKey(key.map(([a, t]) => [String(a), String(t)])));
    }
    const fc = params.get("fc");
    if (fc === "main object" || fc === "background" || fc === "global") {
        state.filters.category = fc;
    }
    const fa = params.get("fa");
    if (fa) state.filters.attribute = fa;
    const ft = params.get("ft");
    if (ft) state.filters.tag = ft;
    const fd = params.get("fd");
    if (fd !== null && fd !== "") state.filters.maxDepth = Number(fd);
    const p = params.get("p");
    if (p) state.page = Number(p);
    return state;
}
