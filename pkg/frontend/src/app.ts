import { ApiClient, ApiError } from "./api.js";
import { keyString } from "./keys.js";
import { decodeNav, encodeNav, type NavState } from "./navstate.js";
import { RenderSequencer } from "./sequence.js";
import type { ReportPage, SchemaDocument, SliceKey } from "./types.js";
import {
    compareRows,
    dropStaleRow,
    drillDownRows,
    filterRows,
    markMirror,
    overlapSummary,
    reportRows,
    type Row,
} from "./viewmodel.js";
import {
    renderBreadcrumb,
    renderCompare,
    renderNotice,
    renderRows,
} from "./render.js";

const PAGE_SIZE = 50;

class Explorer {
    private api = new ApiClient("");
    private seq = new RenderSequencer();
    private nav: NavState = decodeNav(location.hash);
    private schema: SchemaDocument | null = null;
    private marked = new Set<string>();
    private currentRows: Row[] = [];
    private overall: number | null = null;

    private $ = (id: string) => document.getElementById(id)!;

    async start(): Promise<void> {
        window.addEventListener("hashchange", () => {
            this.nav = decodeNav(location.hash);
            void this.refresh();
        });
        try {
            this.schema = await this.api.schema();
        } catch {
            this.schema = null;
        }
        const models = await this.api.models();
        const select = this.$("model") as HTMLSelectElement;
        const compare = this.$("compare-with") as HTMLSelectElement;
        for (const m of models.models) {
            select.add(new Option(`${m.model_id} (${m.error_slices} error slices)`, m.model_id));
            compare.add(new Option(m.model_id, m.model_id));
        }
        compare.add(new Option("(none)", ""), 0);
        if (!this.nav.model && models.models.length) {
            this.nav.model = models.models[0].model_id;
        }
        select.value = this.nav.model ?? "";
        compare.value = this.nav.compare ?? "";
        select.onchange = () => this.update((n) => {
            n.model = select.value || null;
            n.path = [];
            n.page = 0;
        });
        compare.onchange = () => this.update((n) => {
            n.compare = compare.value || null;
        });
        this.wireFilters();
        const marks = await this.api.marks();
        this.marked = new Set(markMirror(marks));
        void this.refresh();
    }

    private wireFilters(): void {
        const attr = this.$("filter-attribute") as HTMLInputElement;
        const tag = this.$("filter-tag") as HTMLInputElement;
        const cat = this.$("filter-category") as HTMLSelectElement;
        attr.value = this.nav.filters.attribute ?? "";
        tag.value = this.nav.filters.tag ?? "";
        cat.value = this.nav.filters.category ?? "";
        const apply = () => this.update((n) => {
            n.filters = {
                attribute: attr.value || undefined,
                tag: tag.value || undefined,
                category: (cat.value || undefined) as never,
            };
        });
        attr.onchange = apply;
        tag.onchange = apply;
        cat.onchange = apply;
        (this.$("export") as HTMLButtonElement).onclick = () => void this.exportMarks();
        (this.$("prev") as HTMLButtonElement).onclick = () =>
            this.update((n) => { n.page = Math.max(0, n.page - 1); });
        (this.$("next") as HTMLButtonElement).onclick = () =>
            this.update((n) => { n.page = n.page + 1; });
    }

    private update(mutate: (nav: NavState) => void): void {
        mutate(this.nav);
        location.hash = encodeNav(this.nav);
        void this.refresh();
    }

    private async refresh(): Promise<void> {
        const seq = this.seq.next();
        const model = this.nav.model;
        if (!model) {
            renderNotice(this.$("rows"), "no model loaded");
            return;
        }
        try {
            let rows: Row[];
            if (this.nav.path.length === 0) {
                const page = await this.api.report(model, this.nav.page * PAGE_SIZE, PAGE_SIZE);
                this.overall = page.overall_perf;
                rows = reportRows(page);
            } else {
                const leaf = this.nav.path[this.nav.path.length - 1];
                const detail = await this.api.slice(leaf, model);
                rows = drillDownRows(detail, this.overall);
            }
            if (!this.seq.accept(seq)) return;
            this.currentRows = filterRows(rows, this.schema, this.nav.filters);
            this.paint();
            await this.refreshCompare(model);
        } catch (err) {
            if (!(err instanceof ApiError)) throw err;
            if (err.status === 404 && this.nav.path.length) {
                const stale = this.nav.path[this.nav.path.length - 1];
                const { rows, notice } = dropStaleRow(this.currentRows, stale);
                this.currentRows = rows;
                this.nav.path = this.nav.path.slice(0, -1);
                this.paint();
                renderNotice(this.$("notice"), notice);
            } else {
                renderNotice(this.$("notice"), err.message);
            }
        }
    }

    private paint(): void {
        renderBreadcrumb(this.$("breadcrumb"), this.nav.path, (depth) =>
            this.update((n) => { n.path = n.path.slice(0, depth + 1); }),
        );
        renderRows(this.$("rows"), this.currentRows, this.marked, {
            onDrill: (key) => this.update((n) => { n.path = [...n.path, key]; }),
            onMark: (key, isMarked) => void this.toggleMark(key, isMarked),
            onSamples: (key) => void this.showSamples(key),
        });
    }

    private async refreshCompare(model: string): Promise<void> {
        const container = this.$("comparison");
        const other = this.nav.compare;
        if (!other || other === model) {
            container.replaceChildren();
            return;
        }
        let pageA: ReportPage | null = null;
        let pageB: ReportPage | null = null;
        try {
            pageA = await this.api.report(model, 0, PAGE_SIZE);
        } catch { /* column disabled */ }
        try {
            pageB = await this.api.report(other, 0, PAGE_SIZE);
        } catch { /* column disabled */ }
        let summary = "overlap unavailable";
        if (pageA && pageB) {
            summary = overlapSummary(await this.api.overlap(model, other));
        }
        renderCompare(container, compareRows(pageA, pageB),
            pageA ? model : null, pageB ? other : null, summary);
    }

    private async toggleMark(key: SliceKey, isMarked: boolean): Promise<void> {
        try {
            const marks = isMarked
                ? await this.api.removeMark(key)
                : await this.api.addMark(key);
            this.marked = new Set(markMirror(marks));
            this.paint();
        } catch (err) {
            if (err instanceof ApiError) {
                renderNotice(this.$("notice"), `mark rejected: ${err.message}`);
            }
        }
    }

    private async showSamples(key: SliceKey): Promise<void> {
        const resp = await this.api.samples(key);
        renderNotice(
            this.$("notice"),
            `${resp.ids.length} member sample(s): ${resp.ids.slice(0, 25).join(", ")}` +
            (resp.ids.length > 25 ? ", …" : ""),
        );
    }

    private async exportMarks(): Promise<void> {
        const manifest = await this.api.exportMarks(100);
        const blob = new Blob([JSON.stringify(manifest, null, 2)], { type: "application/json" });
        const a = document.createElement("a");
        a.href = URL.createObjectURL(blob);
        a.download = "select-manifest.json";
        a.click();
        URL.revokeObjectURL(a.href);
    }
}

new Explorer().start().catch((err) => {
    const rows = document.getElementById("rows");
    if (rows) rows.textContent = `failed to load workspace: ${err}`;
});
