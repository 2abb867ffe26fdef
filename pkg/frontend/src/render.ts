import type { CompareRow, Row } from "./viewmodel.js";
import type { SliceKey } from "./types.js";
import { keyLabel, keyString } from "./keys.js";

// DOM helpers; all values come pre-built by the viewmodel.

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    cls?: string,
    text?: string,
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (cls) node.className = cls;
    if (text !== undefined) node.textContent = text;
    return node;
}

const fmt = (x: number | null) => (x === null ? "–" : x.toFixed(3));
const fmtDelta = (x: number | null) =>
    x === null ? "–" : `${x >= 0 ? "+" : ""}${x.toFixed(3)}`;

export function renderRows(
    container: HTMLElement,
    rows: Row[],
    marked: Set<string>,
    handlers: {
        onDrill: (key: SliceKey) => void;
        onMark: (key: SliceKey, marked: boolean) => void;
        onSamples: (key: SliceKey) => void;
    },
): void {
    container.replaceChildren();
    if (!rows.length) {
        container.append(el("p", "empty", "no slices to show"));
        return;
    }
    const table = el("table", "slices");
    const head = el("tr");
    for (const h of ["slice", "depth", "count", "avg perf", "delta", ""]) {
        head.append(el("th", undefined, h));
    }
    table.append(head);
    for (const row of rows) {
        const tr = el("tr");
        const label = el("td", "label");
        const link = el("a", undefined, row.label);
        link.href = "#";
        link.onclick = (e) => {
            e.preventDefault();
            handlers.onDrill(row.key);
        };
        label.append(link);
        tr.append(label);
        tr.append(el("td", "num", String(row.depth)));
        tr.append(el("td", "num", String(row.count)));
        tr.append(el("td", "num", fmt(row.avgPerf)));
        tr.append(el("td", "num delta", fmtDelta(row.delta)));
        const actions = el("td", "actions");
        const isMarked = marked.has(keyString(row.key));
        const markBtn = el("button", undefined, isMarked ? "unmark" : "mark");
        markBtn.onclick = () => handlers.onMark(row.key, isMarked);
        const samplesBtn = el("button", undefined, "samples");
        samplesBtn.onclick = () => handlers.onSamples(row.key);
        actions.append(markBtn, samplesBtn);
        tr.append(actions);
        table.append(tr);
    }
    container.append(table);
}

export function renderCompare(
    container: HTMLElement,
    rows: CompareRow[],
    modelA: string | null,
    modelB: string | null,
    summary: string,
): void {
    container.replaceChildren();
    container.append(el("p", "overlap", summary));
    const table = el("table", "compare");
    const head = el("tr");
    head.append(el("th", undefined, "slice"));
    head.append(el("th", modelA ? "" : "disabled", modelA ?? "(no model)"));
    head.append(el("th", modelB ? "" : "disabled", modelB ?? "(no model)"));
    table.append(head);
    for (const row of rows) {
        const tr = el("tr");
        tr.append(el("td", "label", row.label));
        tr.append(el("td", modelA ? "num" : "num disabled", fmt(row.avgA)));
        tr.append(el("td", modelB ? "num" : "num disabled", fmt(row.avgB)));
        table.append(tr);
    }
    container.append(table);
}

export function renderBreadcrumb(
    container: HTMLElement,
    path: SliceKey[],
    onJump: (depth: number) => void,
): void {
    container.replaceChildren();
    const root = el("a", undefined, "error slices");
    root.href = "#";
    root.onclick = (e) => {
        e.preventDefault();
        onJump(-1);
    };
    container.append(root);
    path.forEach((key, i) => {
        container.append(el("span", "sep", " › "));
        const link = el("a", undefined, keyLabel(key));
        link.href = "#";
        link.onclick = (e) => {
            e.preventDefault();
            onJump(i);
        };
        container.append(link);
    });
}

export function renderNotice(container: HTMLElement, text: string): void {
    container.replaceChildren(el("p", "notice", text));
}
