import type { SliceKey } from "./types.js";

// Canonical form: pairs sorted by attribute name; the string form is the
// compact JSON the service accepts in its `key` query parameter.

export function canonicalKey(key: SliceKey): SliceKey {
    return [...key].sort((a, b) => (a[0] < b[0] ? -1 : a[0] > b[0] ? 1 : 0));
}

export function keyString(key: SliceKey): string {
    return JSON.stringify(canonicalKey(key));
}

export function keyLabel(key: SliceKey): string {
    return canonicalKey(key).map(([attr, tag]) => `${attr} = ${tag}`).join("  ·  ");
}

export function sameKey(a: SliceKey, b: SliceKey): boolean {
    return keyString(a) === keyString(b);
}
