import assert from "node:assert/strict";
import { test } from "node:test";

import { RenderSequencer } from "../src/sequence.js";

test("in-order responses all paint", () => {
    const seq = new RenderSequencer();
    const a = seq.next();
    const b = seq.next();
    assert.ok(seq.accept(a));
    assert.ok(seq.accept(b));
});

test("stale response never overwrites a newer paint", () => {
    const seq = new RenderSequencer();
    const first = seq.next();
    const second = seq.next();
    assert.ok(seq.accept(second));      // newer response lands first
    assert.equal(seq.accept(first), false);  // older one must not paint
});

test("each sequence number paints at most once", () => {
    const seq = new RenderSequencer();
    const only = seq.next();
    assert.ok(seq.accept(only));
    assert.equal(seq.accept(only), false);
});
