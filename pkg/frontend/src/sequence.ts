// Concurrent fetches render last-write-wins: every request takes a
// sequence number and a response may only paint if nothing newer has.

export class RenderSequencer {
    private issued = 0;
    private painted = 0;

    next(): number {
        this.issued += 1;
        return this.issued;
    }

    accept(seq: number): boolean {
        if (seq <= this.painted) {
            return false;
        }
        this.painted = seq;
        return true;
    }
}
