import { describe, expect, it } from "vitest";
import type { FrameResult, OrbitPose, RenderMode } from "../src/api.js";
import { FrameLoop } from "../src/viewer.js";

function deferred<T>() {
    let resolve!: (v: T) => void;
    let reject!: (e: unknown) => void;
    const promise = new Promise<T>((res, rej) => {
        resolve = res;
        reject = rej;
    });
    return { promise, resolve, reject };
}

const POSE: OrbitPose = { azimuth: 0, elevation: 0, radius: 3 };

function frame(version: number): FrameResult {
    return { blob: new Blob([`v${version}`]), editVersion: version };
}

describe("FrameLoop", () => {
    it("shows frames and tracks the edit version", async () => {
        const shown: number[] = [];
        const loop = new FrameLoop({
            fetchFrame: async () => frame(3),
            show: (f) => shown.push(f.editVersion),
        });
        loop.request(POSE, "textured", 256);
        await new Promise((r) => setTimeout(r, 0));
        expect(shown).toEqual([3]);
        expect(loop.lastShownVersion).toBe(3);
    });

    it("keeps at most one request in flight and coalesces bursts", async () => {
        let calls = 0;
        const pending: Array<ReturnType<typeof deferred<FrameResult>>> = [];
        const loop = new FrameLoop({
            fetchFrame: () => {
                calls += 1;
                const d = deferred<FrameResult>();
                pending.push(d);
                return d.promise;
            },
            show: () => undefined,
        });
        for (let i = 0; i < 25; i++) loop.request({ ...POSE, azimuth: i }, "textured", 256);
        expect(calls).toBe(1);
        pending[0].resolve(frame(0));
        await new Promise((r) => setTimeout(r, 0));
        expect(calls).toBe(2); // one coalesced follow-up for the latest pose
        pending[1].resolve(frame(0));
        await new Promise((r) => setTimeout(r, 0));
        expect(calls).toBe(2);
        expect(loop.busy).toBe(false);
    });

    it("drops frames older than the last acknowledged edit and refetches", async () => {
        const shown: number[] = [];
        let version = 0;
        const loop = new FrameLoop({
            fetchFrame: async () => frame(version),
            show: (f) => shown.push(f.editVersion),
        });
        loop.request(POSE, "textured", 256);
        await new Promise((r) => setTimeout(r, 0));
        expect(shown).toEqual([0]);

        // an edit lands; the next response still carries the old version once
        loop.acknowledgeEdit(5);
        loop.request(POSE, "textured", 256);
        await new Promise((r) => setTimeout(r, 5));
        expect(shown).toEqual([0]); // stale frame dropped, not displayed
        expect(loop.droppedStale).toBeGreaterThan(0);

        version = 5; // the service catches up; the delayed refetch shows it
        await new Promise((r) => setTimeout(r, 120));
        expect(shown[shown.length - 1]).toBe(5);
    });

    it("flags staleness and retries with backoff on network failure", async () => {
        const scheduled: Array<{ fn: () => void; delayMs: number }> = [];
        let fail = true;
        const staleFlags: boolean[] = [];
        const shown: number[] = [];
        const loop = new FrameLoop({
            fetchFrame: async () => {
                if (fail) throw new Error("boom");
                return frame(1);
            },
            show: (f) => shown.push(f.editVersion),
            onStale: (s) => staleFlags.push(s),
            retryDelayMs: 100,
            scheduleRetry: (fn, delayMs) => scheduled.push({ fn, delayMs }),
        });
        loop.request(POSE, "textured", 256);
        await new Promise((r) => setTimeout(r, 0));
        expect(staleFlags[staleFlags.length - 1]).toBe(true);
        expect(scheduled.length).toBe(1);
        expect(scheduled[0].delayMs).toBe(100);

        scheduled[0].fn(); // still failing: backoff doubles
        await new Promise((r) => setTimeout(r, 0));
        expect(scheduled[1].delayMs).toBe(200);

        fail = false;
        scheduled[1].fn();
        await new Promise((r) => setTimeout(r, 0));
        expect(shown).toEqual([1]);
        expect(staleFlags[staleFlags.length - 1]).toBe(false);
    });

    it("no further traffic once the last frame settled", async () => {
        let calls = 0;
        const loop = new FrameLoop({
            fetchFrame: async () => {
                calls += 1;
                return frame(0);
            },
            show: () => undefined,
        });
        loop.request(POSE, "textured", 256);
        await new Promise((r) => setTimeout(r, 5));
        const settled = calls;
        await new Promise((r) => setTimeout(r, 20));
        expect(calls).toBe(settled);
    });
});
