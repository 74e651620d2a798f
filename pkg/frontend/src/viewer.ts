// Frame loop with request coalescing and stale-frame dropping.
//
// Invariants: at most one render request is in flight; a displayed frame is
// never older (by edit version) than the last acknowledged edit; rapid
// camera motion coalesces into the latest requested pose.

import type { FrameResult, OrbitPose, RenderMode } from "./api.js";

export interface ViewerHooks {
    fetchFrame: (pose: OrbitPose, mode: RenderMode, size: number) => Promise<FrameResult>;
    show: (frame: FrameResult) => void;
    onStale?: (stale: boolean) => void;
    retryDelayMs?: number;
    scheduleRetry?: (fn: () => void, delayMs: number) => void;
}

interface PendingRequest {
    pose: OrbitPose;
    mode: RenderMode;
    size: number;
}

export class FrameLoop {
    private hooks: ViewerHooks;
    private inFlight = false;
    private pending: PendingRequest | null = null;
    private minVersion = 0;
    private retryDelay: number;
    private baseRetryDelay: number;
    lastShownVersion = -1;
    droppedStale = 0;
    failedRequests = 0;

    constructor(hooks: ViewerHooks) {
        this.hooks = hooks;
        this.baseRetryDelay = hooks.retryDelayMs ?? 500;
        this.retryDelay = this.baseRetryDelay;
    }

    /** An edit was acknowledged: frames older than it are dropped on arrival. */
    acknowledgeEdit(version: number): void {
        if (version > this.minVersion) this.minVersion = version;
    }

    request(pose: OrbitPose, mode: RenderMode, size: number): void {
        this.pending = { pose: { ...pose }, mode, size };
        void this.pump();
    }

    get busy(): boolean {
        return this.inFlight || this.pending !== null;
    }

    private async pump(): Promise<void> {
        if (this.inFlight || this.pending === null) return;
        const req = this.pending;
        this.pending = null;
        this.inFlight = true;
        try {
            const frame = await this.hooks.fetchFrame(req.pose, req.mode, req.size);
            this.inFlight = false;
            this.retryDelay = this.baseRetryDelay;
            this.hooks.onStale?.(false);
            if (frame.editVersion < this.minVersion) {
                // stale: an edit landed while the frame was rendering; refetch
                // after a beat rather than busy-spinning on the service
                this.droppedStale += 1;
                if (this.pending === null) this.pending = req;
                const schedule = this.hooks.scheduleRetry ??
                    ((fn: () => void, ms: number) => setTimeout(fn, ms));
                schedule(() => void this.pump(), 50);
                return;
            }
            this.lastShownVersion = frame.editVersion;
            this.hooks.show(frame);
        } catch {
            this.inFlight = false;
            this.failedRequests += 1;
            this.hooks.onStale?.(true);
            if (this.pending === null) this.pending = req;
            const schedule = this.hooks.scheduleRetry ??
                ((fn: () => void, ms: number) => setTimeout(fn, ms));
            const delay = this.retryDelay;
            this.retryDelay = Math.min(this.retryDelay * 2, 8000);
            schedule(() => void this.pump(), delay);
            return;
        }
        void this.pump();
    }
}
