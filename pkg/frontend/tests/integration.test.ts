// End-to-end behavior against a live edit service.  Run via
// scripts/run_ui_integration.sh, which starts the service on a fixture
// checkpoint and sets TEXSPLAT_SERVICE_URL.

import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { FrameLoop } from "../src/viewer.js";
import type { FrameResult } from "../src/api.js";

const BASE = process.env.TEXSPLAT_SERVICE_URL;
const maybe = BASE ? describe : describe.skip;

async function bytes(blob: Blob): Promise<Uint8Array> {
    return new Uint8Array(await blob.arrayBuffer());
}

function equalBytes(a: Uint8Array, b: Uint8Array): boolean {
    return a.length === b.length && a.every((x, i) => x === b[i]);
}

maybe("live service", () => {
    const api = new ApiClient(BASE!);
    const pose = { azimuth: 40, elevation: 15, radius: 3 };

    it("paint produces an observable frame diff and bumps the version", async () => {
        const s0 = await api.state();
        const before = await api.renderFrame(pose, "textured", 128);
        const v = await api.paint({ u: 0.5, v: 0.5, radius: 0.9, rgb: [1, 0, 0], opacity: 1 });
        expect(v).toBeGreaterThan(s0.edit_version);
        const after = await api.renderFrame(pose, "textured", 128);
        expect(equalBytes(await bytes(before.blob), await bytes(after.blob))).toBe(false);
        await api.resetTexture();
    }, 120000);

    it("shadow-preserve toggle changes the swapped frame on a shadowed texture", async () => {
        // bake a shadow, then compare plain vs shadow-preserving swap
        const texture = await api.textureBlob();
        await api.paint({ u: 0.5, v: 0.5, radius: 0.9, rgb: [0.08, 0.08, 0.08], opacity: 1 });
        const plainV = await api.uploadTexture(texture, false);
        const plain = await api.renderFrame(pose, "textured", 128);
        expect(plain.editVersion).toBeGreaterThanOrEqual(plainV);

        await api.resetTexture();
        await api.paint({ u: 0.5, v: 0.5, radius: 0.9, rgb: [0.08, 0.08, 0.08], opacity: 1 });
        await api.uploadTexture(texture, true);
        const shadowed = await api.renderFrame(pose, "textured", 128);
        expect(equalBytes(await bytes(plain.blob), await bytes(shadowed.blob))).toBe(false);
        await api.resetTexture();
    }, 120000);

    it("frame loop never displays a frame older than an acknowledged edit", async () => {
        const shown: FrameResult[] = [];
        const loop = new FrameLoop({
            fetchFrame: (p, m, s) => api.renderFrame(p, m, s),
            show: (f) => shown.push(f),
        });
        loop.request(pose, "textured", 96);
        const v = await api.paint({ u: 0.2, v: 0.2, radius: 0.1, rgb: [0, 1, 0], opacity: 1 });
        loop.acknowledgeEdit(v);
        loop.request(pose, "textured", 96);
        await new Promise((r) => setTimeout(r, 4000));
        const last = shown[shown.length - 1];
        expect(last.editVersion).toBeGreaterThanOrEqual(v);
        await api.resetTexture();
    }, 120000);
});
