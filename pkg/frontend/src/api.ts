// Thin typed client for the texsplat edit service.

export interface ServiceState {
    gaussian_count: number;
    texture_size: [number, number];
    edit_version: number;
}

export interface OrbitPose {
    azimuth: number;
    elevation: number;
    radius: number;
}

export interface PaintStroke {
    u: number;
    v: number;
    radius: number;
    rgb: [number, number, number];
    opacity: number;
}

export interface FrameResult {
    blob: Blob;
    editVersion: number;
}

export type RenderMode = "vanilla" | "textured" | "textured_nosh" | "prefetch";

export class ApiClient {
    constructor(
        private baseUrl: string = "",
        private fetchFn: typeof fetch = fetch.bind(globalThis),
    ) {}

    async state(): Promise<ServiceState> {
        const res = await this.fetchFn(`${this.baseUrl}/state`);
        if (!res.ok) throw new Error(`state failed: ${res.status}`);
        return res.json();
    }

    async renderFrame(pose: OrbitPose, mode: RenderMode, size: number): Promise<FrameResult> {
        const res = await this.fetchFn(`${this.baseUrl}/render`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({
                orbit: { azimuth: pose.azimuth, elevation: pose.elevation, radius: pose.radius },
                mode,
                width: size,
                height: size,
            }),
        });
        if (!res.ok) throw new Error(`render failed: ${res.status}`);
        const version = Number(res.headers.get("x-edit-version") ?? "0");
        return { blob: await res.blob(), editVersion: version };
    }

    async uploadTexture(file: Blob, shadowPreserve: boolean): Promise<number> {
        const form = new FormData();
        form.append("file", file, "texture.png");
        form.append("shadow_preserve", shadowPreserve ? "true" : "false");
        const res = await this.fetchFn(`${this.baseUrl}/texture`, {
            method: "POST",
            body: form,
        });
        if (res.status === 422) throw new Error("texture image could not be decoded");
        if (!res.ok) throw new Error(`texture upload failed: ${res.status}`);
        return (await res.json()).edit_version;
    }

    async paint(stroke: PaintStroke): Promise<number> {
        const res = await this.fetchFn(`${this.baseUrl}/paint`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(stroke),
        });
        if (!res.ok) throw new Error(`paint failed: ${res.status}`);
        return (await res.json()).edit_version;
    }

    async resetTexture(): Promise<number> {
        const res = await this.fetchFn(`${this.baseUrl}/texture/reset`, { method: "POST" });
        if (!res.ok) throw new Error(`reset failed: ${res.status}`);
        return (await res.json()).edit_version;
    }

    async textureBlob(): Promise<Blob> {
        const res = await this.fetchFn(`${this.baseUrl}/texture?ts=${Date.now()}`);
        if (!res.ok) throw new Error(`texture fetch failed: ${res.status}`);
        return res.blob();
    }
}
