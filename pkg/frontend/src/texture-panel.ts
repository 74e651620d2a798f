// Texture panel: upload/swap with shadow-preserve, brush painting.

import type { ApiClient, PaintStroke } from "./api.js";

export interface BrushSettings {
    radius: number; // UV units
    color: [number, number, number];
    opacity: number;
}

/** Map a canvas pixel to texture UV; u wraps, v clamps. */
export function canvasToUv(
    x: number, y: number, canvasWidth: number, canvasHeight: number,
): { u: number; v: number } {
    let u = (x + 0.5) / canvasWidth;
    u = ((u % 1) + 1) % 1;
    const v = Math.min(1, Math.max(0, (y + 0.5) / canvasHeight));
    return { u, v };
}

export function strokeFromEvent(
    x: number, y: number, canvasWidth: number, canvasHeight: number,
    brush: BrushSettings,
): PaintStroke {
    const { u, v } = canvasToUv(x, y, canvasWidth, canvasHeight);
    return { u, v, radius: brush.radius, rgb: brush.color, opacity: brush.opacity };
}

export class TexturePanel {
    shadowPreserve = false;
    brush: BrushSettings = { radius: 0.03, color: [1, 0, 0], opacity: 1.0 };
    onEdit: (version: number) => void = () => undefined;
    onError: (message: string) => void = () => undefined;

    constructor(private api: ApiClient) {}

    async paintAt(x: number, y: number, w: number, h: number): Promise<void> {
        try {
            const version = await this.api.paint(strokeFromEvent(x, y, w, h, this.brush));
            this.onEdit(version);
        } catch (err) {
            this.onError(err instanceof Error ? err.message : String(err));
        }
    }

    async upload(file: Blob): Promise<void> {
        try {
            const version = await this.api.uploadTexture(file, this.shadowPreserve);
            this.onEdit(version);
        } catch (err) {
            this.onError(err instanceof Error ? err.message : String(err));
        }
    }

    async reset(): Promise<void> {
        try {
            this.onEdit(await this.api.resetTexture());
        } catch (err) {
            this.onError(err instanceof Error ? err.message : String(err));
        }
    }
}
