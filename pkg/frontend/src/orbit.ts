// Orbit camera state: drag maps to azimuth/elevation, scroll to radius.

import type { OrbitPose } from "./api.js";

const DEG_PER_PIXEL = 0.4;
const ELEVATION_LIMIT = 85;
const ZOOM_PER_TICK = 1.1;

export class OrbitState {
    azimuth: number;
    elevation: number;
    radius: number;
    readonly minRadius: number;
    readonly maxRadius: number;

    constructor(pose: Partial<OrbitPose> = {}, minRadius = 1.2, maxRadius = 12.0) {
        this.azimuth = pose.azimuth ?? 30;
        this.elevation = pose.elevation ?? 20;
        this.radius = pose.radius ?? 3.0;
        this.minRadius = minRadius;
        this.maxRadius = maxRadius;
    }

    pose(): OrbitPose {
        return { azimuth: this.azimuth, elevation: this.elevation, radius: this.radius };
    }

    drag(dxPixels: number, dyPixels: number): OrbitPose {
        this.azimuth = (this.azimuth + dxPixels * DEG_PER_PIXEL) % 360;
        if (this.azimuth < 0) this.azimuth += 360;
        this.elevation = Math.max(
            -ELEVATION_LIMIT,
            Math.min(ELEVATION_LIMIT, this.elevation + dyPixels * DEG_PER_PIXEL),
        );
        return this.pose();
    }

    zoom(wheelSteps: number): OrbitPose {
        this.radius *= Math.pow(ZOOM_PER_TICK, wheelSteps);
        this.radius = Math.max(this.minRadius, Math.min(this.maxRadius, this.radius));
        return this.pose();
    }
}
