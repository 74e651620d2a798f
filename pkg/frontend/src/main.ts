import { ApiClient, RenderMode } from "./api.js";
import { OrbitState } from "./orbit.js";
import { FrameLoop } from "./viewer.js";
import { TexturePanel } from "./texture-panel.js";

const api = new ApiClient(localStorage.getItem("texsplatBase") ?? "");
const orbit = new OrbitState();

const frameImg = document.getElementById("frame") as HTMLImageElement;
const staleBadge = document.getElementById("stale") as HTMLElement;
const modeSelect = document.getElementById("mode") as HTMLSelectElement;
const sizeSelect = document.getElementById("size") as HTMLSelectElement;
const textureImg = document.getElementById("texture") as HTMLImageElement;
const statsEl = document.getElementById("stats") as HTMLElement;
const errorToast = document.getElementById("error") as HTMLElement;

let lastUrl: string | null = null;
const loop = new FrameLoop({
    fetchFrame: (pose, mode, size) => api.renderFrame(pose, mode, size),
    show: (frame) => {
        const url = URL.createObjectURL(frame.blob);
        frameImg.src = url;
        if (lastUrl) URL.revokeObjectURL(lastUrl);
        lastUrl = url;
    },
    onStale: (stale) => staleBadge.classList.toggle("visible", stale),
});

function mode(): RenderMode {
    return modeSelect.value as RenderMode;
}

function size(): number {
    return Number(sizeSelect.value);
}

function rerender(): void {
    loop.request(orbit.pose(), mode(), size());
}

async function refreshTexture(): Promise<void> {
    const blob = await api.textureBlob();
    const url = URL.createObjectURL(blob);
    textureImg.onload = () => URL.revokeObjectURL(url);
    textureImg.src = url;
}

// -- orbit controls ---------------------------------------------------------

let dragging = false;
let lastX = 0;
let lastY = 0;
frameImg.addEventListener("pointerdown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
    frameImg.setPointerCapture(e.pointerId);
});
frameImg.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    orbit.drag(e.clientX - lastX, e.clientY - lastY);
    lastX = e.clientX;
    lastY = e.clientY;
    rerender();
});
frameImg.addEventListener("pointerup", () => {
    dragging = false;
});
frameImg.addEventListener("wheel", (e) => {
    e.preventDefault();
    orbit.zoom(Math.sign(e.deltaY));
    rerender();
});
modeSelect.addEventListener("change", rerender);
sizeSelect.addEventListener("change", rerender);

// -- texture panel ----------------------------------------------------------

const panel = new TexturePanel(api);
panel.onEdit = (version) => {
    loop.acknowledgeEdit(version);
    void refreshTexture();
    rerender();
};
panel.onError = (message) => {
    errorToast.textContent = message;
    errorToast.classList.add("visible");
    setTimeout(() => errorToast.classList.remove("visible"), 4000);
};

textureImg.addEventListener("pointerdown", (e) => {
    const rect = textureImg.getBoundingClientRect();
    const x = ((e.clientX - rect.left) / rect.width) * textureImg.naturalWidth;
    const y = ((e.clientY - rect.top) / rect.height) * textureImg.naturalHeight;
    void panel.paintAt(x, y, textureImg.naturalWidth, textureImg.naturalHeight);
});

(document.getElementById("upload") as HTMLInputElement).addEventListener("change", (e) => {
    const input = e.target as HTMLInputElement;
    if (input.files?.length) void panel.upload(input.files[0]);
});
(document.getElementById("shadow") as HTMLInputElement).addEventListener("change", (e) => {
    panel.shadowPreserve = (e.target as HTMLInputElement).checked;
});
(document.getElementById("reset") as HTMLButtonElement).addEventListener("click", () => {
    void panel.reset();
});
(document.getElementById("brush-size") as HTMLInputElement).addEventListener("input", (e) => {
    panel.brush.radius = Number((e.target as HTMLInputElement).value);
});
(document.getElementById("brush-color") as HTMLInputElement).addEventListener("input", (e) => {
    const hex = (e.target as HTMLInputElement).value;
    panel.brush.color = [
        parseInt(hex.slice(1, 3), 16) / 255,
        parseInt(hex.slice(3, 5), 16) / 255,
        parseInt(hex.slice(5, 7), 16) / 255,
    ];
});
(document.getElementById("brush-opacity") as HTMLInputElement).addEventListener("input", (e) => {
    panel.brush.opacity = Number((e.target as HTMLInputElement).value);
});

// -- boot -------------------------------------------------------------------

async function boot(): Promise<void> {
    const state = await api.state();
    statsEl.textContent =
        `${state.gaussian_count} gaussians · texture ${state.texture_size[1]}×${state.texture_size[0]}`;
    loop.acknowledgeEdit(state.edit_version);
    await refreshTexture();
    rerender();
}

void boot();
