// Browser entry point: real WebSocket, real webcam, wall-clock timers.

import { createApp } from "./app.js";
import { openCamera } from "./camera.js";

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;

createApp(document.getElementById("app") as HTMLElement, {
  connect: () => new WebSocket(wsUrl),
  openCamera: () => openCamera(document),
  colormapCsv: async () => {
    const res = await fetch("./colormap.csv");
    if (!res.ok) throw new Error(`colormap fetch failed: ${res.status}`);
    return res.text();
  },
  clock: {
    setInterval: (fn, ms) => window.setInterval(fn, ms),
    clearInterval: (id) => window.clearInterval(id),
  },
});
