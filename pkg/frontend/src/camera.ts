// Webcam access and frame encoding. Frames are drawn onto a scratch canvas
// at no more than 640x480 and shipped as base64 JPEG.

export interface FrameSource {
  grab(): string | null;
  readonly width: number;
  readonly height: number;
  attach(video: HTMLVideoElement): void;
  stop(): void;
}

export const MAX_WIDTH = 640;
export const MAX_HEIGHT = 480;

export async function openCamera(doc: Document): Promise<FrameSource> {
  const stream = await navigator.mediaDevices.getUserMedia({
    video: { width: { ideal: MAX_WIDTH }, height: { ideal: MAX_HEIGHT } },
    audio: false,
  });
  const video = doc.createElement("video");
  video.srcObject = stream;
  video.muted = true;
  await video.play();

  const scratch = doc.createElement("canvas");
  const currentWidth = () => Math.min(video.videoWidth || MAX_WIDTH, MAX_WIDTH);
  const currentHeight = () =>
    Math.min(video.videoHeight || MAX_HEIGHT, MAX_HEIGHT);

  return {
    get width() {
      return currentWidth();
    },
    get height() {
      return currentHeight();
    },
    attach(target: HTMLVideoElement) {
      target.srcObject = stream;
      target.muted = true;
      void target.play();
    },
    grab(): string | null {
      const w = currentWidth();
      const h = currentHeight();
      if (!w || !h) return null;
      scratch.width = w;
      scratch.height = h;
      const ctx = scratch.getContext("2d");
      if (!ctx) return null;
      ctx.drawImage(video, 0, 0, w, h);
      const url = scratch.toDataURL("image/jpeg", 0.85);
      return url.slice(url.indexOf(",") + 1);
    },
    stop() {
      for (const track of stream.getTracks()) track.stop();
    },
  };
}
