/** Typed client for the edit-session service.
 *
 * Every numeric artifact (annotations, masks, previews, sentences) comes
 * from the service; this module only moves bytes and JSON. The fetch
 * implementation is injectable so tests can replay recorded exchanges.
 */

import type {
  Banks,
  EditRequest,
  EditResponse,
  RenderResponse,
  ServiceErrorBody,
  SessionSnapshot,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

/** Error envelope raised for any non-2xx service response. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseFor(response: Response): Promise<never> {
  let body: ServiceErrorBody;
  try {
    body = (await response.json()) as ServiceErrorBody;
  } catch {
    body = { code: "bad_response", message: `HTTP ${response.status}` };
  }
  throw new ApiError(response.status, body.code, body.message);
}

export class EditServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) =>
      fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.url(path), init);
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as T;
  }

  private async bytes(path: string): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.url(path));
    if (!response.ok) await raiseFor(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  /** Upload image bytes (npy, PNG, or JPEG) and open a session. */
  createSession(image: Uint8Array): Promise<SessionSnapshot> {
    return this.json("/sessions", {
      method: "POST",
      headers: { "content-type": "application/octet-stream" },
      // slice() re-homes the bytes in a plain ArrayBuffer, which is what
      // the fetch body type requires
      body: image.slice(),
    });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.json(`/sessions/${sessionId}`);
  }

  getBanks(): Promise<Banks> {
    return this.json("/banks");
  }

  addEdit(sessionId: string, edit: EditRequest): Promise<EditResponse> {
    return this.json(`/sessions/${sessionId}/edits`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(edit),
    });
  }

  /** Current language mask in its binary container format. */
  getMask(sessionId: string): Promise<Uint8Array> {
    return this.bytes(`/sessions/${sessionId}/mask`);
  }

  /** Binary coverage of the mask as grayscale PNG bytes. */
  getMaskPng(sessionId: string): Promise<Uint8Array> {
    return this.bytes(`/sessions/${sessionId}/mask.png`);
  }

  render(sessionId: string, globalPrompt?: string): Promise<RenderResponse> {
    const init: RequestInit =
      globalPrompt === undefined
        ? { method: "POST" }
        : {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ global_prompt: globalPrompt }),
          };
    return this.json(`/sessions/${sessionId}/render`, init);
  }
}

/** Base64 → bytes without Node buffers (browser-safe). */
export function bytesFromBase64(b64: string): Uint8Array {
  const raw = atob(b64);
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
  return out;
}

/** Bytes → base64 data URL for <img> sources. */
export function pngDataUrl(bytes: Uint8Array): string {
  let raw = "";
  const chunk = 0x2000;
  for (let i = 0; i < bytes.length; i += chunk) {
    raw += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return `data:image/png;base64,${btoa(raw)}`;
}
