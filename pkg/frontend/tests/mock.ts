/** Fixture-backed stand-in for the edit-session service.
 *
 * `contract.json` is a transcript recorded from the real HTTP app
 * (see scripts/generate_fixtures.py): every response body here is
 * genuine service output, byte for byte. The mock only *selects* a
 * recorded exchange — by path, method, body equality, and how many
 * edits/renders have been posted so far — and never recomputes service
 * logic, so the UI tests exercise the true wire contract.
 */

import type { FetchLike } from "../src/api.js";
import type {
  Banks,
  EditRequest,
  EditResponse,
  RenderResponse,
  ServiceErrorBody,
  SessionSnapshot,
} from "../src/types.js";
import rawContract from "./fixtures/contract.json";

export interface MaskFixture {
  png_b64: string;
  pixels: number[][];
}

export interface Contract {
  image: { npy_b64: string; width: number; height: number; uint8: number[][][] };
  empty_image: { npy_b64: string };
  bad_upload: { body_b64: string; status: number; response: ServiceErrorBody };
  banks: Banks;
  create: SessionSnapshot;
  create_empty: SessionSnapshot;
  empty_mask: MaskFixture;
  unknown_session: { status: number; response: ServiceErrorBody };
  masks: Record<string, MaskFixture>;
  edits: { request: EditRequest; response: EditResponse }[];
  snapshots: Record<string, SessionSnapshot>;
  bad_edit: { request: EditRequest; status: number; response: ServiceErrorBody };
  lmsk_b64: string;
  renders: { request: { global_prompt: string } | null; response: RenderResponse }[];
}

export const contract = rawContract as unknown as Contract;

export function b64Bytes(b64: string): Uint8Array {
  return new Uint8Array(Buffer.from(b64, "base64"));
}

function sameBytes(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) if (a[i] !== b[i]) return false;
  return true;
}

function deepEqual(a: unknown, b: unknown): boolean {
  if (a === b) return true;
  if (typeof a !== typeof b || a === null || b === null) return false;
  if (Array.isArray(a) || Array.isArray(b)) {
    if (!Array.isArray(a) || !Array.isArray(b) || a.length !== b.length) {
      return false;
    }
    return a.every((item, i) => deepEqual(item, b[i]));
  }
  if (typeof a === "object") {
    const ka = Object.keys(a as object).sort();
    const kb = Object.keys(b as object).sort();
    if (!deepEqual(ka, kb)) return false;
    return ka.every((k) =>
      deepEqual((a as Record<string, unknown>)[k], (b as Record<string, unknown>)[k]),
    );
  }
  return false;
}

function jsonResponse(status: number, payload: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => JSON.parse(JSON.stringify(payload)) as unknown,
    arrayBuffer: async () => {
      throw new Error("JSON exchange has no binary body");
    },
  } as unknown as Response;
}

function bytesResponse(bytes: Uint8Array): Response {
  return {
    ok: true,
    status: 200,
    json: async () => {
      throw new Error("binary exchange has no JSON body");
    },
    arrayBuffer: async () => bytes.slice().buffer,
  } as unknown as Response;
}

export interface LoggedCall {
  method: string;
  path: string;
  body: Uint8Array | null;
}

export class MockService {
  readonly base = "http://svc.test";
  readonly sceneId = contract.create.session_id;
  readonly emptyId = contract.create_empty.session_id;
  editCount = 0;
  renderCount = 0;
  calls: LoggedCall[] = [];

  private readonly sceneNpy = b64Bytes(contract.image.npy_b64);
  private readonly emptyNpy = b64Bytes(contract.empty_image.npy_b64);
  private readonly badUpload = b64Bytes(contract.bad_upload.body_b64);

  readonly fetch: FetchLike = async (input, init) => {
    const url = new URL(input);
    const method = (init?.method ?? "GET").toUpperCase();
    const body = this.bodyBytes(init);
    this.calls.push({ method, path: url.pathname, body });
    return this.route(method, url.pathname, body);
  };

  private bodyBytes(init?: RequestInit): Uint8Array | null {
    const body = init?.body;
    if (body === undefined || body === null) return null;
    if (typeof body === "string") return new TextEncoder().encode(body);
    if (body instanceof Uint8Array) return body;
    throw new Error(`mock: unexpected body type ${typeof body}`);
  }

  private snapshot(): SessionSnapshot {
    const key = `e${this.editCount}r${this.renderCount}`;
    const snap = contract.snapshots[key];
    if (!snap) throw new Error(`mock: no snapshot recorded for ${key}`);
    return snap;
  }

  private route(method: string, path: string, body: Uint8Array | null): Response {
    if (method === "GET" && path === "/banks") {
      return jsonResponse(200, contract.banks);
    }
    if (method === "POST" && path === "/sessions") {
      if (body && sameBytes(body, this.sceneNpy)) {
        return jsonResponse(201, contract.create);
      }
      if (body && sameBytes(body, this.emptyNpy)) {
        return jsonResponse(201, contract.create_empty);
      }
      if (body && sameBytes(body, this.badUpload)) {
        return jsonResponse(contract.bad_upload.status, contract.bad_upload.response);
      }
      throw new Error("mock: unrecorded /sessions upload body");
    }

    const match = /^\/sessions\/([^/]+)(?:\/(.+))?$/.exec(path);
    if (!match) throw new Error(`mock: unrecorded route ${method} ${path}`);
    const [, sid, rest] = match;

    if (sid === this.emptyId) {
      if (method === "GET" && rest === undefined) {
        return jsonResponse(200, contract.create_empty);
      }
      if (method === "GET" && rest === "mask.png") {
        return bytesResponse(b64Bytes(contract.empty_mask.png_b64));
      }
      throw new Error(`mock: unrecorded empty-session route ${method} ${path}`);
    }
    if (sid !== this.sceneId) {
      return jsonResponse(
        contract.unknown_session.status,
        contract.unknown_session.response,
      );
    }

    if (method === "GET" && rest === undefined) {
      return jsonResponse(200, this.snapshot());
    }
    if (method === "GET" && rest === "mask.png") {
      const mask = contract.masks[`e${this.editCount}`];
      if (!mask) throw new Error(`mock: no mask recorded for e${this.editCount}`);
      return bytesResponse(b64Bytes(mask.png_b64));
    }
    if (method === "GET" && rest === "mask") {
      return bytesResponse(b64Bytes(contract.lmsk_b64));
    }
    if (method === "POST" && rest === "edits") {
      const payload = JSON.parse(new TextDecoder().decode(body ?? new Uint8Array()));
      if (deepEqual(payload, contract.bad_edit.request)) {
        return jsonResponse(contract.bad_edit.status, contract.bad_edit.response);
      }
      const expected = contract.edits[this.editCount];
      if (!expected || !deepEqual(payload, expected.request)) {
        throw new Error(
          `mock: edit #${this.editCount} body ${JSON.stringify(payload)} ` +
            `does not match the recorded request`,
        );
      }
      this.editCount += 1;
      return jsonResponse(201, expected.response);
    }
    if (method === "POST" && rest === "render") {
      const expected = contract.renders[this.renderCount];
      if (!expected) throw new Error("mock: more renders than recorded");
      const payload = body ? JSON.parse(new TextDecoder().decode(body)) : null;
      if (!deepEqual(payload, expected.request)) {
        throw new Error(
          `mock: render #${this.renderCount} body ${JSON.stringify(payload)} ` +
            `does not match the recorded request`,
        );
      }
      this.renderCount += 1;
      return jsonResponse(200, expected.response);
    }
    throw new Error(`mock: unrecorded route ${method} ${path}`);
  }
}
