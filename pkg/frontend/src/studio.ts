/** The mask-studio single-page UI.
 *
 * One session per mount: upload an image, draw boxes over the scaled
 * stage, pick an action and target from the service's vocabulary banks,
 * and confirm to author an edit. The mask overlay and every instruction
 * sentence are fetched from the service — the UI never computes either
 * locally, and each successful mutation is reconciled against a fresh
 * session snapshot.
 */

import { ApiError, EditServiceClient, pngDataUrl } from "./api.js";
import type { EditDraft } from "./edit.js";
import { actionNeedsTarget, composeTarget, validateDraft } from "./edit.js";
import type { Box, Point } from "./geometry.js";
import {
  boxFromCorners,
  clampPoint,
  roundBox,
  viewToImage,
} from "./geometry.js";
import type { Banks, SessionSnapshot } from "./types.js";

export interface StudioOptions {
  /** Image-to-view zoom factor for the drawing stage. */
  scale?: number;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) node.textContent = text;
  return node;
}

function fillSelect(select: HTMLSelectElement, values: string[]): void {
  select.textContent = "";
  select.append(new Option("", ""));
  for (const value of values) select.append(new Option(value, value));
}

/** Read a File's bytes; falls back to FileReader where Blob.arrayBuffer
 *  is missing (older WebKit, jsdom). */
function fileBytes(file: File): Promise<Uint8Array> {
  if (typeof file.arrayBuffer === "function") {
    return file.arrayBuffer().then((buf) => new Uint8Array(buf));
  }
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(new Uint8Array(reader.result as ArrayBuffer));
    reader.onerror = () => reject(reader.error ?? new Error("file read failed"));
    reader.readAsArrayBuffer(file);
  });
}

export class Studio {
  readonly client: EditServiceClient;
  readonly scale: number;

  banks: Banks | null = null;
  snapshot: SessionSnapshot | null = null;
  draft: EditDraft = { action: "insert", box: null, target: "" };
  /** Resolves when the most recent event-driven service call settles. */
  lastOp: Promise<void> = Promise.resolve();
  /** PNG bytes of the current mask projection, as served. */
  maskPngBytes: Uint8Array | null = null;
  /** Data URLs of rendered previews, one per render call. */
  previews: string[] = [];
  banner: string | null = null;

  private dragStart: Point | null = null;

  private readonly stage: HTMLDivElement;
  private readonly inner: HTMLDivElement;
  private readonly baseImage: HTMLImageElement;
  private readonly maskImage: HTMLImageElement;
  private readonly bannerEl: HTMLDivElement;
  private readonly sessionLabel: HTMLSpanElement;
  private readonly fileInput: HTMLInputElement;
  private readonly actionSelect: HTMLSelectElement;
  private readonly colorSelect: HTMLSelectElement;
  private readonly objectSelect: HTMLSelectElement;
  private readonly targetText: HTMLInputElement;
  private readonly confirmButton: HTMLButtonElement;
  private readonly editList: HTMLOListElement;
  private readonly maskToggle: HTMLInputElement;
  private readonly promptInput: HTMLInputElement;
  private readonly renderButton: HTMLButtonElement;
  private readonly historyLabel: HTMLSpanElement;
  private readonly historyStrip: HTMLDivElement;

  constructor(
    readonly root: HTMLElement,
    client: EditServiceClient,
    options: StudioOptions = {},
  ) {
    this.client = client;
    this.scale = options.scale ?? 16;

    const header = el("header", { class: "bar" });
    this.fileInput = el("input", {
      type: "file",
      "data-testid": "file-input",
      accept: ".npy,.png,.jpg,.jpeg",
    });
    this.sessionLabel = el("span", { "data-testid": "session-label" }, "no session");
    this.bannerEl = el("div", { class: "banner", "data-testid": "banner" });
    this.bannerEl.hidden = true;
    header.append(this.fileInput, this.sessionLabel, this.bannerEl);

    this.stage = el("div", { class: "stage", "data-testid": "stage" });
    this.inner = el("div", { class: "stage-inner" });
    this.baseImage = el("img", { class: "base", "data-testid": "base-image", alt: "scene" });
    this.baseImage.hidden = true;
    this.maskImage = el("img", { class: "mask", "data-testid": "mask-overlay", alt: "mask" });
    this.maskImage.hidden = true;
    this.inner.append(this.baseImage, this.maskImage);
    this.stage.append(this.inner);

    const panel = el("aside", { class: "panel" });
    this.actionSelect = el("select", { "data-testid": "action-select" });
    this.colorSelect = el("select", { "data-testid": "target-color" });
    this.objectSelect = el("select", { "data-testid": "target-object" });
    this.targetText = el("input", {
      type: "text",
      "data-testid": "target-text",
      placeholder: "free-text target",
    });
    this.confirmButton = el("button", { "data-testid": "confirm-edit" }, "Add edit");
    this.editList = el("ol", { "data-testid": "edit-list" });
    this.maskToggle = el("input", { type: "checkbox", "data-testid": "mask-toggle" });
    this.maskToggle.checked = true;
    const maskLabel = el("label", {}, " mask overlay");
    maskLabel.prepend(this.maskToggle);
    this.promptInput = el("input", {
      type: "text",
      "data-testid": "global-prompt",
      placeholder: "global prompt (optional)",
    });
    this.renderButton = el("button", { "data-testid": "render-button" }, "Render preview");
    this.historyLabel = el("span", { "data-testid": "history-label" }, "renders: 0");
    this.historyStrip = el("div", { class: "strip", "data-testid": "history-strip" });
    panel.append(
      el("h3", {}, "Edit"),
      this.actionSelect,
      this.colorSelect,
      this.objectSelect,
      this.targetText,
      this.confirmButton,
      el("h3", {}, "Edits"),
      this.editList,
      el("h3", {}, "Preview"),
      maskLabel,
      this.promptInput,
      this.renderButton,
      this.historyLabel,
      this.historyStrip,
    );

    const main = el("div", { class: "main" });
    main.append(this.stage, panel);
    root.append(header, main);

    this.stage.addEventListener("mousedown", (e) => this.onMouseDown(e));
    this.stage.addEventListener("mousemove", (e) => this.onMouseMove(e));
    this.stage.addEventListener("mouseup", (e) => this.onMouseUp(e));
    this.fileInput.addEventListener("change", () => {
      const file = this.fileInput.files?.[0];
      if (file) this.lastOp = this.uploadFile(file);
    });
    this.actionSelect.addEventListener("change", () =>
      this.setAction(this.actionSelect.value),
    );
    const syncTarget = () => this.syncTargetFromPickers();
    this.colorSelect.addEventListener("change", syncTarget);
    this.objectSelect.addEventListener("change", syncTarget);
    this.targetText.addEventListener("input", syncTarget);
    this.confirmButton.addEventListener("click", () => {
      this.lastOp = this.confirmEdit();
    });
    this.renderButton.addEventListener("click", () => {
      const prompt = this.promptInput.value.trim();
      this.lastOp = this.renderPreview(prompt === "" ? undefined : prompt);
    });
    this.maskToggle.addEventListener("change", () => this.syncMaskVisibility());
  }

  /** Fetch vocabulary banks and populate the pickers. */
  async init(): Promise<void> {
    try {
      this.banks = await this.client.getBanks();
    } catch (error) {
      this.showError(error);
      return;
    }
    this.actionSelect.textContent = "";
    for (const action of this.banks.actions) {
      this.actionSelect.append(new Option(action, action));
    }
    fillSelect(this.colorSelect, this.banks.vehicle_colors);
    fillSelect(this.objectSelect, this.banks.vehicle_objects);
    this.setAction(this.banks.actions[0] ?? "insert");
  }

  get sessionId(): string | null {
    return this.snapshot?.session_id ?? null;
  }

  private imageSize(): { width: number; height: number } {
    const ann = this.snapshot?.annotation;
    return { width: ann?.width ?? 0, height: ann?.height ?? 0 };
  }

  /** Upload a file's bytes and open a fresh session for them. */
  async uploadFile(file: File): Promise<void> {
    let snapshot: SessionSnapshot;
    try {
      const bytes = await fileBytes(file);
      snapshot = await this.client.createSession(bytes);
      if (file.type.startsWith("image/") &&
          typeof URL.createObjectURL === "function") {
        this.baseImage.src = URL.createObjectURL(file);
        this.baseImage.hidden = false;
      } else {
        this.baseImage.hidden = true;
        this.baseImage.removeAttribute("src");
      }
    } catch (error) {
      this.showError(error);
      return;
    }
    this.clearBanner();
    this.snapshot = snapshot;
    this.previews = [];
    this.historyStrip.textContent = "";
    this.draft = { action: this.actionSelect.value, box: null, target: this.draft.target };
    this.sessionLabel.textContent = `session ${snapshot.session_id}`;
    const { width, height } = this.imageSize();
    this.inner.style.width = `${width}px`;
    this.inner.style.height = `${height}px`;
    this.inner.style.transform = `scale(${this.scale})`;
    this.stage.style.width = `${width * this.scale}px`;
    this.stage.style.height = `${height * this.scale}px`;
    this.syncOverlays();
    this.syncEditList();
    this.syncHistoryLabel();
    await this.refreshMask();
  }

  // -------------------------------------------------------------- drawing

  private eventToImage(e: MouseEvent): Point {
    const rect = this.stage.getBoundingClientRect();
    const { width, height } = this.imageSize();
    const p = viewToImage(e.clientX, e.clientY, { x: rect.left, y: rect.top }, this.scale);
    return clampPoint(p, width, height);
  }

  private onMouseDown(e: MouseEvent): void {
    if (!this.snapshot) return;
    this.dragStart = this.eventToImage(e);
    this.draft.box = null;
    this.syncOverlays();
  }

  private onMouseMove(e: MouseEvent): void {
    if (!this.dragStart) return;
    this.draft.box = roundBox(boxFromCorners(this.dragStart, this.eventToImage(e)));
    this.syncOverlays();
  }

  private onMouseUp(e: MouseEvent): void {
    if (!this.dragStart) return;
    const box = roundBox(boxFromCorners(this.dragStart, this.eventToImage(e)));
    this.dragStart = null;
    this.draft.box = box[0] < box[2] && box[1] < box[3] ? box : null;
    this.syncOverlays();
  }

  // -------------------------------------------------------------- authoring

  setAction(action: string): void {
    this.draft.action = action;
    this.actionSelect.value = action;
    const needsTarget = actionNeedsTarget(action);
    this.colorSelect.disabled = !needsTarget;
    this.objectSelect.disabled = !needsTarget;
    this.targetText.disabled = !needsTarget;
    if (!needsTarget) {
      this.colorSelect.value = "";
      this.objectSelect.value = "";
      this.targetText.value = "";
      this.draft.target = "";
    }
  }

  private syncTargetFromPickers(): void {
    this.draft.target = composeTarget(
      this.targetText.value,
      this.colorSelect.value,
      this.objectSelect.value,
    );
  }

  /** Validate the draft locally, then submit it and reconcile. */
  async confirmEdit(): Promise<void> {
    if (!this.snapshot || !this.banks) return;
    const { width, height } = this.imageSize();
    const check = validateDraft(this.draft, this.banks.actions, width, height);
    if (!check.ok) {
      this.showBanner(`${check.code}: ${check.message}`);
      return;
    }
    const sid = this.snapshot.session_id;
    try {
      const response = await this.client.addEdit(sid, check.request);
      // optimistic append, then reconcile with the server's snapshot
      this.snapshot.specs = [...this.snapshot.specs, response.spec];
      this.snapshot = await this.client.getSession(sid);
    } catch (error) {
      this.showError(error);
      return;
    }
    this.clearBanner();
    this.draft.box = null;
    this.syncOverlays();
    this.syncEditList();
    await this.refreshMask();
  }

  // -------------------------------------------------------------- preview

  /** Re-fetch the mask projection PNG and show it as the overlay. */
  async refreshMask(): Promise<void> {
    if (!this.snapshot) return;
    try {
      this.maskPngBytes = await this.client.getMaskPng(this.snapshot.session_id);
    } catch (error) {
      this.showError(error);
      return;
    }
    this.maskImage.src = pngDataUrl(this.maskPngBytes);
    this.syncMaskVisibility();
  }

  /** Ask the service to render and append the preview to the strip. */
  async renderPreview(globalPrompt?: string): Promise<void> {
    if (!this.snapshot) return;
    const sid = this.snapshot.session_id;
    try {
      const response = await this.client.render(sid, globalPrompt);
      this.previews.push(`data:image/png;base64,${response.preview_png_b64}`);
      this.snapshot = await this.client.getSession(sid);
    } catch (error) {
      this.showError(error);
      return;
    }
    this.clearBanner();
    const img = el("img", {
      class: "preview",
      "data-testid": "preview-image",
      alt: `preview ${this.previews.length}`,
    });
    img.src = this.previews[this.previews.length - 1] ?? "";
    this.historyStrip.append(img);
    this.syncHistoryLabel();
  }

  // -------------------------------------------------------------- DOM sync

  private syncMaskVisibility(): void {
    this.maskImage.hidden = !(this.maskToggle.checked && this.maskPngBytes !== null);
  }

  private syncHistoryLabel(): void {
    this.historyLabel.textContent = `renders: ${this.snapshot?.history_length ?? 0}`;
  }

  private syncEditList(): void {
    this.editList.textContent = "";
    for (const spec of this.snapshot?.specs ?? []) {
      const item = el("li", { "data-testid": "edit-sentence" });
      item.textContent = spec.instruction_sentence;
      this.editList.append(item);
    }
  }

  private placeBox(cls: string, testid: string, box: Box, label: string): void {
    const node = el("div", { class: `box ${cls}`, "data-testid": testid });
    node.style.left = `${box[0]}px`;
    node.style.top = `${box[1]}px`;
    node.style.width = `${box[2] - box[0]}px`;
    node.style.height = `${box[3] - box[1]}px`;
    if (label) {
      node.append(el("span", { class: "tag" }, label));
    }
    this.inner.append(node);
  }

  private syncOverlays(): void {
    for (const node of Array.from(this.inner.querySelectorAll(".box"))) {
      node.remove();
    }
    if (!this.snapshot) return;
    for (const inst of this.snapshot.annotation.instances) {
      this.placeBox(
        "instance",
        "instance-box",
        inst.bbox,
        `${inst.class_label} · ${inst.distance_m.toFixed(1)} m`,
      );
    }
    this.snapshot.specs.forEach((spec, i) => {
      this.placeBox("spec", "spec-box", spec.bbox, `#${i + 1} ${spec.action}`);
    });
    if (this.draft.box) {
      this.placeBox("draft", "draft-box", this.draft.box, "");
    }
  }

  // -------------------------------------------------------------- errors

  private showBanner(text: string): void {
    this.banner = text;
    this.bannerEl.textContent = text;
    this.bannerEl.hidden = false;
  }

  private clearBanner(): void {
    this.banner = null;
    this.bannerEl.textContent = "";
    this.bannerEl.hidden = true;
  }

  private showError(error: unknown): void {
    if (error instanceof ApiError) {
      this.showBanner(`${error.code}: ${error.message}`);
    } else {
      this.showBanner(`error: ${String(error)}`);
    }
  }
}
