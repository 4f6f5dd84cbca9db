/** Client-side edit drafts and pre-flight validation.
 *
 * A draft mirrors the service's edit request plus the in-progress draw
 * state. Validation applies the same rules the service enforces, so a
 * draft that passes here is never rejected for shape reasons — the
 * confirm button stays disabled until the draft would be accepted.
 */

import type { Box } from "./geometry.js";
import { isValidBox } from "./geometry.js";
import type { EditRequest } from "./types.js";

export const TARGETLESS_ACTIONS = new Set(["delete"]);

export interface EditDraft {
  action: string;
  box: Box | null;
  target: string;
}

export type DraftCheck =
  | { ok: true; request: EditRequest }
  | { ok: false; code: string; message: string };

export function actionNeedsTarget(action: string): boolean {
  return !TARGETLESS_ACTIONS.has(action);
}

/** Validate a draft against the service's edit rules. */
export function validateDraft(
  draft: EditDraft,
  actions: string[],
  width: number,
  height: number,
): DraftCheck {
  if (!actions.includes(draft.action)) {
    return {
      ok: false,
      code: "invalid_action",
      message: `unknown action "${draft.action}"`,
    };
  }
  if (draft.box === null || !isValidBox(draft.box, width, height)) {
    return {
      ok: false,
      code: "invalid_bbox",
      message: "draw a box inside the image first",
    };
  }
  const target = draft.target.trim();
  if (!actionNeedsTarget(draft.action) && target !== "") {
    return {
      ok: false,
      code: "invalid_target",
      message: `${draft.action} takes no target`,
    };
  }
  if (actionNeedsTarget(draft.action) && target === "") {
    return {
      ok: false,
      code: "missing_target",
      message: `${draft.action} needs a target description`,
    };
  }
  const out: EditRequest = { action: draft.action, bbox: draft.box };
  if (target !== "") out.target_description = target;
  return { ok: true, request: out };
}

/** Compose a target description from picker values or a free-text override. */
export function composeTarget(
  freeText: string,
  color: string,
  object: string,
): string {
  const typed = freeText.trim();
  if (typed !== "") return typed;
  if (color && object) return `${color} ${object}`;
  return object || "";
}
