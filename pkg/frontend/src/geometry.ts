/** Box math shared by the drawing surface and the overlay layer.
 *
 * Boxes are `[x0, y0, x1, y1]` in image pixel coordinates with
 * `x0 < x1` and `y0 < y1`, matching the service contract. The stage
 * displays the image scaled by a single factor, so view<->image
 * conversion is a division/multiplication plus the stage origin.
 */

export type Box = [number, number, number, number];

export interface Point {
  x: number;
  y: number;
}

/** Order two drag corners into a (min, max) box; may be degenerate. */
export function boxFromCorners(a: Point, b: Point): Box {
  return [
    Math.min(a.x, b.x),
    Math.min(a.y, b.y),
    Math.max(a.x, b.x),
    Math.max(a.y, b.y),
  ];
}

/** Clamp a point into the image rectangle `[0,w] x [0,h]`. */
export function clampPoint(p: Point, width: number, height: number): Point {
  return {
    x: Math.min(Math.max(p.x, 0), width),
    y: Math.min(Math.max(p.y, 0), height),
  };
}

/** Round box coordinates to integer pixel edges. */
export function roundBox(box: Box): Box {
  return box.map(Math.round) as Box;
}

/** True when the box has positive area and lies inside the image. */
export function isValidBox(box: Box, width: number, height: number): boolean {
  const [x0, y0, x1, y1] = box;
  return (
    Number.isInteger(x0) && Number.isInteger(y0) &&
    Number.isInteger(x1) && Number.isInteger(y1) &&
    x0 >= 0 && y0 >= 0 && x0 < x1 && y0 < y1 && x1 <= width && y1 <= height
  );
}

/** Map a client-space point into image coordinates. */
export function viewToImage(
  clientX: number,
  clientY: number,
  origin: Point,
  scale: number,
): Point {
  return { x: (clientX - origin.x) / scale, y: (clientY - origin.y) / scale };
}

/** Map an image-space box into view-space CSS pixels. */
export function imageToView(box: Box, scale: number): Box {
  return box.map((v) => v * scale) as Box;
}

/** Largest coordinate difference between two boxes. */
export function boxDistance(a: Box, b: Box): number {
  return Math.max(
    Math.abs(a[0] - b[0]),
    Math.abs(a[1] - b[1]),
    Math.abs(a[2] - b[2]),
    Math.abs(a[3] - b[3]),
  );
}
