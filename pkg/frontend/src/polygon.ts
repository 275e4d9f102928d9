/**
 * Draft state for the polygon comparison mode: ordered image-space vertices,
 * undo, and the submit gate. The server rejects polygons under five points,
 * so the client mirrors that rule to keep the submit button honest.
 */

export interface Point {
  x: number;
  y: number;
}

export const MIN_VERTICES = 5;

export class PolygonDraft {
  readonly imageId: string;
  readonly imageWidth: number;
  readonly imageHeight: number;
  private vertices: Point[] = [];
  private isClosed = false;

  constructor(imageId: string, imageWidth: number, imageHeight: number) {
    if (imageWidth <= 0 || imageHeight <= 0) {
      throw new RangeError("image dimensions must be positive");
    }
    this.imageId = imageId;
    this.imageWidth = imageWidth;
    this.imageHeight = imageHeight;
  }

  get points(): readonly Point[] {
    return this.vertices;
  }

  get closed(): boolean {
    return this.isClosed;
  }

  /**
   * Add a vertex at image-space (x, y). Clicks outside the image are ignored
   * and reported via the return value. Bounds are inclusive, matching the
   * server's check.
   */
  addVertex(x: number, y: number): boolean {
    if (this.isClosed) return false;
    if (!(x >= 0 && x <= this.imageWidth && y >= 0 && y <= this.imageHeight)) {
      return false;
    }
    this.vertices.push({ x, y });
    return true;
  }

  /** Remove the most recent vertex, reopening a closed draft. */
  undo(): void {
    this.isClosed = false;
    this.vertices.pop();
  }

  get canSubmit(): boolean {
    return this.vertices.length >= MIN_VERTICES;
  }

  /** Close the ring; only allowed once enough vertices exist. */
  close(): void {
    if (!this.canSubmit) {
      throw new Error(`polygon needs at least ${MIN_VERTICES} points, has ${this.vertices.length}`);
    }
    this.isClosed = true;
  }

  toRequestPoints(): Array<[number, number]> {
    return this.vertices.map((p) => [p.x, p.y]);
  }
}
