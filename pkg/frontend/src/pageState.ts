/**
 * View state for one question page: which patches are selected, whether every
 * patch image has rendered, and how long the worker has been looking at the
 * fully loaded page. Timing starts at first paint (all images loaded), so
 * load retries before that point never leak into elapsedMs.
 */
import type { QuestionPage } from "./types.js";

export type Clock = () => number;

export class PageViewState {
  readonly page: QuestionPage;
  private readonly selections: boolean[];
  private readonly loaded: boolean[];
  private startedAt: number | null = null;
  private readonly clock: Clock;

  constructor(page: QuestionPage, clock: Clock = () => Date.now()) {
    this.page = page;
    this.clock = clock;
    this.selections = page.tasks.map(() => false);
    this.loaded = page.tasks.map(() => false);
  }

  get taskCount(): number {
    return this.page.tasks.length;
  }

  private checkIndex(index: number): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.taskCount) {
      throw new RangeError(`task index ${index} out of range for ${this.taskCount} tasks`);
    }
  }

  isSelected(index: number): boolean {
    this.checkIndex(index);
    return this.selections[index] as boolean;
  }

  /** Toggle a patch's selection; returns the new value. */
  toggle(index: number): boolean {
    this.checkIndex(index);
    this.selections[index] = !this.selections[index];
    return this.selections[index] as boolean;
  }

  /** Record that the patch image at `index` has rendered. */
  markLoaded(index: number): void {
    this.checkIndex(index);
    this.loaded[index] = true;
    if (this.startedAt === null && this.loaded.every(Boolean)) {
      this.startedAt = this.clock();
    }
  }

  /** Record a failed render so the cell shows a retry affordance. */
  markLoadFailed(index: number): void {
    this.checkIndex(index);
    this.loaded[index] = false;
  }

  get fullyLoaded(): boolean {
    return this.loaded.every(Boolean);
  }

  /** Submission is enabled only once every patch has rendered. */
  get canSubmit(): boolean {
    return this.fullyLoaded && this.startedAt !== null;
  }

  /** Answers as positional booleans, in the page's task order. */
  answers(): boolean[] {
    return this.selections.slice();
  }

  elapsedMs(): number {
    if (this.startedAt === null) {
      throw new Error("page not fully rendered yet; elapsed time undefined");
    }
    const elapsed = this.clock() - this.startedAt;
    // a zero or negative clock delta is not a valid labeling duration
    return Math.max(elapsed, 1);
  }
}
