/** Console state machine.

The console never computes plans, costs, or attributions: every figure it
shows is lifted verbatim from a server response, and each response is
applied as one atomic state swap. Polls run on an injectable timer so tests
can drive them deterministically.
*/

import { ApiClient } from './api.js';
import { MaskPainter } from './mask.js';
import { decodeRaster, RasterFrame } from './ppm.js';
import type { Cell, JobRecord, RouteResponse, WorkspaceInfo } from './types.js';

export interface TimerHooks {
  setInterval(handler: () => void, ms: number): unknown;
  clearInterval(handle: unknown): void;
}

export interface PendingQuery {
  start: Cell | null;
  goal: Cell | null;
  profile: string;
  blend: number | null; // null: let the server apply the profile default
}

export interface ConsoleSnapshot {
  workspaceId: string | null;
  info: WorkspaceInfo | null;
  layer: string;
  frame: RasterFrame | null;
  pending: PendingQuery;
  lastRoute: RouteResponse | null;
  supportClassName: string;
  error: string | null;
  busyJobs: string[];
}

const POLL_INTERVAL_MS = 1000;

export class ConsoleController {
  private workspaceId: string | null = null;
  private info: WorkspaceInfo | null = null;
  private layer = 'semantic';
  private frame: RasterFrame | null = null;
  private pending: PendingQuery = { start: null, goal: null, profile: 'safe', blend: null };
  private lastRoute: RouteResponse | null = null;
  private error: string | null = null;
  private pollHandles = new Map<string, unknown>();
  brush: MaskPainter | null = null;
  supportClassName = '';
  supportImage: Uint8Array | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly timers: TimerHooks = {
      setInterval: (fn, ms) => setInterval(fn, ms),
      clearInterval: (handle) => clearInterval(handle as Parameters<typeof clearInterval>[0]),
    },
    private readonly onChange: (snapshot: ConsoleSnapshot) => void = () => {},
  ) {}

  snapshot(): ConsoleSnapshot {
    return {
      workspaceId: this.workspaceId,
      info: this.info,
      layer: this.layer,
      frame: this.frame,
      pending: { ...this.pending },
      lastRoute: this.lastRoute,
      supportClassName: this.supportClassName,
      error: this.error,
      busyJobs: [...this.pollHandles.keys()],
    };
  }

  private swap(apply: () => void): void {
    apply(); // single synchronous mutation block = atomic wrt renders
    this.onChange(this.snapshot());
  }

  private fail(err: unknown): void {
    // Network and validation failures render inline; state is preserved.
    this.swap(() => {
      this.error = err instanceof Error ? err.message : String(err);
    });
  }

  // ------------------------------------------------------------------
  // workspace
  // ------------------------------------------------------------------

  async openWorkspace(id: string): Promise<void> {
    const info = await this.api.workspaceInfo(id);
    this.swap(() => {
      this.workspaceId = id;
      this.info = info;
      this.error = null;
    });
    await this.refreshLayer();
  }

  async createWorkspace(imagePpm: Uint8Array, paletteJson: string): Promise<string> {
    const id = await this.api.createWorkspace(imagePpm, paletteJson);
    await this.openWorkspace(id);
    return id;
  }

  async refreshInfo(): Promise<void> {
    if (!this.workspaceId) return;
    const info = await this.api.workspaceInfo(this.workspaceId);
    this.swap(() => {
      this.info = info;
    });
  }

  // ------------------------------------------------------------------
  // map rendering and click-to-set markers
  // ------------------------------------------------------------------

  async setLayer(layer: string): Promise<void> {
    if (!this.workspaceId) return;
    try {
      const bytes = await this.api.overlay(this.workspaceId, layer);
      const frame = decodeRaster(bytes);
      this.swap(() => {
        this.layer = layer;
        this.frame = frame;
        this.error = null;
      });
    } catch (err) {
      this.fail(err);
    }
  }

  async refreshLayer(): Promise<void> {
    await this.setLayer(this.layer);
  }

  /** First click sets the start marker, second the goal, third restarts. */
  clickCell(cell: Cell): void {
    if (this.info) {
      const [row, col] = cell;
      if (row < 0 || row >= this.info.height || col < 0 || col >= this.info.width) return;
    }
    this.swap(() => {
      if (this.pending.start === null || this.pending.goal !== null) {
        this.pending = { ...this.pending, start: cell, goal: null };
      } else {
        this.pending = { ...this.pending, goal: cell };
      }
    });
  }

  // ------------------------------------------------------------------
  // support mask painting
  // ------------------------------------------------------------------

  beginSupport(className: string, image: Uint8Array): void {
    const frame = decodeRaster(image);
    this.swap(() => {
      this.supportClassName = className;
      this.supportImage = image;
      this.brush = new MaskPainter(frame.width, frame.height);
    });
  }

  get canSubmitSupport(): boolean {
    return (
      this.brush !== null &&
      this.brush.canSubmit &&
      this.supportClassName.length > 0 &&
      this.supportImage !== null
    );
  }

  async submitSupport(config?: Record<string, unknown>): Promise<string | null> {
    if (!this.workspaceId || !this.canSubmitSupport) return null;
    try {
      const jobId = await this.api.addClass(
        this.workspaceId,
        this.supportClassName,
        [{ image: this.supportImage!, mask: this.brush!.toPgm() }],
        { config },
      );
      this.watchJob(jobId, async () => {
        // class landed: palette and semantic layer are refreshed from the server
        await this.refreshInfo();
        await this.refreshLayer();
      });
      return jobId;
    } catch (err) {
      this.fail(err);
      return null;
    }
  }

  // ------------------------------------------------------------------
  // jobs
  // ------------------------------------------------------------------

  watchJob(jobId: string, onDone: (record: JobRecord) => void | Promise<void>): void {
    const handle = this.timers.setInterval(async () => {
      let record: JobRecord;
      try {
        record = await this.api.jobStatus(jobId);
      } catch (err) {
        this.timers.clearInterval(this.pollHandles.get(jobId));
        this.pollHandles.delete(jobId);
        this.fail(err);
        return;
      }
      if (record.status === 'done' || record.status === 'failed') {
        this.timers.clearInterval(this.pollHandles.get(jobId));
        this.pollHandles.delete(jobId);
        if (record.status === 'failed') {
          this.fail(new Error(record.error ?? `job ${jobId} failed`));
        } else {
          await onDone(record);
          this.swap(() => {});
        }
      }
    }, POLL_INTERVAL_MS);
    this.swap(() => {
      this.pollHandles.set(jobId, handle);
    });
  }

  // ------------------------------------------------------------------
  // route queries
  // ------------------------------------------------------------------

  async queryRoute(): Promise<RouteResponse | null> {
    if (!this.workspaceId || !this.pending.start || !this.pending.goal) return null;
    try {
      const body: Record<string, unknown> = {
        start: this.pending.start,
        goal: this.pending.goal,
        profile: this.pending.profile,
      };
      if (this.pending.blend !== null) body.blend = this.pending.blend;
      const route = await this.api.queryRoute(this.workspaceId, body as never);
      this.swap(() => {
        this.lastRoute = route;
        this.error = null;
      });
      await this.setLayer(`route:${route.route_id}`);
      return route;
    } catch (err) {
      this.fail(err);
      return null;
    }
  }

  /** Profile toggle re-issues the query when one is on display. */
  async setProfile(profile: string): Promise<void> {
    this.swap(() => {
      this.pending = { ...this.pending, profile };
    });
    if (this.lastRoute) await this.queryRoute();
  }

  /** Blend slider re-issues the query when one is on display. */
  async setBlend(blend: number | null): Promise<void> {
    this.swap(() => {
      this.pending = { ...this.pending, blend };
    });
    if (this.lastRoute) await this.queryRoute();
  }
}

/** Attribution table rows, verbatim server numbers (display strings only). */
export function attributionRows(
  route: RouteResponse,
): Array<{ name: string; share: ClassShareRow }> {
  return Object.entries(route.explanation.per_class_attribution).map(([name, share]) => ({
    name,
    share: {
      cellsChosen: share.cells_on_chosen,
      costChosen: share.cost_share_chosen,
      cellsAlternative: share.cells_on_alternative,
      costAlternative: share.cost_share_alternative,
    },
  }));
}

export interface ClassShareRow {
  cellsChosen: number;
  costChosen: number;
  cellsAlternative: number;
  costAlternative: number;
}
