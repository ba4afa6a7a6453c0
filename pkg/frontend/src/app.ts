/**
 * Application state and actions. Views dispatch into these methods; every
 * mutation refreshes the timeline from the service and re-renders, so the
 * rendered numbers always come from the last served response.
 */

import { ApiError, Client } from "./api.js";
import type {
  CaseSummary,
  ModelSummary,
  Timeline,
  TimelinePoint,
  WhatIfEntry,
} from "./api.js";

export type ViewName = "models" | "cases" | "case";

export interface WhatIfDraftRow {
  t: number;
  tasks: Record<string, number>;
}

export interface CaseView {
  caseId: string;
  modelId: string;
  label: string;
  states: string[];
  observables: { id: string; name: string }[];
  tasks: { id: string; name: string }[];
  timeline: TimelinePoint[];
  preview: TimelinePoint[] | null;
  draft: WhatIfDraftRow[];
  obsError: string;
  evError: string;
  wiError: string;
}

export interface Banner {
  kind: "error" | "info";
  text: string;
}

export class App {
  client: Client;
  view: ViewName = "cases";
  models: ModelSummary[] = [];
  cases: CaseSummary[] = [];
  current: CaseView | null = null;
  banner: Banner | null = null;
  stale = false;
  registerError = "";
  /** Resolves when the most recent action settles; tests await this. */
  lastAction: Promise<void> = Promise.resolve();
  onRender: () => void = () => {};

  constructor(baseUrl: string) {
    this.client = new Client(baseUrl);
  }

  private dispatch(work: () => Promise<void>): Promise<void> {
    const run = work()
      .catch((err) => {
        this.fail(err);
      })
      .finally(() => this.onRender());
    this.lastAction = run;
    return run;
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError && err.status === 0) {
      this.banner = { kind: "error", text: `${err.message} (showing stale data)` };
      this.stale = true;
    } else {
      this.banner = { kind: "error", text: err instanceof Error ? err.message : String(err) };
    }
  }

  clearBanner(): void {
    this.banner = null;
  }

  // -- navigation -----------------------------------------------------------

  showModels(): Promise<void> {
    return this.dispatch(async () => {
      this.view = "models";
      this.models = (await this.client.listModels()).models;
      this.stale = false;
    });
  }

  showCases(): Promise<void> {
    return this.dispatch(async () => {
      this.view = "cases";
      this.cases = (await this.client.listCases()).cases;
      this.stale = false;
    });
  }

  openCase(caseId: string): Promise<void> {
    return this.dispatch(async () => {
      const timeline = await this.client.getTimeline(caseId);
      const model = await this.client.getModel(timeline.model_id ?? "");
      this.current = {
        caseId,
        modelId: model.model_id,
        label: String(model.document.label ?? model.model_id),
        states: model.document.states.map((s) => s.id),
        observables: model.document.observables,
        tasks: model.document.tasks,
        timeline: timeline.points,
        preview: null,
        draft: [],
        obsError: "",
        evError: "",
        wiError: "",
      };
      this.view = "case";
      this.stale = false;
    });
  }

  // -- models ---------------------------------------------------------------

  registerModel(documentText: string): Promise<void> {
    return this.dispatch(async () => {
      this.registerError = "";
      let doc: unknown;
      try {
        doc = JSON.parse(documentText);
      } catch (err) {
        this.registerError = `not valid JSON: ${String(err)}`;
        return;
      }
      try {
        await this.client.registerModel(doc);
      } catch (err) {
        if (err instanceof ApiError && err.status > 0) {
          this.registerError = `${err.code}: ${err.message}`;
          return;
        }
        throw err;
      }
      this.models = (await this.client.listModels()).models;
    });
  }

  createCase(modelId: string): Promise<void> {
    return this.dispatch(async () => {
      const summary = await this.client.createCase(modelId);
      await this.openCase(summary.case_id);
    });
  }

  // -- case detail ----------------------------------------------------------

  private async refreshTimeline(): Promise<void> {
    if (!this.current) return;
    const timeline: Timeline = await this.client.getTimeline(this.current.caseId);
    this.current.timeline = timeline.points;
    this.stale = false;
  }

  nextT(): number {
    if (!this.current || this.current.timeline.length === 0) return 1;
    const last = this.current.timeline[this.current.timeline.length - 1].t;
    return Math.floor(last) + 1;
  }

  submitObservation(t: number, values: Record<string, number>): Promise<void> {
    return this.dispatch(async () => {
      if (!this.current) return;
      this.current.obsError = "";
      try {
        await this.client.postObservation(this.current.caseId, t, values);
      } catch (err) {
        if (err instanceof ApiError && err.status > 0) {
          this.current.obsError = `${err.status} ${err.code}: ${err.message}`;
          return; // no chart change on 409/422
        }
        throw err;
      }
      await this.refreshTimeline();
    });
  }

  submitEvidence(t: number, tasks: Record<string, number>, note: string): Promise<void> {
    return this.dispatch(async () => {
      if (!this.current) return;
      this.current.evError = "";
      try {
        await this.client.postEvidence(this.current.caseId, t, tasks, note);
      } catch (err) {
        if (err instanceof ApiError && err.status > 0) {
          this.current.evError = `${err.status} ${err.code}: ${err.message}`;
          return;
        }
        throw err;
      }
      await this.refreshTimeline();
    });
  }

  addDraftRow(t: number, task: string, value: number): void {
    if (!this.current) return;
    const existing = this.current.draft.find((r) => r.t === t);
    if (existing) {
      existing.tasks[task] = value;
    } else {
      this.current.draft.push({ t, tasks: { [task]: value } });
      this.current.draft.sort((a, b) => a.t - b.t);
    }
    this.onRender();
  }

  previewWhatIf(): Promise<void> {
    return this.dispatch(async () => {
      if (!this.current) return;
      this.current.wiError = "";
      if (this.current.draft.length === 0) {
        this.current.wiError = "draft is empty";
        return;
      }
      const entries: WhatIfEntry[] = this.current.draft.map((r) => ({ t: r.t, tasks: r.tasks }));
      try {
        const preview = await this.client.whatIf(this.current.caseId, entries);
        this.current.preview = preview.points;
      } catch (err) {
        if (err instanceof ApiError && err.status > 0) {
          this.current.wiError = `${err.status} ${err.code}: ${err.message}`;
          return;
        }
        throw err;
      }
    });
  }

  discardWhatIf(): void {
    if (!this.current) return;
    this.current.preview = null;
    this.current.draft = [];
    this.current.wiError = "";
    this.onRender();
  }
}
