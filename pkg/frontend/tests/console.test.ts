/**
 * Console round trip against the real case service (acceptance criterion 10):
 * register the vehicle model, create a case, submit 3 observations and 1
 * evidence clamp through the UI, check rendered values equal the service's
 * timeline response at the displayed precision, and check a what-if preview
 * leaves the journal untouched.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { mount } from "../src/main.js";
import type { App } from "../src/app.js";

const REPO = resolve(__dirname, "..", "..");
const VEHICLE = readFileSync(join(REPO, "models", "vehicle_attack.json"), "utf-8");

let service: ChildProcess;
let baseUrl: string;
let dataDir: string;
let root: HTMLElement;
let app: App;

async function idle(): Promise<void> {
  // settle nested dispatches (an action may chain another)
  for (let i = 0; i < 4; i++) await app.lastAction;
}

function click(selector: string): void {
  const el = root.querySelector<HTMLElement>(selector);
  if (!el) throw new Error(`no element ${selector}`);
  el.click();
}

function setValue(selector: string, value: string): void {
  const el = root.querySelector<HTMLInputElement | HTMLTextAreaElement | HTMLSelectElement>(selector);
  if (!el) throw new Error(`no element ${selector}`);
  el.value = value;
}

function journalBytes(): number {
  const caseFiles = readdirSync(join(dataDir, "cases"));
  expect(caseFiles).toHaveLength(1);
  return statSync(join(dataDir, "cases", caseFiles[0])).size;
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "escalate-console-"));
  service = spawn("python3", ["-u", "-m", "escalate.service"], {
    env: { ...process.env, ESCALATE_ADDR: "127.0.0.1:0", ESCALATE_DATA: dataDir },
  });
  baseUrl = await new Promise<string>((resolvePort, reject) => {
    let buffer = "";
    service.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/on (http:\/\/[\d.]+:\d+)/);
      if (match) resolvePort(match[1]);
    });
    service.on("exit", (code) => reject(new Error(`service exited early (${code}): ${buffer}`)));
    setTimeout(() => reject(new Error(`service did not start: ${buffer}`)), 20_000);
  });
  root = document.createElement("div");
  document.body.appendChild(root);
  app = mount(root, baseUrl);
  await idle();
});

afterAll(() => {
  service?.kill("SIGKILL");
});

describe("console round trip (criterion 10)", () => {
  it("registers the vehicle model through the upload form", async () => {
    click("#nav-models");
    await idle();
    setValue("#model-json", VEHICLE);
    click("#model-register");
    await idle();
    expect(root.querySelector("#register-error")!.textContent).toBe("");
    const rows = root.querySelectorAll(".model-row");
    expect(rows).toHaveLength(1);
    expect(rows[0].textContent).toContain("Vehicle attack escalation model");
  });

  it("opens a case at the model's priors", async () => {
    click(".model-open");
    await idle();
    expect(app.view).toBe("case");
    expect(root.querySelector("#cell-p-N")!.textContent).toBe("0.0500");
    expect(root.querySelector("#cell-p-A")!.textContent).toBe("0.6000");
    expect(root.querySelector("#score-cell")!.textContent).toBe("1.500");
  });

  it("submits three weekly observations and one evidence clamp", async () => {
    const weeks: Record<string, string>[] = [
      { "obs_rad_web": "6", "obs_e_meets": "4", "obs_phys_meets": "2" },
      { "obs_rad_web": "7", "obs_finance_up": "1" },
      { "obs_rad_web": "6", "obs_dealer_web": "2", "obs_finance_down": "1" },
    ];
    for (const [i, week] of weeks.entries()) {
      setValue("#obs-t", String(i + 1));
      for (const [obs, value] of Object.entries(week)) {
        setValue(`#obs-val-${obs}`, value); // other observables stay blank = missing
      }
      click("#obs-submit");
      await idle();
      expect(root.querySelector("#obs-error")!.textContent).toBe("");
    }
    setValue("#ev-t", "4");
    setValue("#ev-task", "t_obtain_vehicle");
    setValue("#ev-value", "1");
    setValue("#ev-note", "dealer confirms purchase");
    click("#ev-submit");
    await idle();
    expect(root.querySelector("#ev-error")!.textContent).toBe("");
    expect(app.current!.timeline).toHaveLength(5); // priors + 3 obs + 1 evidence
  });

  it("renders exactly the service's timeline values at displayed precision", async () => {
    const response = await fetch(`${baseUrl}/cases/${app.current!.caseId}/timeline`);
    const timeline = (await response.json()) as {
      points: { t: number; posterior: Record<string, number>; score: number; rho: Record<string, number> }[];
    };
    const served = timeline.points[timeline.points.length - 1];
    for (const sid of app.current!.states) {
      const cell = root.querySelector(`#cell-p-${sid}`)!.textContent!;
      expect(cell).toBe(served.posterior[sid].toFixed(4));
    }
    expect(root.querySelector("#score-cell")!.textContent).toBe(served.score.toFixed(3));
    for (const sid of app.current!.states.slice(1)) {
      const rho = root.querySelector(`#cell-rho-${sid}`)!.textContent!;
      expect(rho).toBe(served.rho[sid].toFixed(3));
    }
  });

  it("out-of-order entry shows the 409 inline without changing the chart", async () => {
    const before = app.current!.timeline;
    setValue("#obs-t", "2"); // stale: case is at t=4
    setValue("#obs-val-obs_rad_web", "5");
    click("#obs-submit");
    await idle();
    expect(root.querySelector("#obs-error")!.textContent).toContain("409");
    expect(app.current!.timeline).toEqual(before);
  });

  it("what-if preview overlays without touching the journal", async () => {
    const bytesBefore = journalBytes();
    const pointsBefore = app.current!.timeline.length;

    setValue("#wi-t", "5");
    setValue("#wi-task", "t_move_to_target");
    setValue("#wi-value", "1");
    click("#wi-add");
    click("#wi-preview");
    await idle();
    expect(root.querySelector("#wi-error")!.textContent).toBe("");
    expect(root.querySelector("#wi-note")).not.toBeNull(); // dashed preview flagged
    expect(app.current!.preview).not.toBeNull();
    const previewLast = app.current!.preview![app.current!.preview!.length - 1];
    const committedLast = app.current!.timeline[app.current!.timeline.length - 1];
    expect(previewLast.posterior["M"]).toBeGreaterThan(committedLast.posterior["M"]);

    // journal length unchanged; committed history unchanged
    expect(journalBytes()).toBe(bytesBefore);
    expect(app.current!.timeline).toHaveLength(pointsBefore);

    click("#wi-discard");
    expect(app.current!.preview).toBeNull();
    expect(root.querySelector("#wi-note")).toBeNull();
    expect(journalBytes()).toBe(bytesBefore);
  });

  it("unreachable service raises the stale banner", async () => {
    const detached = mount(document.createElement("div"), "http://127.0.0.1:1");
    await detached.lastAction;
    expect(detached.banner?.kind).toBe("error");
    expect(detached.stale).toBe(true);
  });
});
