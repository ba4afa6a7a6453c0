/**
 * Console entry point. The service base URL comes from, in order: the
 * ?api= query parameter, localStorage, or the default local service.
 */

import { App } from "./app.js";
import { render } from "./views.js";

export const DEFAULT_BASE = "http://127.0.0.1:8080";

export function resolveBaseUrl(href: string, stored: string | null): string {
  const fromQuery = new URL(href).searchParams.get("api");
  if (fromQuery) return fromQuery;
  if (stored) return stored;
  return DEFAULT_BASE;
}

export function mount(root: HTMLElement, baseUrl: string): App {
  const app = new App(baseUrl);
  app.onRender = () => render(root, app);
  render(root, app);
  void app.showCases();
  return app;
}

declare global {
  interface Window {
    escalateConsole?: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = resolveBaseUrl(window.location.href, window.localStorage.getItem("escalate-api"));
  window.localStorage.setItem("escalate-api", base);
  window.escalateConsole = mount(document.getElementById("app")!, base);
}
