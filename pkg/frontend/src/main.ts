/** Boot: config form -> session -> interactive loop. */

import { SessionApi } from "./api.js";
import type { SessionConfig } from "./api.js";
import { SessionController } from "./ui.js";

function field<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function readConfig(catalogRef: string): SessionConfig {
  return {
    catalog_ref: catalogRef,
    policy: {
      policy: field<HTMLSelectElement>("policy").value,
      m: Number(field<HTMLInputElement>("m").value),
      subsample_size: Number(field<HTMLInputElement>("subsample").value),
    },
    channel: {
      symmetric: {
        m: Number(field<HTMLInputElement>("m").value),
        alpha: Number(field<HTMLInputElement>("alpha").value),
      },
    },
    prior: { mean: 0, covariance: { scale: 1 } },
    seed: Number(field<HTMLInputElement>("seed").value),
  };
}

async function startSession(): Promise<void> {
  const banner = field<HTMLDivElement>("form-error");
  banner.textContent = "";
  const api = new SessionApi("");
  try {
    const catalogText = field<HTMLTextAreaElement>("catalog").value.trim();
    let catalogRef = field<HTMLInputElement>("catalog-ref").value.trim();
    if (catalogText) {
      const ingested = await api.ingestCatalog(catalogText);
      catalogRef = ingested.catalog_ref;
      field<HTMLInputElement>("catalog-ref").value = catalogRef;
    }
    if (!catalogRef) {
      banner.textContent = "paste a catalog (JSON Lines) or a catalog ref";
      return;
    }
    const created = await api.createSession(readConfig(catalogRef));
    field<HTMLDivElement>("setup-panel").style.display = "none";
    const root = field<HTMLDivElement>("session-root");
    const controller = new SessionController(api, root, created);
    bindKeyboard(controller);
    window.addEventListener("focus", () => void controller.refresh());
    await controller.start();
  } catch (err) {
    banner.textContent = err instanceof Error ? err.message : String(err);
  }
}

function bindKeyboard(controller: SessionController): void {
  document.addEventListener("keydown", (event) => {
    const n = Number(event.key);
    if (Number.isInteger(n) && n >= 1 && n <= 9) {
      void controller.answer(n);
    }
  });
}

field<HTMLButtonElement>("start-button").addEventListener("click", () => {
  void startSession();
});
