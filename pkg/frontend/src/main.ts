/** Entry point: health badge, session start/resume chrome, mode switch. */

import { Client } from "./api.js";
import { SearchView } from "./search_panel.js";
import { Wizard } from "./wizard.js";

function option(value: string, text: string): HTMLOptionElement {
  const node = document.createElement("option");
  node.value = value;
  node.textContent = text;
  return node;
}

async function boot(): Promise<void> {
  const client = new Client("");
  const app = document.getElementById("app");
  const health = document.getElementById("health");
  if (!app) return;

  if (health) {
    try {
      const doc = await client.health();
      health.textContent = "";
      for (const [source, state] of Object.entries(doc.sources)) {
        const dot = document.createElement("span");
        dot.className = state === "ok" ? "dot ok" : "dot down";
        dot.title = `${source}: ${state}`;
        health.appendChild(dot);
      }
    } catch {
      health.textContent = "service unreachable";
    }
  }

  const chrome = document.createElement("div");
  chrome.className = "chrome";
  const startForm = document.createElement("form");
  startForm.id = "start-form";
  const catalogSelect = document.createElement("select");
  catalogSelect.id = "catalog";
  try {
    const listing = await client.catalogs();
    for (const catalog of listing.catalogs) catalogSelect.appendChild(option(catalog.id, catalog.id));
  } catch {
    catalogSelect.appendChild(option("algorithm", "algorithm"));
  }
  const sessionInput = document.createElement("input");
  sessionInput.id = "session-id";
  sessionInput.placeholder = "session id (optional)";
  const startButton = document.createElement("button");
  startButton.id = "start";
  startButton.type = "submit";
  startButton.textContent = "new session";
  const openButton = document.createElement("button");
  openButton.id = "open";
  openButton.type = "button";
  openButton.textContent = "resume";
  startForm.appendChild(catalogSelect);
  startForm.appendChild(sessionInput);
  startForm.appendChild(startButton);
  startForm.appendChild(openButton);

  const modeBar = document.createElement("nav");
  modeBar.className = "modes";
  const documentTab = document.createElement("button");
  documentTab.id = "mode-document";
  documentTab.textContent = "document";
  const searchTab = document.createElement("button");
  searchTab.id = "mode-search";
  searchTab.textContent = "search";
  modeBar.appendChild(documentTab);
  modeBar.appendChild(searchTab);

  const wizardRoot = document.createElement("div");
  wizardRoot.id = "wizard";
  const searchRoot = document.createElement("div");
  searchRoot.id = "search";
  searchRoot.hidden = true;

  chrome.appendChild(modeBar);
  chrome.appendChild(startForm);
  app.appendChild(chrome);
  app.appendChild(wizardRoot);
  app.appendChild(searchRoot);

  const wizard = new Wizard(wizardRoot, client);
  const search = new SearchView(searchRoot, client);
  search.render();

  documentTab.addEventListener("click", () => {
    wizardRoot.hidden = false;
    searchRoot.hidden = true;
    startForm.hidden = false;
  });
  searchTab.addEventListener("click", () => {
    wizardRoot.hidden = true;
    searchRoot.hidden = false;
    startForm.hidden = true;
  });

  startForm.addEventListener("submit", (event) => {
    event.preventDefault();
    void wizard
      .start(catalogSelect.value, sessionInput.value.trim() || undefined)
      .catch((err: unknown) => {
        wizardRoot.textContent = err instanceof Error ? err.message : String(err);
      });
  });
  openButton.addEventListener("click", () => {
    const sessionId = sessionInput.value.trim();
    if (!sessionId) return;
    void wizard.open(sessionId).catch((err: unknown) => {
      wizardRoot.textContent = err instanceof Error ? err.message : String(err);
    });
  });
}

void boot();
