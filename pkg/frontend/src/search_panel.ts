/** Cross-source search without writing any SPARQL: target, keyword,
 * optional uses-entity constraint, rendered result rows. */

import type { ClientLike, SearchFilter } from "./api.js";

export class SearchView {
  constructor(
    readonly root: HTMLElement,
    readonly client: ClientLike,
  ) {}

  render(): void {
    this.root.textContent = "";
    const form = document.createElement("form");
    form.id = "search-form";
    form.innerHTML = `
      <h2>Search</h2>
      <select id="search-target">
        <option value="algorithm">algorithm</option>
        <option value="model">model</option>
        <option value="workflow">workflow</option>
      </select>
      <select id="search-field">
        <option value="label">label</option>
        <option value="description">description</option>
      </select>
      <input id="search-keyword" placeholder="keyword">
      <input id="search-uses-class" placeholder="uses class (optional)">
      <input id="search-uses-uri" placeholder="uses entity uri">
      <button id="search-run" type="submit">search</button>
    `;
    const results = document.createElement("div");
    results.id = "search-results";
    const status = document.createElement("p");
    status.id = "search-status";
    status.className = "status";
    this.root.appendChild(form);
    this.root.appendChild(status);
    this.root.appendChild(results);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.run(form, results, status);
    });
  }

  private async run(form: HTMLFormElement, results: HTMLElement, status: HTMLElement): Promise<void> {
    const value = (id: string) => (form.querySelector(`#${id}`) as HTMLInputElement | HTMLSelectElement).value;
    const filters: SearchFilter[] = [];
    const keyword = value("search-keyword").trim();
    if (keyword) filters.push({ kind: "keyword", field: value("search-field"), text: keyword });
    const usesClass = value("search-uses-class").trim();
    const usesUri = value("search-uses-uri").trim();
    if (usesClass && usesUri) {
      filters.push({ kind: "uses-entity", class: usesClass, ref: { uri: usesUri } });
    }
    status.textContent = "";
    results.textContent = "";
    try {
      const outcome = await this.client.search({ target: value("search-target"), filters });
      const down = Object.entries(outcome.perSourceStatus).filter(([, s]) => s !== "ok");
      status.textContent =
        `${outcome.rows.length} result(s)` +
        (down.length > 0 ? `; unavailable: ${down.map(([source]) => source).join(", ")}` : "");
      for (const row of outcome.rows) {
        const card = document.createElement("article");
        card.className = "result";
        const badge = document.createElement("span");
        badge.className = "badge";
        badge.dataset.source = row.ref.source;
        badge.textContent = row.ref.source;
        card.appendChild(badge);
        const label = document.createElement("strong");
        label.textContent = row.ref.label;
        card.appendChild(label);
        if (row.ref.description) {
          const desc = document.createElement("p");
          desc.textContent = row.ref.description;
          card.appendChild(desc);
        }
        const matched = document.createElement("p");
        matched.className = "matched";
        matched.textContent = row.matchedFilters.join("; ");
        card.appendChild(matched);
        results.appendChild(card);
      }
    } catch (err) {
      status.textContent = err instanceof Error ? err.message : String(err);
    }
  }
}
