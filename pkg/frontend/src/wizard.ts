/** The guided documentation form: one tab per catalog page, autocomplete
 * against the federated sources, manual items, relation editors, and the
 * validate / preview / export actions.
 *
 * Rendering is split in two: #wizard-main is rebuilt after every mutation
 * (it shows session state), while #wizard-panels is built once so report
 * panels and the export controls survive refreshes.
 */

import type {
  CatalogPage,
  ClientLike,
  EntityRefJson,
  SelectReport,
  SessionItem,
  SessionPublication,
} from "./api.js";
import { attachAutocomplete } from "./autocomplete.js";
import { renderExport, renderPreview, renderValidation } from "./panels.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) node.setAttribute(name, value);
  if (text) node.textContent = text;
  return node;
}

export class Wizard {
  sessionId = "";
  catalog = "";
  pages: CatalogPage[] = [];
  items: SessionItem[] = [];
  publications: SessionPublication[] = [];
  currentPage = "";

  private main: HTMLElement | null = null;
  private statusLine: HTMLElement | null = null;
  private validationPanel: HTMLElement | null = null;
  private previewPanel: HTMLElement | null = null;
  private exportPanel: HTMLElement | null = null;

  constructor(
    readonly root: HTMLElement,
    readonly client: ClientLike,
  ) {}

  async start(catalog: string, sessionId?: string): Promise<void> {
    const created = await this.client.createSession(catalog, sessionId);
    this.sessionId = created.sessionId;
    this.catalog = created.catalog;
    this.pages = created.pages;
    this.currentPage = this.pages[0]?.id ?? "";
    this.skeleton();
    await this.refresh();
  }

  /** Resume a stored session. */
  async open(sessionId: string): Promise<void> {
    const doc = await this.client.sessionDoc(sessionId);
    this.sessionId = doc.sessionId;
    this.catalog = doc.catalog;
    const listing = await this.client.catalogs();
    this.pages = listing.catalogs.find((c) => c.id === doc.catalog)?.pages ?? [];
    this.currentPage = this.pages[0]?.id ?? "";
    this.skeleton();
    this.items = doc.items;
    this.publications = doc.publications ?? [];
    this.render();
  }

  async refresh(): Promise<void> {
    const doc = await this.client.sessionDoc(this.sessionId);
    this.items = doc.items;
    this.publications = doc.publications ?? [];
    this.render();
  }

  setStatus(text: string): void {
    if (this.statusLine) this.statusLine.textContent = text;
  }

  private page(): CatalogPage | undefined {
    return this.pages.find((p) => p.id === this.currentPage);
  }

  private skeleton(): void {
    this.root.textContent = "";
    const title = el("h2", {}, `session ${this.sessionId} (${this.catalog})`);
    this.root.appendChild(title);
    this.main = el("div", { id: "wizard-main" });
    this.statusLine = el("p", { id: "status", class: "status" });
    this.root.appendChild(this.main);
    this.root.appendChild(this.statusLine);

    const panels = el("div", { id: "wizard-panels" });
    this.validationPanel = el("div", { id: "panel-validation", class: "panel" });
    this.previewPanel = el("div", { id: "panel-preview", class: "panel" });
    panels.appendChild(this.validationPanel);
    panels.appendChild(this.previewPanel);
    panels.appendChild(this.buildExportControls());
    this.exportPanel = el("div", { id: "panel-export", class: "panel" });
    panels.appendChild(this.exportPanel);
    this.root.appendChild(panels);
  }

  private buildExportControls(): HTMLElement {
    const form = el("form", { id: "export-form", class: "panel" });
    form.appendChild(el("h3", {}, "Export"));
    const sinkType = el("select", { id: "export-sink-type" });
    for (const kind of ["sparql-insert", "wikibase"]) {
      sinkType.appendChild(el("option", { value: kind }, kind));
    }
    form.appendChild(sinkType);
    form.appendChild(el("input", { id: "export-sink-source", value: "mathalgodb" }));
    const dryLabel = el("label", { class: "dry-run" });
    const dryRun = el("input", { id: "export-dry-run", type: "checkbox" });
    dryRun.checked = true;
    dryLabel.appendChild(dryRun);
    dryLabel.appendChild(document.createTextNode("dry run"));
    form.appendChild(dryLabel);
    form.appendChild(el("input", { id: "export-token", type: "password", placeholder: "bearer token" }));
    const run = el("button", { id: "export-run", type: "submit" }, "run export");
    form.appendChild(run);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runExport(
        sinkType.value,
        (form.querySelector("#export-sink-source") as HTMLInputElement).value.trim(),
        dryRun.checked,
        (form.querySelector("#export-token") as HTMLInputElement).value,
      );
    });
    return form;
  }

  render(): void {
    const main = this.main;
    if (!main) return;
    main.textContent = "";
    main.appendChild(this.buildNav());
    const page = this.page();
    if (page?.class) main.appendChild(this.buildSelector(page, page.class));
    main.appendChild(this.buildItems());
    main.appendChild(this.buildForms());
    main.appendChild(this.buildActions());
  }

  private buildNav(): HTMLElement {
    const nav = el("nav", { class: "pages" });
    for (const page of this.pages) {
      const tab = el("button", { class: "page-tab", type: "button", "data-page": page.id }, page.title);
      if (page.id === this.currentPage) tab.setAttribute("aria-current", "page");
      tab.addEventListener("click", () => {
        this.currentPage = page.id;
        this.render();
      });
      nav.appendChild(tab);
    }
    return nav;
  }

  private buildSelector(page: CatalogPage, className: string): HTMLElement {
    const zone = el("section", { class: "selector" });
    const input = el("input", {
      id: "ac-input",
      placeholder: `search ${page.title.toLowerCase()} across sources`,
      autocomplete: "off",
    });
    const add = el("button", { id: "ac-add", type: "button" }, "add as new");
    const dropdown = el("div", { id: "ac-dropdown", class: "dropdown" });
    zone.appendChild(input);
    zone.appendChild(add);
    zone.appendChild(dropdown);
    attachAutocomplete(
      input,
      dropdown,
      (query) => this.client.autocomplete(query, className),
      (ref) => void this.pick(ref),
    );
    add.addEventListener("click", () => {
      const label = input.value.trim();
      if (label) void this.pickLabel(label);
      else this.setStatus("type a name before adding");
    });
    return zone;
  }

  private buildItems(): HTMLElement {
    const zone = el("section", { class: "items" });
    if (this.items.length === 0) {
      zone.appendChild(el("p", { class: "empty" }, "nothing documented yet"));
      return zone;
    }
    for (const item of this.items) {
      const card = el("article", { class: "item-card", "data-key": item.key });
      const head = el("header", {});
      head.appendChild(el("span", { class: "item-key" }, item.key));
      head.appendChild(el("strong", {}, item.fields["name"] ?? "(unnamed)"));
      head.appendChild(el("span", { class: "item-class" }, item.class));
      for (const ref of item.refs) {
        const badge = el("span", { class: "badge", "data-source": ref.source }, ref.source);
        if (ref.localId) badge.title = ref.localId;
        head.appendChild(badge);
      }
      card.appendChild(head);
      for (const [name, value] of Object.entries(item.fields)) {
        if (name === "name") continue;
        card.appendChild(el("p", { class: "field" }, `${name}: ${value}`));
      }
      for (const [relation, targets] of Object.entries(item.relations)) {
        card.appendChild(el("p", { class: "relation" }, `${relation} -> ${targets.join(", ")}`));
      }
      zone.appendChild(card);
    }
    if (this.publications.length > 0) {
      const list = el("ul", { class: "pub-list" });
      for (const pub of this.publications) {
        const record = pub.record;
        const name = record.title || record.doi || record.url;
        const linked = pub.linkedItemKeys.join(", ");
        list.appendChild(el("li", { class: "pub-entry" }, linked ? `${name} -> ${linked}` : name));
      }
      zone.appendChild(list);
    }
    return zone;
  }

  private itemSelect(id: string): HTMLSelectElement {
    const select = el("select", { id });
    select.appendChild(el("option", { value: "" }, "item..."));
    for (const item of this.items) {
      select.appendChild(el("option", { value: item.key }, `${item.key} ${item.fields["name"] ?? ""}`));
    }
    return select;
  }

  private buildForms(): HTMLElement {
    const zone = el("section", { class: "forms" });

    const link = el("form", { id: "link-form" });
    link.appendChild(el("h3", {}, "Link items"));
    link.appendChild(this.itemSelect("link-from"));
    link.appendChild(el("input", { id: "link-relation", placeholder: "relation" }));
    link.appendChild(this.itemSelect("link-to"));
    link.appendChild(el("button", { id: "link-submit", type: "submit" }, "link"));
    link.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.act(() =>
        this.client.link(
          this.sessionId,
          (link.querySelector("#link-from") as HTMLSelectElement).value,
          (link.querySelector("#link-relation") as HTMLInputElement).value.trim(),
          (link.querySelector("#link-to") as HTMLSelectElement).value,
        ),
      );
    });
    zone.appendChild(link);

    const intra = el("form", { id: "intra-form" });
    intra.appendChild(el("h3", {}, "Relate within a class"));
    intra.appendChild(this.itemSelect("intra-from"));
    intra.appendChild(el("input", { id: "intra-relation", placeholder: "relation" }));
    intra.appendChild(this.itemSelect("intra-to"));
    intra.appendChild(el("button", { id: "intra-submit", type: "submit" }, "relate"));
    intra.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.act(() =>
        this.client.intra(
          this.sessionId,
          (intra.querySelector("#intra-from") as HTMLSelectElement).value,
          (intra.querySelector("#intra-relation") as HTMLInputElement).value.trim(),
          (intra.querySelector("#intra-to") as HTMLSelectElement).value,
        ),
      );
    });
    zone.appendChild(intra);

    const field = el("form", { id: "field-form" });
    field.appendChild(el("h3", {}, "Set a field"));
    field.appendChild(this.itemSelect("field-item"));
    field.appendChild(el("input", { id: "field-name", placeholder: "field" }));
    field.appendChild(el("input", { id: "field-value", placeholder: "value" }));
    field.appendChild(el("button", { id: "field-submit", type: "submit" }, "set"));
    field.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.act(() =>
        this.client.setField(
          this.sessionId,
          (field.querySelector("#field-item") as HTMLSelectElement).value,
          (field.querySelector("#field-name") as HTMLInputElement).value.trim(),
          (field.querySelector("#field-value") as HTMLInputElement).value,
        ),
      );
    });
    zone.appendChild(field);

    const pub = el("form", { id: "pub-form" });
    pub.appendChild(el("h3", {}, "Attach a publication"));
    pub.appendChild(el("input", { id: "pub-doi", placeholder: "DOI or URL" }));
    pub.appendChild(el("input", { id: "pub-links", placeholder: "linked keys: i0001, i0002" }));
    pub.appendChild(el("button", { id: "pub-submit", type: "submit" }, "attach"));
    pub.addEventListener("submit", (event) => {
      event.preventDefault();
      const keys = (pub.querySelector("#pub-links") as HTMLInputElement).value
        .split(",")
        .map((k) => k.trim())
        .filter((k) => k.length > 0);
      void this.act(() =>
        this.client.addPublication(
          this.sessionId,
          (pub.querySelector("#pub-doi") as HTMLInputElement).value.trim(),
          keys,
        ),
      );
    });
    zone.appendChild(pub);

    return zone;
  }

  private buildActions(): HTMLElement {
    const bar = el("section", { class: "actions" });
    const validate = el("button", { id: "btn-validate", type: "button" }, "validate");
    validate.addEventListener("click", () => void this.runValidation());
    const preview = el("button", { id: "btn-preview", type: "button" }, "preview");
    preview.addEventListener("click", () => void this.runPreview());
    bar.appendChild(validate);
    bar.appendChild(preview);
    return bar;
  }

  private async act(fn: () => Promise<unknown>): Promise<void> {
    try {
      this.setStatus("");
      await fn();
      await this.refresh();
    } catch (err) {
      this.setStatus(err instanceof Error ? err.message : String(err));
    }
  }

  async pick(ref: EntityRefJson): Promise<void> {
    // post just the identity; display fields like the description stay client-side
    const identity: EntityRefJson = { source: ref.source, localId: ref.localId, label: ref.label };
    await this.act(async () => {
      const report = (await this.client.select(this.sessionId, this.currentPage, identity)) as SelectReport;
      this.describeSelection(report);
    });
  }

  async pickLabel(label: string): Promise<void> {
    await this.act(async () => {
      const report = (await this.client.select(this.sessionId, this.currentPage, label)) as SelectReport;
      this.describeSelection(report);
    });
  }

  private describeSelection(report: SelectReport): void {
    const parts = [`${report.reused ? "reused" : "added"} ${report.key}`];
    if (report.insertedItems.length > 0) parts.push(`+${report.insertedItems.length} downstream`);
    for (const warning of report.warnings) parts.push(`warning: ${warning}`);
    this.setStatus(parts.join("; "));
  }

  async runValidation(): Promise<void> {
    try {
      const report = await this.client.validation(this.sessionId);
      if (this.validationPanel) renderValidation(this.validationPanel, report);
    } catch (err) {
      this.setStatus(err instanceof Error ? err.message : String(err));
    }
  }

  async runPreview(): Promise<void> {
    try {
      const doc = await this.client.preview(this.sessionId);
      if (this.previewPanel) renderPreview(this.previewPanel, doc);
    } catch (err) {
      this.setStatus(err instanceof Error ? err.message : String(err));
    }
  }

  async runExport(sinkType: string, sinkSource: string, dryRun: boolean, token: string): Promise<void> {
    try {
      this.setStatus("");
      const result = await this.client.exportSession(
        this.sessionId,
        { type: sinkType, source: sinkSource },
        dryRun,
        token || undefined,
      );
      if (this.exportPanel) renderExport(this.exportPanel, result);
      if (!dryRun) await this.refresh(); // written-back pids change the item cards
    } catch (err) {
      this.setStatus(err instanceof Error ? err.message : String(err));
    }
  }
}
