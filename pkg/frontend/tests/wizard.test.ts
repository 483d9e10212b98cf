import { beforeEach, describe, expect, it } from "vitest";
import type {
  AutocompleteGroup,
  CatalogInfo,
  CatalogPage,
  ClientLike,
  CreatedSession,
  EntityRefJson,
  ExportResult,
  PreviewDoc,
  SearchResult,
  SearchSpecJson,
  SelectReport,
  SessionDoc,
  SessionItem,
  SessionPublication,
  SinkSpec,
  ValidationReport,
} from "../src/api.js";
import { ApiError } from "../src/api.js";
import { Wizard } from "../src/wizard.js";
import { until } from "./util.js";

const PAGES: CatalogPage[] = [
  { id: "algorithm", title: "Algorithms", class: "Algorithm" },
  { id: "problem", title: "Problems", class: "AlgorithmicProblem" },
];

const UZAWA: EntityRefJson = { source: "mathalgodb", localId: "a-uzawa", label: "Uzawa Iteration" };

const GROUPS: AutocompleteGroup[] = [
  { source: "mathalgodb", status: "ok", refs: [UZAWA] },
  { source: "mardi-portal", status: "ok", refs: [] },
  { source: "wikidata", status: "unavailable", refs: [] },
];

/** In-memory stand-in that mimics just enough session behaviour. */
class FakeClient implements ClientLike {
  items: SessionItem[] = [];
  pubs: SessionPublication[] = [];
  calls: [string, ...unknown[]][] = [];
  validationDoc: ValidationReport = { sessionId: "s-x", passed: true, violations: [] };
  failNext: Error | null = null;

  private nextKey(): string {
    return `i${String(this.items.length + 1).padStart(4, "0")}`;
  }

  private classFor(page: string): string {
    return PAGES.find((p) => p.id === page)?.class ?? "Thing";
  }

  private bump(): void {
    if (this.failNext) {
      const err = this.failNext;
      this.failNext = null;
      throw err;
    }
  }

  async catalogs(): Promise<{ catalogs: CatalogInfo[]; schemaVersion: string }> {
    return { catalogs: [{ id: "algorithm", pages: PAGES }], schemaVersion: "1" };
  }

  async createSession(catalog: string, sessionId?: string): Promise<CreatedSession> {
    this.calls.push(["createSession", catalog, sessionId]);
    return { sessionId: sessionId ?? "s-x", catalog, schemaVersion: "1", pages: PAGES };
  }

  async sessionDoc(sessionId: string): Promise<SessionDoc> {
    return { sessionId, catalog: "algorithm", items: this.items, publications: this.pubs };
  }

  async select(sessionId: string, page: string, choice: EntityRefJson | string): Promise<SelectReport> {
    this.calls.push(["select", sessionId, page, choice]);
    this.bump();
    const key = this.nextKey();
    const label = typeof choice === "string" ? choice : choice.label;
    this.items = [
      ...this.items,
      {
        key,
        class: this.classFor(page),
        refs: typeof choice === "string" ? [] : [choice],
        fields: { name: label },
        relations: {},
      },
    ];
    return { key, reused: false, resolution: null, populatedFields: ["name"], insertedItems: [], warnings: [] };
  }

  async setField(sessionId: string, key: string, field: string, value: string): Promise<unknown> {
    this.calls.push(["setField", sessionId, key, field, value]);
    this.bump();
    this.items = this.items.map((item) =>
      item.key === key ? { ...item, fields: { ...item.fields, [field]: value } } : item,
    );
    return {};
  }

  async link(sessionId: string, fromKey: string, relation: string, toKey: string): Promise<unknown> {
    this.calls.push(["link", sessionId, fromKey, relation, toKey]);
    this.bump();
    this.items = this.items.map((item) =>
      item.key === fromKey
        ? { ...item, relations: { ...item.relations, [relation]: [...(item.relations[relation] ?? []), toKey] } }
        : item,
    );
    return {};
  }

  async intra(sessionId: string, fromKey: string, relation: string, toKey: string): Promise<unknown> {
    this.calls.push(["intra", sessionId, fromKey, relation, toKey]);
    return this.link(sessionId, fromKey, relation, toKey);
  }

  async addPublication(sessionId: string, doi: string, linkedItemKeys: string[]): Promise<unknown> {
    this.calls.push(["addPublication", sessionId, doi, linkedItemKeys]);
    this.bump();
    this.pubs = [
      ...this.pubs,
      {
        record: { doi, url: "", title: "Numerical solution of saddle point problems", authors: [], venue: "", year: 2005 },
        linkedItemKeys,
      },
    ];
    return {};
  }

  async validation(): Promise<ValidationReport> {
    this.calls.push(["validation"]);
    return this.validationDoc;
  }

  async preview(): Promise<PreviewDoc> {
    this.calls.push(["preview"]);
    return {
      kind: "session",
      sessionId: "s-x",
      catalog: "algorithm",
      sections: [
        {
          page: "algorithm",
          title: "Algorithms",
          items: [
            {
              key: "i0001",
              class: "Algorithm",
              label: "Uzawa Iteration",
              refs: [UZAWA],
              fields: [{ name: "name", value: "Uzawa Iteration" }],
              relations: [],
            },
          ],
        },
      ],
      publications: [{ citation: "Keller, Duarte. Numerical solution of saddle point problems.", linkedItems: ["i0001"] }],
    };
  }

  async exportSession(sessionId: string, sink: SinkSpec, dryRun: boolean, token?: string): Promise<ExportResult> {
    this.calls.push(["exportSession", sessionId, sink, dryRun, token]);
    return {
      dryRun,
      summary: { createOps: 1, statementOps: 5 },
      queries: dryRun ? ["INSERT DATA {\n  fixture\n}\n"] : undefined,
      receipt: dryRun ? undefined : { sink: sink.source },
      pidsWrittenBack: dryRun ? undefined : { i0001: UZAWA },
    };
  }

  async autocomplete(query: string, className: string): Promise<AutocompleteGroup[]> {
    this.calls.push(["autocomplete", query, className]);
    return GROUPS;
  }

  async search(spec: SearchSpecJson): Promise<SearchResult> {
    this.calls.push(["search", spec]);
    return { queryText: "", rows: [], perSourceStatus: {}, summary: "0 hits" };
  }
}

let client: FakeClient;
let wizard: Wizard;
let root: HTMLElement;

beforeEach(async () => {
  document.body.innerHTML = '<div id="wizard"></div>';
  root = document.getElementById("wizard") as HTMLElement;
  client = new FakeClient();
  wizard = new Wizard(root, client);
  await wizard.start("algorithm", "s-x");
});

function q<T extends HTMLElement>(selector: string): T {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node as T;
}

function submit(selector: string): void {
  q<HTMLFormElement>(selector).dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

describe("layout", () => {
  it("renders a tab per page with the first one current", () => {
    const tabs = [...root.querySelectorAll(".page-tab")] as HTMLElement[];
    expect(tabs.map((t) => t.dataset.page)).toEqual(["algorithm", "problem"]);
    expect(tabs[0]?.getAttribute("aria-current")).toBe("page");
    expect(tabs[1]?.getAttribute("aria-current")).toBeNull();
    expect(root.querySelector(".empty")?.textContent).toBe("nothing documented yet");
  });

  it("switching tabs moves aria-current and the lookup class", async () => {
    q<HTMLElement>('.page-tab[data-page="problem"]').click();
    expect(q<HTMLElement>('.page-tab[data-page="problem"]').getAttribute("aria-current")).toBe("page");
    q<HTMLInputElement>("#ac-input").value = "x";
    q<HTMLInputElement>("#ac-input").dispatchEvent(new Event("input", { bubbles: true }));
    await until(() => client.calls.some(([name]) => name === "autocomplete"));
    expect(client.calls.find(([name]) => name === "autocomplete")).toEqual(["autocomplete", "x", "AlgorithmicProblem"]);
  });
});

describe("selection", () => {
  it("picking a suggestion selects by ref and re-renders the card", async () => {
    q<HTMLInputElement>("#ac-input").value = "Uzawa";
    q<HTMLInputElement>("#ac-input").dispatchEvent(new Event("input", { bubbles: true }));
    await until(() => root.querySelectorAll(".ac-group").length === 3);
    q<HTMLElement>('.ac-item[data-local-id="a-uzawa"]').click();
    await until(() => root.querySelectorAll(".item-card").length === 1);
    expect(client.calls).toContainEqual(["select", "s-x", "algorithm", UZAWA]);
    const card = q<HTMLElement>(".item-card");
    expect(card.dataset.key).toBe("i0001");
    expect(card.querySelector("strong")?.textContent).toBe("Uzawa Iteration");
    expect(card.querySelector('.badge[data-source="mathalgodb"]')?.getAttribute("title")).toBe("a-uzawa");
    expect(q<HTMLElement>("#status").textContent).toBe("added i0001");
  });

  it("add as new selects by label", async () => {
    q<HTMLInputElement>("#ac-input").value = "Homemade Variant";
    q<HTMLElement>("#ac-add").click();
    await until(() => root.querySelectorAll(".item-card").length === 1);
    expect(client.calls).toContainEqual(["select", "s-x", "algorithm", "Homemade Variant"]);
    expect(root.querySelectorAll(".item-card .badge")).toHaveLength(0);
  });

  it("add as new with an empty box just complains", async () => {
    q<HTMLInputElement>("#ac-input").value = "   ";
    q<HTMLElement>("#ac-add").click();
    expect(q<HTMLElement>("#status").textContent).toBe("type a name before adding");
    expect(client.calls.filter(([name]) => name === "select")).toHaveLength(0);
  });
});

describe("editing forms", () => {
  beforeEach(async () => {
    await wizard.pick(UZAWA);
    await wizard.pickLabel("Homemade Variant");
  });

  it("link form submits fromKey/relation/toKey and shows the relation", async () => {
    q<HTMLSelectElement>("#link-from").value = "i0002";
    q<HTMLInputElement>("#link-relation").value = "specializes";
    q<HTMLSelectElement>("#link-to").value = "i0001";
    submit("#link-form");
    await until(() => client.calls.some(([name]) => name === "link"));
    expect(client.calls).toContainEqual(["link", "s-x", "i0002", "specializes", "i0001"]);
    await until(() => root.querySelector('.item-card[data-key="i0002"] .relation') !== null);
    expect(q<HTMLElement>('.item-card[data-key="i0002"] .relation').textContent).toBe("specializes -> i0001");
  });

  it("intra form drives the intra endpoint", async () => {
    q<HTMLSelectElement>("#intra-from").value = "i0002";
    q<HTMLInputElement>("#intra-relation").value = "specializes";
    q<HTMLSelectElement>("#intra-to").value = "i0001";
    submit("#intra-form");
    await until(() => client.calls.some(([name]) => name === "intra"));
    expect(client.calls).toContainEqual(["intra", "s-x", "i0002", "specializes", "i0001"]);
  });

  it("field form sets a field and the card shows it", async () => {
    q<HTMLSelectElement>("#field-item").value = "i0002";
    q<HTMLInputElement>("#field-name").value = "description";
    q<HTMLInputElement>("#field-value").value = "a tweak of the classic scheme";
    submit("#field-form");
    await until(() => root.querySelector('.item-card[data-key="i0002"] .field') !== null);
    expect(client.calls).toContainEqual(["setField", "s-x", "i0002", "description", "a tweak of the classic scheme"]);
    expect(q<HTMLElement>('.item-card[data-key="i0002"] .field').textContent).toBe(
      "description: a tweak of the classic scheme",
    );
  });

  it("publication form splits linked keys and lists the reference", async () => {
    q<HTMLInputElement>("#pub-doi").value = "10.5555/saddle.2005";
    q<HTMLInputElement>("#pub-links").value = "i0001, i0002,";
    submit("#pub-form");
    await until(() => root.querySelector(".pub-entry") !== null);
    expect(client.calls).toContainEqual(["addPublication", "s-x", "10.5555/saddle.2005", ["i0001", "i0002"]]);
    expect(q<HTMLElement>(".pub-entry").textContent).toBe(
      "Numerical solution of saddle point problems -> i0001, i0002",
    );
  });

  it("a failing call lands in the status line and keeps the session view", async () => {
    client.failNext = new ApiError("unknown-relation", "no relation frobnicates", 404);
    q<HTMLSelectElement>("#link-from").value = "i0002";
    q<HTMLInputElement>("#link-relation").value = "frobnicates";
    q<HTMLSelectElement>("#link-to").value = "i0001";
    submit("#link-form");
    await until(() => q<HTMLElement>("#status").textContent !== "");
    expect(q<HTMLElement>("#status").textContent).toBe("no relation frobnicates");
    expect(root.querySelectorAll(".item-card")).toHaveLength(2);
  });
});

describe("reports", () => {
  it("validate renders the verdict and violations", async () => {
    client.validationDoc = {
      sessionId: "s-x",
      passed: false,
      violations: [
        { itemKey: "i0001", kind: "missing-required-relation", detail: "needs solvesProblem", severity: "error" },
      ],
    };
    q<HTMLElement>("#btn-validate").click();
    await until(() => root.querySelector("#panel-validation .verdict") !== null);
    expect(q<HTMLElement>("#panel-validation .verdict").className).toBe("verdict fail");
    expect(q<HTMLElement>("#panel-validation .violation").textContent).toBe(
      "error: missing-required-relation i0001 needs solvesProblem",
    );
  });

  it("preview renders sections and citations", async () => {
    q<HTMLElement>("#btn-preview").click();
    await until(() => root.querySelector("#panel-preview .preview-item") !== null);
    expect(q<HTMLElement>("#panel-preview .preview-title").textContent).toBe("i0001 Uzawa Iteration (Algorithm)");
    expect(q<HTMLElement>("#panel-preview .citations li").textContent).toBe(
      "Keller, Duarte. Numerical solution of saddle point problems.",
    );
  });

  it("report panels survive a session refresh", async () => {
    q<HTMLElement>("#btn-validate").click();
    await until(() => root.querySelector("#panel-validation .verdict") !== null);
    const panel = q<HTMLElement>("#panel-validation");
    await wizard.pick(UZAWA); // triggers a main re-render
    expect(q<HTMLElement>("#panel-validation")).toBe(panel);
    expect(panel.querySelector(".verdict")).not.toBeNull();
  });
});

describe("export", () => {
  it("dry run posts the sink spec and prints the rendered queries", async () => {
    q<HTMLInputElement>("#export-sink-source").value = "mathalgodb";
    submit("#export-form");
    await until(() => root.querySelector("#panel-export .queries") !== null);
    expect(client.calls).toContainEqual([
      "exportSession",
      "s-x",
      { type: "sparql-insert", source: "mathalgodb" },
      true,
      undefined,
    ]);
    expect(q<HTMLElement>("#panel-export .export-summary").textContent).toBe("1 create op(s), 5 statement op(s)");
    expect(q<HTMLElement>("#panel-export .queries").textContent).toContain("INSERT DATA");
  });

  it("a real run passes the token and shows written-back pids", async () => {
    q<HTMLSelectElement>("#export-sink-type").value = "wikibase";
    q<HTMLInputElement>("#export-sink-source").value = "mardi-portal";
    q<HTMLInputElement>("#export-dry-run").checked = false;
    q<HTMLInputElement>("#export-token").value = "fixture-token";
    submit("#export-form");
    await until(() => root.querySelector("#panel-export .pids") !== null);
    expect(client.calls).toContainEqual([
      "exportSession",
      "s-x",
      { type: "wikibase", source: "mardi-portal" },
      false,
      "fixture-token",
    ]);
    expect(q<HTMLElement>("#panel-export .pids li").textContent).toBe("i0001 -> mathalgodb:a-uzawa");
  });
});
