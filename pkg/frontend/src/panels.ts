/** Read-only result panels: validation report, preview, export outcome. */

import type { ExportResult, PreviewDoc, ValidationReport } from "./api.js";

function heading(text: string): HTMLElement {
  const h = document.createElement("h3");
  h.textContent = text;
  return h;
}

export function renderValidation(container: HTMLElement, report: ValidationReport): void {
  container.textContent = "";
  container.appendChild(heading("Validation"));
  const banner = document.createElement("p");
  banner.className = report.passed ? "verdict pass" : "verdict fail";
  banner.textContent = report.passed ? "passed" : "failed";
  container.appendChild(banner);
  if (report.violations.length === 0) return;
  const list = document.createElement("ul");
  list.className = "violations";
  for (const violation of report.violations) {
    const entry = document.createElement("li");
    entry.className = `violation ${violation.severity}`;
    entry.textContent = `${violation.severity}: ${violation.kind} ${violation.itemKey} ${violation.detail}`;
    list.appendChild(entry);
  }
  container.appendChild(list);
}

export function renderPreview(container: HTMLElement, doc: PreviewDoc): void {
  container.textContent = "";
  container.appendChild(heading("Preview"));
  if (doc.kind === "search") {
    const pre = document.createElement("pre");
    pre.textContent = doc.queryText ?? "";
    container.appendChild(pre);
    return;
  }
  for (const section of doc.sections ?? []) {
    if (section.items.length === 0) continue;
    const h = document.createElement("h4");
    h.textContent = section.title;
    container.appendChild(h);
    for (const item of section.items) {
      const card = document.createElement("div");
      card.className = "preview-item";
      const title = document.createElement("p");
      title.className = "preview-title";
      title.textContent = `${item.key} ${item.label} (${item.class})`;
      card.appendChild(title);
      const facts = document.createElement("dl");
      for (const field of item.fields) {
        const dt = document.createElement("dt");
        dt.textContent = field.name;
        const dd = document.createElement("dd");
        dd.textContent = field.value;
        facts.appendChild(dt);
        facts.appendChild(dd);
      }
      for (const rel of item.relations) {
        const dt = document.createElement("dt");
        dt.textContent = rel.relation;
        const dd = document.createElement("dd");
        dd.textContent = rel.targets.map((t) => `${t.label} [${t.key}]`).join(", ");
        facts.appendChild(dt);
        facts.appendChild(dd);
      }
      card.appendChild(facts);
      container.appendChild(card);
    }
  }
  const publications = doc.publications ?? [];
  if (publications.length > 0) {
    const h = document.createElement("h4");
    h.textContent = "References";
    container.appendChild(h);
    const list = document.createElement("ol");
    list.className = "citations";
    for (const pub of publications) {
      const entry = document.createElement("li");
      entry.textContent = pub.citation;
      list.appendChild(entry);
    }
    container.appendChild(list);
  }
}

export function renderExport(container: HTMLElement, result: ExportResult): void {
  container.textContent = "";
  container.appendChild(heading(result.dryRun ? "Export (dry run)" : "Export"));
  const summary = document.createElement("p");
  summary.className = "export-summary";
  summary.textContent = `${result.summary.createOps} create op(s), ${result.summary.statementOps} statement op(s)`;
  container.appendChild(summary);
  if (result.dryRun) {
    const pre = document.createElement("pre");
    pre.className = "queries";
    pre.textContent = (result.queries ?? []).join("") || JSON.stringify(result.plan, null, 2);
    container.appendChild(pre);
    return;
  }
  const receipt = document.createElement("pre");
  receipt.className = "receipt";
  receipt.textContent = JSON.stringify(result.receipt ?? {}, null, 2);
  container.appendChild(receipt);
  const pids = Object.entries(result.pidsWrittenBack ?? {});
  if (pids.length > 0) {
    const list = document.createElement("ul");
    list.className = "pids";
    for (const [key, ref] of pids) {
      const entry = document.createElement("li");
      entry.textContent = `${key} -> ${ref.source}:${ref.localId}`;
      list.appendChild(entry);
    }
    container.appendChild(list);
  }
}
