/** Typeahead dropdown: grouped per source, in the order the service
 * returns them (that order is the class's source priority). */

import type { AutocompleteGroup, EntityRefJson } from "./api.js";

export function debounce<A extends unknown[]>(fn: (...args: A) => void, delayMs: number): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => fn(...args), delayMs);
  };
}

export function renderGroups(
  container: HTMLElement,
  groups: AutocompleteGroup[],
  onPick: (ref: EntityRefJson) => void,
): void {
  container.textContent = "";
  for (const group of groups) {
    const section = document.createElement("section");
    section.className = "ac-group";
    section.dataset.source = group.source;

    const head = document.createElement("header");
    const badge = document.createElement("span");
    badge.className = "badge";
    badge.dataset.source = group.source;
    badge.textContent = group.source;
    head.appendChild(badge);
    if (group.status !== "ok") {
      const note = document.createElement("span");
      note.className = "ac-status";
      note.textContent = group.status;
      head.appendChild(note);
    } else if (group.refs.length === 0) {
      const note = document.createElement("span");
      note.className = "ac-status";
      note.textContent = "no matches";
      head.appendChild(note);
    }
    section.appendChild(head);

    for (const ref of group.refs) {
      const row = document.createElement("button");
      row.type = "button";
      row.className = "ac-item";
      row.dataset.source = ref.source;
      row.dataset.localId = ref.localId;
      const label = document.createElement("span");
      label.className = "ac-label";
      label.textContent = ref.label;
      row.appendChild(label);
      if (ref.description) {
        const desc = document.createElement("span");
        desc.className = "ac-desc";
        desc.textContent = ref.description;
        row.appendChild(desc);
      }
      row.addEventListener("click", () => onPick(ref));
      section.appendChild(row);
    }
    container.appendChild(section);
  }
}

/** Wire an input to a dropdown. Returns the (debounced) refresh so callers
 * can trigger a lookup programmatically. */
export function attachAutocomplete(
  input: HTMLInputElement,
  dropdown: HTMLElement,
  fetchGroups: (query: string) => Promise<AutocompleteGroup[]>,
  onPick: (ref: EntityRefJson) => void,
  delayMs = 150,
): () => void {
  const refresh = debounce(() => {
    const query = input.value.trim();
    if (!query) {
      dropdown.textContent = "";
      return;
    }
    void fetchGroups(query)
      .then((groups) => {
        // the input may have moved on while the request was in flight
        if (input.value.trim() === query) renderGroups(dropdown, groups, onPick);
      })
      .catch((err: unknown) => {
        dropdown.textContent = "";
        const note = document.createElement("p");
        note.className = "ac-error";
        note.textContent = err instanceof Error ? err.message : String(err);
        dropdown.appendChild(note);
      });
  }, delayMs);
  input.addEventListener("input", refresh);
  return refresh;
}
