import { afterEach, describe, expect, it, vi } from "vitest";
import { ApiError, Client } from "../src/api.js";

interface Captured {
  url: string;
  method: string;
  body: unknown;
}

function capture(status: number, payload: unknown): { calls: Captured[] } {
  const calls: Captured[] = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: string, init?: RequestInit) => {
      calls.push({
        url,
        method: init?.method ?? "GET",
        body: init?.body ? JSON.parse(init.body as string) : undefined,
      });
      return new Response(JSON.stringify(payload), {
        status,
        headers: { "content-type": "application/json" },
      });
    }),
  );
  return { calls };
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("request shapes", () => {
  it("select with a ref posts page plus ref", async () => {
    const { calls } = capture(200, { key: "i0001" });
    const client = new Client("http://x");
    const ref = { source: "mathalgodb", localId: "a-uzawa", label: "Uzawa Iteration" };
    await client.select("s-1", "algorithm", ref);
    expect(calls).toHaveLength(1);
    expect(calls[0]?.url).toBe("http://x/sessions/s-1/select");
    expect(calls[0]?.method).toBe("POST");
    expect(calls[0]?.body).toEqual({ page: "algorithm", ref });
  });

  it("select with a string posts a label instead", async () => {
    const { calls } = capture(200, { key: "i0002" });
    await new Client().select("s-1", "algorithm", "Homemade Variant");
    expect(calls[0]?.body).toEqual({ page: "algorithm", label: "Homemade Variant" });
  });

  it("link and intra use fromKey/relation/toKey", async () => {
    const { calls } = capture(200, {});
    const client = new Client();
    await client.link("s-1", "i0005", "solvesProblem", "i0002");
    await client.intra("s-1", "i0005", "specializes", "i0001");
    expect(calls[0]?.url).toBe("/sessions/s-1/relations");
    expect(calls[0]?.body).toEqual({ fromKey: "i0005", relation: "solvesProblem", toKey: "i0002" });
    expect(calls[1]?.url).toBe("/sessions/s-1/intra-relations");
    expect(calls[1]?.body).toEqual({ fromKey: "i0005", relation: "specializes", toKey: "i0001" });
  });

  it("setField posts key/field/value", async () => {
    const { calls } = capture(200, {});
    await new Client().setField("s-1", "i0005", "description", "a tweak");
    expect(calls[0]?.url).toBe("/sessions/s-1/fields");
    expect(calls[0]?.body).toEqual({ key: "i0005", field: "description", value: "a tweak" });
  });

  it("addPublication posts doi and linked keys", async () => {
    const { calls } = capture(200, {});
    await new Client().addPublication("s-1", "10.5555/saddle.2005", ["i0001"]);
    expect(calls[0]?.url).toBe("/sessions/s-1/publications");
    expect(calls[0]?.body).toEqual({ doi: "10.5555/saddle.2005", linkedItemKeys: ["i0001"] });
  });

  it("export includes the token only when given", async () => {
    const { calls } = capture(200, { dryRun: true, summary: { createOps: 0, statementOps: 0 } });
    const client = new Client();
    await client.exportSession("s-1", { type: "sparql-insert", source: "mathalgodb" }, true);
    await client.exportSession("s-1", { type: "wikibase", source: "mardi-portal" }, false, "tok");
    expect(calls[0]?.body).toEqual({
      sink: { type: "sparql-insert", source: "mathalgodb" },
      dryRun: true,
    });
    expect(calls[1]?.body).toEqual({
      sink: { type: "wikibase", source: "mardi-portal" },
      dryRun: false,
      token: "tok",
    });
  });

  it("autocomplete builds the query string and unwraps groups", async () => {
    const groups = [{ source: "mathalgodb", status: "ok", refs: [] }];
    const { calls } = capture(200, { groups });
    const got = await new Client("http://x").autocomplete("Uzawa solver", "Method", 7);
    expect(calls[0]?.url).toBe("http://x/autocomplete?q=Uzawa+solver&class=Method&limit=7");
    expect(got).toEqual(groups);
  });

  it("createSession omits sessionId when not given", async () => {
    const { calls } = capture(201, { sessionId: "s-9", catalog: "algorithm", pages: [] });
    const client = new Client();
    await client.createSession("algorithm");
    await client.createSession("algorithm", "s-mine");
    expect(calls[0]?.body).toEqual({ catalog: "algorithm" });
    expect(calls[1]?.body).toEqual({ catalog: "algorithm", sessionId: "s-mine" });
  });
});

describe("errors", () => {
  it("maps the error envelope onto ApiError", async () => {
    capture(404, { error: { code: "unknown-session", message: "no session s-x", detail: { id: "s-x" } } });
    const err = await new Client()
      .validation("s-x")
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.code).toBe("unknown-session");
    expect(apiErr.message).toBe("no session s-x");
    expect(apiErr.status).toBe(404);
    expect(apiErr.detail).toEqual({ id: "s-x" });
  });

  it("falls back to an http code when the body is not an envelope", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response("boom", { status: 502 })),
    );
    const err = await new Client()
      .health()
      .then(() => null)
      .catch((e: unknown) => e);
    expect((err as ApiError).code).toBe("http-502");
    expect((err as ApiError).status).toBe(502);
  });

  it("sessionText raises the envelope error too", async () => {
    capture(404, { error: { code: "unknown-session", message: "gone" } });
    const err = await new Client()
      .sessionText("s-x")
      .then(() => null)
      .catch((e: unknown) => e);
    expect((err as ApiError).code).toBe("unknown-session");
  });
});

describe("raw session bytes", () => {
  it("sessionText returns the body untouched", async () => {
    const raw = '{\n  "sessionId": "s-1",\n  "items": []\n}\n';
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response(raw, { status: 200 })),
    );
    expect(await new Client().sessionText("s-1")).toBe(raw);
  });

  it("sessionDoc parses those bytes", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response('{"sessionId": "s-1", "catalog": "algorithm", "items": []}')),
    );
    const doc = await new Client().sessionDoc("s-1");
    expect(doc.sessionId).toBe("s-1");
    expect(doc.items).toEqual([]);
  });
});
