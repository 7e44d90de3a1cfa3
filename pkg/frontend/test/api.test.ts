import { describe, expect, it } from "vitest";

import { ApiError, buildQuery, EngineApi, type FetchLike } from "../src/api.js";

function fakeFetch(handler: (url: string, init?: { method?: string }) => { status: number; body: unknown }): FetchLike {
	return (url, init) => {
		const { status, body } = handler(url, init);
		return Promise.resolve({
			status,
			ok: status >= 200 && status < 300,
			json: () => Promise.resolve(body),
		});
	};
}

describe("buildQuery", () => {
	it("sorts keys, drops empties, and encodes values", () => {
		expect(buildQuery({ page: 2, cid: "006", origin: "", blank: null })).toBe("?cid=006&page=2");
		expect(buildQuery({})).toBe("");
		expect(buildQuery({ q: "a b" })).toBe("?q=a%20b");
	});
});

describe("EngineApi", () => {
	it("issues GETs against documented paths", async () => {
		const urls: string[] = [];
		const api = new EngineApi("", fakeFetch((url) => {
			urls.push(url);
			return { status: 200, body: { total: 0, page: 1, page_size: 50, items: [] } };
		}));
		await api.chains({ cid: "006", page: 1 });
		await api.statements({ chain_id: "chain-110007" });
		await api.concepts({ statement_id: "stmt-x" });
		await api.samples({ origin: "patch", round: 2 });
		expect(urls).toEqual([
			"/knowledge/chains?cid=006&page=1",
			"/knowledge/statements?chain_id=chain-110007",
			"/knowledge/concepts?statement_id=stmt-x",
			"/samples?origin=patch&round=2",
		]);
	});

	it("raises ApiError with the engine detail", async () => {
		const api = new EngineApi("", fakeFetch(() => ({
			status: 404, body: { detail: "artifact not ready: benchmark.jsonl" },
		})));
		await expect(api.benchmarkItems()).rejects.toThrowError(ApiError);
		await expect(api.benchmarkItems()).rejects.toThrow("artifact not ready");
	});

	it("treats 409 on the trigger as a conflict, not an exception", async () => {
		const api = new EngineApi("", fakeFetch((url, init) => {
			expect(url).toBe("/debug/run");
			expect(init?.method).toBe("POST");
			return { status: 409, body: { detail: "a debug cycle is already running" } };
		}));
		const outcome = await api.startDebugCycle();
		expect(outcome).toEqual({
			started: false, conflict: true, detail: "a debug cycle is already running",
		});
	});

	it("accepts 202 as started", async () => {
		const api = new EngineApi("", fakeFetch(() => ({ status: 202, body: { started: true } })));
		expect(await api.startDebugCycle()).toEqual({ started: true, conflict: false, detail: "" });
	});
});
