/**
 * Thin fetch client over the engine API. The fetch implementation is
 * injectable so tests can serve canned fixtures.
 */

import type {
	BenchmarkRecord,
	ChainRecord,
	ConceptRecord,
	DebugProgress,
	EvaluationReportResponse,
	Page,
	SampleRecord,
	StatementRecord,
	StatusResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: { method?: string }) => Promise<{
	status: number;
	ok: boolean;
	json(): Promise<unknown>;
}>;

export type QueryParams = Record<string, string | number | null | undefined>;

export function buildQuery(params: QueryParams): string {
	const parts: string[] = [];
	for (const key of Object.keys(params).sort()) {
		const value = params[key];
		if (value === null || value === undefined || value === "") continue;
		parts.push(`${encodeURIComponent(key)}=${encodeURIComponent(String(value))}`);
	}
	return parts.length ? `?${parts.join("&")}` : "";
}

export class ApiError extends Error {
	constructor(public status: number, message: string) {
		super(message);
	}
}

export class EngineApi {
	constructor(
		private baseUrl: string = "",
		private fetchImpl: FetchLike = (url, init) => fetch(url, init),
	) {}

	private async get<T>(path: string, params: QueryParams = {}): Promise<T> {
		const res = await this.fetchImpl(this.baseUrl + path + buildQuery(params));
		if (!res.ok) {
			const body = (await res.json().catch(() => ({}))) as { detail?: string };
			throw new ApiError(res.status, body.detail ?? `GET ${path} failed (${res.status})`);
		}
		return (await res.json()) as T;
	}

	status(): Promise<StatusResponse> {
		return this.get("/status");
	}

	chains(params: QueryParams = {}): Promise<Page<ChainRecord>> {
		return this.get("/knowledge/chains", params);
	}

	statements(params: QueryParams = {}): Promise<Page<StatementRecord>> {
		return this.get("/knowledge/statements", params);
	}

	concepts(params: QueryParams = {}): Promise<Page<ConceptRecord>> {
		return this.get("/knowledge/concepts", params);
	}

	samples(params: QueryParams = {}): Promise<Page<SampleRecord>> {
		return this.get("/samples", params);
	}

	benchmarkItems(params: QueryParams = {}): Promise<Page<BenchmarkRecord>> {
		return this.get("/benchmark/items", params);
	}

	evaluationReport(): Promise<EvaluationReportResponse> {
		return this.get("/evaluation/report");
	}

	debugProgress(): Promise<DebugProgress> {
		return this.get("/debug/progress");
	}

	/** The one mutating call in the whole UI. */
	async startDebugCycle(): Promise<{ started: boolean; conflict: boolean; detail: string }> {
		const res = await this.fetchImpl(this.baseUrl + "/debug/run", { method: "POST" });
		if (res.status === 409) {
			const body = (await res.json().catch(() => ({}))) as { detail?: string };
			return { started: false, conflict: true, detail: body.detail ?? "cycle already running" };
		}
		if (!res.ok) {
			const body = (await res.json().catch(() => ({}))) as { detail?: string };
			throw new ApiError(res.status, body.detail ?? "debug run failed");
		}
		return { started: true, conflict: false, detail: "" };
	}
}
