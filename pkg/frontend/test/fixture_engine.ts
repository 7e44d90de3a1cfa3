/**
 * In-memory fixture engine implementing the documented wire formats, used to
 * drive the UI the way the real server would. The knowledge slice carries
 * the pinned biology reference entries; the evaluation report carries the
 * published header numbers.
 */

import type { FetchLike } from "../src/api.js";
import type {
	ChainRecord,
	ConceptRecord,
	DebugProgress,
	StatementRecord,
	StatusResponse,
} from "../src/types.js";

export const BIOLOGY_CHAIN: ChainRecord = {
	chain_id: "chain-110007",
	domain_context: "Molecular Biology and Genetics",
	process_name: "Mechanism of Eukaryotic Chromatin Activation for Gene Transcription",
	narrative_summary: "Histone modification loosens chromatin so transcription machinery can reach the gene.",
	preconditions: ["DNA must be packaged into nucleosomes"],
	negative_constraints: ["Does not occur in prokaryotes"],
	steps: [
		"1. Histone proteins (H3, H4) undergo acetylation, phosphorylation, or methylation.",
		"2. Acetylation reduces the net positive charge of the histone octamer.",
	],
	cid: "006",
	source_chunk_id: "chunk-110007",
};

export const BIOLOGY_STATEMENT: StatementRecord = {
	statement_id: "stmt-chain-110007-000",
	parent_chain_id: "chain-110007",
	subject: "Histone proteins (H3 and H4)",
	predicate: "undergo chemical modifications including",
	object: "acetylation of lysine/arginine residues",
	source_quote: "Histone proteins (H3, H4) undergo acetylation",
};

export const BIOLOGY_CONCEPT: ConceptRecord = {
	concept_id: "concept-128465",
	term: "Histone Proteins (H3 and H4)",
	type: "Protein",
	definition: "Highly alkaline proteins that package and order DNA into structural units.",
	parent_statement_ids: ["stmt-chain-110007-000"],
	cids: ["006"],
};

const OTHER_CHAIN: ChainRecord = {
	...BIOLOGY_CHAIN,
	chain_id: "chain-610001",
	process_name: "Mechanism and Quantitative Laws of Electrolysis",
	cid: "007",
	source_chunk_id: "chunk-610001",
};

function page<T>(items: T[], pageNum = 1, pageSize = 50) {
	return { total: items.length, page: pageNum, page_size: pageSize, items };
}

export class FixtureEngine {
	round = 1;
	postCount = 0;
	/** When true the engine reports an already-running cycle. */
	busy = false;
	private cycleTick = 0;
	private cycleActive = false;
	log: string[] = [];

	private status(): StatusResponse {
		const stage = (status: string) => ({
			status: status as "done", artifact_paths: [], content_hash: "", started: "", finished: "",
		});
		return {
			round: this.round,
			seed: 42,
			config_hash: "fixture",
			stages: {
				curate: stage("done"), extract: stage("done"), bench: stage("done"),
				synth: stage("done"), eval: stage("done"),
				diagnose: stage(this.round > 1 ? "pending" : "done"),
				patch: stage("pending"), mix: stage("pending"), report: stage("pending"),
			},
			hash_mismatches: [],
		};
	}

	private progress(): DebugProgress {
		if (!this.cycleActive) {
			return { running: false, stage: this.round > 1 ? "done" : "", progress: this.round > 1 ? 1 : 0, round: this.round, error: "" };
		}
		const states: DebugProgress[] = [
			{ running: true, stage: "diagnose", progress: 0, round: this.round, error: "" },
			{ running: true, stage: "patch", progress: 1 / 3, round: this.round, error: "" },
			{ running: true, stage: "mix", progress: 2 / 3, round: this.round, error: "" },
		];
		if (this.cycleTick < states.length) {
			return states[this.cycleTick++]!;
		}
		this.cycleActive = false;
		this.round += 1;
		return { running: false, stage: "done", progress: 1, round: this.round, error: "" };
	}

	fetch: FetchLike = (url, init) => {
		this.log.push(`${init?.method ?? "GET"} ${url}`);
		const [path, query = ""] = url.split("?");
		const params = new URLSearchParams(query);
		const respond = (status: number, body: unknown) =>
			Promise.resolve({ status, ok: status >= 200 && status < 300, json: () => Promise.resolve(body) });

		if (init?.method === "POST" && path === "/debug/run") {
			this.postCount += 1;
			if (this.busy || this.cycleActive) {
				return respond(409, { detail: "a debug cycle is already running" });
			}
			this.cycleActive = true;
			this.cycleTick = 0;
			return respond(202, { started: true });
		}

		switch (path) {
			case "/status":
				return respond(200, this.status());
			case "/knowledge/chains": {
				let chains = [BIOLOGY_CHAIN, OTHER_CHAIN];
				const cid = params.get("cid");
				if (cid) chains = chains.filter((c) => c.cid === cid);
				return respond(200, page(chains));
			}
			case "/knowledge/statements": {
				const chainId = params.get("chain_id");
				const rows = chainId === "chain-110007" ? [BIOLOGY_STATEMENT] : [];
				return respond(200, page(rows));
			}
			case "/knowledge/concepts": {
				const statementId = params.get("statement_id");
				const rows = statementId === "stmt-chain-110007-000" ? [BIOLOGY_CONCEPT] : [BIOLOGY_CONCEPT];
				return respond(200, page(rows));
			}
			case "/samples":
				return respond(200, page([]));
			case "/benchmark/items":
				return respond(200, page([]));
			case "/evaluation/report":
				return respond(200, {
					model_name: "demo-model-v1",
					timestamp: "20260210_220124",
					overall_accuracy: 9268 / 14072,
					correct: 9268,
					total: 14072,
					per_subject: {
						"001": { accuracy: 0.646, total: 1000, errors: 354 },
						"002": { accuracy: 0.65, total: 1000, errors: 350 },
						"003": { accuracy: 0.63, total: 1000, errors: 370 },
					},
					error_samples: [],
					round: this.round,
					error_patterns: {
						by_issue_type: { concept_gap: 1509, capability_deficit: 3093 },
						by_question_type: { multiple_choice: 4787, single_choice: 17 },
						errors: 4804, diagnosed: 4602, undiagnosed: 202,
					},
				});
			case "/debug/progress":
				return respond(200, this.progress());
			default:
				return respond(404, { detail: `no fixture for ${path}` });
		}
	};
}
