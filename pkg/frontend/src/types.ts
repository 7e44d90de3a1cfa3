/**
 * Wire types for the engine's HTTP API. Field names mirror the persisted
 * artifact schemas exactly.
 */

export interface StageInfo {
	status: "pending" | "running" | "done" | "failed";
	artifact_paths: string[];
	content_hash: string;
	started: string;
	finished: string;
}

export interface StatusResponse {
	round: number;
	seed: number;
	config_hash: string;
	stages: Record<string, StageInfo>;
	hash_mismatches: string[];
}

export interface Page<T> {
	total: number;
	page: number;
	page_size: number;
	items: T[];
}

export interface ChainRecord {
	chain_id: string;
	domain_context: string;
	process_name: string;
	narrative_summary: string;
	preconditions: string[];
	negative_constraints: string[];
	steps: string[];
	cid: string;
	source_chunk_id: string;
}

export interface StatementRecord {
	statement_id: string;
	parent_chain_id: string;
	subject: string;
	predicate: string;
	object: string;
	source_quote: string;
}

export interface ConceptRecord {
	concept_id: string;
	term: string;
	type: string;
	definition: string;
	parent_statement_ids: string[];
	cids: string[];
}

export interface SampleRecord {
	sample_id: string;
	question: string;
	answer: string;
	question_type: "open_ended" | "single_choice" | "multiple_choice" | "true_false";
	l2_ids: string[];
	l1_ids: string[];
	cid: string;
	origin: "initial" | "patch" | "replay";
	options?: Record<string, string>;
	explanation?: string;
}

export interface BenchmarkRecord {
	item_id: string;
	question: string;
	options: Record<string, string>;
	answer: string[];
	explanation: string;
	metadata: { chain_id: string; l2_ids: string[]; l1_ids: string[] };
	cid: string;
}

export interface SubjectRow {
	accuracy: number;
	total: number;
	errors: number;
}

export interface ErrorPatterns {
	by_issue_type: Record<string, number>;
	by_question_type: Record<string, number>;
	errors: number;
	diagnosed: number;
	undiagnosed: number;
}

export interface EvaluationReportResponse {
	model_name: string;
	timestamp: string;
	overall_accuracy: number;
	correct: number;
	total: number;
	per_subject: Record<string, SubjectRow>;
	error_samples: unknown[];
	round: number;
	error_patterns: ErrorPatterns | null;
}

export interface DebugProgress {
	running: boolean;
	stage: string;
	progress: number;
	round: number | null;
	error: string;
}
