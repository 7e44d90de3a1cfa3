/** Display formatting and the workflow label mapping. */

export function formatPercent(fraction: number, digits = 2): string {
	return `${(fraction * 100).toFixed(digits)}%`;
}

export function formatCount(n: number): string {
	return n.toLocaleString("en-US");
}

export function truncate(text: string, max = 120): string {
	return text.length <= max ? text : text.slice(0, max - 1) + "…";
}

/**
 * Sidebar workflow labels. The data-generation sub-steps shown to operators
 * (Generate, Diagnose, Supplement, Merge) map onto engine stages; the engine
 * stage name is kept visible so the mapping is explicit.
 */
export const STAGE_LABELS: Record<string, string> = {
	curate: "Curate Corpus",
	extract: "Extract Knowledge Core",
	bench: "Benchmark Generation",
	synth: "Generate (synth)",
	eval: "Evaluation (eval)",
	diagnose: "Diagnose (diagnose)",
	patch: "Supplement (patch)",
	mix: "Merge (mix)",
	report: "Cycle Report",
};

export const STAGE_ORDER = [
	"curate", "extract", "bench", "synth", "eval", "diagnose", "patch", "mix", "report",
];

export function stageLabel(stage: string): string {
	return STAGE_LABELS[stage] ?? stage;
}

export function answerLetters(answer: string[]): string {
	return [...answer].sort().join(",");
}
