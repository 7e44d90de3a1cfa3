import { describe, expect, it } from "vitest";

import { answerLetters, formatCount, formatPercent, STAGE_ORDER, stageLabel, truncate } from "../src/format.js";

describe("formatting", () => {
	it("renders the published accuracy the way the report does", () => {
		expect(formatPercent(9268 / 14072)).toBe("65.86%");
		expect(formatPercent(0.75)).toBe("75.00%");
		expect(formatPercent(0.646, 1)).toBe("64.6%");
	});

	it("groups thousands", () => {
		expect(formatCount(4804)).toBe("4,804");
		expect(formatCount(14072)).toBe("14,072");
	});

	it("truncates with an ellipsis only when needed", () => {
		expect(truncate("short", 10)).toBe("short");
		expect(truncate("x".repeat(30), 10)).toHaveLength(10);
		expect(truncate("x".repeat(30), 10).endsWith("…")).toBe(true);
	});

	it("joins answers alphabetically", () => {
		expect(answerLetters(["D", "A", "B"])).toBe("A,B,D");
	});
});

describe("workflow stage labels", () => {
	it("maps operator sub-steps onto engine stages explicitly", () => {
		expect(stageLabel("synth")).toBe("Generate (synth)");
		expect(stageLabel("diagnose")).toBe("Diagnose (diagnose)");
		expect(stageLabel("patch")).toBe("Supplement (patch)");
		expect(stageLabel("mix")).toBe("Merge (mix)");
	});

	it("keeps the engine stage order", () => {
		expect(STAGE_ORDER).toEqual([
			"curate", "extract", "bench", "synth", "eval", "diagnose", "patch", "mix", "report",
		]);
	});

	it("falls back to the raw stage name", () => {
		expect(stageLabel("mystery")).toBe("mystery");
	});
});
