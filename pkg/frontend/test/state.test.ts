import { describe, expect, it } from "vitest";

import {
	goToPage,
	initialState,
	pageCount,
	selectChain,
	selectStatement,
	setBanner,
	setFilter,
	setView,
	updateDebugCycle,
} from "../src/state.js";

describe("view state transitions", () => {
	it("starts on the knowledge view with empty filters", () => {
		const s = initialState();
		expect(s.activeView).toBe("knowledge");
		expect(s.filters).toEqual({ cid: "", questionType: "", origin: "" });
		expect(s.debugCycle.running).toBe(false);
	});

	it("switching views resets paging and banner", () => {
		let s = setBanner(goToPage({ ...initialState(), page: 3 }, 3, 500), "oops");
		s = setView(s, "data");
		expect(s.activeView).toBe("data");
		expect(s.page).toBe(1);
		expect(s.banner).toBeNull();
	});

	it("filter changes clear selection and reset paging", () => {
		let s = selectStatement(selectChain(initialState(), "chain-110007"), "stmt-x");
		s = goToPage(s, 2, 500);
		s = setFilter(s, "cid", "006");
		expect(s.filters.cid).toBe("006");
		expect(s.page).toBe(1);
		expect(s.selectedChainId).toBeNull();
		expect(s.selectedStatementId).toBeNull();
	});

	it("selecting a chain clears the statement selection", () => {
		let s = selectStatement(selectChain(initialState(), "chain-a"), "stmt-1");
		s = selectChain(s, "chain-b");
		expect(s.selectedChainId).toBe("chain-b");
		expect(s.selectedStatementId).toBeNull();
	});

	it("paging clamps to bounds", () => {
		const s = initialState(); // pageSize 50
		expect(goToPage(s, 0, 120).page).toBe(1);
		expect(goToPage(s, 99, 120).page).toBe(3);
		expect(pageCount(0, 50)).toBe(1);
		expect(pageCount(120, 50)).toBe(3);
	});

	it("debug cycle updates merge partial fields", () => {
		let s = updateDebugCycle(initialState(), { running: true, stage: "diagnose" });
		s = updateDebugCycle(s, { progress: 0.5 });
		expect(s.debugCycle).toEqual({ running: true, progress: 0.5, stage: "diagnose", error: "" });
	});

	it("progress stays within [0, 1] as reported by the engine", () => {
		const s = updateDebugCycle(initialState(), { progress: 1 });
		expect(s.debugCycle.progress).toBeGreaterThanOrEqual(0);
		expect(s.debugCycle.progress).toBeLessThanOrEqual(1);
	});
});
