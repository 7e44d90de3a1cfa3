/**
 * View state and its pure transitions. The UI holds no project data of its
 * own: everything renders from API reads plus this navigation state, so a
 * refresh reconstructs every view.
 */

export type ActiveView = "knowledge" | "data" | "evaluation" | "pipeline";

export interface Filters {
	cid: string;
	questionType: string;
	origin: string;
}

export interface DebugCycleState {
	running: boolean;
	progress: number;
	stage: string;
	error: string;
}

export interface ViewState {
	activeView: ActiveView;
	filters: Filters;
	page: number;
	pageSize: number;
	selectedChainId: string | null;
	selectedStatementId: string | null;
	debugCycle: DebugCycleState;
	banner: string | null;
	round: number;
}

export function initialState(): ViewState {
	return {
		activeView: "knowledge",
		filters: { cid: "", questionType: "", origin: "" },
		page: 1,
		pageSize: 50,
		selectedChainId: null,
		selectedStatementId: null,
		debugCycle: { running: false, progress: 0, stage: "", error: "" },
		banner: null,
		round: 1,
	};
}

export function setView(state: ViewState, view: ActiveView): ViewState {
	return { ...state, activeView: view, page: 1, banner: null };
}

export function setFilter(state: ViewState, key: keyof Filters, value: string): ViewState {
	return {
		...state,
		filters: { ...state.filters, [key]: value },
		page: 1,
		selectedChainId: null,
		selectedStatementId: null,
	};
}

export function selectChain(state: ViewState, chainId: string | null): ViewState {
	return { ...state, selectedChainId: chainId, selectedStatementId: null };
}

export function selectStatement(state: ViewState, statementId: string | null): ViewState {
	return { ...state, selectedStatementId: statementId };
}

export function pageCount(total: number, pageSize: number): number {
	return Math.max(1, Math.ceil(total / pageSize));
}

export function goToPage(state: ViewState, page: number, total: number): ViewState {
	const clamped = Math.min(Math.max(1, page), pageCount(total, state.pageSize));
	return { ...state, page: clamped };
}

export function updateDebugCycle(state: ViewState, cycle: Partial<DebugCycleState>): ViewState {
	return { ...state, debugCycle: { ...state.debugCycle, ...cycle } };
}

export function setBanner(state: ViewState, banner: string | null): ViewState {
	return { ...state, banner };
}

export function setRound(state: ViewState, round: number): ViewState {
	return { ...state, round };
}
