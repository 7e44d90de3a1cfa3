/**
 * The studio single-page app. All project data comes from API reads; the
 * only mutating action anywhere is the debug-cycle trigger button.
 */

import { EngineApi } from "./api.js";
import { clear, el, option } from "./dom.js";
import {
	answerLetters,
	formatCount,
	formatPercent,
	STAGE_ORDER,
	stageLabel,
	truncate,
} from "./format.js";
import { POLL_INTERVAL_MS, runDebugCycle } from "./poll.js";
import {
	ActiveView,
	Filters,
	ViewState,
	goToPage,
	initialState,
	pageCount,
	selectChain,
	selectStatement,
	setBanner,
	setFilter,
	setRound,
	setView,
	updateDebugCycle,
} from "./state.js";
import type {
	ChainRecord,
	ConceptRecord,
	EvaluationReportResponse,
	Page,
	SampleRecord,
	StatementRecord,
	StatusResponse,
} from "./types.js";
import { renderWindowedList } from "./virtual.js";

const VIEWS: { id: ActiveView; label: string }[] = [
	{ id: "knowledge", label: "Knowledge" },
	{ id: "data", label: "Data" },
	{ id: "evaluation", label: "Evaluation" },
	{ id: "pipeline", label: "Pipeline" },
];

interface Cache {
	status: StatusResponse | null;
	chains: Page<ChainRecord> | null;
	statements: Page<StatementRecord> | null;
	concepts: Page<ConceptRecord> | null;
	samples: Page<SampleRecord> | null;
	report: EvaluationReportResponse | null;
	reportMissing: boolean;
}

export interface AppOptions {
	root: HTMLElement;
	api: EngineApi;
	sleep?: (ms: number) => Promise<void>;
}

export class StudioApp {
	state: ViewState = initialState();
	cache: Cache = {
		status: null, chains: null, statements: null, concepts: null,
		samples: null, report: null, reportMissing: false,
	};
	private root: HTMLElement;
	private api: EngineApi;
	private sleep: (ms: number) => Promise<void>;

	constructor(options: AppOptions) {
		this.root = options.root;
		this.api = options.api;
		this.sleep = options.sleep ?? ((ms) => new Promise((r) => setTimeout(r, ms)));
	}

	async init(): Promise<void> {
		await this.refreshStatus();
		await this.loadViewData();
		this.render();
	}

	private async refreshStatus(): Promise<void> {
		this.cache.status = await this.api.status();
		this.state = setRound(this.state, this.cache.status.round);
	}

	private async loadViewData(): Promise<void> {
		const { activeView, filters, page, pageSize } = this.state;
		try {
			if (activeView === "knowledge") {
				this.cache.chains = await this.api.chains({
					cid: filters.cid, page, page_size: pageSize,
				});
				this.cache.statements = this.state.selectedChainId
					? await this.api.statements({ chain_id: this.state.selectedChainId, page_size: 200 })
					: null;
				this.cache.concepts = this.state.selectedStatementId
					? await this.api.concepts({ statement_id: this.state.selectedStatementId, page_size: 200 })
					: null;
			} else if (activeView === "data") {
				this.cache.samples = await this.api.samples({
					cid: filters.cid,
					question_type: filters.questionType,
					origin: filters.origin,
					page,
					page_size: pageSize,
				});
			} else if (activeView === "evaluation") {
				try {
					this.cache.report = await this.api.evaluationReport();
					this.cache.reportMissing = false;
				} catch {
					this.cache.report = null;
					this.cache.reportMissing = true;
				}
			}
		} catch (error) {
			this.state = setBanner(this.state, `API error: ${(error as Error).message}`);
		}
	}

	private async update(next: ViewState, reload = true): Promise<void> {
		this.state = next;
		if (reload) await this.loadViewData();
		this.render();
	}

	// -- debug cycle -------------------------------------------------------

	async triggerDebugCycle(): Promise<void> {
		if (this.state.debugCycle.running) return;
		this.state = updateDebugCycle(setBanner(this.state, null), {
			running: true, progress: 0, stage: "starting", error: "",
		});
		this.render();

		const outcome = await runDebugCycle(
			{
				start: () => this.api.startDebugCycle(),
				progress: () => this.api.debugProgress(),
				sleep: this.sleep,
			},
			(progress) => {
				this.state = updateDebugCycle(this.state, {
					progress: progress.progress,
					stage: progress.stage,
				});
				this.render();
			},
		);

		if (outcome.kind === "conflict") {
			this.state = setBanner(
				updateDebugCycle(this.state, { running: false, stage: "" }),
				`Debug cycle not started: ${outcome.detail}`,
			);
		} else if (outcome.kind === "failed") {
			this.state = setBanner(
				updateDebugCycle(this.state, { running: false, stage: "failed", error: outcome.error }),
				`Debug cycle failed: ${outcome.error}`,
			);
		} else {
			this.state = updateDebugCycle(this.state, { running: false, stage: "done", progress: 1 });
			await this.refreshStatus();
		}
		this.render();
	}

	// -- rendering ---------------------------------------------------------

	render(): void {
		clear(this.root);
		this.root.append(this.renderHeader(), this.renderBanner(), this.renderActiveView());
	}

	private renderHeader(): HTMLElement {
		const tabs = VIEWS.map(({ id, label }) =>
			el("button", {
				class: `tab${this.state.activeView === id ? " active" : ""}`,
				"data-view": id,
				onclick: () => void this.update(setView(this.state, id)),
			}, label));
		return el("header", { class: "topbar" },
			el("h1", {}, "corpusloop studio"),
			el("nav", { class: "tabs" }, ...tabs),
			el("span", { class: "round-counter", "data-testid": "round-counter" },
				`round ${this.state.round}`),
		);
	}

	private renderBanner(): HTMLElement {
		if (!this.state.banner) return el("div", { class: "banner hidden" });
		return el("div", { class: "banner", role: "alert" }, this.state.banner);
	}

	private renderActiveView(): HTMLElement {
		switch (this.state.activeView) {
			case "knowledge": return this.renderKnowledge();
			case "data": return this.renderData();
			case "evaluation": return this.renderEvaluation();
			case "pipeline": return this.renderPipeline();
		}
	}

	private cidFilter(): HTMLElement {
		const select = el("select", {
			"data-testid": "cid-filter",
			onchange: (event) => void this.update(
				setFilter(this.state, "cid", (event.target as HTMLSelectElement).value)),
		});
		select.append(option("", "all disciplines", this.state.filters.cid === ""));
		for (let i = 1; i <= 16; i++) {
			const code = String(i).padStart(3, "0");
			select.append(option(code, code, this.state.filters.cid === code));
		}
		return select;
	}

	private pager(total: number): HTMLElement {
		const pages = pageCount(total, this.state.pageSize);
		return el("div", { class: "pager" },
			el("button", {
				onclick: () => void this.update(goToPage(this.state, this.state.page - 1, total)),
			}, "prev"),
			el("span", {}, `page ${this.state.page} / ${pages} (${formatCount(total)} rows)`),
			el("button", {
				onclick: () => void this.update(goToPage(this.state, this.state.page + 1, total)),
			}, "next"),
		);
	}

	private renderKnowledge(): HTMLElement {
		const chains = this.cache.chains;
		const panel = el("section", { class: "view knowledge" });
		panel.append(el("div", { class: "toolbar" }, this.cidFilter()));
		if (!chains) {
			panel.append(el("p", { class: "empty" }, "knowledge structure not extracted yet"));
			return panel;
		}
		if (chains.total === 0) {
			panel.append(el("p", { class: "empty" }, "no chains match the current filter"));
			return panel;
		}

		const chainList = el("ul", { class: "chain-list", "data-testid": "chain-list" });
		renderWindowedList(chainList, chains.items, (chain) => {
			const selected = chain.chain_id === this.state.selectedChainId;
			return el("li", {},
				el("button", {
					class: `link${selected ? " selected" : ""}`,
					"data-chain": chain.chain_id,
					onclick: () => void this.update(selectChain(this.state, chain.chain_id)),
				}, `${chain.chain_id} · ${chain.process_name} (${chain.steps.length} steps)`));
		});

		const columns = el("div", { class: "columns" },
			el("div", { class: "column" },
				el("h2", {}, `L3 chains (${formatCount(chains.total)})`),
				chainList, this.pager(chains.total)),
			this.renderStatementsColumn(),
			this.renderConceptsColumn(),
		);
		panel.append(columns);
		return panel;
	}

	private renderStatementsColumn(): HTMLElement {
		const column = el("div", { class: "column" }, el("h2", {}, "L2 statements"));
		if (!this.state.selectedChainId) {
			column.append(el("p", { class: "empty" }, "select a chain"));
			return column;
		}
		const statements = this.cache.statements;
		if (!statements || statements.total === 0) {
			column.append(el("p", { class: "empty" }, "no statements recorded for this chain"));
			return column;
		}
		const list = el("ul", { class: "statement-list", "data-testid": "statement-list" });
		renderWindowedList(list, statements.items, (statement) => {
			const selected = statement.statement_id === this.state.selectedStatementId;
			return el("li", {},
				el("button", {
					class: `link${selected ? " selected" : ""}`,
					"data-statement": statement.statement_id,
					onclick: () => void this.update(selectStatement(this.state, statement.statement_id)),
				},
					el("code", {}, statement.statement_id),
					` ${truncate(statement.subject, 48)} — ${statement.predicate} → ${truncate(statement.object, 48)}`,
				));
		});
		column.append(list);
		return column;
	}

	private renderConceptsColumn(): HTMLElement {
		const column = el("div", { class: "column" }, el("h2", {}, "L1 concepts"));
		if (!this.state.selectedStatementId) {
			column.append(el("p", { class: "empty" }, "select a statement"));
			return column;
		}
		const concepts = this.cache.concepts;
		if (!concepts || concepts.total === 0) {
			column.append(el("p", { class: "empty" }, "no concepts harvested from this statement"));
			return column;
		}
		const list = el("ul", { class: "concept-list", "data-testid": "concept-list" });
		for (const concept of concepts.items) {
			list.append(el("li", { class: "concept", "data-concept": concept.concept_id },
				el("code", {}, concept.concept_id),
				el("strong", {}, ` ${concept.term}`),
				el("span", { class: "muted" }, ` [${concept.type}]`),
				el("p", {}, concept.definition),
			));
		}
		column.append(list);
		return column;
	}

	private renderData(): HTMLElement {
		const panel = el("section", { class: "view data" });
		const typeSelect = el("select", {
			"data-testid": "type-filter",
			onchange: (event) => void this.update(
				setFilter(this.state, "questionType", (event.target as HTMLSelectElement).value)),
		});
		typeSelect.append(option("", "all types", this.state.filters.questionType === ""));
		for (const qt of ["open_ended", "single_choice", "multiple_choice", "true_false"]) {
			typeSelect.append(option(qt, qt, this.state.filters.questionType === qt));
		}
		const originSelect = el("select", {
			"data-testid": "origin-filter",
			onchange: (event) => void this.update(
				setFilter(this.state, "origin", (event.target as HTMLSelectElement).value)),
		});
		originSelect.append(option("", "all origins", this.state.filters.origin === ""));
		for (const origin of ["initial", "patch", "replay"]) {
			originSelect.append(option(origin, origin, this.state.filters.origin === origin));
		}
		panel.append(el("div", { class: "toolbar" }, this.cidFilter(), typeSelect, originSelect));

		const samples = this.cache.samples;
		if (!samples || samples.total === 0) {
			panel.append(el("p", { class: "empty" }, "no training samples match"));
			return panel;
		}
		const list = el("div", { class: "sample-list", "data-testid": "sample-list" });
		renderWindowedList(list, samples.items, (sample) =>
			el("article", { class: "sample" },
				el("header", {},
					el("code", {}, sample.sample_id),
					el("span", { class: `chip ${sample.origin}` }, sample.origin),
					el("span", { class: "chip" }, sample.question_type),
					el("span", { class: "chip" }, `cid ${sample.cid}`)),
				el("p", { class: "question" }, truncate(sample.question, 200)),
				el("p", { class: "muted" },
					`cites ${sample.l2_ids.length} statement(s): ${sample.l2_ids.slice(0, 4).join(", ")}`),
			), 120);
		panel.append(list, this.pager(samples.total));
		return panel;
	}

	private renderEvaluation(): HTMLElement {
		const panel = el("section", { class: "view evaluation" });
		if (this.cache.reportMissing || !this.cache.report) {
			panel.append(el("p", { class: "empty" }, "no evaluation report yet — run the eval stage"));
			return panel;
		}
		const report = this.cache.report;
		panel.append(el("div", { class: "metrics" },
			el("div", { class: "metric" },
				el("span", { class: "metric-value", "data-testid": "overall-accuracy" },
					formatPercent(report.overall_accuracy)),
				el("span", { class: "metric-label" },
					`overall accuracy (${formatCount(report.correct)} / ${formatCount(report.total)})`)),
			el("div", { class: "metric" },
				el("span", { class: "metric-value", "data-testid": "error-count" },
					formatCount(report.total - report.correct)),
				el("span", { class: "metric-label" }, "error samples")),
			el("div", { class: "metric" },
				el("span", { class: "metric-value" }, report.model_name),
				el("span", { class: "metric-label" }, `evaluated round ${report.round}`)),
		));

		const table = el("table", { class: "subjects", "data-testid": "subject-table" },
			el("thead", {}, el("tr", {},
				el("th", {}, "discipline"), el("th", {}, "accuracy"),
				el("th", {}, "items"), el("th", {}, "errors"))));
		const body = el("tbody", {});
		for (const [cid, row] of Object.entries(report.per_subject)) {
			body.append(el("tr", {},
				el("td", {}, cid),
				el("td", {}, formatPercent(row.accuracy, 1)),
				el("td", {}, formatCount(row.total)),
				el("td", {}, formatCount(row.errors))));
		}
		table.append(body);
		panel.append(table);

		if (report.error_patterns) {
			const patterns = report.error_patterns;
			const issue = Object.entries(patterns.by_issue_type)
				.map(([k, v]) => `${k}: ${formatCount(v)}`).join(" · ") || "none yet";
			const qtypes = Object.entries(patterns.by_question_type)
				.map(([k, v]) => `${k}: ${formatCount(v)}`).join(" · ") || "none";
			panel.append(el("div", { class: "patterns", "data-testid": "error-patterns" },
				el("h2", {}, "error patterns"),
				el("p", {}, `by issue type — ${issue}`),
				el("p", {}, `by question type — ${qtypes}`),
				patterns.undiagnosed > 0
					? el("p", { class: "muted" }, `${formatCount(patterns.undiagnosed)} errors undiagnosed`)
					: null,
			));
		}

		const cycle = this.state.debugCycle;
		const button = el("button", {
			class: "primary",
			"data-testid": "run-debug-cycle",
			onclick: () => void this.triggerDebugCycle(),
		}, cycle.running ? `running ${cycle.stage}…` : "Run next diagnostic cycle");
		if (cycle.running) button.disabled = true;
		const progress = el("div", { class: "progress", "data-testid": "cycle-progress" });
		const fill = el("div", { class: "progress-fill" });
		fill.style.width = `${Math.round(cycle.progress * 100)}%`;
		progress.append(fill);
		panel.append(el("div", { class: "cycle-control" },
			button, progress,
			cycle.stage === "done" ? el("span", { class: "muted" }, "cycle complete") : null));
		return panel;
	}

	private renderPipeline(): HTMLElement {
		const panel = el("section", { class: "view pipeline" });
		const status = this.cache.status;
		if (!status) {
			panel.append(el("p", { class: "empty" }, "project status unavailable"));
			return panel;
		}
		const list = el("ol", { class: "stage-list", "data-testid": "stage-list" });
		for (const stage of STAGE_ORDER) {
			const info = status.stages[stage];
			list.append(el("li", { class: `stage ${info?.status ?? "pending"}` },
				el("span", { class: "stage-name" }, stageLabel(stage)),
				el("span", { class: "stage-status" }, info?.status ?? "pending")));
		}
		panel.append(
			el("p", { class: "muted" },
				"operator workflow labels map onto engine stages; the engine name stays in parentheses"),
			list,
			el("div", { class: "placeholder-panel" },
				el("h2", {}, "Model fine-tuning"),
				el("p", {},
					"Training runs outside this console. Export the corpus view at ",
					el("code", {}, "round-N/train_export.jsonl"),
					" and bring predictions back as ",
					el("code", {}, "predictions/round-N.jsonl"), "."),
			),
		);
		return panel;
	}
}

export function createApp(options: AppOptions): StudioApp {
	return new StudioApp(options);
}

declare global {
	interface Window { __studioBootstrapped?: boolean }
}

if (typeof document !== "undefined" && typeof window !== "undefined" && !window.__studioBootstrapped) {
	const root = document.getElementById("app");
	if (root) {
		window.__studioBootstrapped = true;
		const app = createApp({ root, api: new EngineApi("") });
		void app.init();
	}
}
