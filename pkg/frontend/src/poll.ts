/**
 * Debug-cycle trigger: POST once, then poll progress on a fixed interval
 * until the cycle settles. Dependencies are injected so the timing loop is
 * testable without real timers or network.
 */

import type { DebugProgress } from "./types.js";

export const POLL_INTERVAL_MS = 2000;

export interface CycleDeps {
	start(): Promise<{ started: boolean; conflict: boolean; detail: string }>;
	progress(): Promise<DebugProgress>;
	sleep(ms: number): Promise<void>;
}

export type CycleOutcome =
	| { kind: "conflict"; detail: string }
	| { kind: "done"; round: number | null }
	| { kind: "failed"; error: string };

export async function runDebugCycle(
	deps: CycleDeps,
	onProgress: (p: DebugProgress) => void,
): Promise<CycleOutcome> {
	const started = await deps.start();
	if (started.conflict) {
		return { kind: "conflict", detail: started.detail };
	}
	for (;;) {
		const progress = await deps.progress();
		onProgress(progress);
		if (!progress.running) {
			if (progress.stage === "failed") {
				return { kind: "failed", error: progress.error || "debug cycle failed" };
			}
			return { kind: "done", round: progress.round };
		}
		await deps.sleep(POLL_INTERVAL_MS);
	}
}
