/**
 * Row windowing for large tables. Knowledge files reach 10^5 entries per
 * page cap, so tables render only the visible slice once they pass the
 * threshold; smaller tables render outright.
 */

export const VIRTUALIZE_THRESHOLD = 200;

export interface RowWindow {
	start: number;
	end: number; // exclusive
	padTop: number;
	padBottom: number;
}

export function computeWindow(
	scrollTop: number,
	viewportHeight: number,
	rowHeight: number,
	total: number,
	overscan = 5,
): RowWindow {
	if (rowHeight <= 0) throw new Error("rowHeight must be positive");
	const first = Math.floor(scrollTop / rowHeight);
	const visible = Math.ceil(viewportHeight / rowHeight);
	const start = Math.max(0, first - overscan);
	const end = Math.min(total, first + visible + overscan);
	return {
		start,
		end,
		padTop: start * rowHeight,
		padBottom: (total - end) * rowHeight,
	};
}

export function renderWindowedList<T>(
	container: HTMLElement,
	rows: T[],
	renderRow: (row: T) => HTMLElement,
	rowHeight = 28,
	viewportHeight = 560,
): void {
	container.textContent = "";
	if (rows.length <= VIRTUALIZE_THRESHOLD) {
		for (const row of rows) container.appendChild(renderRow(row));
		return;
	}
	container.classList.add("virtual-scroll");
	container.style.maxHeight = `${viewportHeight}px`;
	container.style.overflowY = "auto";

	const paint = () => {
		const win = computeWindow(container.scrollTop, viewportHeight, rowHeight, rows.length);
		container.textContent = "";
		const top = document.createElement("div");
		top.style.height = `${win.padTop}px`;
		container.appendChild(top);
		for (let i = win.start; i < win.end; i++) {
			container.appendChild(renderRow(rows[i] as T));
		}
		const bottom = document.createElement("div");
		bottom.style.height = `${win.padBottom}px`;
		container.appendChild(bottom);
	};
	container.onscroll = paint;
	paint();
}
