/** Tiny DOM construction helpers (no framework). */

export type Child = Node | string | null | undefined;

export function el<K extends keyof HTMLElementTagNameMap>(
	tag: K,
	attrs: Record<string, string | ((event: Event) => void)> = {},
	...children: Child[]
): HTMLElementTagNameMap[K] {
	const node = document.createElement(tag);
	for (const [key, value] of Object.entries(attrs)) {
		if (typeof value === "function") {
			node.addEventListener(key.replace(/^on/, ""), value);
		} else if (key === "class") {
			node.className = value;
		} else {
			node.setAttribute(key, value);
		}
	}
	for (const child of children) {
		if (child === null || child === undefined) continue;
		node.append(child);
	}
	return node;
}

export function clear(node: HTMLElement): void {
	node.textContent = "";
}

export function option(value: string, label: string, selected: boolean): HTMLOptionElement {
	const node = el("option", { value }, label);
	if (selected) node.selected = true;
	return node;
}
