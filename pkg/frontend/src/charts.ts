// Minimal horizontal bar chart rendered as plain DOM nodes: one
// .bar-row per key, bar width proportional to the value. No chart
// library needed for frequency bars.

export function renderBarChart(
  container: HTMLElement,
  title: string,
  data: Record<string, number>,
): void {
  container.innerHTML = "";
  container.classList.add("bar-chart");

  const heading = document.createElement("h3");
  heading.textContent = title;
  container.appendChild(heading);

  const entries = Object.entries(data).sort((a, b) => b[1] - a[1] || a[0].localeCompare(b[0]));
  if (entries.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No data yet";
    container.appendChild(empty);
    return;
  }

  const max = Math.max(...entries.map(([, v]) => v), 1);
  for (const [label, value] of entries) {
    const row = document.createElement("div");
    row.className = "bar-row";

    const name = document.createElement("span");
    name.className = "bar-label";
    name.textContent = label;

    const bar = document.createElement("div");
    bar.className = "bar";
    bar.style.width = `${(value / max) * 100}%`;
    bar.dataset.value = String(value);

    const count = document.createElement("span");
    count.className = "bar-value";
    count.textContent = String(value);

    row.append(name, bar, count);
    container.appendChild(row);
  }
}
