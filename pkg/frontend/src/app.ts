import { ApiError, createClient } from "./api";
import { compareEntries } from "./compare";
import { SessionHistory } from "./history";
import { renderErrorBanner, renderResultTable } from "./render";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8000";
const client = createClient(baseUrl);
const history = new SessionHistory();

const input = document.getElementById("smiles") as HTMLInputElement;
const form = document.getElementById("submit-form") as HTMLFormElement;
const resultBox = document.getElementById("result") as HTMLElement;
const bannerBox = document.getElementById("banner") as HTMLElement;
const historyList = document.getElementById("history") as HTMLElement;
const compareBox = document.getElementById("compare") as HTMLElement;

let selected: number[] = [];

async function submit(): Promise<void> {
  const text = input.value.trim();
  if (!text) return;
  input.classList.remove("invalid");
  bannerBox.innerHTML = "";
  const seq = history.begin();
  try {
    const response = await client.predict([text]);
    const result = response.results[0];
    if (!history.accept(seq, text, result)) return; // superseded
    resultBox.innerHTML = renderResultTable(result);
    renderHistory();
  } catch (err) {
    if (err instanceof ApiError && err.status !== null && err.status < 500) {
      input.classList.add("invalid");
      bannerBox.innerHTML = renderErrorBanner(err.message, false);
    } else {
      const message = err instanceof Error ? err.message : String(err);
      bannerBox.innerHTML = renderErrorBanner(message, true);
      const retry = bannerBox.querySelector(".retry");
      if (retry) retry.addEventListener("click", () => void submit());
    }
  }
}

function renderHistory(): void {
  historyList.innerHTML = history.entries
    .map(
      (entry, i) =>
        `<li><label><input type="checkbox" data-index="${i}"` +
        `${selected.includes(i) ? " checked" : ""}> ` +
        `#${entry.seq} ${entry.smiles}</label></li>`,
    )
    .join("");
  historyList
    .querySelectorAll("input[type=checkbox]")
    .forEach((box) => box.addEventListener("change", onSelect));
}

function onSelect(event: Event): void {
  const box = event.target as HTMLInputElement;
  const index = Number(box.dataset.index);
  selected = box.checked
    ? [...selected, index].slice(-2)
    : selected.filter((i) => i !== index);
  if (selected.length === 2) {
    const [a, b] = selected;
    const deltas = compareEntries(history.entries[a], history.entries[b]);
    compareBox.innerHTML =
      "<table><thead><tr><th>Target</th><th>Before</th><th>After</th>" +
      "<th>Delta</th></tr></thead><tbody>" +
      deltas
        .map(
          (d) =>
            `<tr><td>${d.target}</td><td>${d.before.toFixed(6)}</td>` +
            `<td>${d.after.toFixed(6)}</td>` +
            `<td>${d.delta >= 0 ? "+" : ""}${d.delta.toFixed(6)}</td></tr>`,
        )
        .join("") +
      "</tbody></table>";
  } else {
    compareBox.innerHTML = "";
  }
  renderHistory();
}

form.addEventListener("submit", (event) => {
  event.preventDefault();
  void submit();
});
