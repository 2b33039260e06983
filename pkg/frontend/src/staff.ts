// Staff dashboard: editable dynamic FAQ, manual-add form, keyword review
// screen, and the two frequency charts.

import { ApiClient, FaqItem, KeywordProposal } from "./api.js";
import { renderBarChart } from "./charts.js";

export class StaffDashboard {
  constructor(
    private api: ApiClient,
    private courseId: string,
    private root: HTMLElement,
  ) {}

  async render(): Promise<void> {
    this.root.innerHTML = `
      <section id="faq-editor"><h2>Dynamic FAQ</h2>
        <ul id="faq-list"></ul>
        <form id="faq-add-form">
          <input name="question" placeholder="Question" required>
          <input name="answer" placeholder="Answer" required>
          <button type="submit">Add FAQ item</button>
        </form>
      </section>
      <section id="keyword-review"><h2>Keyword review</h2>
        <div id="keyword-panel"></div>
      </section>
      <section id="charts">
        <div id="faq-views-chart"></div>
        <div id="topics-chart"></div>
      </section>`;
    this.bindAddForm();
    await Promise.all([this.refreshFaq(), this.refreshCharts()]);
  }

  async refreshFaq(): Promise<void> {
    const list = this.root.querySelector<HTMLElement>("#faq-list")!;
    const { items } = await this.api.listFaq(this.courseId, "staff");
    list.innerHTML = "";
    if (items.length === 0) {
      list.innerHTML = `<li class="empty-state">No FAQ items yet</li>`;
      return;
    }
    for (const item of items) {
      list.appendChild(this.faqRow(item));
    }
  }

  private faqRow(item: FaqItem): HTMLElement {
    const li = document.createElement("li");
    li.className = "faq-item";
    li.dataset.groupId = item.id;
    li.innerHTML = `
      <strong class="faq-question"></strong>
      <span class="faq-meta"></span>
      <textarea class="faq-answer"></textarea>
      <button class="save-answer">Save answer</button>
      <label><input type="checkbox" class="publish-toggle"> published</label>`;
    li.querySelector<HTMLElement>(".faq-question")!.textContent = item.question;
    li.querySelector<HTMLElement>(".faq-meta")!.textContent =
      `${item.member_count} asked · ${item.view_count} views · ${item.answer_source}`;
    const answerBox = li.querySelector<HTMLTextAreaElement>(".faq-answer")!;
    answerBox.value = item.answer ?? "";
    const publish = li.querySelector<HTMLInputElement>(".publish-toggle")!;
    publish.checked = item.published;

    li.querySelector<HTMLButtonElement>(".save-answer")!.addEventListener("click", async () => {
      // edits survive an API failure: the textarea keeps the draft
      try {
        await this.api.updateFaq(item.id, { answer: answerBox.value });
        await this.refreshFaq();
      } catch (err) {
        li.classList.add("save-failed");
      }
    });
    publish.addEventListener("change", async () => {
      try {
        await this.api.updateFaq(item.id, { published: publish.checked });
      } catch (err) {
        publish.checked = !publish.checked;
        li.classList.add("save-failed");
      }
    });
    return li;
  }

  private bindAddForm(): void {
    const form = this.root.querySelector<HTMLFormElement>("#faq-add-form")!;
    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      const data = new FormData(form);
      await this.api.createFaq(
        this.courseId,
        String(data.get("question") ?? ""),
        String(data.get("answer") ?? ""),
      );
      form.reset();
      await this.refreshFaq();
    });
  }

  async refreshCharts(): Promise<void> {
    const [views, topics] = await Promise.all([
      this.api.faqViewCounts(this.courseId),
      this.api.topicCounts(this.courseId),
    ]);
    renderBarChart(
      this.root.querySelector<HTMLElement>("#faq-views-chart")!,
      "FAQ view frequency",
      views.faq_view_counts,
    );
    renderBarChart(
      this.root.querySelector<HTMLElement>("#topics-chart")!,
      "Question topics",
      topics.topic_counts,
    );
  }

  // Keyword review: extracted proposals with accept/remove checkboxes and
  // a free-text add field, submitted as one decision batch.
  async reviewExercise(exerciseId: string): Promise<void> {
    const panel = this.root.querySelector<HTMLElement>("#keyword-panel")!;
    const { keywords } = await this.api.extractKeywords(exerciseId);
    panel.innerHTML = `
      <ul id="keyword-list"></ul>
      <input id="keyword-add" placeholder="Add keyword">
      <button id="keyword-submit">Save review</button>`;
    const list = panel.querySelector<HTMLElement>("#keyword-list")!;
    for (const kw of keywords) {
      list.appendChild(this.keywordRow(kw));
    }
    panel.querySelector<HTMLButtonElement>("#keyword-submit")!.addEventListener("click", async () => {
      const decisions: { keyword: string; action: "accept" | "remove" | "add" }[] = [];
      list.querySelectorAll<HTMLElement>(".keyword-row").forEach((row) => {
        const keep = row.querySelector<HTMLInputElement>("input")!.checked;
        decisions.push({
          keyword: row.dataset.keyword!,
          action: keep ? "accept" : "remove",
        });
      });
      const added = panel.querySelector<HTMLInputElement>("#keyword-add")!.value.trim();
      if (added) {
        decisions.push({ keyword: added, action: "add" });
      }
      await this.api.reviewKeywords(exerciseId, decisions);
    });
  }

  private keywordRow(kw: KeywordProposal): HTMLElement {
    const row = document.createElement("li");
    row.className = "keyword-row";
    row.dataset.keyword = kw.text;
    row.innerHTML = `<label><input type="checkbox" checked> <span class="keyword-text"></span>
      <span class="keyword-score"></span></label>`;
    row.querySelector<HTMLElement>(".keyword-text")!.textContent = kw.text;
    row.querySelector<HTMLElement>(".keyword-score")!.textContent = kw.score.toFixed(2);
    return row;
  }
}
