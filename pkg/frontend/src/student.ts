// Student view: streaming chat, published-FAQ browser with view tracking,
// per-exercise difficulty rating, and the anonymity toggle that governs
// the identity attached to every request.

import { ApiClient } from "./api.js";

export class StudentView {
  constructor(
    private api: ApiClient,
    private courseId: string,
    private root: HTMLElement,
  ) {}

  async render(): Promise<void> {
    this.root.innerHTML = `
      <header id="identity-bar">
        <label id="anonymity-label">
          <input type="checkbox" id="anonymity-toggle">
          Anonymous mode (your name is never stored)
        </label>
      </header>
      <section id="chat">
        <div id="chat-log"></div>
        <div id="chat-status" hidden></div>
        <form id="chat-form">
          <textarea id="chat-input" placeholder="Ask a question"></textarea>
          <button type="submit">Send</button>
        </form>
      </section>
      <section id="faq"><h2>FAQ</h2><ul id="student-faq-list"></ul></section>
      <section id="rating">
        <h2>How difficult was this exercise?</h2>
        <div id="rating-widget"></div>
      </section>`;
    this.bindAnonymityToggle();
    this.bindChat();
    this.renderRatingWidget();
    await this.refreshFaq();
  }

  private bindAnonymityToggle(): void {
    const toggle = this.root.querySelector<HTMLInputElement>("#anonymity-toggle")!;
    toggle.checked = this.api.identity.anonymous;
    toggle.addEventListener("change", () => {
      this.api.identity.anonymous = toggle.checked;
    });
  }

  private bindChat(): void {
    const form = this.root.querySelector<HTMLFormElement>("#chat-form")!;
    const input = this.root.querySelector<HTMLTextAreaElement>("#chat-input")!;
    const log = this.root.querySelector<HTMLElement>("#chat-log")!;
    const status = this.root.querySelector<HTMLElement>("#chat-status")!;
    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      const text = input.value;
      if (!text.trim()) return;
      input.value = "";

      const mine = document.createElement("div");
      mine.className = "message user";
      mine.textContent = text; // verbatim: no prompt construction
      log.appendChild(mine);

      const reply = document.createElement("div");
      reply.className = "message assistant";
      log.appendChild(reply);
      status.hidden = true;
      try {
        await this.api.chat(
          this.courseId,
          text,
          (head) => {
            reply.dataset.servedFrom = head.served_from;
          },
          (fragment) => {
            reply.textContent = (reply.textContent ?? "") + fragment;
          },
        );
      } catch (err) {
        status.hidden = false;
        status.textContent =
          "The LLM is currently unavailable. The FAQ below still works.";
        reply.classList.add("failed");
      }
    });
  }

  async refreshFaq(): Promise<void> {
    const list = this.root.querySelector<HTMLElement>("#student-faq-list")!;
    const { items } = await this.api.listFaq(this.courseId, "student");
    list.innerHTML = "";
    if (items.length === 0) {
      list.innerHTML = `<li class="empty-state">No FAQ items published yet</li>`;
      return;
    }
    for (const item of items) {
      const li = document.createElement("li");
      li.className = "faq-item collapsed";
      li.dataset.groupId = item.id;
      const q = document.createElement("button");
      q.className = "faq-question";
      q.textContent = item.question;
      const a = document.createElement("p");
      a.className = "faq-answer";
      a.hidden = true;
      a.textContent = item.answer ?? "";
      q.addEventListener("click", async () => {
        const opening = a.hidden;
        a.hidden = !a.hidden;
        li.classList.toggle("collapsed", !opening);
        if (opening) {
          await this.api.recordView(item.id); // count on expand only
        }
      });
      li.append(q, a);
      list.appendChild(li);
    }
  }

  private renderRatingWidget(exerciseId = "current"): void {
    const widget = this.root.querySelector<HTMLElement>("#rating-widget")!;
    widget.innerHTML = "";
    for (let value = 1; value <= 5; value++) {
      const btn = document.createElement("button");
      btn.className = "rating-star";
      btn.dataset.value = String(value);
      btn.textContent = String(value);
      btn.addEventListener("click", async () => {
        await this.api.rateExercise(this.exerciseId ?? exerciseId, value);
        widget.querySelectorAll(".rating-star").forEach((b, i) => {
          b.classList.toggle("selected", i < value);
        });
        widget.dataset.storedValue = String(value);
      });
      widget.appendChild(btn);
    }
  }

  exerciseId: string | null = null;
}
