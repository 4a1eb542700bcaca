/** Chat application: renders the session transcript, sends queries,
 * collects thumbs feedback, and shows reformulation retries.
 *
 * Rendering is always a pure function of the last known session resource
 * (refetched after every mutation), so the UI cannot drift from the
 * server. One query is in flight per session at most: the send control
 * disables while pending, matching the server's per-session serialization.
 */

import { ApiClient, ApiError } from "./api.js";
import { answerLines, messagesFromSession } from "./state.js";
import type { SessionResource, UiMessage, Verdict } from "./types.js";

const FEEDBACK_BADGES: Record<string, string> = {
  retried: "retried",
  budget_exhausted: "retry budget exhausted",
};

export interface ChatAppOptions {
  sessionId: string;
  profile?: string;
  api: ApiClient;
}

export class ChatApp {
  readonly root: HTMLElement;
  readonly api: ApiClient;
  readonly sessionId: string;
  profile: string;

  private resource: SessionResource;
  private fileNames = new Map<string, string>();
  private pending = false;
  private inlineError: { stage?: string; message: string } | null = null;

  private messagesEl!: HTMLElement;
  private inputEl!: HTMLInputElement;
  private sendEl!: HTMLButtonElement;
  private toastEl!: HTMLElement;
  private drawerEl!: HTMLElement;

  constructor(root: HTMLElement, options: ChatAppOptions) {
    this.root = root;
    this.api = options.api;
    this.sessionId = options.sessionId;
    this.profile = options.profile ?? "advanced";
    this.resource = {
      session_id: this.sessionId,
      created_at: "",
      retry_budget_used: 0,
      turns: [],
    };
    this.buildShell();
  }

  /** Restore the session window from the service; unknown sessions start
   * a fresh, empty chat. */
  async init(): Promise<void> {
    try {
      this.resource = await this.api.session(this.sessionId);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) {
        this.showToast(err instanceof Error ? err.message : String(err));
      }
    }
    this.render();
  }

  async refresh(): Promise<void> {
    try {
      this.resource = await this.api.session(this.sessionId);
    } catch {
      // keep the last known resource; the next action will surface errors
    }
  }

  async send(text: string): Promise<void> {
    const query = text.trim();
    if (!query || this.pending) return;
    this.pending = true;
    this.inlineError = null;
    this.render();
    try {
      const answer = await this.api.query(this.sessionId, query, this.profile);
      for (const source of answer.sources) {
        this.fileNames.set(source.chunk_id, source.file_name);
      }
      this.inputEl.value = "";
    } catch (err) {
      if (err instanceof ApiError) {
        this.inlineError = { stage: err.stage, message: err.message };
      } else {
        this.inlineError = { message: String(err) };
      }
    } finally {
      await this.refresh();
      this.pending = false;
      this.render();
    }
  }

  async giveFeedback(turnId: string, verdict: Verdict): Promise<void> {
    try {
      const outcome = await this.api.feedback(this.sessionId, turnId, verdict);
      if (outcome.new_answer) {
        for (const source of outcome.new_answer.sources) {
          this.fileNames.set(source.chunk_id, source.file_name);
        }
      }
    } catch (err) {
      // 404 and friends: toast and roll back to the server's state
      this.showToast(err instanceof Error ? err.message : String(err));
    } finally {
      await this.refresh();
      this.render();
    }
  }

  messages(): UiMessage[] {
    return messagesFromSession(this.resource, this.fileNames);
  }

  // -- DOM ------------------------------------------------------------------

  private buildShell(): void {
    this.root.innerHTML = "";
    this.root.classList.add("chat-app");

    const header = document.createElement("header");
    header.className = "chat-header";
    const title = document.createElement("span");
    title.textContent = `session ${this.sessionId}`;
    title.className = "session-label";
    const settingsButton = document.createElement("button");
    settingsButton.type = "button";
    settingsButton.className = "settings-toggle";
    settingsButton.textContent = "settings";
    settingsButton.addEventListener("click", () => {
      this.drawerEl.classList.toggle("open");
    });
    header.append(title, settingsButton);

    this.drawerEl = document.createElement("div");
    this.drawerEl.className = "settings-drawer";
    const label = document.createElement("label");
    label.textContent = "retrieval profile";
    const select = document.createElement("select");
    select.className = "profile-select";
    for (const name of ["advanced", "naive"]) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      select.append(option);
    }
    select.value = this.profile;
    select.addEventListener("change", () => {
      this.profile = select.value;
    });
    label.append(select);
    this.drawerEl.append(label);

    this.messagesEl = document.createElement("main");
    this.messagesEl.className = "messages";

    this.toastEl = document.createElement("div");
    this.toastEl.className = "toast hidden";

    const form = document.createElement("form");
    form.className = "composer";
    this.inputEl = document.createElement("input");
    this.inputEl.type = "text";
    this.inputEl.placeholder = "ask about your documents";
    this.sendEl = document.createElement("button");
    this.sendEl.type = "submit";
    this.sendEl.textContent = "send";
    this.sendEl.disabled = true;
    this.inputEl.addEventListener("input", () => this.syncSendDisabled());
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.send(this.inputEl.value);
    });
    form.append(this.inputEl, this.sendEl);

    this.root.append(header, this.drawerEl, this.messagesEl, this.toastEl, form);
  }

  private syncSendDisabled(): void {
    this.sendEl.disabled = this.pending || !this.inputEl.value.trim();
  }

  private showToast(message: string): void {
    this.toastEl.textContent = message;
    this.toastEl.classList.remove("hidden");
  }

  render(): void {
    this.messagesEl.innerHTML = "";
    for (const message of this.messages()) {
      this.messagesEl.append(this.renderMessage(message));
    }
    if (this.pending) {
      const pending = document.createElement("div");
      pending.className = "message pending";
      pending.textContent = "thinking...";
      this.messagesEl.append(pending);
    }
    if (this.inlineError) {
      const error = document.createElement("div");
      error.className = "message error";
      const stage = this.inlineError.stage ? ` (stage: ${this.inlineError.stage})` : "";
      error.textContent = `request failed${stage}: ${this.inlineError.message}`;
      this.messagesEl.append(error);
    }
    this.syncSendDisabled();
  }

  private renderMessage(message: UiMessage): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = `message ${message.role}`;
    if (message.turnId) wrap.dataset.turnId = message.turnId;

    if (message.role === "user") {
      const p = document.createElement("p");
      p.textContent = message.text;
      wrap.append(p);
      return wrap;
    }

    if (message.reformulated) {
      const badge = document.createElement("span");
      badge.className = "badge refined";
      badge.textContent = "query refined";
      wrap.append(badge);
    }

    const { bullets, plain } = answerLines(message.text);
    for (const line of plain) {
      const p = document.createElement("p");
      p.textContent = line;
      wrap.append(p);
    }
    if (bullets.length) {
      const ul = document.createElement("ul");
      for (const bullet of bullets) {
        const li = document.createElement("li");
        li.textContent = bullet;
        ul.append(li);
      }
      wrap.append(ul);
    }

    if (message.citations.length) {
      const chips = document.createElement("div");
      chips.className = "citations";
      for (const citation of message.citations) {
        const chip = document.createElement("span");
        chip.className = "citation-chip";
        chip.dataset.chunkId = citation.chunkId;
        chip.title = citation.chunkId;
        chip.textContent = citation.fileName;
        chips.append(chip);
      }
      wrap.append(chips);
    }

    const actions = document.createElement("div");
    actions.className = "feedback";
    for (const verdict of ["up", "down"] as Verdict[]) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = `thumb ${verdict}`;
      button.setAttribute("aria-label", `thumbs ${verdict}`);
      button.textContent = verdict === "up" ? "\u{1F44D}" : "\u{1F44E}";
      if (message.feedbackState === verdict) button.classList.add("active");
      button.addEventListener("click", () => {
        if (message.turnId) void this.giveFeedback(message.turnId, verdict);
      });
      actions.append(button);
    }
    const state = FEEDBACK_BADGES[message.feedbackState];
    if (state) {
      const badge = document.createElement("span");
      badge.className = `badge ${message.feedbackState}`;
      badge.textContent = state;
      actions.append(badge);
    }
    if (message.feedbackState === "retried" || message.feedbackState === "down") {
      const down = actions.querySelector(".thumb.down");
      down?.classList.add("active");
    }
    wrap.append(actions);
    return wrap;
  }
}

export async function mountChatApp(root: HTMLElement, options: ChatAppOptions): Promise<ChatApp> {
  const app = new ChatApp(root, options);
  await app.init();
  return app;
}
