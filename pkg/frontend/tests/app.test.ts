import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatApp, mountChatApp } from "../src/app.js";
import { StubServer } from "./stub_server.js";

let server: StubServer;
let root: HTMLElement;

function makeApp(sessionId = "s1"): Promise<ChatApp> {
  const api = new ApiClient("", server.fetch);
  return mountChatApp(root, { sessionId, api });
}

function texts(selector: string): string[] {
  return [...root.querySelectorAll(selector)].map((el) => el.textContent ?? "");
}

beforeEach(() => {
  server = new StubServer();
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

describe("send_query", () => {
  it("appends user and assistant messages with citation chips", async () => {
    const app = await makeApp();
    await app.send("how many leave days");

    const users = root.querySelectorAll(".message.user");
    const assistants = root.querySelectorAll(".message.assistant");
    expect(users).toHaveLength(1);
    expect(assistants).toHaveLength(1);
    expect(users[0]?.textContent).toContain("how many leave days");

    const chips = [...assistants[0]!.querySelectorAll(".citation-chip")];
    expect(chips.map((c) => c.textContent)).toEqual(["leave_policy.md", "headcount.json"]);
    expect(chips.map((c) => (c as HTMLElement).dataset.chunkId)).toEqual([
      "leave_policy.md/text/0",
      "headcount.json/headcount/r2",
    ]);
  });

  it("preserves bullet formatting", async () => {
    const app = await makeApp();
    await app.send("leave policy");
    const bullets = root.querySelectorAll(".message.assistant li");
    expect(bullets.length).toBe(2);
  });

  it("chips cover only cited chunk ids", async () => {
    const app = await makeApp();
    await app.send("leave policy");
    const citations = app.messages().at(-1)!.citations.map((c) => c.chunkId);
    const chipIds = [...root.querySelectorAll(".citation-chip")].map(
      (c) => (c as HTMLElement).dataset.chunkId,
    );
    expect(new Set(chipIds)).toEqual(new Set(citations));
  });

  it("disables send on empty input and while a query is pending", async () => {
    const app = await makeApp();
    const send = root.querySelector<HTMLButtonElement>(".composer button")!;
    const input = root.querySelector<HTMLInputElement>(".composer input")!;
    expect(send.disabled).toBe(true);

    input.value = "something";
    input.dispatchEvent(new Event("input"));
    expect(send.disabled).toBe(false);

    let release!: () => void;
    server.queryDelay = new Promise((resolve) => (release = resolve));
    const inflight = app.send("something");
    expect(send.disabled).toBe(true); // pending
    release();
    await inflight;
    expect(root.querySelectorAll(".message.assistant")).toHaveLength(1);
  });

  it("surfaces service errors inline with the failing stage", async () => {
    const app = await makeApp();
    server.failNextQuery = {
      status: 502,
      code: "upstream_unavailable",
      message: "llm endpoint unreachable",
      stage: "generate",
    };
    await app.send("broken query");
    const error = root.querySelector(".message.error");
    expect(error?.textContent).toContain("generate");
    expect(error?.textContent).toContain("llm endpoint unreachable");
  });
});

describe("give_feedback", () => {
  it("thumbs-down appends a reformulated answer and marks the original retried", async () => {
    const app = await makeApp();
    await app.send("leave policy question");
    await app.giveFeedback("t1", "down");

    const assistants = root.querySelectorAll(".message.assistant");
    expect(assistants).toHaveLength(2);
    const retryBadges = texts(".badge.refined");
    expect(retryBadges).toContain("query refined");
    const original = root.querySelector('[data-turn-id="t1"]');
    expect(original?.querySelector(".badge.retried")?.textContent).toBe("retried");
    // one user bubble only; the retry was not typed by the user
    expect(root.querySelectorAll(".message.user")).toHaveLength(1);
  });

  it("thumbs-up marks the turn without a new message", async () => {
    const app = await makeApp();
    await app.send("benefits question");
    await app.giveFeedback("t1", "up");
    expect(root.querySelectorAll(".message.assistant")).toHaveLength(1);
    const up = root.querySelector('[data-turn-id="t1"] .thumb.up');
    expect(up?.classList.contains("active")).toBe(true);
  });

  it("clicking the rendered thumb button posts feedback", async () => {
    const app = await makeApp();
    await app.send("expense question");
    const down = root.querySelector<HTMLButtonElement>('[data-turn-id="t1"] .thumb.down')!;
    down.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(root.querySelectorAll(".message.assistant").length).toBe(2);
  });

  it("exhausted budget shows a badge and no new message", async () => {
    const app = await makeApp();
    for (let i = 1; i <= 4; i += 1) {
      await app.send(`question number ${i}`);
    }
    // three retries consume the budget (turns t1..t4 exist, retries append more)
    await app.giveFeedback("t1", "down");
    await app.giveFeedback("t2", "down");
    await app.giveFeedback("t3", "down");
    const before = root.querySelectorAll(".message.assistant").length;
    await app.giveFeedback("t4", "down");
    expect(root.querySelectorAll(".message.assistant")).toHaveLength(before);
    const badge = root.querySelector('[data-turn-id="t4"] .badge.budget_exhausted');
    expect(badge?.textContent).toBe("retry budget exhausted");
  });

  it("unknown turn shows a toast and rolls back", async () => {
    const app = await makeApp();
    await app.send("valid question");
    const before = texts(".message");
    await app.giveFeedback("t99", "down");
    const toast = root.querySelector(".toast");
    expect(toast?.classList.contains("hidden")).toBe(false);
    expect(toast?.textContent).toContain("unknown turn");
    expect(texts(".message")).toEqual(before);
  });
});

describe("session_restore", () => {
  it("reload restores the transcript from the service", async () => {
    const app = await makeApp("persisted");
    await app.send("first question");
    await app.send("second question");
    await app.giveFeedback("t1", "up");

    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
    const reloaded = await makeApp("persisted");

    expect(root.querySelectorAll(".message.user")).toHaveLength(2);
    expect(root.querySelectorAll(".message.assistant")).toHaveLength(2);
    const up = root.querySelector('[data-turn-id="t1"] .thumb.up');
    expect(up?.classList.contains("active")).toBe(true);
    expect(reloaded.messages().map((m) => m.role)).toEqual([
      "user", "assistant", "user", "assistant",
    ]);
  });

  it("caps the restored window at ten turns, oldest first", async () => {
    const app = await makeApp("windowed");
    for (let i = 1; i <= 15; i += 1) {
      await app.send(`question ${i}`);
    }
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
    await makeApp("windowed");

    const assistants = root.querySelectorAll(".message.assistant");
    expect(assistants).toHaveLength(10);
    const turnIds = [...assistants].map((el) => (el as HTMLElement).dataset.turnId);
    expect(turnIds).toEqual(["t6", "t7", "t8", "t9", "t10", "t11", "t12", "t13", "t14", "t15"]);
  });

  it("unknown session starts a fresh chat", async () => {
    await makeApp("brand-new");
    expect(root.querySelectorAll(".message")).toHaveLength(0);
    const toast = root.querySelector(".toast");
    expect(toast?.classList.contains("hidden")).toBe(true);
  });
});

describe("settings drawer", () => {
  it("exposes a profile selector that changes the queried profile", async () => {
    const seen: string[] = [];
    const api = new ApiClient("", async (input, init) => {
      if (String(input).includes("/v1/query")) {
        seen.push(JSON.parse(String(init?.body)).profile);
      }
      return server.fetch(String(input), init);
    });
    const app = await mountChatApp(root, { sessionId: "s-profile", api });

    const toggle = root.querySelector<HTMLButtonElement>(".settings-toggle")!;
    toggle.click();
    expect(root.querySelector(".settings-drawer")?.classList.contains("open")).toBe(true);

    const select = root.querySelector<HTMLSelectElement>(".profile-select")!;
    select.value = "naive";
    select.dispatchEvent(new Event("change"));
    await app.send("profile check");
    expect(seen).toEqual(["naive"]);
  });
});
