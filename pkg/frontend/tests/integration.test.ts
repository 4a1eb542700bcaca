/** Scripted browser flow against the real engine in mock mode: build a
 * demo index, start the Python server, and drive the DOM app over HTTP.
 * Skips when the server cannot be started in this environment. */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatApp, mountChatApp } from "../src/app.js";

const PORT = 8971;
const BASE = `http://127.0.0.1:${PORT}`;

let serverProcess: ChildProcess | null = null;
let workDir: string | null = null;
let serverUp = false;

async function waitForServer(timeoutMs: number): Promise<boolean> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/v1/spec`);
      if (resp.ok) return true;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  return false;
}

beforeAll(async () => {
  if (typeof fetch !== "function") return;
  try {
    workDir = mkdtempSync(join(tmpdir(), "rag-ui-"));
    const corpus = join(workDir, "corpus");
    const index = join(workDir, "index");
    const cli = ["-m", "enterprise_rag.cli"];
    execFileSync("python3", [...cli, "synth", "--out", corpus, "--kind", "demo"]);
    execFileSync("python3", [...cli, "ingest", "--corpus", corpus, "--out", index]);
    serverProcess = spawn(
      "python3",
      [...cli, "serve", "--index", index, "--addr", `127.0.0.1:${PORT}`],
      { stdio: "ignore" },
    );
    serverUp = await waitForServer(20_000);
  } catch {
    serverUp = false;
  }
});

afterAll(() => {
  serverProcess?.kill("SIGTERM");
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

function freshRoot(): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById("app")!;
}

function liveApp(root: HTMLElement, sessionId: string): Promise<ChatApp> {
  const api = new ApiClient(BASE, (input, init) => fetch(input, init));
  return mountChatApp(root, { sessionId, api });
}

describe("live server flow", () => {
  it("sends a query, renders citations, retries on thumbs-down, restores on reload", async (ctx) => {
    if (!serverUp) return ctx.skip();
    const session = `ui-live-${Date.now()}`;
    let root = freshRoot();
    const app = await liveApp(root, session);

    await app.send("how many days of annual leave do employees accrue");
    const assistant = root.querySelector(".message.assistant");
    expect(assistant).not.toBeNull();
    const chips = [...root.querySelectorAll(".citation-chip")];
    expect(chips.length).toBeGreaterThan(0);
    const chipIds = chips.map((c) => (c as HTMLElement).dataset.chunkId);
    const lastMessage = app.messages().at(-1)!;
    expect(new Set(chipIds)).toEqual(new Set(lastMessage.citations.map((c) => c.chunkId)));

    const turnId = lastMessage.turnId!;
    await app.giveFeedback(turnId, "down");
    const assistants = [...root.querySelectorAll(".message.assistant")];
    expect(assistants.length).toBe(2);
    expect(root.querySelector(".badge.refined")?.textContent).toBe("query refined");
    expect(
      root.querySelector(`[data-turn-id="${turnId}"] .badge.retried`)?.textContent,
    ).toBe("retried");

    root = freshRoot();
    const reloaded = await liveApp(root, session);
    expect(reloaded.messages().length).toBeGreaterThanOrEqual(3);
    expect([...root.querySelectorAll(".message.assistant")].length).toBe(2);
  });

  it("restores at most ten turns after fifteen queries", async (ctx) => {
    if (!serverUp) return ctx.skip();
    const session = `ui-window-${Date.now()}`;
    let root = freshRoot();
    const app = await liveApp(root, session);
    for (let i = 1; i <= 15; i += 1) {
      await app.send(`policy question number ${i} please`);
    }
    root = freshRoot();
    await liveApp(root, session);
    expect(root.querySelectorAll(".message.assistant")).toHaveLength(10);
  });
});
