/** Browser bootstrap: session id and profile live in the URL so
 * transcripts are shareable; the API base is same-origin by default and
 * overridable with ?api= for a separately hosted backend. */

import { ApiClient } from "./api.js";
import { mountChatApp } from "./app.js";

function randomSessionId(): string {
  return `web-${Math.random().toString(36).slice(2, 10)}`;
}

export async function bootstrap(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  let sessionId = params.get("session");
  if (!sessionId) {
    sessionId = randomSessionId();
    params.set("session", sessionId);
    window.history.replaceState(null, "", `?${params.toString()}`);
  }
  const api = new ApiClient(params.get("api") ?? "");
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  await mountChatApp(root, {
    sessionId,
    profile: params.get("profile") ?? "advanced",
    api,
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void bootstrap();
}
