"""Conversation memory and the persistent feedback log.

Each session keeps a rolling window of the 10 most recent turns for
prompting; the durable newline-delimited JSON transcript under
``sessions/<id>.ndjson`` never loses turns. Feedback events append to one
global ``feedback.ndjson``; replaying it against the transcripts
reconstructs per-session retry budgets after a restart.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

WINDOW_SIZE = 10
RETRY_BUDGET = 3


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionError(KeyError):
    """Unknown session or turn, or a duplicate turn id."""


@dataclass
class Turn:
    turn_id: str
    query: str
    final_query: str
    answer_text: str
    citations: list[str] = field(default_factory=list)
    feedback: str | None = None
    reformulated: bool = False


@dataclass
class QuerySession:
    session_id: str
    created_at: str
    turns: list[Turn] = field(default_factory=list)  # the <=10 window
    retry_budget_used: int = 0


@dataclass(frozen=True)
class FeedbackEvent:
    session_id: str
    turn_id: str
    verdict: str  # "up" | "down"
    timestamp: str
    triggered_retry: bool


class _SessionState:
    def __init__(self, session_id: str, created_at: str):
        self.session_id = session_id
        self.created_at = created_at
        self.all_turns: list[Turn] = []
        self.turn_ids: set[str] = set()
        self.retry_budget_used = 0

    def window(self) -> list[Turn]:
        return self.all_turns[-WINDOW_SIZE:]

    def view(self) -> QuerySession:
        return QuerySession(
            session_id=self.session_id,
            created_at=self.created_at,
            turns=list(self.window()),
            retry_budget_used=self.retry_budget_used,
        )


class SessionStore:
    """File-backed store; safe for one writer per session."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.feedback_path = self.root / "feedback.ndjson"
        self._sessions: dict[str, _SessionState] = {}
        self._feedback: list[FeedbackEvent] = []
        self._load()

    # -- durability -----------------------------------------------------------

    def _load(self) -> None:
        for path in sorted(self.sessions_dir.glob("*.ndjson")):
            state = None
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj.get("type") == "session":
                    state = _SessionState(obj["session_id"], obj["created_at"])
                elif state is not None:
                    turn = Turn(
                        turn_id=obj["turn_id"],
                        query=obj["query"],
                        final_query=obj["final_query"],
                        answer_text=obj["answer_text"],
                        citations=list(obj.get("citations", [])),
                        feedback=obj.get("feedback"),
                        reformulated=bool(obj.get("reformulated", False)),
                    )
                    state.all_turns.append(turn)
                    state.turn_ids.add(turn.turn_id)
            if state is not None:
                self._sessions[state.session_id] = state
        if self.feedback_path.exists():
            for line in self.feedback_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                event = FeedbackEvent(
                    session_id=obj["session_id"],
                    turn_id=obj["turn_id"],
                    verdict=obj["verdict"],
                    timestamp=obj["timestamp"],
                    triggered_retry=bool(obj["triggered_retry"]),
                )
                self._feedback.append(event)
                state = self._sessions.get(event.session_id)
                if state is not None:
                    if event.triggered_retry:
                        state.retry_budget_used += 1
                    for turn in state.all_turns:
                        if turn.turn_id == event.turn_id:
                            turn.feedback = event.verdict

    def _session_path(self, session_id: str) -> Path:
        safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in session_id)
        return self.sessions_dir / f"{safe}.ndjson"

    def _append_line(self, path: Path, obj: dict) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")

    # -- sessions --------------------------------------------------------------

    def has_session(self, session_id: str) -> bool:
        return session_id in self._sessions

    def get_or_create(self, session_id: str) -> QuerySession:
        state = self._sessions.get(session_id)
        if state is None:
            state = _SessionState(session_id, _now_iso())
            self._sessions[session_id] = state
            self._append_line(
                self._session_path(session_id),
                {"type": "session", "session_id": session_id, "created_at": state.created_at},
            )
        return state.view()

    def get(self, session_id: str) -> QuerySession:
        state = self._sessions.get(session_id)
        if state is None:
            raise SessionError(f"unknown session: {session_id}")
        return state.view()

    def turn_count(self, session_id: str) -> int:
        state = self._sessions.get(session_id)
        return len(state.all_turns) if state else 0

    def append_turn(self, session_id: str, turn: Turn) -> QuerySession:
        """Append to the durable transcript; the in-memory window evicts
        its oldest entry past 10 turns."""
        state = self._sessions.get(session_id)
        if state is None:
            raise SessionError(f"unknown session: {session_id}")
        if turn.turn_id in state.turn_ids:
            raise SessionError(f"duplicate turn_id: {turn.turn_id}")
        state.all_turns.append(turn)
        state.turn_ids.add(turn.turn_id)
        record = asdict(turn)
        self._append_line(self._session_path(session_id), record)
        return state.view()

    def history_window(self, session_id: str) -> list[Turn]:
        state = self._sessions.get(session_id)
        if state is None:
            raise SessionError(f"unknown session: {session_id}")
        return list(state.window())

    def find_turn(self, session_id: str, turn_id: str) -> Turn:
        state = self._sessions.get(session_id)
        if state is None:
            raise SessionError(f"unknown session: {session_id}")
        for turn in state.all_turns:
            if turn.turn_id == turn_id:
                return turn
        raise SessionError(f"unknown turn: {turn_id}")

    # -- feedback ----------------------------------------------------------------

    def retry_budget_used(self, session_id: str) -> int:
        state = self._sessions.get(session_id)
        if state is None:
            raise SessionError(f"unknown session: {session_id}")
        return state.retry_budget_used

    def log_feedback(self, event: FeedbackEvent) -> None:
        """Durably append one feedback event and update derived state."""
        turn = self.find_turn(event.session_id, event.turn_id)
        if event.verdict not in ("up", "down"):
            raise ValueError(f"unknown verdict: {event.verdict!r}")
        self._append_line(self.feedback_path, asdict(event))
        self._feedback.append(event)
        turn.feedback = event.verdict
        if event.triggered_retry:
            self._sessions[event.session_id].retry_budget_used += 1

    def feedback_events(self, session_id: str | None = None) -> list[FeedbackEvent]:
        if session_id is None:
            return list(self._feedback)
        return [e for e in self._feedback if e.session_id == session_id]
