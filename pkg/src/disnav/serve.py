"""Live simulation session bridged to the monitor UI over WebSocket.

The sim loop runs on one asyncio task; monitor commands land in a queue and
are applied only at step boundaries.  Every human disengage is recorded into
the dataset with the same schema as oracle events, tagged with "/human".
The same port also answers plain HTTP GETs for the world geometry (by
digest) and, optionally, a static asset bundle.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import mimetypes
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Dataset, StepRecord
from .planner import PlanDiagnostics
from .sim import RobotState, check_disengagement, render_observation, start_state, step, wrap_heading
from .world import World, world_to_dict

MAX_FRAME_CANDIDATES = 64

CLIENT_COMMANDS = {"disengage", "engage", "reposition", "set_goal", "pause", "resume"}


@dataclass
class ServeSession:
    world: World
    policy: object
    policy_tag: str = "land"
    steps_per_second: float = 5.0
    human_monitor: bool = False
    dataset_out: Path | None = None

    dataset: Dataset = field(default_factory=Dataset)
    state: RobotState = None
    engaged: bool = True
    paused: bool = False
    step_count: int = 0
    episode_id: int = 0
    distance_anchor: float = 0.0

    def __post_init__(self):
        self.state = start_state(self.world)
        self.distance_anchor = self.state.progress_m
        self.world_doc = json.dumps(world_to_dict(self.world)).encode()
        self.world_digest = hashlib.sha256(self.world_doc).hexdigest()
        self.policy.reset()

    # -- command handling (applied at step boundaries) --------------------

    def apply_command(self, cmd: dict) -> dict | None:
        """Apply one client command; returns an error frame dict or None."""
        ctype = cmd.get("type")
        if ctype not in CLIENT_COMMANDS:
            return {"type": "error", "message": f"unknown command type {ctype!r}"}
        if ctype == "disengage":
            if self.engaged:
                self._record(0.0, disengaged=True, monitor="human")
                self.engaged = False
        elif ctype == "engage":
            self.engaged = True
            self.policy.reset()
            self.distance_anchor = self.state.progress_m
        elif ctype == "reposition":
            try:
                x, y = float(cmd["x"]), float(cmd["y"])
                heading = wrap_heading(float(cmd["heading"]))
            except (KeyError, TypeError, ValueError):
                return {"type": "error", "message": "reposition needs numeric x, y, heading"}
            from .world import nearest_centerline

            arc, _ = nearest_centerline(self.world, (x, y))
            self.state = RobotState(x, y, heading, arc)
        elif ctype == "set_goal":
            try:
                goal = float(cmd["g"])
            except (KeyError, TypeError, ValueError):
                return {"type": "error", "message": "set_goal needs numeric g"}
            if hasattr(self.policy, "set_goal"):
                self.policy.set_goal(goal)
        elif ctype == "pause":
            self.paused = True
        elif ctype == "resume":
            self.paused = False
        return None

    def _record(self, action: float, disengaged: bool, monitor: str = "oracle") -> None:
        obs = render_observation(self.world, self.state)
        tag = self.policy_tag + ("/human" if monitor == "human" else "")
        self.dataset.record_step(
            StepRecord(
                episode_id=self.episode_id,
                step_index=self.step_count,
                observation=obs,
                action=float(action),
                disengaged=disengaged,
                progress_m=self.state.progress_m,
                policy_tag=tag,
            )
        )
        self.step_count += 1

    # -- one sim step ------------------------------------------------------

    def tick(self) -> dict:
        """Advance the session one step (if engaged and not paused); build a frame.

        With the scripted oracle active, a disengagement is recorded and the
        reset maneuver re-engages immediately, as in offline collection; in
        human-monitor mode the session idles until the client re-engages.
        """
        diagnostics = None
        if not self.paused and self.engaged:
            cause = None if self.human_monitor else check_disengagement(self.world, self.state)
            if cause is not None:
                self._record(0.0, disengaged=True)
                from .sim import reset_maneuver

                self.state = reset_maneuver(self.world, self.state)
                self.policy.reset()
                self.distance_anchor = self.state.progress_m
            else:
                obs = render_observation(self.world, self.state)
                action = self.policy.act(self.world, self.state, obs)
                self._record(action, disengaged=False)
                self.state = step(self.world, self.state, action)
                diagnostics = getattr(self.policy, "last_diagnostics", None)
        return self.frame(diagnostics)

    def frame(self, diagnostics: PlanDiagnostics | None = None) -> dict:
        obs = render_observation(self.world, self.state)
        frame = {
            "type": "frame",
            "step": self.step_count,
            "robot": {"x": self.state.x, "y": self.state.y, "heading": self.state.heading},
            "engaged": self.engaged,
            "world_digest": self.world_digest,
            "observation": obs.digits(),
            "plan": diagnostics.to_dict(MAX_FRAME_CANDIDATES) if diagnostics else None,
            "metrics": {
                "distance_since_disengagement": max(0.0, self.state.progress_m - self.distance_anchor)
            },
        }
        return frame

    def save_dataset(self) -> None:
        if self.dataset_out is not None:
            self.dataset.save(self.dataset_out)


async def session_loop(session: ServeSession, clients: set, commands: asyncio.Queue):
    import websockets

    interval = 1.0 / session.steps_per_second
    while True:
        started = asyncio.get_event_loop().time()
        errors = []
        while not commands.empty():
            ws, cmd = commands.get_nowait()
            err = session.apply_command(cmd)
            if err is not None:
                errors.append((ws, err))
        frame = session.tick()
        payload = json.dumps(frame)
        for ws in list(clients):
            try:
                await ws.send(payload)
            except websockets.ConnectionClosed:
                clients.discard(ws)
        for ws, err in errors:
            try:
                await ws.send(json.dumps(err))
            except websockets.ConnectionClosed:
                clients.discard(ws)
        elapsed = asyncio.get_event_loop().time() - started
        await asyncio.sleep(max(0.0, interval - elapsed))


def _http_response(session: ServeSession, static_dir: Path | None, connection, request):
    """Answer plain HTTP GETs (world geometry, static assets); None upgrades to WS."""
    from websockets.http11 import Response
    from websockets.datastructures import Headers

    path = request.path.split("?")[0]
    if request.headers.get("Upgrade", "").lower() == "websocket":
        return None
    if path in (f"/world/{session.world_digest}", "/world"):
        return Response(
            200, "OK", Headers([("Content-Type", "application/json")]), session.world_doc
        )
    if static_dir is not None:
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (static_dir / rel).resolve()
        if target.is_file() and str(target).startswith(str(static_dir.resolve())):
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            return Response(200, "OK", Headers([("Content-Type", ctype)]), target.read_bytes())
    return Response(404, "Not Found", Headers([("Content-Type", "text/plain")]), b"not found\n")


def run_server(session: ServeSession, host: str = "127.0.0.1", port: int = 8765, static_dir=None):
    """Blocking entry point: one session, any number of monitor connections."""
    asyncio.run(serve_async(session, host, port, static_dir))


async def serve_async(session: ServeSession, host: str, port: int, static_dir=None, ready=None):
    import signal

    import websockets

    clients: set = set()
    commands: asyncio.Queue = asyncio.Queue()
    static = Path(static_dir) if static_dir else None

    stop = asyncio.Event()
    loop = asyncio.get_event_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except (NotImplementedError, RuntimeError):
            pass  # non-main thread or platform without signal support

    async def handler(ws):
        clients.add(ws)
        try:
            await ws.send(json.dumps(session.frame()))
            async for raw in ws:
                try:
                    cmd = json.loads(raw)
                    if not isinstance(cmd, dict):
                        raise ValueError("command must be a JSON object")
                except (json.JSONDecodeError, ValueError) as e:
                    await ws.send(json.dumps({"type": "error", "message": f"bad command: {e}"}))
                    continue
                await commands.put((ws, cmd))
        finally:
            clients.discard(ws)

    loop_task = asyncio.create_task(session_loop(session, clients, commands))
    stop_task = asyncio.create_task(stop.wait())
    try:
        async with websockets.serve(
            handler, host, port, process_request=lambda conn, req: _http_response(session, static, conn, req)
        ):
            if ready is not None:
                ready.set()
            await asyncio.wait({loop_task, stop_task}, return_when=asyncio.FIRST_COMPLETED)
    finally:
        loop_task.cancel()
        stop_task.cancel()
        session.save_dataset()
