"""Newline-delimited JSON TCP service around one parametric solver.

Each request line holds one JSON object with a single key:

* ``{"Ping": 1}`` -> ``{"Pong": 1}``
* ``{"Run": {"parameter": [...], "initial_guess": [...], "initial_y": [...],
  "initial_penalty": c}}`` -> ``{"Solution": {...}}``
* ``{"Kill": 1}`` -> ``{"Pong": 1}``, then the server stops.

Errors come back as ``{"Error": {"code": c, "message": m}}``; see :class:`ErrorCode`.
"""
from __future__ import annotations

import enum
import json
import math
import socket
import socketserver
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .alm import AlmSolver
from .core import ExitStatus, ProblemDefinition, SolverConfig, SolverReport
from .errors import ConfigError


class ErrorCode(enum.IntEnum):
    MALFORMED = 1000
    WRONG_LENGTH = 1600
    SOLVER_FAILURE = 2000
    UNSUPPORTED_KEY = 3003


class ProtocolError(Exception):
    def __init__(self, code: ErrorCode, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass(frozen=True)
class ServerConfig:
    bind_ip: str = "127.0.0.1"
    port: int = 8333
    max_request_bytes: int = 1 << 20
    read_timeout: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise ConfigError(f"port must be in [1, 65535], got {self.port!r}")
        if self.max_request_bytes < 4096:
            raise ConfigError("max_request_bytes must be at least 4096")
        if self.read_timeout is not None and not self.read_timeout > 0:
            raise ConfigError("read_timeout must be positive")


@dataclass
class RunRequest:
    parameter: np.ndarray
    initial_guess: Optional[np.ndarray] = None
    initial_y: Optional[np.ndarray] = None
    initial_penalty: Optional[float] = None

    _FIELDS = ("parameter", "initial_guess", "initial_y", "initial_penalty")

    @classmethod
    def from_json(cls, body, n_p: int, n: int, n1: int) -> "RunRequest":
        if not isinstance(body, dict):
            raise ProtocolError(ErrorCode.MALFORMED, "Run expects an object")
        extra = sorted(set(body) - set(cls._FIELDS))
        if extra:
            raise ProtocolError(ErrorCode.UNSUPPORTED_KEY, f"unsupported Run field {extra[0]!r}")
        if "parameter" not in body:
            raise ProtocolError(ErrorCode.MALFORMED, "Run requires 'parameter'")
        req = cls(_array(body["parameter"], n_p, "parameter"))
        if body.get("initial_guess") is not None:
            req.initial_guess = _array(body["initial_guess"], n, "initial_guess")
        if body.get("initial_y") is not None:
            req.initial_y = _array(body["initial_y"], n1, "initial_y")
        if body.get("initial_penalty") is not None:
            c = _number(body["initial_penalty"], "initial_penalty")
            if not c > 0:
                raise ProtocolError(ErrorCode.MALFORMED, "initial_penalty must be positive")
            req.initial_penalty = c
        return req


def _number(x, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ProtocolError(ErrorCode.MALFORMED, f"{name} must be a number")
    x = float(x)
    if not math.isfinite(x):
        raise ProtocolError(ErrorCode.MALFORMED, f"{name} must be finite")
    return x


def _array(x, n, name):
    if not isinstance(x, list):
        raise ProtocolError(ErrorCode.MALFORMED, f"{name} must be an array")
    vals = np.array([_number(v, name) for v in x], dtype=float)
    if vals.shape[0] != n:
        raise ProtocolError(ErrorCode.WRONG_LENGTH,
                            f"{name} has length {vals.shape[0]}, expected {n}")
    return vals


def warm_start_policy(previous: Optional[SolverReport], request: RunRequest, n: int,
                      n1: int, c0: float):
    """Initial ``(u0, y0, c0)`` for a Run.

    Explicit request fields win; otherwise the last converged solution and
    multipliers are reused; otherwise zeros and the configured penalty.
    """
    reuse = previous is not None and previous.exit_status is ExitStatus.CONVERGED
    if request.initial_guess is not None:
        u0 = request.initial_guess
    else:
        u0 = previous.solution.copy() if reuse else np.zeros(n)
    if request.initial_y is not None:
        y0 = request.initial_y
    else:
        y0 = previous.lagrange_multipliers.copy() if reuse else np.zeros(n1)
    c = request.initial_penalty if request.initial_penalty is not None else float(c0)
    return u0, y0, c


def report_to_json(rep: SolverReport) -> dict:
    return {
        "exit_status": rep.exit_status.value,
        "num_outer_iterations": int(rep.num_outer_iterations),
        "num_inner_iterations": int(rep.num_inner_iterations),
        "last_problem_norm_fpr": float(rep.last_fpr_norm),
        "delta_y_norm": float(rep.delta_y_norm),
        "f2_norm": float(rep.f2_norm),
        "penalty": float(rep.penalty),
        "cost": float(rep.cost),
        "solve_time_ms": 1e3 * float(rep.solve_time),
        "solution": [float(v) for v in rep.solution],
        "lagrange_multipliers": [float(v) for v in rep.lagrange_multipliers],
    }


def _reject_constant(name):
    raise ValueError(f"non-finite literal {name}")


def _dump(obj) -> bytes:
    # float repr is the shortest string that parses back to the same double
    return json.dumps(obj, allow_nan=False, separators=(",", ":")).encode() + b"\n"


def error_line(code: ErrorCode, message: str) -> bytes:
    return _dump({"Error": {"code": int(code), "message": message}})


class SolverService:
    """Protocol logic independent of sockets; one instance per server.

    ``handle_line`` maps one request line to one response line and never raises.
    Run requests are serialized through a lock, Ping does not wait for it.
    """

    def __init__(self, problem: ProblemDefinition, config: Optional[SolverConfig] = None):
        self.problem = problem
        self.solver = AlmSolver(problem, config)
        self.previous: Optional[SolverReport] = None
        self._run_lock = threading.Lock()
        self.kill_requested = threading.Event()

    def handle_line(self, line: bytes) -> bytes:
        try:
            return self._dispatch(line)
        except ProtocolError as e:
            return error_line(e.code, e.message)
        except Exception as e:  # noqa: BLE001, the server must answer every line
            return error_line(ErrorCode.SOLVER_FAILURE, f"internal error: {type(e).__name__}: {e}")

    def _dispatch(self, line: bytes) -> bytes:
        try:
            msg = json.loads(line.decode("utf-8"), parse_constant=_reject_constant)
        except (UnicodeDecodeError, ValueError, RecursionError) as e:
            raise ProtocolError(ErrorCode.MALFORMED, f"malformed JSON: {e}") from None
        if not isinstance(msg, dict) or len(msg) != 1:
            raise ProtocolError(ErrorCode.MALFORMED, "expected an object with a single key")
        (key, body), = msg.items()
        if key == "Ping":
            return _dump({"Pong": 1})
        if key == "Kill":
            self.kill_requested.set()
            return _dump({"Pong": 1})
        if key == "Run":
            return self._run(body)
        raise ProtocolError(ErrorCode.UNSUPPORTED_KEY, f"unsupported key {key!r}")

    def _run(self, body) -> bytes:
        pb = self.problem
        req = RunRequest.from_json(body, pb.n_p, pb.n, pb.n1)
        with self._run_lock:
            u0, y0, c0 = warm_start_policy(self.previous, req, pb.n, pb.n1,
                                           self.solver.config.c0)
            try:
                rep = self.solver.solve(req.parameter, u0, y0, c0)
            except Exception as e:  # noqa: BLE001
                raise ProtocolError(ErrorCode.SOLVER_FAILURE,
                                    f"solver raised {type(e).__name__}: {e}") from None
            self.previous = rep
        if rep.exit_status is ExitStatus.ORACLE_FAILURE:
            raise ProtocolError(ErrorCode.SOLVER_FAILURE, f"solver status {rep.exit_status.value}")
        out = report_to_json(rep)
        try:
            return _dump({"Solution": out})
        except ValueError:
            raise ProtocolError(ErrorCode.SOLVER_FAILURE,
                                f"non-finite result, status {rep.exit_status.value}") from None


class _Handler(socketserver.StreamRequestHandler):
    def setup(self):
        self.timeout = self.server.cfg.read_timeout
        super().setup()

    def handle(self):
        limit = self.server.cfg.max_request_bytes
        service = self.server.service
        while not service.kill_requested.is_set():
            try:
                line = self.rfile.readline(limit + 1)
            except (socket.timeout, OSError):
                return
            if not line:
                return
            if len(line) > limit and not line.endswith(b"\n"):
                self._discard_rest(limit)
                reply = error_line(ErrorCode.MALFORMED, f"request exceeds {limit} bytes")
            elif not line.strip():
                continue
            else:
                reply = service.handle_line(line)
            try:
                self.wfile.write(reply)
                self.wfile.flush()
            except OSError:
                return
            if service.kill_requested.is_set():
                threading.Thread(target=self.server.shutdown, daemon=True).start()
                return

    def _discard_rest(self, limit):
        while True:
            chunk = self.rfile.readline(limit)
            if not chunk or chunk.endswith(b"\n"):
                return


class OptimizerServer(socketserver.ThreadingTCPServer):
    """Threaded TCP server; :meth:`serve_forever` returns after a Kill."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, problem: ProblemDefinition, config: Optional[SolverConfig] = None,
                 server_config: Optional[ServerConfig] = None):
        self.cfg = server_config or ServerConfig()
        self.service = SolverService(problem, config)
        super().__init__((self.cfg.bind_ip, self.cfg.port), _Handler)

    @property
    def address(self):
        return self.server_address[:2]

    def start_background(self) -> threading.Thread:
        th = threading.Thread(target=self.serve_forever, daemon=True)
        th.start()
        return th


def serve(problem: ProblemDefinition, config: Optional[SolverConfig] = None,
          server_config: Optional[ServerConfig] = None) -> None:
    """Bind and serve until a Kill request arrives."""
    with OptimizerServer(problem, config, server_config) as srv:
        srv.serve_forever()


class OptimizerClient:
    """Minimal blocking client, one request at a time over one connection."""

    def __init__(self, host: str = "127.0.0.1", port: int = 8333, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self._r = self.sock.makefile("rb")

    def request(self, obj) -> dict:
        return self.raw(_dump(obj))

    def raw(self, line: bytes) -> dict:
        if not line.endswith(b"\n"):
            line += b"\n"
        self.sock.sendall(line)
        reply = self._r.readline()
        if not reply:
            raise ConnectionError("server closed the connection")
        return json.loads(reply)

    def ping(self) -> dict:
        return self.request({"Ping": 1})

    def run(self, parameter, initial_guess=None, initial_y=None, initial_penalty=None) -> dict:
        body = {"parameter": [float(v) for v in parameter]}
        if initial_guess is not None:
            body["initial_guess"] = [float(v) for v in initial_guess]
        if initial_y is not None:
            body["initial_y"] = [float(v) for v in initial_y]
        if initial_penalty is not None:
            body["initial_penalty"] = float(initial_penalty)
        return self.request({"Run": body})

    def kill(self) -> dict:
        return self.request({"Kill": 1})

    def close(self):
        self._r.close()
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
