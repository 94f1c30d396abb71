"""Compile-and-run verification of candidate translations.

Every verification gets a fresh working directory under the scratch root
(override with ``BOOTTRANS_SANDBOX_ROOT``), a minimal environment, and
hard resource limits.  Compile and run phases have separate time budgets;
the memory cap applies to the run phase, where untrusted code executes.
This is a research sandbox: process isolation and rlimits, not an
OS-hardened public judge.
"""

from __future__ import annotations

import os
import re
import resource
import shutil
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path

from .transpiler import HarnessSource, assemble_program

SCRATCH_ROOT_ENV = "BOOTTRANS_SANDBOX_ROOT"
_FAIL_MARKER = re.compile(rb"FAIL case=(\d+)")
_FSIZE_CAP = 16 * 1024 * 1024  # candidate file writes, incl. captured output
TRUNCATION_SENTINEL = "…truncated"


class SandboxUnavailable(Exception):
    """The toolchain for a configured language is missing from this host."""


class InternalError(Exception):
    """Isolation setup failed; distinct from any candidate verdict."""


class Outcome(str, Enum):
    PASS = "Pass"
    COMPILE_ERROR = "CompileError"
    RUNTIME_ERROR = "RuntimeError"
    TIMEOUT = "Timeout"
    WRONG_ANSWER = "WrongAnswer"


@dataclass(frozen=True)
class ExecutionLimits:
    compile_timeout: float = 30.0
    run_timeout: float = 10.0
    memory_cap: int = 512 * 1024 * 1024
    output_cap: int = 64 * 1024

    def __post_init__(self) -> None:
        if min(self.compile_timeout, self.run_timeout, self.memory_cap, self.output_cap) <= 0:
            raise ValueError("execution limits must all be strictly positive")


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    first_failing_case: int | None = None
    diagnostics: str = ""
    wall_time: float = 0.0


@dataclass(frozen=True)
class ToolchainConfig:
    """Argv templates with {src}/{exe}/{dir} placeholders; compile_cmd optional."""

    run_cmd: tuple[str, ...]
    source_filename: str
    compile_cmd: tuple[str, ...] | None = None


DEFAULT_TOOLCHAINS: dict[str, ToolchainConfig] = {
    "python": ToolchainConfig(
        compile_cmd=("python3", "-m", "py_compile", "{src}"),
        run_cmd=("python3", "{src}"),
        source_filename="main.py",
    ),
    "cpp": ToolchainConfig(
        compile_cmd=("g++", "-O0", "-std=c++17", "{src}", "-o", "{exe}"),
        run_cmd=("{exe}",),
        source_filename="main.cpp",
    ),
    "rust": ToolchainConfig(
        compile_cmd=("rustc", "--edition", "2021", "{src}", "-o", "{exe}"),
        run_cmd=("{exe}",),
        source_filename="main.rs",
    ),
}


@lru_cache(maxsize=None)
def _binary_on_path(name: str) -> bool:
    return shutil.which(name) is not None


def _fill(cmd: tuple[str, ...], src: Path, exe: Path, workdir: Path) -> list[str]:
    return [part.format(src=str(src), exe=str(exe), dir=str(workdir)) for part in cmd]


def _truncate(raw: bytes, cap: int) -> str:
    text = raw.decode("utf-8", errors="replace")
    if len(text) <= cap:
        return text
    return text[:cap] + TRUNCATION_SENTINEL


@dataclass
class Sandbox:
    """Thread-safe verification service over the configured toolchains."""

    toolchains: dict[str, ToolchainConfig] = field(
        default_factory=lambda: dict(DEFAULT_TOOLCHAINS)
    )
    scratch_root: str | None = None

    def _scratch(self) -> Path:
        root = self.scratch_root or os.environ.get(SCRATCH_ROOT_ENV) or tempfile.gettempdir()
        path = Path(root)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InternalError(f"cannot create scratch root {path}: {exc}") from exc
        return path

    def check_available(self, language: str) -> None:
        toolchain = self.toolchains.get(language)
        if toolchain is None:
            raise SandboxUnavailable(f"no toolchain configured for {language!r}")
        for cmd in filter(None, (toolchain.compile_cmd, toolchain.run_cmd)):
            binary = cmd[0]
            if "{" not in binary and not _binary_on_path(binary):
                raise SandboxUnavailable(f"{language}: {binary!r} not on PATH")

    def verify(
        self,
        candidate_source: str,
        language: str,
        harness: HarnessSource,
        limits: ExecutionLimits = ExecutionLimits(),
    ) -> tuple[Verdict, int]:
        """Compile and run candidate+harness; reward is 1 iff the verdict is Pass."""
        self.check_available(language)
        if harness.language != language:
            raise ValueError(
                f"harness language {harness.language!r} does not match {language!r}"
            )
        toolchain = self.toolchains[language]

        try:
            workdir = Path(tempfile.mkdtemp(prefix="bt-run-", dir=self._scratch()))
        except OSError as exc:
            raise InternalError(f"cannot create working directory: {exc}") from exc
        try:
            src = workdir / toolchain.source_filename
            exe = workdir / "prog"
            src.write_text(assemble_program(harness, candidate_source), encoding="utf-8")

            if toolchain.compile_cmd is not None:
                verdict = self._compile_phase(toolchain, src, exe, workdir, limits)
                if verdict is not None:
                    return verdict, 0
            verdict = self._run_phase(toolchain, src, exe, workdir, limits)
            return verdict, 1 if verdict.outcome is Outcome.PASS else 0
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    # Toolchain launchers (rustup and friends) need these to resolve.
    _PASSTHROUGH_ENV = ("RUSTUP_HOME", "CARGO_HOME", "RUSTUP_TOOLCHAIN")

    def _child_env(self, workdir: Path) -> dict[str, str]:
        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "HOME": str(workdir),
            "LC_ALL": "C.UTF-8",
        }
        for key in self._PASSTHROUGH_ENV:
            if key in os.environ:
                env[key] = os.environ[key]
        return env

    def _compile_phase(
        self,
        toolchain: ToolchainConfig,
        src: Path,
        exe: Path,
        workdir: Path,
        limits: ExecutionLimits,
    ) -> Verdict | None:
        cmd = _fill(toolchain.compile_cmd, src, exe, workdir)
        started = time.monotonic()
        try:
            proc = subprocess.run(
                cmd,
                cwd=workdir,
                env=self._child_env(workdir),
                stdin=subprocess.DEVNULL,
                capture_output=True,
                timeout=limits.compile_timeout,
            )
        except subprocess.TimeoutExpired:
            return Verdict(
                outcome=Outcome.TIMEOUT,
                diagnostics="compiler exceeded its time budget",
                wall_time=time.monotonic() - started,
            )
        except OSError as exc:
            raise InternalError(f"failed to launch compiler: {exc}") from exc
        if proc.returncode != 0:
            return Verdict(
                outcome=Outcome.COMPILE_ERROR,
                diagnostics=_truncate(proc.stderr + proc.stdout, limits.output_cap),
                wall_time=time.monotonic() - started,
            )
        return None

    def _run_phase(
        self,
        toolchain: ToolchainConfig,
        src: Path,
        exe: Path,
        workdir: Path,
        limits: ExecutionLimits,
    ) -> Verdict:
        cmd = _fill(toolchain.run_cmd, src, exe, workdir)
        out_path = workdir / "stdout.txt"
        err_path = workdir / "stderr.txt"

        def apply_limits() -> None:
            resource.setrlimit(resource.RLIMIT_AS, (limits.memory_cap, limits.memory_cap))
            resource.setrlimit(resource.RLIMIT_FSIZE, (_FSIZE_CAP, _FSIZE_CAP))
            resource.setrlimit(resource.RLIMIT_CORE, (0, 0))

        started = time.monotonic()
        timed_out = False
        try:
            with out_path.open("wb") as out, err_path.open("wb") as err:
                proc = subprocess.run(
                    cmd,
                    cwd=workdir,
                    env=self._child_env(workdir),
                    stdin=subprocess.DEVNULL,
                    stdout=out,
                    stderr=err,
                    preexec_fn=apply_limits,
                    timeout=limits.run_timeout,
                )
            returncode = proc.returncode
        except subprocess.TimeoutExpired:
            timed_out = True
            returncode = -1
        except OSError as exc:
            raise InternalError(f"failed to launch candidate: {exc}") from exc
        wall = time.monotonic() - started

        stderr_bytes = err_path.read_bytes() if err_path.exists() else b""
        stdout_bytes = out_path.read_bytes() if out_path.exists() else b""
        diagnostics = _truncate(stderr_bytes + stdout_bytes, limits.output_cap)

        if timed_out:
            return Verdict(outcome=Outcome.TIMEOUT, diagnostics=diagnostics, wall_time=wall)
        if returncode == 0:
            return Verdict(outcome=Outcome.PASS, diagnostics="", wall_time=wall)
        # The marker is printed immediately before exit, so scan the tail.
        match = None
        for match in _FAIL_MARKER.finditer(stderr_bytes[-4096:]):
            pass
        if match is not None:
            return Verdict(
                outcome=Outcome.WRONG_ANSWER,
                first_failing_case=int(match.group(1)),
                diagnostics=diagnostics,
                wall_time=wall,
            )
        return Verdict(outcome=Outcome.RUNTIME_ERROR, diagnostics=diagnostics, wall_time=wall)

    def verify_group(
        self,
        candidates: list[str],
        language: str,
        harness: HarnessSource,
        limits: ExecutionLimits = ExecutionLimits(),
        parallelism: int = 4,
    ) -> list[tuple[Verdict, int] | Exception]:
        """Verify a batch; results align positionally with the input.

        Per-candidate infrastructure errors (InternalError) occupy their
        slot instead of aborting siblings; a missing toolchain raises
        immediately since no candidate could run.
        """
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        self.check_available(language)

        def one(source: str) -> tuple[Verdict, int] | Exception:
            try:
                return self.verify(source, language, harness, limits)
            except (InternalError, SandboxUnavailable) as exc:
                return exc

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, candidates))
