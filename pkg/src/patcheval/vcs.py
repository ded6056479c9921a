"""Thin subprocess wrapper around the git CLI."""

from __future__ import annotations

import io
import subprocess
import tarfile
from pathlib import Path

from .errors import PatchEvalError


class GitError(PatchEvalError):
    pass


def run_git(repo: str | Path, *args: str, check: bool = True, data: bytes | None = None) -> str:
    proc = subprocess.run(
        ["git", "-C", str(repo), *args],
        capture_output=True,
        input=data,
        )
    if check and proc.returncode != 0:
        raise GitError(
            f"git {' '.join(args)} failed ({proc.returncode}): {proc.stderr.decode(errors='replace').strip()}"
        )
    return proc.stdout.decode(errors="replace")


def run_git_bytes(repo: str | Path, *args: str) -> bytes:
    proc = subprocess.run(["git", "-C", str(repo), *args], capture_output=True)
    if proc.returncode != 0:
        raise GitError(
            f"git {' '.join(args)} failed ({proc.returncode}): {proc.stderr.decode(errors='replace').strip()}"
        )
    return proc.stdout


def file_at_revision(repo: str | Path, revision: str, path: str) -> str:
    return run_git_bytes(repo, "show", f"{revision}:{path}").decode()


def export_tree(repo: str | Path, revision: str, dest: str | Path) -> None:
    """Materialize a revision's full tree into ``dest`` (created if needed)."""
    Path(dest).mkdir(parents=True, exist_ok=True)
    blob = run_git_bytes(repo, "archive", "--format=tar", revision)
    with tarfile.open(fileobj=io.BytesIO(blob)) as tf:
        tf.extractall(dest)


def is_repository(path: str | Path) -> bool:
    p = Path(path)
    if not p.is_dir():
        return False
    try:
        run_git(p, "rev-parse", "--git-dir")
        return True
    except GitError:
        return False
