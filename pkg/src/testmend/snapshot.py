"""Two-version repository snapshots and line-diff utilities.

A snapshot is a pair of directory trees (``pre`` and ``post``) holding
the repository before and after the focal change.  Files are addressed
by version + relative path.  Diffs are computed with
:class:`difflib.SequenceMatcher` and kept as structured hunks so they
can be re-rendered (unified or changed-lines-only) and re-applied; the
round trip ``apply_diff(a, unified_diff(a, b)) == b`` is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from difflib import SequenceMatcher
from pathlib import Path

from testmend.errors import InputError, PatchConflict
from testmend.javasrc.format import CursorPos

PRE = "pre"
POST = "post"
VERSIONS = (PRE, POST)


@dataclass(frozen=True)
class Location:
    """A range inside one file of one snapshot version."""

    version: str
    file: str
    start: CursorPos
    end: CursorPos

    def describe(self) -> str:
        return f"{self.version}:{self.file}:{self.start.line + 1}:{self.start.col + 1}"


class RepoSnapshot:
    """Read-only access to the two version trees."""

    def __init__(self, pre_root: str | Path, post_root: str | Path):
        self.pre_root = Path(pre_root)
        self.post_root = Path(post_root)
        for root in (self.pre_root, self.post_root):
            if not root.is_dir():
                raise InputError(f"snapshot root is not a directory: {root}")
        self._cache: dict[tuple[str, str], str] = {}

    def root(self, version: str) -> Path:
        if version == PRE:
            return self.pre_root
        if version == POST:
            return self.post_root
        raise InputError(f"unknown snapshot version {version!r}")

    def path(self, version: str, relpath: str) -> Path:
        return self.root(version) / relpath

    def exists(self, version: str, relpath: str) -> bool:
        return self.path(version, relpath).is_file()

    def read(self, version: str, relpath: str) -> str:
        """File content with newlines normalized to LF."""
        key = (version, relpath)
        if key not in self._cache:
            p = self.path(version, relpath)
            if not p.is_file():
                raise InputError(f"no such file in {version} tree: {relpath}")
            text = p.read_text(encoding="utf-8")
            self._cache[key] = text.replace("\r\n", "\n").replace("\r", "\n")
        return self._cache[key]

    def read_or_empty(self, version: str, relpath: str) -> str:
        return self.read(version, relpath) if self.exists(version, relpath) else ""

    def java_files(self, version: str) -> list[str]:
        """Relative paths of all .java files, sorted for determinism."""
        root = self.root(version)
        return sorted(
            str(p.relative_to(root)).replace("\\", "/")
            for p in root.rglob("*.java")
            if p.is_file()
        )


@dataclass(frozen=True)
class Hunk:
    """One contiguous change: ``deleted`` lines at ``pre_start`` in the
    old text are replaced by ``added`` lines at ``post_start`` in the
    new text (0-based line indexes; either side may be empty)."""

    pre_start: int
    post_start: int
    deleted: tuple[str, ...]
    added: tuple[str, ...]

    @property
    def pre_end(self) -> int:
        return self.pre_start + len(self.deleted)

    @property
    def post_end(self) -> int:
        return self.post_start + len(self.added)

    def changed_lines(self) -> list[str]:
        return [f"- {line}" for line in self.deleted] + [f"+ {line}" for line in self.added]


@dataclass(frozen=True)
class DiffText:
    """A structured line diff between two texts."""

    a_lines: tuple[str, ...]
    b_lines: tuple[str, ...]
    hunks: tuple[Hunk, ...]
    a_trailing_newline: bool = True
    b_trailing_newline: bool = True

    def is_empty(self) -> bool:
        return not self.hunks

    def changed_only(self) -> str:
        """Only the -/+ lines, hunks in order, no positional headers."""
        out: list[str] = []
        for hunk in self.hunks:
            out.extend(hunk.changed_lines())
        return "\n".join(out)

    def unified(self, context: int = 3) -> str:
        """Classic unified rendering with ``@@`` headers."""
        if not self.hunks:
            return ""
        groups: list[list[Hunk]] = []
        for hunk in self.hunks:
            if groups and hunk.pre_start - groups[-1][-1].pre_end <= 2 * context:
                groups[-1].append(hunk)
            else:
                groups.append([hunk])
        out: list[str] = []
        for group in groups:
            a_lo = max(0, group[0].pre_start - context)
            a_hi = min(len(self.a_lines), group[-1].pre_end + context)
            b_lo = group[0].post_start - (group[0].pre_start - a_lo)
            a_count = a_hi - a_lo
            b_count = a_count
            for hunk in group:
                b_count += len(hunk.added) - len(hunk.deleted)
            out.append(f"@@ -{a_lo + 1},{a_count} +{b_lo + 1},{b_count} @@")
            cursor = a_lo
            for hunk in group:
                for line in self.a_lines[cursor : hunk.pre_start]:
                    out.append(f" {line}")
                for line in hunk.deleted:
                    out.append(f"-{line}")
                for line in hunk.added:
                    out.append(f"+{line}")
                cursor = hunk.pre_end
            for line in self.a_lines[cursor:a_hi]:
                out.append(f" {line}")
        return "\n".join(out)


def unified_diff(a: str, b: str) -> DiffText:
    """Line diff of two texts (SequenceMatcher alignment, autojunk off)."""
    a_lines = tuple(a.splitlines())
    b_lines = tuple(b.splitlines())
    matcher = SequenceMatcher(a=a_lines, b=b_lines, autojunk=False)
    hunks = [
        Hunk(
            pre_start=i1,
            post_start=j1,
            deleted=a_lines[i1:i2],
            added=b_lines[j1:j2],
        )
        for tag, i1, i2, j1, j2 in matcher.get_opcodes()
        if tag != "equal"
    ]
    return DiffText(
        a_lines=a_lines,
        b_lines=b_lines,
        hunks=tuple(hunks),
        a_trailing_newline=a.endswith("\n"),
        b_trailing_newline=b.endswith("\n"),
    )


def apply_diff(a: str, diff: DiffText) -> str:
    """Apply ``diff`` to ``a``; exact inverse of :func:`unified_diff`."""
    a_lines = a.splitlines()
    out: list[str] = []
    cursor = 0
    for hunk in diff.hunks:
        if hunk.pre_start < cursor or hunk.pre_end > len(a_lines):
            raise PatchConflict(f"hunk at line {hunk.pre_start + 1} out of range")
        expected = list(hunk.deleted)
        actual = a_lines[hunk.pre_start : hunk.pre_end]
        if actual != expected:
            raise PatchConflict(
                f"hunk at line {hunk.pre_start + 1} does not match: "
                f"expected {expected!r}, found {actual!r}"
            )
        out.extend(a_lines[cursor : hunk.pre_start])
        out.extend(hunk.added)
        cursor = hunk.pre_end
    out.extend(a_lines[cursor:])
    text = "\n".join(out)
    if diff.b_trailing_newline and out:
        text += "\n"
    return text


__all__ = [
    "PRE",
    "POST",
    "VERSIONS",
    "CursorPos",
    "Location",
    "RepoSnapshot",
    "Hunk",
    "DiffText",
    "unified_diff",
    "apply_diff",
]
