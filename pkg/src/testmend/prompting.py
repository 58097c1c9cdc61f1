"""Repair prompt assembly and the attempt/selection loop.

The prompt presents, in order: the expert role, the task, the
canonicalized obsolete test, a unified diff of the focal method, and the
retained context groups each under its own labelled section.  An empty
context bundle yields exactly the naive baseline prompt.  ``repair``
issues independent completion attempts, extracts one method per
response, syntax-checks it, and selects a winner.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass

from testmend.collectors import TROCtxBundle
from testmend.errors import EmptyReference, ParseError, ProviderError
from testmend.javasrc import lexer
from testmend.javasrc.ast import MethodDecl, parse_java
from testmend.javasrc.format import canonicalize
from testmend.javasrc.lexer import token_texts
from testmend.metrics import code_bleu, code_tokens, normalize_method_text
from testmend.provider import ChatProvider, Message
from testmend.rerank import ScoredChunk
from testmend.signatures import FocalChange
from testmend.snapshot import unified_diff

log = logging.getLogger(__name__)

DEFAULT_TOKEN_CAP = 8000
DEFAULT_ATTEMPTS = 3
DEFAULT_TEMPERATURE = 0.1

SYSTEM_TEXT = (
    "You are an expert in Java software evolution. You update unit tests "
    "that stopped compiling after the methods they exercise changed."
)
TASK_TEXT = (
    "The focal method's signature changed between two versions of the "
    "codebase, which broke the unit test below. Rewrite the test method so "
    "it works against the new version while preserving the original "
    "intent. Treat the reference sections that follow as guidance. Reply "
    "with exactly one fenced Java code block containing the complete "
    "repaired test method and nothing else."
)

USAGE_SECTION = ("Usage changes of the focal method",
                 "How other callers of {name} changed between versions.")
ENV_FOCAL_SECTION = ("Environment changes of the focal method",
                     "Changes in the focal method's class and parent classes.")
ENV_TEST_SECTION = ("Environment changes of the test",
                    "Changes in the test's class and parent classes.")
CLASS_SECTION_DESC = "Declarations available on the updated signature types."

_FENCE_RE = re.compile(r"```(?:java)?[ \t]*\r?\n(.*?)```", re.DOTALL | re.IGNORECASE)


@dataclass(frozen=True)
class PromptSection:
    label: str
    description: str
    chunk_texts: tuple[str, ...]


@dataclass(frozen=True)
class RepairPrompt:
    system_text: str
    task_text: str
    original_test_text: str
    focal_diff_text: str
    context_sections: tuple[PromptSection, ...] = ()
    trimmed_chunks: int = 0

    def user_text(self) -> str:
        parts = [
            self.task_text,
            "## Original test method",
            f"```java\n{self.original_test_text}\n```",
            "## Focal method change",
            f"```diff\n{self.focal_diff_text}\n```",
        ]
        for section in self.context_sections:
            parts.append(f"## {section.label}")
            parts.append(section.description)
            parts.extend(section.chunk_texts)
        return "\n\n".join(parts)

    def messages(self) -> list[Message]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text()},
        ]

    def render(self) -> str:
        """The exact text hashed for replay keys (role-tagged messages)."""
        return "\n\n".join(f"[{m['role']}]\n{m['content']}" for m in self.messages())

    def token_count(self) -> int:
        return len(self.render().split())

    def as_dict(self) -> dict:
        return {
            "system_text": self.system_text,
            "task_text": self.task_text,
            "original_test_text": self.original_test_text,
            "focal_diff_text": self.focal_diff_text,
            "context_sections": [
                {
                    "label": s.label,
                    "description": s.description,
                    "chunk_texts": list(s.chunk_texts),
                }
                for s in self.context_sections
            ],
            "trimmed_chunks": self.trimmed_chunks,
        }


def _canonical_or_raw(text: str) -> str:
    try:
        return canonicalize(text)
    except ParseError:
        return text


def focal_diff_text(focal: FocalChange, pre_text: str = "", post_text: str = "") -> str:
    """Unified diff of the focal method, or a signature-level diff when
    the method bodies are not supplied."""
    if pre_text or post_text:
        diff = unified_diff(_canonical_or_raw(pre_text), _canonical_or_raw(post_text))
        rendered = diff.unified(context=3)
        if rendered:
            return rendered
    return f"- {focal.original.render()}\n+ {focal.updated.render()}"


@dataclass
class _TrimEntry:
    family_rank: int  # lower rank is trimmed first on ties
    family_pos: int
    section_index: int
    text: str
    score: float


def _chunk_scores(rankings: dict[str, list[ScoredChunk]] | None) -> dict:
    scores: dict[tuple[str, str], float] = {}
    for name, ranked in (rankings or {}).items():
        for sc in ranked:
            scores.setdefault((name, sc.chunk.text), sc.score)
    return scores


def assemble_prompt(
    focal: FocalChange,
    test_body: str,
    troctx: TROCtxBundle,
    *,
    focal_pre_text: str = "",
    focal_post_text: str = "",
    token_cap: int = DEFAULT_TOKEN_CAP,
    rankings: dict[str, list[ScoredChunk]] | None = None,
) -> RepairPrompt:
    scores = _chunk_scores(rankings)
    sections: list[tuple[str, str, list[str]]] = []
    entries: list[_TrimEntry] = []

    def add_section(label, description, pairs, family_rank, score_key):
        if not pairs:
            return
        index = len(sections)
        sections.append((label, description, [text for text, _ in pairs]))
        for pos, (text, pinned) in enumerate(pairs):
            score = math.inf if pinned else scores.get((score_key, text), 0.0)
            entries.append(_TrimEntry(family_rank, pos, index, text, score))

    for type_name, group in troctx.class_ctx.items():
        add_section(
            f"Defined in class {type_name}",
            CLASS_SECTION_DESC,
            [(c.text, c.is_constructor) for c in group.chunks],
            family_rank=3,
            score_key=f"class:{type_name}",
        )
    name = focal.updated.name
    add_section(
        USAGE_SECTION[0],
        USAGE_SECTION[1].format(name=name),
        [(c.text, False) for c in troctx.usage_ctx],
        family_rank=2,
        score_key="usage",
    )
    add_section(
        ENV_FOCAL_SECTION[0],
        ENV_FOCAL_SECTION[1],
        [(c.text, False) for c in troctx.env_ctx_focal],
        family_rank=1,
        score_key="env_focal",
    )
    add_section(
        ENV_TEST_SECTION[0],
        ENV_TEST_SECTION[1],
        [(c.text, False) for c in troctx.env_ctx_test],
        family_rank=0,
        score_key="env_test",
    )

    def build(trimmed: int) -> RepairPrompt:
        return RepairPrompt(
            system_text=SYSTEM_TEXT,
            task_text=TASK_TEXT,
            original_test_text=_canonical_or_raw(test_body),
            focal_diff_text=focal_diff_text(focal, focal_pre_text, focal_post_text),
            context_sections=tuple(
                PromptSection(label, desc, tuple(texts))
                for label, desc, texts in sections
                if texts
            ),
            trimmed_chunks=trimmed,
        )

    trimmed = 0
    prompt = build(trimmed)
    while prompt.token_count() > token_cap:
        removable = [e for e in entries if e.score != math.inf]
        if not removable:
            break
        victim = min(removable, key=lambda e: (e.score, e.family_rank, -e.family_pos))
        entries.remove(victim)
        sections[victim.section_index][2].remove(victim.text)
        trimmed += 1
        label = sections[victim.section_index][0]
        log.info(
            "prompt over %d tokens; dropped a chunk from %r (score %.3f)",
            token_cap,
            label,
            victim.score,
        )
        prompt = build(trimmed)
    return prompt


def naive_prompt(
    focal: FocalChange,
    test_body: str,
    *,
    focal_pre_text: str = "",
    focal_post_text: str = "",
) -> RepairPrompt:
    """The no-context baseline: role, task, test, and diff only."""
    return assemble_prompt(
        focal,
        test_body,
        TROCtxBundle(),
        focal_pre_text=focal_pre_text,
        focal_post_text=focal_post_text,
    )


# ----------------------------------------------------------------------
# response handling
# ----------------------------------------------------------------------


def _first_method_slice(content: str) -> str | None:
    prefix = "class __Wrapper {\n"
    wrapped = f"{prefix}{content}\n}}"
    try:
        java_file = parse_java(wrapped)
    except ParseError:
        return None
    methods = [
        m
        for cls in java_file.all_classes()
        for m in cls.members
        if isinstance(m, MethodDecl)
    ]
    if not methods:
        return None
    methods.sort(key=lambda m: (m.is_constructor, m.start))
    return wrapped[methods[0].start : methods[0].end]


_HEADER_PUNCT = frozenset({"(", ")", "[", "]", "<", ">", ",", ".", "...", "@", "&"})


def _refine_head(content: str, head: int, open_idx: int) -> int:
    """Walk back from the opening brace over plausible header tokens so
    surrounding prose is not swept into the extracted declaration."""
    try:
        tokens = lexer.lex(content[head:open_idx])
    except ParseError:
        return head
    start = None
    for tok in reversed(tokens):
        if tok.is_word() or tok.text in _HEADER_PUNCT:
            start = tok.offset
        else:
            break
    return head + start if start is not None else head


def _brace_scan(content: str) -> str | None:
    open_idx = content.find("{")
    if open_idx == -1:
        return None
    head = max(content.rfind(";", 0, open_idx), content.rfind("}", 0, open_idx)) + 1
    head = _refine_head(content, head, open_idx)
    depth = 0
    for i in range(open_idx, len(content)):
        if content[i] == "{":
            depth += 1
        elif content[i] == "}":
            depth -= 1
            if depth == 0:
                return content[head : i + 1].strip()
    return None


def extract_method_text(raw: str) -> str:
    """The repaired method from a model response.

    Preference order: fenced code block, then the first structurally
    parsed method declaration, then a raw brace scan, then the stripped
    response.  The result is always a contiguous substring of ``raw``.
    """
    match = _FENCE_RE.search(raw)
    content = match.group(1) if match else raw
    parsed = _first_method_slice(content)
    if parsed is not None:
        return parsed
    scanned = _brace_scan(content)
    if scanned is not None:
        return scanned
    return content.strip()


def validate_syntax(method_text: str) -> bool:
    """True iff the text is exactly one well-formed method declaration."""
    text = method_text.strip()
    if not text:
        return False
    wrapped = f"class __Wrapper {{\n{text}\n}}"
    try:
        java_file = parse_java(wrapped)
    except ParseError:
        return False
    if len(java_file.classes) != 1:
        return False
    members = java_file.classes[0].members
    if len(members) != 1 or not isinstance(members[0], MethodDecl):
        return False
    member_text = wrapped[members[0].start : members[0].end]
    try:
        return token_texts(member_text) == token_texts(text)
    except ParseError:
        return False


def token_edit_distance(a: list[str], b: list[str]) -> int:
    """Levenshtein distance over token sequences."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        current = [i]
        for j, tok_b in enumerate(b, start=1):
            cost = 0 if tok_a == tok_b else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return previous[-1]


@dataclass
class RepairCandidate:
    attempt: int
    raw_text: str
    method_text: str
    syntax_ok: bool

    def as_dict(self) -> dict:
        return {
            "attempt": self.attempt,
            "raw_text": self.raw_text,
            "method_text": self.method_text,
            "syntax_ok": self.syntax_ok,
        }


@dataclass
class RepairResult:
    candidates: list[RepairCandidate]
    selected: int
    selection_reason: str

    @property
    def selected_text(self) -> str:
        return self.candidates[self.selected].method_text

    @property
    def syntax_ok(self) -> bool:
        return self.candidates[self.selected].syntax_ok

    def as_dict(self) -> dict:
        return {
            "candidates": [c.as_dict() for c in self.candidates],
            "selected": self.selected,
            "selection_reason": self.selection_reason,
        }


def _select(
    candidates: list[RepairCandidate],
    original_test: str,
    ground_truth: str | None,
) -> tuple[int, str]:
    if ground_truth is not None:
        try:
            scores = [code_bleu(c.method_text, ground_truth) for c in candidates]
        except EmptyReference:
            scores = None
        if scores is not None:
            best = min(range(len(candidates)), key=lambda i: (-scores[i], i))
            return best, "best-code-bleu"
    valid = [i for i, c in enumerate(candidates) if c.syntax_ok]
    if not valid:
        return 0, "all-invalid"
    original_tokens = code_tokens(normalize_method_text(original_test))

    def distance(i: int) -> int:
        tokens = code_tokens(normalize_method_text(candidates[i].method_text))
        return token_edit_distance(tokens, original_tokens)

    best = min(valid, key=lambda i: (distance(i), i))
    return best, "valid-min-edit"


def repair(
    prompt: RepairPrompt,
    provider: ChatProvider,
    attempts: int = DEFAULT_ATTEMPTS,
    temperature: float = DEFAULT_TEMPERATURE,
    ground_truth: str | None = None,
) -> RepairResult:
    """Run the attempt loop and select one repaired method.

    With a ground truth the highest-CodeBLEU candidate wins (evaluation
    setting); without one, the syntactically valid candidate closest to
    the original test wins.  Attempts that fail at the provider shrink
    the candidate pool; an empty pool is fatal for the sample.
    """
    messages = prompt.messages()
    candidates: list[RepairCandidate] = []
    for attempt in range(attempts):
        try:
            raw = provider.complete(messages, temperature=temperature)
        except ProviderError as exc:
            log.warning("repair attempt %d failed: %s", attempt, exc)
            continue
        method_text = extract_method_text(raw)
        candidates.append(
            RepairCandidate(
                attempt=attempt,
                raw_text=raw,
                method_text=method_text,
                syntax_ok=validate_syntax(method_text),
            )
        )
    if not candidates:
        raise ProviderError(f"all {attempts} repair attempts failed")
    selected, reason = _select(candidates, prompt.original_test_text, ground_truth)
    return RepairResult(candidates=candidates, selected=selected, selection_reason=reason)
