"""Benchmark sample format: manifest loading and hygiene validation.

A manifest is a JSON array.  Each entry names a sample id, the pre/post
snapshot roots, the focal method's locators in both versions, the test
method's locator in the pre version, the ground-truth repaired test
(inline or by path), and optional project/commit metadata.  Entries that
fail a hygiene rule are skipped and reported with the violated rule:
an unresolvable or empty test (``incomplete-test``), a focal method
without bodies on both sides (``signature-only-focal``), or a test that
never names the focal method (``focal-not-used``).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from testmend.errors import InputError, ManifestError, ParseError
from testmend.javasrc.lexer import token_texts
from testmend.signatures import MethodLocator, method_body_text, method_full_text
from testmend.snapshot import RepoSnapshot

log = logging.getLogger(__name__)

RULE_INCOMPLETE_TEST = "incomplete-test"
RULE_SIGNATURE_ONLY_FOCAL = "signature-only-focal"
RULE_FOCAL_NOT_USED = "focal-not-used"
RULE_MISSING_SNAPSHOT = "missing-snapshot"


@dataclass(frozen=True)
class RepairSample:
    id: str
    pre_root: str
    post_root: str
    focal_pre: MethodLocator
    focal_post: MethodLocator
    test: MethodLocator
    ground_truth: str | None = None
    project: str = ""
    commit: str = ""

    def snapshot(self) -> RepoSnapshot:
        return RepoSnapshot(self.pre_root, self.post_root)


@dataclass
class ManifestLoad:
    samples: list[RepairSample] = field(default_factory=list)
    rejects: list[tuple[str, str]] = field(default_factory=list)  # (id, rule)


def read_manifest(path: str | Path) -> list[dict]:
    """The manifest's entry objects, shape-checked but not validated."""
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ManifestError(f"manifest {p} must be a JSON array of entries")
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            raise ManifestError(f"manifest entry {i} lacks a string 'id'")
    return data


def _locator(record: dict, file_key: str, params_key: str, post: bool = False) -> MethodLocator:
    params = record.get(params_key)
    classes = record["classes"]
    method = record["method"]
    if post:
        # Renames may move or rename the method in the post tree.
        classes = record.get("classes_post", classes)
        method = record.get("method_post", method)
    return MethodLocator(
        file=record[file_key],
        classes=tuple(classes),
        method=method,
        params=tuple(params) if params is not None else None,
    )


def _build_sample(entry: dict, base: Path) -> RepairSample:
    try:
        focal = entry["focal"]
        test = entry["test"]
        sample = RepairSample(
            id=entry["id"],
            pre_root=str((base / entry["pre_root"]).resolve()),
            post_root=str((base / entry["post_root"]).resolve()),
            focal_pre=_locator(focal, "file_pre", "params_pre"),
            focal_post=_locator(focal, "file_post", "params_post", post=True),
            test=_locator(test, "file", "params"),
            project=entry.get("project", ""),
            commit=entry.get("commit", ""),
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"entry {entry.get('id', '?')} is malformed: {exc}") from exc
    ground_truth = entry.get("ground_truth")
    gt_path = entry.get("ground_truth_path")
    if ground_truth is None and gt_path is not None:
        try:
            ground_truth = (base / gt_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ManifestError(
                f"entry {entry['id']}: ground truth file {gt_path} unreadable: {exc}"
            ) from exc
    if ground_truth is not None:
        # Candidates are compared stripped; surrounding whitespace in a
        # ground-truth file is a storage artifact, not part of the answer.
        sample = replace(sample, ground_truth=ground_truth.strip())
    return sample


def validate_sample(sample: RepairSample) -> str | None:
    """The violated hygiene rule, or None for a clean sample."""
    try:
        snapshot = sample.snapshot()
    except InputError:
        return RULE_MISSING_SNAPSHOT
    try:
        test_source = snapshot.read("pre", sample.test.file)
        test_text = method_full_text(test_source, sample.test)
        test_body = method_body_text(test_source, sample.test)
    except (InputError, OSError):
        return RULE_INCOMPLETE_TEST
    if not test_body.strip("{} \t\n"):
        return RULE_INCOMPLETE_TEST
    try:
        pre_body = method_body_text(
            snapshot.read("pre", sample.focal_pre.file), sample.focal_pre
        )
        post_body = method_body_text(
            snapshot.read("post", sample.focal_post.file), sample.focal_post
        )
    except (InputError, OSError):
        return RULE_SIGNATURE_ONLY_FOCAL
    if not pre_body.strip("{} \t\n") or not post_body.strip("{} \t\n"):
        return RULE_SIGNATURE_ONLY_FOCAL
    try:
        test_tokens = token_texts(test_text)
    except ParseError:
        return RULE_INCOMPLETE_TEST
    if sample.focal_pre.method not in test_tokens:
        return RULE_FOCAL_NOT_USED
    return None


def load_manifest(path: str | Path) -> ManifestLoad:
    """Samples that pass hygiene, plus (id, rule) pairs for the rest."""
    p = Path(path)
    entries = read_manifest(p)
    base = p.parent
    load = ManifestLoad()
    seen: set[str] = set()
    for entry in entries:
        entry_id = entry["id"]
        if entry_id in seen:
            load.rejects.append((entry_id, "duplicate-id"))
            continue
        seen.add(entry_id)
        try:
            sample = _build_sample(entry, base)
        except ManifestError as exc:
            log.warning("skipping manifest entry: %s", exc)
            load.rejects.append((entry_id, "malformed-entry"))
            continue
        rule = validate_sample(sample)
        if rule is not None:
            load.rejects.append((entry_id, rule))
            continue
        load.samples.append(sample)
    return load
