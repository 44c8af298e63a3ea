"""Multi-tree file index and the key-derivation hierarchy.

Folders are internal nodes, files are leaves, and every node carries a
path-like number (rendered ``1_2_1``). One root key spans the whole tree
through ``child_key = hash(parent_key || number || parent_key)``. Re-keyed
nodes get fresh random keys held in a shadow tree; they break out of the
derivation hierarchy, so minimum-key-group computation treats them as cut
off from their parent.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

from .crypto import Framework, SymKey, counters, hash_bytes, random_bytes
from .errors import (
    EmptyListing,
    MissingUpdateKey,
    NodeDeleted,
    ParentNotFolder,
    PathUnknown,
    UnknownLeaf,
)

FOLDER = "folder"
FILE = "file"


@dataclass(frozen=True)
class NumberPath:
    """A node number: the ordered folder segments from the root down."""

    segments: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("number path must be non-empty")
        if any(s < 1 for s in self.segments):
            raise ValueError("number segments are positive integers")

    @classmethod
    def parse(cls, text: str) -> "NumberPath":
        return cls(tuple(int(part) for part in text.split("_")))

    def render(self) -> str:
        return "_".join(str(s) for s in self.segments)

    def encode(self) -> bytes:
        """Canonical octets: one big-endian 4-octet word per segment."""
        return b"".join(s.to_bytes(4, "big") for s in self.segments)

    def child(self, segment: int) -> "NumberPath":
        return NumberPath(self.segments + (segment,))

    @property
    def parent(self) -> "NumberPath | None":
        if len(self.segments) == 1:
            return None
        return NumberPath(self.segments[:-1])

    @property
    def depth(self) -> int:
        return len(self.segments)

    def is_ancestor_of(self, other: "NumberPath", strict: bool = False) -> bool:
        if len(self.segments) > len(other.segments):
            return False
        if strict and len(self.segments) == len(other.segments):
            return False
        return other.segments[: len(self.segments)] == self.segments

    def __str__(self) -> str:
        return self.render()


ROOT = NumberPath((1,))


def path_sort_key(path: NumberPath) -> tuple[int, tuple[int, ...]]:
    """Deterministic order: shallower paths first, then lexicographic."""
    return (len(path.segments), path.segments)


@dataclass
class IndexNode:
    number: NumberPath
    kind: str
    name: str
    encrypted_name: bytes = b""
    updated: bool = False
    deleted: bool = False
    t_modified: int = 0
    child_segments: list[int] = field(default_factory=list)


class IndexTree:
    """The owner's numbered folder/file hierarchy. Single-writer."""

    def __init__(self) -> None:
        self.nodes: dict[NumberPath, IndexNode] = {
            ROOT: IndexNode(ROOT, FOLDER, "")
        }

    @property
    def root(self) -> NumberPath:
        return ROOT

    def __contains__(self, path: NumberPath) -> bool:
        return path in self.nodes

    def node(self, path: NumberPath) -> IndexNode:
        try:
            return self.nodes[path]
        except KeyError:
            raise PathUnknown(f"no node numbered {path}") from None

    def add_child(self, parent: NumberPath, kind: str, name: str) -> IndexNode:
        """Append a child with the next sequential segment number."""
        parent_node = self.node(parent)
        if parent_node.kind != FOLDER:
            raise ParentNotFolder(f"{parent} is not a folder")
        segment = max(parent_node.child_segments, default=0) + 1
        child = IndexNode(parent.child(segment), kind, name)
        parent_node.child_segments.append(segment)
        self.nodes[child.number] = child
        return child

    def revive_child(self, parent: NumberPath, segment: int, name: str) -> IndexNode:
        """Reuse a deleted child's number for a new file."""
        node = self.node(parent.child(segment))
        if not node.deleted:
            raise ValueError(f"{node.number} is not deleted; cannot reuse")
        node.deleted = False
        node.kind = FILE
        node.name = name
        node.encrypted_name = b""
        return node

    def children(self, path: NumberPath) -> list[IndexNode]:
        node = self.node(path)
        return [self.nodes[path.child(s)] for s in node.child_segments]

    def walk(self, under: NumberPath | None = None):
        """Preorder traversal of the subtree rooted at ``under``."""
        start = under if under is not None else ROOT
        stack = [self.node(start)]
        while stack:
            node = stack.pop()
            yield node
            for child in reversed(self.children(node.number)):
                stack.append(child)

    def is_live_leaf(self, path: NumberPath) -> bool:
        node = self.nodes.get(path)
        if node is None or node.kind != FILE or node.deleted:
            return False
        parent = path.parent
        while parent is not None:
            if self.nodes[parent].deleted:
                return False
            parent = parent.parent
        return True

    def live_leaves(self, under: NumberPath | None = None) -> list[NumberPath]:
        start = under if under is not None else ROOT
        out = []
        for node in self.walk(start):
            if node.deleted:
                continue
            if node.kind == FILE:
                out.append(node.number)
        # walk() skips deleted subtrees only at the node itself; filter ancestors
        return [p for p in out if self.is_live_leaf(p)]

    def height(self) -> int:
        return max(len(p.segments) for p in self.nodes)

    def serialize(self) -> str:
        """Canonical line form: path, kind, flags, base64url(encrypted name)."""
        lines = []
        for path in sorted(self.nodes, key=lambda p: p.segments):
            node = self.nodes[path]
            flags = ("u" if node.updated else "-") + ("d" if node.deleted else "-")
            name64 = base64.urlsafe_b64encode(node.encrypted_name).decode("ascii")
            lines.append(f"{path.render()}\t{node.kind}\t{flags}\t{name64}")
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "IndexTree":
        tree = cls.__new__(cls)
        tree.nodes = {}
        for line in text.splitlines():
            if not line:
                continue
            rendered, kind, flags, name64 = line.split("\t")
            path = NumberPath.parse(rendered)
            node = IndexNode(
                path,
                kind,
                "",
                encrypted_name=base64.urlsafe_b64decode(name64),
                updated="u" in flags,
                deleted="d" in flags,
            )
            tree.nodes[path] = node
            parent = path.parent
            if parent is not None:
                tree.nodes[parent].child_segments.append(path.segments[-1])
        if ROOT not in tree.nodes:
            raise EmptyListing("serialized tree lacks a root")
        return tree


def build_index(listing: dict) -> IndexTree:
    """Build the numbered index from a nested name listing.

    ``listing`` maps names to either a nested mapping (a folder) or None
    (a file). Numbers follow insertion order within each folder, starting
    at 1, so the first file of the first folder under the root gets 1_1_1.
    """
    if not listing:
        raise EmptyListing("listing has no entries")
    tree = IndexTree()

    def insert(parent: NumberPath, entries: dict) -> None:
        for name, sub in entries.items():
            if isinstance(sub, dict):
                child = tree.add_child(parent, FOLDER, name)
                insert(child.number, sub)
            else:
                tree.add_child(parent, FILE, name)

    insert(ROOT, listing)
    return tree


class UpdateTree:
    """Shadow tree: fresh random keys for re-keyed node numbers."""

    def __init__(self) -> None:
        self.entries: dict[NumberPath, SymKey] = {}

    def __contains__(self, path: NumberPath) -> bool:
        return path in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, path: NumberPath) -> SymKey | None:
        return self.entries.get(path)

    def set_fresh(self, path: NumberPath, key: SymKey) -> None:
        self.entries[path] = key


@dataclass(frozen=True)
class KeyGroup:
    """Minimum key group: (number, key) pairs handed to a user."""

    pairs: tuple[tuple[NumberPath, SymKey], ...]

    @property
    def paths(self) -> list[NumberPath]:
        return [path for path, _ in self.pairs]

    def __len__(self) -> int:
        return len(self.pairs)


def derive_key(parent_key: SymKey, child_segment: int) -> SymKey:
    """One derivation step: hash(parent || segment || parent), truncated
    to the parent key's length."""
    counters.derive_calls += 1
    digest = hash_bytes(
        parent_key.data + child_segment.to_bytes(4, "big") + parent_key.data
    )
    return SymKey(digest[: len(parent_key.data)], role="derived")


def derive_along(key: SymKey, ancestor: NumberPath, descendant: NumberPath) -> SymKey:
    """Fold derivation steps from an ancestor's key down to a descendant."""
    if not ancestor.is_ancestor_of(descendant):
        raise ValueError(f"{ancestor} is not an ancestor of {descendant}")
    for segment in descendant.segments[len(ancestor.segments):]:
        key = derive_key(key, segment)
    return key


def key_for_path(
    root_key: SymKey,
    path: NumberPath,
    update_tree: UpdateTree | None = None,
    tree: IndexTree | None = None,
) -> SymKey:
    """Current key of a node: derivation starts from the deepest re-keyed
    ancestor-or-self when one exists, otherwise from the root key."""
    if tree is not None and path not in tree:
        raise PathUnknown(f"no node numbered {path}")
    start = NumberPath(path.segments[:1])
    start_key = root_key
    if update_tree is not None:
        for cut in range(len(path.segments), 0, -1):
            prefix = NumberPath(path.segments[:cut])
            fresh = update_tree.get(prefix)
            if fresh is not None:
                start, start_key = prefix, fresh
                break
    return derive_along(start_key, start, path)


def mark_updated(
    tree: IndexTree,
    update_tree: UpdateTree,
    path: NumberPath,
    profile: Framework,
    rng=None,
) -> SymKey:
    """Flag a node re-keyed and store a fresh random key for it.

    Re-marking an already re-keyed node replaces the stored key.
    """
    node = tree.node(path)
    if node.deleted:
        raise NodeDeleted(f"{path} is deleted")
    node.updated = True
    fresh = SymKey(random_bytes(profile.key_bytes, rng), role="derived")
    update_tree.set_fresh(path, fresh)
    return fresh


def allocate_number(tree: IndexTree, parent: NumberPath) -> tuple[NumberPath, bool]:
    """Number for a new file under ``parent``: the lowest deleted child
    number when one exists (reuse), else the next sequential number."""
    parent_node = tree.node(parent)
    if parent_node.kind != FOLDER:
        raise ParentNotFolder(f"{parent} is not a folder")
    deleted = sorted(
        s for s in parent_node.child_segments if tree.nodes[parent.child(s)].deleted
    )
    if deleted:
        return parent.child(deleted[0]), True
    return parent.child(max(parent_node.child_segments, default=0) + 1), False


def _check_live_leaves(tree: IndexTree, authorized) -> frozenset[NumberPath]:
    paths = frozenset(authorized)
    for path in paths:
        if not tree.is_live_leaf(path):
            raise UnknownLeaf(f"{path} is not a live file leaf")
    return paths


def _minimal_cover(
    tree: IndexTree, authorized: frozenset[NumberPath], cut_updated: bool
) -> list[NumberPath]:
    """Smallest node set whose reachable live leaves are exactly
    ``authorized``.

    With ``cut_updated``, a re-keyed node is detached from its parent:
    its key is fresh, so a parent key cannot reach into its subtree and
    it roots a derivation component of its own. Within each component
    the chosen nodes are the maximal fully-authorized ones.
    """
    reach_count: dict[NumberPath, int] = {}
    reach_auth: dict[NumberPath, int] = {}

    def visit(path: NumberPath) -> None:
        node = tree.nodes[path]
        if node.deleted:
            reach_count[path] = 0
            reach_auth[path] = 0
            return
        if node.kind == FILE:
            reach_count[path] = 1
            reach_auth[path] = 1 if path in authorized else 0
            return
        count = auth = 0
        for child in tree.children(path):
            visit(child.number)
            if cut_updated and child.updated and not child.deleted:
                continue  # fresh key below: unreachable from this node
            count += reach_count[child.number]
            auth += reach_auth[child.number]
        reach_count[path] = count
        reach_auth[path] = auth

    visit(tree.root)

    def covered(path: NumberPath) -> bool:
        return reach_count[path] >= 1 and reach_count[path] == reach_auth[path]

    chosen = []
    for path, node in tree.nodes.items():
        # nodes under a deleted folder are never visited
        if path not in reach_count:
            continue
        if node.deleted or reach_auth[path] == 0 or not covered(path):
            continue
        is_component_root = path == tree.root or (cut_updated and node.updated)
        if is_component_root or not covered(path.parent):
            chosen.append(path)
    return sorted(chosen, key=path_sort_key)


def minimum_number_group(tree: IndexTree, authorized) -> list[NumberPath]:
    """Minimal set of numbers whose live-leaf closure is exactly the
    authorized set, ignoring re-keyed nodes."""
    paths = _check_live_leaves(tree, authorized)
    return _minimal_cover(tree, paths, cut_updated=False)


def ext_keyderivation(
    tree: IndexTree,
    update_tree: UpdateTree,
    root_key: SymKey,
    authorized,
) -> KeyGroup:
    """Minimum key group with re-keyed nodes treated as cut out of the
    derivation hierarchy.

    Non-re-keyed regions are covered by the minimal antichain over the
    cut tree; re-keyed nodes contribute their fresh keys. Returned keys
    come from :func:`key_for_path`.
    """
    paths = _check_live_leaves(tree, authorized)
    for leaf in paths:
        for cut in range(1, len(leaf.segments) + 1):
            prefix = NumberPath(leaf.segments[:cut])
            if tree.nodes[prefix].updated and prefix not in update_tree:
                raise MissingUpdateKey(f"{prefix} flagged re-keyed but has no fresh key")
    cover = _minimal_cover(tree, paths, cut_updated=True)
    pairs = tuple(
        (path, key_for_path(root_key, path, update_tree)) for path in cover
    )
    return KeyGroup(pairs)
