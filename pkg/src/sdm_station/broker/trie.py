"""Topic filter matching and the subscription trie used for routing."""

from __future__ import annotations


def filter_is_valid(topic_filter: str) -> bool:
    if not topic_filter or "\x00" in topic_filter:
        return False
    parts = topic_filter.split("/")
    for i, part in enumerate(parts):
        if "#" in part:
            # '#' must be alone in its segment and the final segment
            if part != "#" or i != len(parts) - 1:
                return False
        if "+" in part and part != "+":
            return False
    return True


def topic_matches(topic_filter: str, topic: str) -> bool:
    """MQTT v3.1.1 wildcard semantics: '+' one level, '#' the rest (incl. parent)."""
    fparts = topic_filter.split("/")
    tparts = topic.split("/")
    for i, fp in enumerate(fparts):
        if fp == "#":
            return True
        if i >= len(tparts):
            return False
        if fp != "+" and fp != tparts[i]:
            return False
    # "a/#" also matches "a": '#' covers the parent level
    if len(fparts) < len(tparts):
        return False
    if len(fparts) == len(tparts) + 1 and fparts[-1] == "#":
        return True
    return len(fparts) == len(tparts)


class _Node:
    __slots__ = ("children", "subscribers")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.subscribers: set = set()


class SubscriptionTrie:
    """Path-segment trie mapping topic filters to subscriber handles."""

    def __init__(self):
        self._root = _Node()

    def subscribe(self, topic_filter: str, subscriber) -> None:
        if not filter_is_valid(topic_filter):
            raise ValueError(f"invalid topic filter {topic_filter!r}")
        node = self._root
        for part in topic_filter.split("/"):
            node = node.children.setdefault(part, _Node())
        node.subscribers.add(subscriber)

    def unsubscribe(self, topic_filter: str, subscriber) -> bool:
        node = self._root
        path = []
        for part in topic_filter.split("/"):
            child = node.children.get(part)
            if child is None:
                return False
            path.append((node, part))
            node = child
        removed = subscriber in node.subscribers
        node.subscribers.discard(subscriber)
        # prune empty branches
        for parent, part in reversed(path):
            child = parent.children[part]
            if child.subscribers or child.children:
                break
            del parent.children[part]
        return removed

    def remove_subscriber(self, subscriber) -> None:
        def walk(node: _Node):
            node.subscribers.discard(subscriber)
            dead = []
            for part, child in node.children.items():
                walk(child)
                if not child.subscribers and not child.children:
                    dead.append(part)
            for part in dead:
                del node.children[part]
        walk(self._root)

    def match(self, topic: str) -> set:
        """All subscribers whose filter matches topic, deduplicated."""
        out: set = set()
        parts = topic.split("/")

        def walk(node: _Node, i: int):
            hash_child = node.children.get("#")
            if hash_child is not None:
                out.update(hash_child.subscribers)
            if i == len(parts):
                out.update(node.subscribers)
                return
            child = node.children.get(parts[i])
            if child is not None:
                walk(child, i + 1)
            plus = node.children.get("+")
            if plus is not None:
                walk(plus, i + 1)

        walk(self._root, 0)
        return out
