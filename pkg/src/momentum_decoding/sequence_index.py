"""Token sequence with a per-token occurrence index.

The index is the concrete form of the exploration graph: node membership and
circular-depth queries are answered from the sequence itself, so no explicit
edge structure is kept. Positions are 1-based internally.

Two depth routes exist.  ``circular_depth_scan`` walks the candidate's
occurrences and extends each match backwards; it is simple and is the
reference.  ``circular_depth`` uses an online suffix automaton and stays
cheap on long, repetitive sequences where the scan turns quadratic.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence


# tokens seen at most this often are answered by the backward scan
SCAN_LIMIT = 8


class OccurrenceIndex:
    """Append-only token sequence plus ``token -> positions`` lists."""

    def __init__(self, tokens: Iterable[int] = ()) -> None:
        self._tokens: list[int] = []
        self._positions: defaultdict[int, list[int]] = defaultdict(list)
        self._sam = SuffixAutomaton()
        self.extend(tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: object) -> bool:
        return self.contains(token)  # type: ignore[arg-type]

    def __repr__(self) -> str:
        return f"OccurrenceIndex(n={len(self._tokens)}, distinct={len(self._positions)})"

    @property
    def tokens(self) -> tuple[int, ...]:
        return tuple(self._tokens)

    def positions(self, token: int) -> list[int]:
        """1-based positions of ``token`` (a copy)."""
        return list(self._positions.get(token, ()))

    def append(self, token: int) -> None:
        token = int(token)
        self._tokens.append(token)
        self._positions[token].append(len(self._tokens))
        self._sam.extend(token)

    def extend(self, tokens: Iterable[int]) -> None:
        for t in tokens:
            self.append(t)

    def contains(self, token: int) -> bool:
        return token in self._positions

    def circular_depth(self, candidate: int) -> int:
        """Length of the longest ``suffix(x) + [candidate]`` already present in x.

        Matches may overlap the suffix itself.
        """
        occ = self._positions.get(candidate)
        if not occ:
            return 0
        if len(occ) <= SCAN_LIMIT:
            return self._scan(candidate, occ)
        return self._sam.extension_depth(candidate)

    def circular_depth_scan(self, candidate: int) -> int:
        """Reference route: backward match from every occurrence of the candidate."""
        occ = self._positions.get(candidate)
        if not occ:
            return 0
        return self._scan(candidate, occ)

    def circular_depth_automaton(self, candidate: int) -> int:
        """Automaton route regardless of how often the candidate occurs."""
        if candidate not in self._positions:
            return 0
        return self._sam.extension_depth(candidate)

    def _scan(self, candidate: int, occ: list[int]) -> int:
        x = self._tokens
        n = len(x)
        best = 0
        for p in reversed(occ):
            if p <= best:
                # the match ending at p is at most p long
                break
            # x[p-1] is the candidate (0-based); compare x[p-2-l] with x[n-1-l]
            limit = p - 1
            length = 0
            while length < limit and x[p - 2 - length] == x[n - 1 - length]:
                length += 1
            if length + 1 > best:
                best = length + 1
        return best

    def depths(self, candidates: Sequence[int]) -> list[int]:
        """Depths of several candidates.

        Rare tokens use the backward scan; frequent ones share one walk up the
        automaton's suffix links.
        """
        found: dict[int, int] = {}
        frequent = []
        for c in candidates:
            occ = self._positions.get(c)
            if not occ:
                found[c] = 0
            elif len(occ) <= SCAN_LIMIT:
                found[c] = self._scan(c, occ)
            else:
                frequent.append(c)
        if frequent:
            found.update(self._sam.extension_depths(frequent))
        return [found[c] for c in candidates]

    def edges(self) -> Counter[tuple[int, int]]:
        """Adjacent-pair multiset, for graph export only."""
        x = self._tokens
        return Counter(zip(x, x[1:]))

    def to_dot(self, labels: dict[int, str] | None = None, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        for token in sorted(self._positions):
            label = labels.get(token, str(token)) if labels else str(token)
            label = label.replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  {token} [label="{label}"];')
        for (a, b), count in sorted(self.edges().items()):
            lines.append(f'  {a} -> {b} [label="{count}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


class SuffixAutomaton:
    """Online suffix automaton over integer tokens.

    States hold the longest length, suffix link and outgoing transitions of
    each endpos class; ``last`` is the state of the whole sequence.
    """

    __slots__ = ("length", "link", "next", "last")

    def __init__(self) -> None:
        self.length = [0]
        self.link = [-1]
        self.next: list[dict[int, int]] = [{}]
        self.last = 0

    def extend(self, token: int) -> None:
        length, link, nxt = self.length, self.link, self.next
        cur = len(length)
        length.append(length[self.last] + 1)
        link.append(-1)
        nxt.append({})
        p = self.last
        while p != -1 and token not in nxt[p]:
            nxt[p][token] = cur
            p = link[p]
        if p == -1:
            link[cur] = 0
        else:
            q = nxt[p][token]
            if length[p] + 1 == length[q]:
                link[cur] = q
            else:
                clone = len(length)
                length.append(length[p] + 1)
                link.append(link[q])
                nxt.append(dict(nxt[q]))
                while p != -1 and nxt[p].get(token) == q:
                    nxt[p][token] = clone
                    p = link[p]
                link[q] = clone
                link[cur] = clone
        self.last = cur

    def extension_depth(self, token: int) -> int:
        """1 + longest suffix s of the sequence with s + [token] a substring; 0 if none."""
        p = self.last
        nxt, link = self.next, self.link
        while p != -1 and token not in nxt[p]:
            p = link[p]
        return 0 if p == -1 else self.length[p] + 1

    def extension_depths(self, tokens: Sequence[int]) -> dict[int, int]:
        """``extension_depth`` for many tokens sharing one walk up the links."""
        pending = set(tokens)
        out: dict[int, int] = {}
        p = self.last
        nxt, link, length = self.next, self.link, self.length
        while p != -1 and pending:
            trans = nxt[p]
            if trans:
                hit = pending.intersection(trans)
                if hit:
                    for t in hit:
                        out[t] = length[p] + 1
                    pending -= hit
            p = link[p]
        for t in pending:
            out[t] = 0
        return out


def circular_depth(tokens: Sequence[int], candidate: int) -> int:
    """Convenience wrapper building a throwaway index."""
    return OccurrenceIndex(tokens).circular_depth(candidate)
