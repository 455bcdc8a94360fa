from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple


@dataclass(frozen=True)
class ChunkPlan:
    """
    Overlapping windows over a document of L tokens.

    Consecutive starts differ by l_c - overlap_w; the last window may run past
    L and is right-padded to l_c.
    """

    doc_len: int
    context: int
    overlap_w: int
    starts: List[int] = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.starts)

    @property
    def stride(self) -> int:
        return self.context - self.overlap_w

    def bounds(self) -> List[Tuple[int, int]]:
        """(start, end) of the real tokens in each chunk; end - start <= context."""
        return [(s, min(s + self.context, self.doc_len)) for s in self.starts]

    def summary(self) -> dict:
        d = asdict(self)
        d["M"] = self.M
        d.pop("starts")
        return d


def plan_chunks(doc_len: int, context: int, overlap_w: Optional[int] = None) -> ChunkPlan:
    """
    M = (L - w) / (l_c - w) windows when that is integral, otherwise the
    ceiling (the fewest windows covering [0, L)); a single window when
    L <= l_c. overlap_w defaults to half the context.
    """
    if overlap_w is None:
        overlap_w = context // 2
    if doc_len < 1:
        raise ValueError(f"Document length must be >= 1, got {doc_len}")
    if context < 1:
        raise ValueError(f"Context must be >= 1, got {context}")
    if not 0 <= overlap_w < context:
        raise ValueError(f"overlap_w must satisfy 0 <= overlap_w < context ({context}), got {overlap_w}")

    if doc_len <= context:
        m = 1
    else:
        m = -(-(doc_len - overlap_w) // (context - overlap_w))
    stride = context - overlap_w
    return ChunkPlan(doc_len=doc_len, context=context, overlap_w=overlap_w, starts=[k * stride for k in range(m)])
