"""Deterministic text metrics and surface checks.

Everything here is pure and model-free: edit distances, compression distance,
n-gram overlap scores, script detection, and the punctuation/markup closure
scanner. These back both the baseline metric columns of the evaluation
harness and the deterministic fast path of the checklist judge.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass, field
from typing import Sequence

# --- tokenizer -------------------------------------------------------------

_HAN_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2EBEF),
)


def _is_han(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _HAN_RANGES)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str, *, keep_punct: bool = False, fold_case: bool = False) -> list[str]:
    """Split text into word tokens.

    Whitespace and Unicode punctuation/symbols separate tokens; Han
    codepoints are emitted as single-character tokens (character fallback for
    scripts without word spacing). With keep_punct, punctuation characters
    become single-character tokens instead of being dropped.
    """
    tokens: list[str] = []
    word: list[str] = []

    def flush() -> None:
        if word:
            tokens.append("".join(word))
            word.clear()

    for ch in text:
        if ch.isspace():
            flush()
        elif _is_han(ch):
            flush()
            tokens.append(ch)
        elif _is_punct(ch):
            flush()
            if keep_punct:
                tokens.append(ch)
        else:
            word.append(ch)
    flush()
    if fold_case:
        tokens = [tok.casefold() for tok in tokens]
    return tokens


# --- edit distances --------------------------------------------------------


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over Unicode scalar values (two-row DP)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def lz77_phrase_count(text: str) -> int:
    """Number of phrases in a greedy self-referential LZ77 factorization.

    Each phrase is the longest prefix of the remainder that already occurs
    earlier in the string (overlapping matches allowed, window spanning the
    whole prefix), or a single fresh character when nothing matches.
    """
    n = len(text)
    i = 0
    phrases = 0
    while i < n:
        # longest l such that text[i:i+l] occurs starting before i;
        # the predicate is monotone in l, so binary search works.
        lo, hi = 0, n - i
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if text.find(text[i : i + mid]) < i:
                lo = mid
            else:
                hi = mid - 1
        i += lo if lo > 0 else 1
        phrases += 1
    return phrases


def ncd(a: str, b: str) -> float:
    """Normalized compression distance via LZ77 phrase counts.

    Symmetrized by taking the cheaper concatenation order, clamped to
    [0, 1.2] to absorb compressor overhead on tiny inputs.
    """
    if not a and not b:
        return 0.0
    ca = lz77_phrase_count(a)
    cb = lz77_phrase_count(b)
    cab = min(lz77_phrase_count(a + b), lz77_phrase_count(b + a))
    lo, hi = min(ca, cb), max(ca, cb)
    if hi == 0:
        return 0.0
    value = (cab - lo) / hi
    return max(0.0, min(1.2, value))


def _lcs_table(a: Sequence[str], b: Sequence[str]) -> list[list[int]]:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        row, prev_row = table[i], table[i - 1]
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                row[j] = prev_row[j - 1] + 1
            else:
                row[j] = max(prev_row[j], row[j - 1])
    return table


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    return _lcs_table(a, b)[len(a)][len(b)]


def revision_distance(a: str, b: str) -> int:
    """Count contiguous edit blocks in a word-level LCS diff of a -> b.

    A deletion and an insertion at the same site merge into one REPLACE
    block. Punctuation tokens participate, so punctuation-only edits count.
    """
    toks_a = tokenize(a, keep_punct=True)
    toks_b = tokenize(b, keep_punct=True)
    table = _lcs_table(toks_a, toks_b)
    # walk back through the table collecting runs of non-matching tokens
    i, j = len(toks_a), len(toks_b)
    blocks = 0
    in_block = False
    while i > 0 or j > 0:
        if i > 0 and j > 0 and toks_a[i - 1] == toks_b[j - 1]:
            i -= 1
            j -= 1
            in_block = False
        else:
            if not in_block:
                blocks += 1
                in_block = True
            if j > 0 and (i == 0 or table[i][j - 1] >= table[i - 1][j]):
                j -= 1
            else:
                i -= 1
    return blocks


# --- n-gram overlap scores -------------------------------------------------


def rouge_l(candidate: str, reference: str) -> float:
    """LCS-based F1 (beta = 1) over word tokens."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def _ngram_counts(tokens: Sequence[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for k in range(len(tokens) - n + 1):
        gram = tuple(tokens[k : k + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def bleu(candidate: str, reference: str, *, smooth: bool = True) -> float:
    """Sentence BLEU: 1-4 gram clipped precisions, uniform weights.

    Brevity penalty exp(1 - r/c) for short candidates. With smoothing on
    (the default), zero match counts at n >= 2 get add-one smoothing
    ((m+1)/(t+1)); with it off any zero precision zeroes the score.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        total = sum(cand_counts.values())
        matched = sum(min(count, ref_counts.get(gram, 0)) for gram, count in cand_counts.items())
        if matched == 0:
            if n >= 2 and smooth:
                matched, total = matched + 1, total + 1
            else:
                return 0.0
        log_sum += 0.25 * math.log(matched / total)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(log_sum)


def meteor(candidate: str, reference: str) -> float:
    """Exact-unigram METEOR: harmonic mean weighted toward recall, chunk penalty.

    Fmean = 10PR / (R + 9P); penalty = 0.5 * (chunks / matches)^3. Candidate
    tokens match the first unused equal reference token, left to right.
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    used = [False] * len(ref)
    pairs: list[tuple[int, int]] = []
    for i, tok in enumerate(cand):
        for j, rtok in enumerate(ref):
            if not used[j] and tok == rtok:
                used[j] = True
                pairs.append((i, j))
                break
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(cand)
    recall = matches / len(ref)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    chunks = 1
    for (ci, ri), (cj, rj) in zip(pairs, pairs[1:]):
        if cj != ci + 1 or rj != ri + 1:
            chunks += 1
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1 - penalty)


# --- overlap ratios for the checklist fast path ----------------------------


def prefix_repetition_ratio(context: str, completion: str) -> float:
    """Share of the completion that re-types the tail of the context.

    Longest context suffix equal to a completion prefix, in word tokens,
    divided by the completion's token count. Completion must be non-empty.
    """
    ctx = tokenize(context)
    comp = tokenize(completion)
    if not comp:
        raise ValueError("completion must be non-empty")
    best = 0
    for k in range(1, min(len(ctx), len(comp)) + 1):
        if ctx[len(ctx) - k :] == comp[:k]:
            best = k
    return best / len(comp)


def early_overlap_ratio(completion: str, reference: str) -> float:
    """Share of the completion that opens identically to the reference.

    Longest common token prefix (case-folded, punctuation dropped) divided by
    the completion's token count.
    """
    comp = tokenize(completion, fold_case=True)
    ref = tokenize(reference, fold_case=True)
    if not comp:
        raise ValueError("completion must be non-empty")
    common = 0
    for ctok, rtok in zip(comp, ref):
        if ctok != rtok:
            break
        common += 1
    return common / len(comp)


# --- script detection ------------------------------------------------------

# Character pairs whose simplified and traditional forms differ; each side is
# unique to its variant and serves as an indicator when classifying Han text.
_SIMP_TRAD_PAIRS = (
    "爱愛", "贝貝", "笔筆", "边邊", "变變", "标標", "宾賓", "仓倉", "产產", "长長",
    "尝嘗", "车車", "称稱", "齿齒", "虫蟲", "丛叢", "达達", "带帶", "单單", "当當",
    "党黨", "东東", "动動", "断斷", "对對", "队隊", "尔爾", "发發", "丰豐", "风風",
    "冈岡", "广廣", "归歸", "龟龜", "国國", "过過", "华華", "画畫", "欢歡", "会會",
    "几幾", "机機", "鸡雞", "积積", "极極", "继繼", "价價", "坚堅", "监監", "见見",
    "荐薦", "将將", "节節", "进進", "举舉", "壳殼", "来來", "乐樂", "离離", "历歷",
    "丽麗", "两兩", "辽遼", "临臨", "龙龍", "楼樓", "卢盧", "录錄", "虑慮", "罗羅",
    "马馬", "买買", "卖賣", "么麼", "门門", "们們", "难難", "鸟鳥", "宁寧", "农農",
    "齐齊", "岂豈", "气氣", "迁遷", "乔喬", "亲親", "穷窮", "区區", "杀殺", "审審",
    "圣聖", "师師", "时時", "寿壽", "书書", "术術", "树樹", "帅帥", "双雙", "岁歲",
    "孙孫", "条條", "万萬", "为為", "韦韋", "乌烏", "无無", "献獻", "乡鄉", "写寫",
    "寻尋", "亚亞", "严嚴", "厌厭", "尧堯", "业業", "页頁", "义義", "艺藝", "阴陰",
    "隐隱", "犹猶", "邮郵", "鱼魚", "与與", "云雲", "郑鄭", "执執", "质質", "专專",
    "习習", "学學", "语語", "译譯", "读讀", "网網", "脑腦", "电電", "视視", "听聽",
    "谁誰", "请請", "让讓", "说說", "谢謝", "这這", "还還", "点點", "热熱", "图圖",
)

SIMPLIFIED_ONLY: frozenset[str] = frozenset(pair[0] for pair in _SIMP_TRAD_PAIRS)
TRADITIONAL_ONLY: frozenset[str] = frozenset(pair[1] for pair in _SIMP_TRAD_PAIRS)

_MAJORITY_THRESHOLD = 0.7


def detect_script(text: str) -> tuple[str, float]:
    """Classify the dominant script of a text.

    Returns (label, confidence) with label one of latin, han_simplified,
    han_traditional, mixed, other. A script class must hold at least 70% of
    the letter codepoints to win outright; otherwise the text is mixed.
    Whitespace-only input is (other, 0.0). Han text is split into simplified
    vs traditional by indicator characters unique to one variant; with no
    indicators (or a tie) simplified is reported, since shared forms render
    identically in either convention.
    """
    latin = han = other = 0
    simp_hits = trad_hits = 0
    for ch in text:
        if _is_han(ch):
            han += 1
            if ch in SIMPLIFIED_ONLY:
                simp_hits += 1
            elif ch in TRADITIONAL_ONLY:
                trad_hits += 1
        elif ch.isalpha():
            name = unicodedata.name(ch, "")
            if name.startswith("LATIN"):
                latin += 1
            else:
                other += 1
    total = latin + han + other
    if total == 0:
        return ("other", 0.0)
    shares = {"latin": latin / total, "han": han / total, "other": other / total}
    label, share = max(shares.items(), key=lambda item: item[1])
    if share < _MAJORITY_THRESHOLD:
        return ("mixed", share)
    if label == "han":
        label = "han_traditional" if trad_hits > simp_hits else "han_simplified"
    return (label, share)


# --- closure scanning ------------------------------------------------------

_PAIR_OPENERS = {
    "(": ")",
    "[": "]",
    "{": "}",
    "（": "）",
    "【": "】",
    "《": "》",
    "「": "」",
    "『": "』",
    "“": "”",
    "‘": "’",
}
_PAIR_CLOSERS = {closer: opener for opener, closer in _PAIR_OPENERS.items()}
_TOGGLE_QUOTES = {'"'}


@dataclass
class ClosureReport:
    """What is still open at the end of a context + completion scan.

    Positions index into the concatenated context + completion string, so a
    position below the context length means the user introduced the opener.
    """

    unclosed_pairs: list[tuple[str, int]] = field(default_factory=list)
    unclosed_fences: list[tuple[str, int]] = field(default_factory=list)

    @property
    def closed_ok(self) -> bool:
        return not self.unclosed_pairs and not self.unclosed_fences

    def unclosed_from_context(self, context_len: int) -> list[tuple[str, int]]:
        items = self.unclosed_pairs + self.unclosed_fences
        return sorted((item for item in items if item[1] < context_len), key=lambda it: it[1])


@dataclass
class ClosureScanner:
    """Closure state machine; feed() may be called repeatedly.

    Tracks paired punctuation (per-kind stacks, so interleaved prose pairs do
    not strangle each other), code fences, inline code, LaTeX math, and
    optionally ** emphasis. Multi-character markers (``` $$ **) are only
    decided once enough lookahead exists, so chunk boundaries never change
    the outcome: feeding piecewise and feeding the concatenation are
    equivalent. emphasis_enabled should only be set when the scanned context
    already contained a balanced ** pair, to avoid flagging multiplication
    asterisks.

    report() consumes the held-back tail, so it ends the stream.
    """

    emphasis_enabled: bool = False
    _buf: str = ""
    _pos: int = 0  # absolute stream index of _buf's first character
    _pairs: dict = field(default_factory=dict)  # opener char -> [positions]
    _code_fence: int | None = None
    _inline_code: int | None = None
    _display_math: int | None = None
    _inline_math: int | None = None
    _emphasis: int | None = None

    def feed(self, text: str) -> None:
        self._buf += text
        self._scan(at_end=False)

    def _tail_is_ambiguous(self, rest: str) -> bool:
        # could `rest` be the start of a longer marker continued by the next chunk?
        if self._code_fence is not None:
            return rest in ("`", "``")
        if self._inline_code is not None:
            return False
        if self._display_math is not None:
            return rest == "$"
        return rest in ("`", "``", "$") or (self.emphasis_enabled and rest == "*")

    def _scan(self, at_end: bool) -> None:
        text = self._buf
        i = 0
        n = len(text)
        while i < n:
            if not at_end and n - i <= 2 and self._tail_is_ambiguous(text[i:]):
                break
            pos = self._pos + i
            if self._code_fence is not None:
                if text.startswith("```", i):
                    self._code_fence = None
                    i += 3
                else:
                    i += 1
                continue
            if self._inline_code is not None:
                if text[i] == "`":
                    self._inline_code = None
                i += 1
                continue
            if text.startswith("```", i):
                self._code_fence = pos
                i += 3
                continue
            if text[i] == "`":
                self._inline_code = pos
                i += 1
                continue
            if self._display_math is not None:
                if text.startswith("$$", i):
                    self._display_math = None
                    i += 2
                else:
                    i += 1
                continue
            if self._inline_math is not None:
                if text[i] == "$":
                    self._inline_math = None
                    i += 1
                    continue
            elif text.startswith("$$", i):
                self._display_math = pos
                i += 2
                continue
            elif text[i] == "$":
                self._inline_math = pos
                i += 1
                continue
            if self._inline_math is None and self.emphasis_enabled and text.startswith("**", i):
                self._emphasis = pos if self._emphasis is None else None
                i += 2
                continue
            ch = text[i]
            if ch in _TOGGLE_QUOTES:
                stack = self._pairs.setdefault(ch, [])
                if stack:
                    stack.pop()
                else:
                    stack.append(pos)
            elif ch in _PAIR_OPENERS:
                self._pairs.setdefault(ch, []).append(pos)
            elif ch in _PAIR_CLOSERS:
                stack = self._pairs.get(_PAIR_CLOSERS[ch])
                if stack:
                    stack.pop()
            i += 1
        self._buf = text[i:]
        self._pos += i

    def report(self) -> ClosureReport:
        self._scan(at_end=True)
        pairs = sorted(
            ((ch, pos) for ch, stack in self._pairs.items() for pos in stack),
            key=lambda item: item[1],
        )
        fences = []
        for kind, pos in (
            ("code-fence", self._code_fence),
            ("inline-code", self._inline_code),
            ("latex-display", self._display_math),
            ("latex-inline", self._inline_math),
            ("markdown-emphasis", self._emphasis),
        ):
            if pos is not None:
                fences.append((kind, pos))
        fences.sort(key=lambda item: item[1])
        return ClosureReport(unclosed_pairs=pairs, unclosed_fences=fences)


def _count_emphasis_markers(text: str) -> int:
    count = 0
    i = 0
    while i < len(text) - 1:
        if text.startswith("**", i):
            count += 1
            i += 2
        else:
            i += 1
    return count


def check_closure(context: str, completion: str) -> ClosureReport:
    """Scan context then completion, reporting openers still unclosed at the end."""
    scanner = ClosureScanner(emphasis_enabled=_count_emphasis_markers(context) >= 2)
    scanner.feed(context)
    scanner.feed(completion)
    return scanner.report()
